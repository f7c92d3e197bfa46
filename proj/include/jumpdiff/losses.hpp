#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "jumpdiff/spectrogram.hpp"

namespace jumpdiff {

// Numerically stable softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

// Cross-entropy over insertion slots. Slot s corresponds to logit s-1.
inline double location_loss(std::span<const double> logits, std::size_t target_slot) {
    if (target_slot < 1 || target_slot > logits.size())
        throw std::invalid_argument("location_loss: target slot out of range");
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double v : logits) total += std::exp(v - peak);
    return std::log(total) + peak - logits[target_slot - 1];
}

// d loss / d logits = softmax(logits) - onehot(target).
inline std::vector<double> location_loss_grad(std::span<const double> logits,
                                              std::size_t target_slot) {
    if (target_slot < 1 || target_slot > logits.size())
        throw std::invalid_argument("location_loss_grad: target slot out of range");
    std::vector<double> g = softmax(logits);
    g[target_slot - 1] -= 1.0;
    return g;
}

// L1 reconstruction plus a squared pull toward the prior column:
// |pred - target|_1 + lambda |pred - prior|_2^2.
inline double content_loss(const FrameColumn& pred, const FrameColumn& target,
                           const FrameColumn& prior, double lambda_prior) {
    if (pred.size() != target.size() || pred.size() != prior.size())
        throw std::invalid_argument("content_loss: column length mismatch");
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t d = 0; d < pred.size(); ++d) {
        l1 += std::abs(pred[d] - target[d]);
        const double r = pred[d] - prior[d];
        l2 += r * r;
    }
    return l1 + lambda_prior * l2;
}

inline FrameColumn content_loss_grad(const FrameColumn& pred, const FrameColumn& target,
                                     const FrameColumn& prior, double lambda_prior) {
    if (pred.size() != target.size() || pred.size() != prior.size())
        throw std::invalid_argument("content_loss_grad: column length mismatch");
    FrameColumn g(pred.size());
    for (std::size_t d = 0; d < pred.size(); ++d) {
        const double diff = pred[d] - target[d];
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        g[d] = sign + 2.0 * lambda_prior * (pred[d] - prior[d]);
    }
    return g;
}

}  // namespace jumpdiff
