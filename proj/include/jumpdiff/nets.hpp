#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jumpdiff/models.hpp"
#include "jumpdiff/rng.hpp"
#include "jumpdiff/spectrogram.hpp"

namespace jumpdiff {

// Anything with a flat parameter vector and accumulated gradients.
class Trainable {
public:
    virtual ~Trainable() = default;
    virtual std::span<double> parameters() = 0;
    virtual std::span<const double> parameters() const = 0;
    virtual std::span<double> gradients() = 0;
    virtual void zero_gradients() = 0;
};

struct ConvNetConfig {
    std::size_t dim = 16;     // frequency bins per column
    std::size_t hidden = 32;  // channels per conv layer
    std::size_t layers = 3;   // conv layers (kernel `kernel`, tanh)
    std::size_t kernel = 5;   // odd window over frames

    void validate() const {
        if (dim == 0 || hidden == 0 || layers == 0)
            throw std::invalid_argument("ConvNetConfig: dim, hidden and layers must be positive");
        if (kernel % 2 == 0)
            throw std::invalid_argument("ConvNetConfig: kernel must be odd");
    }
    bool operator==(const ConvNetConfig&) const = default;
};

namespace detail {

struct ConvLayerShape {
    std::size_t in_ch, out_ch, kernel;
    std::size_t w_off, b_off;
    std::size_t weight_count() const { return out_ch * in_ch * kernel; }
};

}  // namespace detail

// Shared machinery: a stack of 1-D convolutions with tanh over the frame
// axis, reading [x column; prior column; t] per frame, topped by a linear
// head. Forward caches activations; backward accumulates gradients into a
// flat buffer so optimizers and finite-difference checks see one vector.
class ConvFrameNet : public Trainable {
public:
    ConvFrameNet(const ConvNetConfig& cfg, std::size_t head_rows, RandomStream init_rng)
        : cfg_(cfg), head_rows_(head_rows) {
        cfg_.validate();
        std::size_t offset = 0;
        std::size_t in_ch = input_channels();
        for (std::size_t l = 0; l < cfg_.layers; ++l) {
            detail::ConvLayerShape s{in_ch, cfg_.hidden, cfg_.kernel, offset, 0};
            offset += s.weight_count();
            s.b_off = offset;
            offset += s.out_ch;
            layers_.push_back(s);
            in_ch = cfg_.hidden;
        }
        head_cols_ = cfg_.hidden + input_channels();  // skip connection to the head
        head_w_off_ = offset;
        offset += head_rows_ * head_cols_;
        head_b_off_ = offset;
        offset += head_rows_;
        params_.resize(offset);
        grads_.assign(offset, 0.0);
        init_parameters(init_rng);
    }

    const ConvNetConfig& config() const { return cfg_; }
    std::size_t head_rows() const { return head_rows_; }
    // per frame: x column, prior column, t, left/right run length of the
    // prior run the frame sits in, and a bucketed one-hot of the total run
    // length. Runs of identical prior columns carry the phone span structure;
    // convolutions cannot count them, and the response to run length is not
    // monotone, so the head gets it as a lookup.
    static constexpr std::size_t kRunBuckets = 18;
    std::size_t input_channels() const { return 2 * cfg_.dim + 3 + kRunBuckets; }

    std::span<double> parameters() override { return params_; }
    std::span<const double> parameters() const override { return params_; }
    std::span<double> gradients() override { return grads_; }
    void zero_gradients() override { std::fill(grads_.begin(), grads_.end(), 0.0); }

protected:
    // Per-frame hidden features h[j] after the conv stack; caches kept for
    // the matching backward call.
    const std::vector<double>& run_stack(const Spectrogram& x, const Spectrogram& mu,
                                         DiffusionTime t) {
        if (x.dim() != cfg_.dim || mu.dim() != cfg_.dim || mu.length() != x.length())
            throw std::invalid_argument("ConvFrameNet: input shape mismatch");
        if (x.length() == 0) throw std::invalid_argument("ConvFrameNet: empty input");
        const std::size_t len = x.length();
        acts_.assign(cfg_.layers + 1, {});

        // prior-run lengths; prototype columns repeat bit-exactly inside a span
        std::vector<double> left_run(len, 0.0), right_run(len, 0.0);
        auto same_prior = [&](std::size_t a, std::size_t b) {
            auto ca = mu.column(a);
            auto cb = mu.column(b);
            return std::equal(ca.begin(), ca.end(), cb.begin());
        };
        for (std::size_t j = 1; j < len; ++j)
            left_run[j] = same_prior(j, j - 1) ? left_run[j - 1] + 1.0 : 0.0;
        for (std::size_t j = len - 1; j-- > 0;)
            right_run[j] = same_prior(j, j + 1) ? right_run[j + 1] + 1.0 : 0.0;

        auto& input = acts_[0];
        input.resize(len * input_channels());
        for (std::size_t j = 0; j < len; ++j) {
            double* f = input.data() + j * input_channels();
            auto xc = x.column(j);
            auto mc = mu.column(j);
            for (std::size_t d = 0; d < cfg_.dim; ++d) f[d] = xc[d];
            for (std::size_t d = 0; d < cfg_.dim; ++d) f[cfg_.dim + d] = mc[d];
            f[2 * cfg_.dim] = t.value;
            f[2 * cfg_.dim + 1] = std::min(left_run[j], 20.0) / 20.0;
            f[2 * cfg_.dim + 2] = std::min(right_run[j], 20.0) / 20.0;
            const std::size_t total_run =
                static_cast<std::size_t>(left_run[j] + right_run[j]) + 1;
            f[2 * cfg_.dim + 3 + std::min(total_run, kRunBuckets) - 1] = 1.0;
        }
        for (std::size_t l = 0; l < cfg_.layers; ++l) {
            conv_forward(layers_[l], acts_[l], acts_[l + 1], len);
            for (double& v : acts_[l + 1]) v = std::tanh(v);
        }
        cached_len_ = len;
        return acts_.back();
    }

    // Backpropagates d loss / d hidden through the stack.
    void stack_backward(std::vector<double> dh) {
        for (std::size_t li = cfg_.layers; li-- > 0;) {
            const auto& s = layers_[li];
            const auto& y = acts_[li + 1];
            for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= 1.0 - y[i] * y[i];
            dh = conv_backward(s, acts_[li], dh, cached_len_, li > 0);
        }
    }

    // Head feature vector of frame j: hidden activations then raw inputs.
    double head_feature(std::size_t j, std::size_t c) const {
        return c < cfg_.hidden ? acts_.back()[j * cfg_.hidden + c]
                               : acts_.front()[j * input_channels() + (c - cfg_.hidden)];
    }
    std::size_t head_cols() const { return head_cols_; }
    double head_weight(std::size_t row, std::size_t col) const {
        return params_[head_w_off_ + row * head_cols_ + col];
    }
    double head_bias(std::size_t row) const { return params_[head_b_off_ + row]; }
    void add_head_weight_grad(std::size_t row, std::size_t col, double g) {
        grads_[head_w_off_ + row * head_cols_ + col] += g;
    }
    void add_head_bias_grad(std::size_t row, double g) { grads_[head_b_off_ + row] += g; }

    std::size_t cached_len_ = 0;
    std::vector<std::vector<double>> acts_;  // acts_[0] = input features

private:
    void init_parameters(RandomStream& rng) {
        for (const auto& s : layers_) {
            const double a = std::sqrt(6.0 / static_cast<double>(s.in_ch * s.kernel + s.out_ch * s.kernel));
            for (std::size_t i = 0; i < s.weight_count(); ++i)
                params_[s.w_off + i] = a * (2.0 * rng.real01() - 1.0);
        }
        const double a = std::sqrt(6.0 / static_cast<double>(head_cols_ + head_rows_));
        for (std::size_t i = 0; i < head_rows_ * head_cols_; ++i)
            params_[head_w_off_ + i] = a * (2.0 * rng.real01() - 1.0);
    }

    void conv_forward(const detail::ConvLayerShape& s, const std::vector<double>& in,
                      std::vector<double>& out, std::size_t len) const {
        const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(s.kernel / 2);
        out.assign(len * s.out_ch, 0.0);
        for (std::size_t j = 0; j < len; ++j) {
            double* oj = out.data() + j * s.out_ch;
            for (std::size_t o = 0; o < s.out_ch; ++o) oj[o] = params_[s.b_off + o];
            for (std::size_t u = 0; u < s.kernel; ++u) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(j + u) - radius;
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                const double* ic = in.data() + static_cast<std::size_t>(src) * s.in_ch;
                const double* w = params_.data() + s.w_off + u * s.in_ch;
                for (std::size_t o = 0; o < s.out_ch; ++o) {
                    const double* wo = w + o * s.in_ch * s.kernel;
                    double acc = 0.0;
                    for (std::size_t c = 0; c < s.in_ch; ++c) acc += wo[c] * ic[c];
                    oj[o] += acc;
                }
            }
        }
    }

    // Accumulates dW/db and returns d loss / d input (skipped for layer 0).
    std::vector<double> conv_backward(const detail::ConvLayerShape& s, const std::vector<double>& in,
                                      const std::vector<double>& dz, std::size_t len,
                                      bool need_din) {
        const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(s.kernel / 2);
        std::vector<double> din;
        if (need_din) din.assign(len * s.in_ch, 0.0);
        for (std::size_t j = 0; j < len; ++j) {
            const double* dzj = dz.data() + j * s.out_ch;
            for (std::size_t o = 0; o < s.out_ch; ++o) grads_[s.b_off + o] += dzj[o];
            for (std::size_t u = 0; u < s.kernel; ++u) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(j + u) - radius;
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                const double* ic = in.data() + static_cast<std::size_t>(src) * s.in_ch;
                double* dic = need_din ? din.data() + static_cast<std::size_t>(src) * s.in_ch : nullptr;
                for (std::size_t o = 0; o < s.out_ch; ++o) {
                    const double g = dzj[o];
                    if (g == 0.0) continue;
                    const std::size_t wbase = s.w_off + o * s.in_ch * s.kernel + u * s.in_ch;
                    for (std::size_t c = 0; c < s.in_ch; ++c) {
                        grads_[wbase + c] += g * ic[c];
                        if (dic) dic[c] += g * params_[wbase + c];
                    }
                }
            }
        }
        return din;
    }

    ConvNetConfig cfg_;
    std::size_t head_rows_;
    std::size_t head_cols_ = 0;
    std::vector<detail::ConvLayerShape> layers_;
    std::size_t head_w_off_ = 0, head_b_off_ = 0;
    std::vector<double> params_, grads_;
};

// Trainable slot scorer: scalar logit per frame.
class ConvLocationNet : public ConvFrameNet, public LocationModel {
public:
    ConvLocationNet(const ConvNetConfig& cfg, RandomStream init_rng)
        : ConvFrameNet(cfg, 1, std::move(init_rng)) {}

    std::vector<double> forward(const Spectrogram& x, const Spectrogram& mu, DiffusionTime t) {
        run_stack(x, mu, t);
        std::vector<double> logits(cached_len_);
        for (std::size_t j = 0; j < cached_len_; ++j) {
            double acc = head_bias(0);
            for (std::size_t c = 0; c < head_cols(); ++c)
                acc += head_weight(0, c) * head_feature(j, c);
            logits[j] = acc;
        }
        return logits;
    }

    // Accumulates gradients for the most recent forward call.
    void backward(std::span<const double> dlogits) {
        if (dlogits.size() != cached_len_)
            throw std::invalid_argument("ConvLocationNet::backward: gradient size mismatch");
        const std::size_t hid = config().hidden;
        std::vector<double> dh(cached_len_ * hid, 0.0);
        for (std::size_t j = 0; j < cached_len_; ++j) {
            const double g = dlogits[j];
            if (g == 0.0) continue;
            add_head_bias_grad(0, g);
            for (std::size_t c = 0; c < head_cols(); ++c) {
                add_head_weight_grad(0, c, g * head_feature(j, c));
                if (c < hid) dh[j * hid + c] += g * head_weight(0, c);
            }
        }
        stack_backward(std::move(dh));
    }

    std::vector<double> score_slots(const Spectrogram& x, const Spectrogram& mu,
                                    DiffusionTime t) override {
        return forward(x, mu, t);
    }
};

// Trainable content predictor: a residual over the prior column at the
// masked slot.
class ConvContentNet : public ConvFrameNet, public ContentModel {
public:
    ConvContentNet(const ConvNetConfig& cfg, RandomStream init_rng)
        : ConvFrameNet(cfg, cfg.dim, std::move(init_rng)) {}

    FrameColumn forward(const Spectrogram& x_masked, const Spectrogram& mu, DiffusionTime t,
                        std::size_t slot) {
        if (slot >= x_masked.length())
            throw std::out_of_range("ConvContentNet: slot index out of range");
        run_stack(x_masked, mu, t);
        last_slot_ = slot;
        FrameColumn out(config().dim);
        auto prior = mu.column(slot);
        for (std::size_t d = 0; d < config().dim; ++d) {
            double acc = head_bias(d);
            for (std::size_t c = 0; c < head_cols(); ++c)
                acc += head_weight(d, c) * head_feature(slot, c);
            out[d] = prior[d] + acc;
        }
        return out;
    }

    // d loss / d prediction for the most recent forward call. The prior
    // anchor is additive, so the residual gradient equals it.
    void backward(std::span<const double> dpred) {
        if (dpred.size() != config().dim)
            throw std::invalid_argument("ConvContentNet::backward: gradient size mismatch");
        const std::size_t hid = config().hidden;
        std::vector<double> dh(cached_len_ * hid, 0.0);
        for (std::size_t d = 0; d < config().dim; ++d) {
            const double g = dpred[d];
            if (g == 0.0) continue;
            add_head_bias_grad(d, g);
            for (std::size_t c = 0; c < head_cols(); ++c) {
                add_head_weight_grad(d, c, g * head_feature(last_slot_, c));
                if (c < hid) dh[last_slot_ * hid + c] += g * head_weight(d, c);
            }
        }
        stack_backward(std::move(dh));
    }

    FrameColumn predict(const Spectrogram& x_masked, const Spectrogram& mu, DiffusionTime t,
                        std::size_t slot) override {
        return forward(x_masked, mu, t, slot);
    }

private:
    std::size_t last_slot_ = 0;
};

}  // namespace jumpdiff
