#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "jumpdiff/corpus.hpp"
#include "jumpdiff/errors.hpp"
#include "jumpdiff/forward.hpp"
#include "jumpdiff/losses.hpp"
#include "jumpdiff/nets.hpp"

namespace jumpdiff {

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 8;
    std::size_t epochs = 50;
    double lambda_prior = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double t_min = kDefaultTMin;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be > 0");
        if (batch_size == 0) throw std::invalid_argument("train.batch_size must be positive");
        if (lambda_prior < 0.0) throw std::invalid_argument("train.lambda_prior must be >= 0");
    }
};

class AdamOptimizer {
public:
    AdamOptimizer(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw std::invalid_argument("AdamOptimizer: size mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
            params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    std::vector<double> m_, v_;
};

struct EpochReport {
    double location_loss = 0.0;
    double content_loss = 0.0;
};

struct TrainingReport {
    std::vector<EpochReport> epochs;
};

// One training example per the single-step jump transition: the state with
// the target column deleted scores slots, and the state with the target
// column zeroed (length unchanged) predicts its clean content.
struct TrainSample {
    Spectrogram x_minus;   // location input
    Spectrogram mu_minus;
    Spectrogram x_masked;  // content input, column `slot` zeroed
    Spectrogram mu_sub;
    std::size_t slot = 0;
    FrameColumn clean_column;
    double t = 0.0;
};

// Draws a fresh time and corruption; re-draws t when the corrupted state has
// no deletable column (short utterances near t = 1).
inline TrainSample draw_train_sample(const Utterance& u, const NoiseSchedule& sched,
                                     double t_min, RandomStream& rng) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        const DiffusionTime t{rng.real01()};
        ForwardSample fs = [&]() -> ForwardSample {
            try {
                return forward_sample(u.x0, u.mu, u.alignment, t, sched, rng, t_min);
            } catch (const NoDeletableFrameError&) {
                return ForwardSample{};
            }
        }();
        if (fs.x_t.empty()) continue;
        const std::size_t k = fs.target.slot;
        Spectrogram x_masked = fs.x_t;
        FrameColumn zeros(x_masked.dim(), 0.0);
        x_masked.set_column(k, zeros);
        return {std::move(fs.target.x_minus_k), delete_column(fs.mu_sub, k),
                std::move(x_masked),            fs.mu_sub,
                k,                              std::move(fs.target.clean_column),
                t.value};
    }
    throw std::runtime_error("draw_train_sample: no deletable state found in 200 draws");
}

// Minimizes mean location cross-entropy plus mean content loss over fresh
// per-epoch corruptions. The two models keep separate optimizers.
inline TrainingReport train(const std::vector<Utterance>& corpus, ConvLocationNet& loc,
                            ConvContentNet& cont, const NoiseSchedule& sched,
                            const TrainConfig& cfg) {
    cfg.validate();
    if (corpus.empty()) throw std::invalid_argument("train: corpus must be nonempty");
    TrainingReport report;
    if (cfg.epochs == 0) return report;

    RandomStream rng = RandomStream(cfg.seed).fork("train");
    AdamOptimizer opt_loc(loc.parameters().size(), cfg.learning_rate, cfg.adam_beta1,
                          cfg.adam_beta2, cfg.adam_eps);
    AdamOptimizer opt_cont(cont.parameters().size(), cfg.learning_rate, cfg.adam_beta1,
                           cfg.adam_beta2, cfg.adam_eps);

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loc_sum = 0.0, cont_sum = 0.0;
        std::size_t in_batch = 0, seen = 0;
        loc.zero_gradients();
        cont.zero_gradients();
        for (std::size_t idx : order) {
            TrainSample s = draw_train_sample(corpus[idx], sched, cfg.t_min, rng);
            const DiffusionTime t{s.t};

            auto logits = loc.forward(s.x_minus, s.mu_minus, t);
            loc_sum += location_loss(logits, s.slot);
            auto dlogits = location_loss_grad(logits, s.slot);
            loc.backward(dlogits);

            FrameColumn prior = s.mu_sub.column_copy(s.slot);
            FrameColumn pred = cont.forward(s.x_masked, s.mu_sub, t, s.slot);
            cont_sum += content_loss(pred, s.clean_column, prior, cfg.lambda_prior);
            auto dpred = content_loss_grad(pred, s.clean_column, prior, cfg.lambda_prior);
            cont.backward(dpred);

            ++in_batch;
            ++seen;
            if (in_batch == cfg.batch_size || seen == order.size()) {
                const double scale = 1.0 / static_cast<double>(in_batch);
                for (double& g : loc.gradients()) g *= scale;
                for (double& g : cont.gradients()) g *= scale;
                opt_loc.step(loc.parameters(), loc.gradients());
                opt_cont.step(cont.parameters(), cont.gradients());
                loc.zero_gradients();
                cont.zero_gradients();
                in_batch = 0;
            }
        }
        EpochReport er{loc_sum / static_cast<double>(corpus.size()),
                       cont_sum / static_cast<double>(corpus.size())};
        if (!std::isfinite(er.location_loss) || !std::isfinite(er.content_loss))
            throw TrainingError(epoch, "non-finite loss");
        report.epochs.push_back(er);
    }
    return report;
}

// Compares accumulated analytic gradients against central finite differences
// of the loss over the same batch. `loss_fn` must be a pure evaluation;
// `grad_fn` must zero and then accumulate gradients.
inline double gradient_check(Trainable& model, const std::function<double()>& loss_fn,
                             const std::function<void()>& grad_fn, double step = 1e-4) {
    grad_fn();
    std::vector<double> analytic(model.gradients().begin(), model.gradients().end());
    auto params = model.parameters();
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + step;
        const double up = loss_fn();
        params[i] = keep - step;
        const double down = loss_fn();
        params[i] = keep;
        const double fd = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-3});
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
    return worst;
}

// Per-phone mean duration, the exact minimizer of squared error; predictions
// are clamped at one frame. Collapses multi-modal durations to their mean.
class RegressionDurationBaseline {
public:
    explicit RegressionDurationBaseline(const std::vector<Utterance>& corpus) {
        if (corpus.empty())
            throw std::invalid_argument("RegressionDurationBaseline: corpus must be nonempty");
        std::map<int, std::pair<double, std::size_t>> acc;
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& u : corpus)
            for (std::size_t i = 0; i < u.phones.size(); ++i) {
                auto& slot = acc[u.phones[i]];
                slot.first += static_cast<double>(u.durations[i]);
                slot.second += 1;
                total += static_cast<double>(u.durations[i]);
                ++count;
            }
        for (const auto& [id, s] : acc)
            means_[id] = s.first / static_cast<double>(s.second);
        global_mean_ = total / static_cast<double>(count);
    }

    double predict(int phone_id) const {
        auto it = means_.find(phone_id);
        const double m = it == means_.end() ? global_mean_ : it->second;
        return std::max(1.0, m);
    }

private:
    std::map<int, double> means_;
    double global_mean_ = 1.0;
};

}  // namespace jumpdiff
