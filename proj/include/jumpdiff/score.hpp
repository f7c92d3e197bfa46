#pragma once

#include <stdexcept>

#include "jumpdiff/schedule.hpp"
#include "jumpdiff/spectrogram.hpp"

namespace jumpdiff {

// Estimate of grad_x log p_t(x) for the prior-anchored marginal.
class ScoreFunction {
public:
    virtual ~ScoreFunction() = default;
    virtual Spectrogram score(const Spectrogram& x, const Spectrogram& mu, DiffusionTime t) = 0;
};

// Exact score when clean columns are N(mu_col, v I): the time-t marginal is
// N(mu, a_t^2 v + sigma_t^2), so the score is -(x - mu) / (a_t^2 v + sigma_t^2).
// v = 0 (point-mass data) is accepted; the marginal variance must stay
// positive at evaluation time.
class AnalyticGaussianScore : public ScoreFunction {
public:
    AnalyticGaussianScore(const NoiseSchedule& sched, double data_noise_variance)
        : sched_(sched), variance_(data_noise_variance) {
        if (variance_ < 0.0)
            throw std::invalid_argument("AnalyticGaussianScore: data noise variance must be >= 0");
    }

    Spectrogram score(const Spectrogram& x, const Spectrogram& mu, DiffusionTime t) override {
        if (mu.dim() != x.dim() || mu.length() != x.length())
            throw std::invalid_argument("AnalyticGaussianScore: shape mismatch");
        const KernelCoeffs c = vp_coefficients(sched_, t);
        const double marginal_var = c.a * c.a * variance_ + c.sigma * c.sigma;
        if (!(marginal_var > 0.0))
            throw std::domain_error("AnalyticGaussianScore: zero marginal variance (t = 0 with v = 0)");
        Spectrogram out(x.dim(), x.length());
        auto o = out.raw();
        auto xs = x.raw();
        auto ms = mu.raw();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = -(xs[i] - ms[i]) / marginal_var;
        return out;
    }

    double marginal_variance(DiffusionTime t) const {
        const KernelCoeffs c = vp_coefficients(sched_, t);
        return c.a * c.a * variance_ + c.sigma * c.sigma;
    }

private:
    NoiseSchedule sched_;
    double variance_;
};

}  // namespace jumpdiff
