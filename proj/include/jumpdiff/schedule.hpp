#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "jumpdiff/spectrogram.hpp"

namespace jumpdiff {

// Structural corruption is inactive on [0, t_min].
inline constexpr double kDefaultTMin = 0.1;

// Linear noise rate beta(t) = beta0 + t (beta1 - beta0). The defaults are the
// standard variance-preserving recipe this family of models trains with.
struct NoiseSchedule {
    double beta0 = 0.05;
    double beta1 = 20.0;

    NoiseSchedule() = default;
    NoiseSchedule(double b0, double b1) : beta0(b0), beta1(b1) {
        if (!(b0 > 0.0) || !(b1 >= b0))
            throw std::invalid_argument("NoiseSchedule: requires 0 < beta0 <= beta1");
    }

    double beta(double t) const { return beta0 + t * (beta1 - beta0); }
};

// Closed form of int_0^t beta_s ds for the linear schedule.
inline double cum_beta(const NoiseSchedule& s, DiffusionTime t) {
    return s.beta0 * t.value + 0.5 * (s.beta1 - s.beta0) * t.value * t.value;
}

// Marginal kernel x_t = a x_0 + m mu + sigma z.
struct KernelCoeffs {
    double a = 1.0;      // retention e^{-1/2 int beta}
    double m = 0.0;      // prior weight 1 - a
    double sigma = 0.0;  // noise scale sqrt(1 - e^{-int beta})
};

inline KernelCoeffs vp_coefficients(const NoiseSchedule& s, DiffusionTime t) {
    const double cb = cum_beta(s, t);
    const double a = std::exp(-0.5 * cb);
    return {a, 1.0 - a, std::sqrt(1.0 - std::exp(-cb))};
}

// Target length at time t: full length on [0, t_min], then a linear ramp
// down to the protected skeleton at t = 1. Computed from t on every call so
// forward and reverse traversals agree by construction.
inline std::size_t schedule_length(std::size_t len0, std::size_t protected_size,
                                   DiffusionTime t, double t_min = kDefaultTMin) {
    if (protected_size > len0)
        throw std::invalid_argument("schedule_length: protected size " + std::to_string(protected_size) +
                                    " exceeds length " + std::to_string(len0));
    if (!(t_min > 0.0 && t_min < 1.0))
        throw std::invalid_argument("schedule_length: t_min must lie in (0,1)");
    if (t.value <= t_min) return len0;
    double factor = 1.0 - (t.value - t_min) / (1.0 - t_min);
    factor = std::min(1.0, std::max(0.0, factor));
    // the ramp factor accumulates two rounding steps; the nudge keeps exact
    // rational grid points (e.g. 0.45/0.9) from flooring one frame short
    const double extra = std::floor(factor * static_cast<double>(len0 - protected_size) + 1e-9);
    return protected_size + static_cast<std::size_t>(extra);
}

}  // namespace jumpdiff
