#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "jumpdiff/forward.hpp"
#include "jumpdiff/rng.hpp"
#include "jumpdiff/schedule.hpp"
#include "jumpdiff/spectrogram.hpp"

namespace jumpdiff {

// Monotone alignment between two spectrograms. Path steps are (1,0), (0,1)
// and (1,1) in (i, j) = (x frame, y frame) coordinates.
struct DtwResult {
    std::vector<std::pair<std::size_t, std::size_t>> path;  // (0,0) .. (Lx-1, Ly-1)
    double cost = 0.0;
};

namespace detail {

inline double column_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

}  // namespace detail

// Classic dynamic-programming alignment with per-frame Euclidean distance.
// Backtracking tie-break prefers diagonal, then vertical (j-only), then
// horizontal, which makes the path deterministic. When cost_matrix is given
// it receives the accumulated-cost grid (row i = x frame, column j = y frame).
inline DtwResult dtw_path(const Spectrogram& x, const Spectrogram& y,
                          Spectrogram* cost_matrix = nullptr) {
    if (x.empty() || y.empty()) throw std::invalid_argument("dtw_path: inputs must be nonempty");
    if (x.dim() != y.dim()) throw std::invalid_argument("dtw_path: dimension mismatch");
    const std::size_t nx = x.length(), ny = y.length();
    std::vector<double> acc(nx * ny);
    auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * ny + j]; };

    at(0, 0) = detail::column_distance(x.column(0), y.column(0));
    for (std::size_t i = 1; i < nx; ++i)
        at(i, 0) = at(i - 1, 0) + detail::column_distance(x.column(i), y.column(0));
    for (std::size_t j = 1; j < ny; ++j)
        at(0, j) = at(0, j - 1) + detail::column_distance(x.column(0), y.column(j));
    for (std::size_t i = 1; i < nx; ++i)
        for (std::size_t j = 1; j < ny; ++j)
            at(i, j) = detail::column_distance(x.column(i), y.column(j)) +
                       std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});

    if (cost_matrix) {
        Spectrogram grid(nx, ny);
        for (std::size_t i = 0; i < nx; ++i)
            for (std::size_t j = 0; j < ny; ++j) grid(i, j) = at(i, j);
        *cost_matrix = std::move(grid);
    }

    DtwResult result;
    result.cost = at(nx - 1, ny - 1);
    std::size_t i = nx - 1, j = ny - 1;
    result.path.emplace_back(i, j);
    while (i > 0 || j > 0) {
        if (i == 0) {
            --j;
        } else if (j == 0) {
            --i;
        } else {
            const double diag = at(i - 1, j - 1), vert = at(i, j - 1), horz = at(i - 1, j);
            if (diag <= vert && diag <= horz) {
                --i;
                --j;
            } else if (vert <= horz) {
                --j;
            } else {
                --i;
            }
        }
        result.path.emplace_back(i, j);
    }
    std::reverse(result.path.begin(), result.path.end());
    return result;
}

// R^2 of the least-squares fit of y-index on x-index over the path. A
// perfectly diagonal path gives exactly 1; a path that never advances in x is
// defined as 0.
inline double path_linearity(const DtwResult& r) {
    if (r.path.size() < 2) throw std::invalid_argument("path_linearity: path too short");
    const double n = static_cast<double>(r.path.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [i, j] : r.path) {
        mx += static_cast<double>(i);
        my += static_cast<double>(j);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& [i, j] : r.path) {
        const double dx = static_cast<double>(i) - mx;
        const double dy = static_cast<double>(j) - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0) return 0.0;
    if (syy == 0.0) return 1.0;
    return (sxy * sxy) / (sxx * syy);
}

// Longest run of consecutive (0,1) steps; long vertical runs are the
// staircase signature of localized insertions.
inline std::size_t max_vertical_run(const DtwResult& r) {
    std::size_t best = 0, run = 0;
    for (std::size_t k = 1; k < r.path.size(); ++k) {
        const bool vertical =
            r.path[k].first == r.path[k - 1].first && r.path[k].second == r.path[k - 1].second + 1;
        run = vertical ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

struct SilenceReport {
    double ratio = 0.0;
    std::size_t silent_frames = 0;
    std::size_t total_frames = 0;
};

// Fraction of frames whose mean absolute amplitude falls below the
// threshold.
inline SilenceReport silence_ratio(const Spectrogram& x, double threshold) {
    if (x.empty()) throw std::invalid_argument("silence_ratio: empty spectrogram");
    SilenceReport rep;
    rep.total_frames = x.length();
    for (std::size_t l = 0; l < x.length(); ++l)
        if (frame_energy(x.column(l)) < threshold) ++rep.silent_frames;
    rep.ratio = static_cast<double>(rep.silent_frames) / static_cast<double>(rep.total_frames);
    return rep;
}

// Ratio arithmetic shared with duration-based accounting (counts may be
// seconds); returns percent rounded to two decimals.
inline double silence_percent(double silent, double total) {
    if (!(total > 0.0)) throw std::invalid_argument("silence_percent: total must be positive");
    return std::round(silent / total * 10000.0) / 100.0;
}

// Energy value below which the given fraction of corpus frames falls;
// the default silence-threshold rule (10th percentile of the reference).
inline double energy_percentile(const std::vector<const Spectrogram*>& corpus, double quantile) {
    std::vector<double> energies;
    for (const Spectrogram* s : corpus)
        for (std::size_t l = 0; l < s->length(); ++l) energies.push_back(frame_energy(s->column(l)));
    if (energies.empty()) throw std::invalid_argument("energy_percentile: no frames");
    std::sort(energies.begin(), energies.end());
    const double pos = quantile * static_cast<double>(energies.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, energies.size() - 1);
    const double frac = pos - std::floor(pos);
    return energies[lo] * (1.0 - frac) + energies[hi] * frac;
}

// W1 distance between two empirical distributions via the quantile coupling:
// integral over q in [0,1] of |Qa(q) - Qb(q)|.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double acc = 0.0, q = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double qa = static_cast<double>(i + 1) / na;
        const double qb = static_cast<double>(j + 1) / nb;
        const double next = std::min(qa, qb);
        acc += (next - q) * std::abs(a[i] - b[j]);
        q = next;
        if (qa <= next) ++i;
        if (qb <= next) ++j;
    }
    return acc;
}

struct MomentReport {
    double max_mean_dev_se = 0.0;  // worst per-entry |sample mean - expected| in SE units
    double var_ratio_min = 1.0;    // per-entry sample variance / expected variance
    double var_ratio_max = 1.0;

    bool pass(double mean_se_limit = 3.0, double var_lo = 0.98, double var_hi = 1.02) const {
        return max_mean_dev_se <= mean_se_limit && var_ratio_min >= var_lo &&
               var_ratio_max <= var_hi;
    }
};

// Monte-Carlo check of the noising marginal against its closed form. The
// draw function defaults to the forward corruption; injecting a different
// one turns this into a falsifiability probe.
inline MomentReport marginal_check(const Spectrogram& x, const Spectrogram& mu, DiffusionTime t,
                                   const NoiseSchedule& sched, std::size_t n_draws,
                                   RandomStream& rng,
                                   const std::function<Spectrogram()>& draw = {}) {
    if (n_draws < 2) throw std::invalid_argument("marginal_check: need at least 2 draws");
    const KernelCoeffs c = vp_coefficients(sched, t);
    const std::size_t cells = x.raw().size();
    std::vector<double> sum(cells, 0.0), sumsq(cells, 0.0);
    for (std::size_t d = 0; d < n_draws; ++d) {
        const Spectrogram y = draw ? draw() : spectral_corrupt(x, mu, t, sched, rng);
        auto ys = y.raw();
        for (std::size_t i = 0; i < cells; ++i) {
            sum[i] += ys[i];
            sumsq[i] += ys[i] * ys[i];
        }
    }
    MomentReport rep;
    rep.var_ratio_min = std::numeric_limits<double>::infinity();
    rep.var_ratio_max = 0.0;
    const double n = static_cast<double>(n_draws);
    auto xs = x.raw();
    auto ms = mu.raw();
    const double expected_var = c.sigma * c.sigma;
    for (std::size_t i = 0; i < cells; ++i) {
        const double mean = sum[i] / n;
        const double expected = c.a * xs[i] + c.m * ms[i];
        const double var = (sumsq[i] - n * mean * mean) / (n - 1.0);
        if (expected_var == 0.0) {
            // Degenerate kernel: draws must be exact up to accumulation roundoff.
            const double tol = 1e-12 * std::max(1.0, std::abs(expected));
            const bool exact = std::abs(mean - expected) <= tol && std::abs(var) <= tol;
            rep.max_mean_dev_se =
                std::max(rep.max_mean_dev_se, exact ? 0.0 : std::numeric_limits<double>::infinity());
            rep.var_ratio_min = std::min(rep.var_ratio_min, exact ? 1.0 : std::numeric_limits<double>::infinity());
            rep.var_ratio_max = std::max(rep.var_ratio_max, exact ? 1.0 : std::numeric_limits<double>::infinity());
            continue;
        }
        const double se = c.sigma / std::sqrt(n);
        rep.max_mean_dev_se = std::max(rep.max_mean_dev_se, std::abs(mean - expected) / se);
        rep.var_ratio_min = std::min(rep.var_ratio_min, var / expected_var);
        rep.var_ratio_max = std::max(rep.var_ratio_max, var / expected_var);
    }
    return rep;
}

}  // namespace jumpdiff
