#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "jumpdiff/alignment.hpp"
#include "jumpdiff/errors.hpp"
#include "jumpdiff/rng.hpp"
#include "jumpdiff/schedule.hpp"
#include "jumpdiff/spectrogram.hpp"

namespace jumpdiff {

// Output of structural corruption: the surviving columns of the clean state
// and prior, plus which original frames survived. Noise is not yet applied.
struct CorruptionResult {
    Spectrogram x_sub;
    Spectrogram mu_sub;
    std::vector<std::size_t> kept;  // ascending original-frame indices
};

// Training triplet for the jump predictors: the noised state with one column
// removed, the slot that restores it, and the clean content of that column.
struct JumpTarget {
    Spectrogram x_minus_k;
    std::size_t slot = 0;
    FrameColumn clean_column;
};

// Deletes random non-protected frames down to the scheduled length. The kept
// set is uniform over supersets of the protected set of that size: the
// non-protected indices are shuffled and a prefix is retained.
inline CorruptionResult structural_corrupt(const Spectrogram& x0, const Spectrogram& mu,
                                           const ProtectedSet& p, DiffusionTime t,
                                           RandomStream& rng, double t_min = kDefaultTMin) {
    const std::size_t len0 = x0.length();
    if (mu.length() != len0 || mu.dim() != x0.dim())
        throw std::invalid_argument("structural_corrupt: x0 and mu must have equal shape");
    if (p.indices().back() >= len0)
        throw std::invalid_argument("structural_corrupt: protected index out of range");

    const std::size_t target_len = schedule_length(len0, p.size(), t, t_min);
    std::vector<std::size_t> kept;
    if (target_len == len0) {
        kept.resize(len0);
        std::iota(kept.begin(), kept.end(), 0);
    } else {
        std::vector<std::size_t> free_indices;
        free_indices.reserve(len0 - p.size());
        for (std::size_t i = 0; i < len0; ++i)
            if (!p.contains(i)) free_indices.push_back(i);
        rng.shuffle(free_indices);
        free_indices.resize(target_len - p.size());
        kept = p.indices();
        kept.insert(kept.end(), free_indices.begin(), free_indices.end());
        std::sort(kept.begin(), kept.end());
    }
    return {select_columns(x0, kept), select_columns(mu, kept), std::move(kept)};
}

// Variance-preserving noising toward the prior, explicit noise grid.
inline Spectrogram spectral_corrupt(const Spectrogram& x_sub, const Spectrogram& mu_sub,
                                    DiffusionTime t, const NoiseSchedule& sched,
                                    const Spectrogram& noise) {
    if (mu_sub.dim() != x_sub.dim() || mu_sub.length() != x_sub.length() ||
        noise.dim() != x_sub.dim() || noise.length() != x_sub.length())
        throw std::invalid_argument("spectral_corrupt: shape mismatch");
    const KernelCoeffs c = vp_coefficients(sched, t);
    Spectrogram out(x_sub.dim(), x_sub.length());
    auto o = out.raw();
    auto xs = x_sub.raw();
    auto ms = mu_sub.raw();
    auto zs = noise.raw();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = c.a * xs[i] + c.m * ms[i] + c.sigma * zs[i];
    return out;
}

inline Spectrogram spectral_corrupt(const Spectrogram& x_sub, const Spectrogram& mu_sub,
                                    DiffusionTime t, const NoiseSchedule& sched,
                                    RandomStream& rng) {
    Spectrogram noise(x_sub.dim(), x_sub.length());
    for (double& v : noise.raw()) v = rng.normal();
    return spectral_corrupt(x_sub, mu_sub, t, sched, noise);
}

// Positions within the kept sequence that hold protected originals.
inline std::vector<std::size_t> protected_positions(const std::vector<std::size_t>& kept,
                                                    const ProtectedSet& p) {
    std::vector<std::size_t> pos;
    pos.reserve(p.size());
    for (std::size_t j = 0; j < kept.size(); ++j)
        if (p.contains(kept[j])) pos.push_back(j);
    return pos;
}

// Simulates one jump transition: a uniformly chosen non-protected column k of
// x_t is deleted. The restoration slot equals k, and the content target is the
// clean column from x_sub, never the noised one.
inline JumpTarget make_jump_target(const Spectrogram& x_t, const Spectrogram& x_sub,
                                   const std::vector<std::size_t>& protected_pos,
                                   RandomStream& rng) {
    if (x_sub.length() != x_t.length())
        throw std::invalid_argument("make_jump_target: x_t and x_sub must have equal length");
    std::vector<std::size_t> candidates;
    candidates.reserve(x_t.length());
    for (std::size_t j = 0, pi = 0; j < x_t.length(); ++j) {
        if (pi < protected_pos.size() && protected_pos[pi] == j) {
            ++pi;
            continue;
        }
        candidates.push_back(j);
    }
    if (candidates.empty())
        throw NoDeletableFrameError("make_jump_target: every column is protected");
    const std::size_t k = candidates[rng.index(candidates.size())];
    return {delete_column(x_t, k), k, x_sub.column_copy(k)};
}

struct ForwardSample {
    Spectrogram x_t;                 // noised, pre-deletion state
    Spectrogram mu_sub;              // prior restricted to the kept frames
    std::vector<std::size_t> kept;   // surviving original-frame indices
    JumpTarget target;
};

// Full forward pass: structural corruption, spectral corruption, then one
// jump-target simulation.
inline ForwardSample forward_sample(const Spectrogram& x0, const Spectrogram& mu,
                                    const Alignment& align, DiffusionTime t,
                                    const NoiseSchedule& sched, RandomStream& rng,
                                    double t_min = kDefaultTMin) {
    const ProtectedSet p = protected_from_alignment(align);
    CorruptionResult c = structural_corrupt(x0, mu, p, t, rng, t_min);
    Spectrogram x_t = spectral_corrupt(c.x_sub, c.mu_sub, t, sched, rng);
    JumpTarget target = make_jump_target(x_t, c.x_sub, protected_positions(c.kept, p), rng);
    return {std::move(x_t), std::move(c.mu_sub), std::move(c.kept), std::move(target)};
}

}  // namespace jumpdiff
