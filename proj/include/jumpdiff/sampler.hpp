#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "jumpdiff/losses.hpp"
#include "jumpdiff/models.hpp"
#include "jumpdiff/rng.hpp"
#include "jumpdiff/schedule.hpp"
#include "jumpdiff/score.hpp"
#include "jumpdiff/spectrogram.hpp"

namespace jumpdiff {

enum class SamplerMode { oneshot, tdd, udd };
enum class Solver { sde, ode };
enum class Allocation { sample, argmax };

struct SamplerConfig {
    SamplerMode mode = SamplerMode::tdd;
    Solver solver = Solver::ode;
    std::size_t steps = 50;  // uniform reverse grid from t=1 to t=0
    Allocation allocation = Allocation::sample;
    double temperature = 1.0;
    double t_min = kDefaultTMin;
    std::uint64_t seed = 0;
    // Re-query the location model after every single insertion instead of
    // allocating a whole step's insertions from one distribution.
    bool sequential_recompute = false;

    void validate() const {
        if (steps == 0) throw std::invalid_argument("sampler.steps must be >= 1");
        if (!(temperature > 0.0)) throw std::invalid_argument("sampler.temperature must be > 0");
        if (!(t_min > 0.0 && t_min < 1.0)) throw std::invalid_argument("sampler.t_min must lie in (0,1)");
    }
};

// The evolving variable-length state: spectrogram, prior, per-column
// provenance, and the index of the start column each frame descends from.
struct SamplerState {
    Spectrogram x;
    Spectrogram mu;
    ProvenanceMask provenance;
    std::vector<std::size_t> ancestry;

    std::size_t length() const { return x.length(); }
};

inline SamplerState make_sampler_state(Spectrogram x, Spectrogram mu) {
    if (mu.dim() != x.dim() || mu.length() != x.length())
        throw std::invalid_argument("make_sampler_state: shape mismatch");
    SamplerState s{std::move(x), std::move(mu), {}, {}};
    s.provenance.assign(s.x.length(), Provenance::original);
    s.ancestry.resize(s.x.length());
    std::iota(s.ancestry.begin(), s.ancestry.end(), 0);
    return s;
}

// One explicit Euler step of the reverse dynamics from t to t - h. The
// forward drift is f = beta/2 (mu - x) with g = sqrt(beta), whose transition
// kernel is the variance-preserving marginal used in the forward pass.
//   ode: x <- x - h (beta/2 (mu - x) - beta/2 score)
//   sde: x <- x - h (beta/2 (mu - x) - beta score) + sqrt(beta h) z
inline Spectrogram denoise_step(const Spectrogram& x, const Spectrogram& mu, DiffusionTime t,
                                double h, ScoreFunction& score_fn, Solver solver,
                                const NoiseSchedule& sched, RandomStream& rng) {
    if (mu.dim() != x.dim() || mu.length() != x.length())
        throw std::invalid_argument("denoise_step: shape mismatch");
    if (!(h > 0.0 && h <= t.value)) throw std::invalid_argument("denoise_step: requires 0 < h <= t");
    const double beta = sched.beta(t.value);
    const Spectrogram sc = score_fn.score(x, mu, t);
    Spectrogram out(x.dim(), x.length());
    auto o = out.raw();
    auto xs = x.raw();
    auto ms = mu.raw();
    auto ss = sc.raw();
    if (solver == Solver::ode) {
        for (std::size_t i = 0; i < o.size(); ++i)
            o[i] = xs[i] - h * (0.5 * beta * (ms[i] - xs[i]) - 0.5 * beta * ss[i]);
    } else {
        const double noise_scale = std::sqrt(beta * h);
        for (std::size_t i = 0; i < o.size(); ++i)
            o[i] = xs[i] - h * (0.5 * beta * (ms[i] - xs[i]) - beta * ss[i]) +
                   noise_scale * rng.normal();
    }
    return out;
}

// Distributes n_add insertions over slots. Sample mode draws i.i.d. from the
// distribution; argmax mode apportions deterministically by largest
// remainder (ties to the lower slot). Slots are returned ascending.
inline std::vector<std::size_t> allocate_insertions(std::span<const double> probs,
                                                    std::size_t n_add, Allocation mode,
                                                    RandomStream& rng) {
    if (probs.empty()) throw std::invalid_argument("allocate_insertions: empty distribution");
    double total = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw std::invalid_argument("allocate_insertions: negative probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("allocate_insertions: probabilities must sum to 1");

    std::vector<std::size_t> slots;
    slots.reserve(n_add);
    if (n_add == 0) return slots;

    if (mode == Allocation::sample) {
        for (std::size_t i = 0; i < n_add; ++i) slots.push_back(rng.categorical(probs) + 1);
        std::sort(slots.begin(), slots.end());
        return slots;
    }

    std::vector<std::size_t> counts(probs.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders(probs.size());
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        const double quota = static_cast<double>(n_add) * probs[j];
        counts[j] = static_cast<std::size_t>(std::floor(quota));
        assigned += counts[j];
        remainders[j] = {quota - std::floor(quota), j};
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t r = 0; r < n_add - assigned; ++r) ++counts[remainders[r].second];
    for (std::size_t j = 0; j < counts.size(); ++j)
        for (std::size_t c = 0; c < counts[j]; ++c) slots.push_back(j + 1);
    return slots;
}

namespace detail {

// Inserts one column at `slot`: the content prediction is noised to level t
// and the prior duplicates the left neighbor. Slots of a batch are applied in
// descending order, so a stored slot stays valid while later (smaller) ones
// are applied.
inline void apply_insertion(SamplerState& s, std::size_t slot, DiffusionTime t,
                            const KernelCoeffs& c, LocationModel& loc, ContentModel& cont,
                            RandomStream& rng, bool notify) {
    FrameColumn mu_new = s.mu.column_copy(slot - 1);
    Spectrogram x_masked = insert_column(s.x, FrameColumn(s.x.dim(), 0.0), slot);
    Spectrogram mu_exp = insert_column(s.mu, mu_new, slot);
    FrameColumn predicted = cont.predict(x_masked, mu_exp, t, slot);
    FrameColumn noised(s.x.dim());
    for (std::size_t d = 0; d < noised.size(); ++d)
        noised[d] = c.a * predicted[d] + c.m * mu_new[d] + c.sigma * rng.normal();
    x_masked.set_column(slot, noised);
    s.x = std::move(x_masked);
    s.mu = std::move(mu_exp);
    s.provenance.insert(s.provenance.begin() + static_cast<std::ptrdiff_t>(slot),
                        Provenance::inserted);
    s.ancestry.insert(s.ancestry.begin() + static_cast<std::ptrdiff_t>(slot),
                      s.ancestry[slot - 1]);
    if (notify) loc.observe_insert(slot);
}

inline std::vector<double> slot_distribution(LocationModel& loc, const SamplerState& s,
                                             DiffusionTime t, double temperature) {
    std::vector<double> logits = loc.score_slots(s.x, s.mu, t);
    if (logits.size() != s.length())
        throw std::logic_error("location model returned wrong logit count");
    for (double& v : logits) v /= temperature;
    return softmax(logits);
}

}  // namespace detail

// Grows the state by n_ins columns. Batched: one distribution query, slots
// allocated together, applied descending. Sequential: re-query after every
// insertion. New columns are marked inserted; `notify` controls whether the
// location model observes the insertions (canvas padding does not).
inline SamplerState jump_step(SamplerState s, DiffusionTime t, std::size_t n_ins,
                              LocationModel& loc, ContentModel& cont,
                              const NoiseSchedule& sched, Allocation alloc,
                              double temperature, bool sequential, RandomStream& rng,
                              bool notify = true,
                              std::vector<std::size_t>* slots_out = nullptr) {
    if (n_ins == 0) return s;
    const KernelCoeffs c = vp_coefficients(sched, t);
    if (sequential) {
        for (std::size_t i = 0; i < n_ins; ++i) {
            auto probs = detail::slot_distribution(loc, s, t, temperature);
            auto slots = allocate_insertions(probs, 1, alloc, rng);
            detail::apply_insertion(s, slots.front(), t, c, loc, cont, rng, notify);
            if (slots_out) slots_out->push_back(slots.front());
        }
        return s;
    }
    auto probs = detail::slot_distribution(loc, s, t, temperature);
    auto slots = allocate_insertions(probs, n_ins, alloc, rng);
    if (slots_out) slots_out->insert(slots_out->end(), slots.begin(), slots.end());
    for (auto it = slots.rbegin(); it != slots.rend(); ++it)
        detail::apply_insertion(s, *it, t, c, loc, cont, rng, notify);
    return s;
}

// Upsample-Diffuse-Downsample: pad the state to the full canvas with
// temporary columns, run one denoise step on the fixed-length canvas, then
// drop the padding. The persistent columns come back denoised, in order.
inline SamplerState udd_round(SamplerState s, DiffusionTime t, double h, std::size_t target_len,
                              LocationModel& loc, ContentModel& cont, ScoreFunction& score_fn,
                              const NoiseSchedule& sched, Allocation alloc, double temperature,
                              Solver solver, RandomStream& rng) {
    if (s.length() > target_len)
        throw std::invalid_argument("udd_round: state longer than the canvas");
    SamplerState work = s;
    if (work.length() < target_len)
        work = jump_step(std::move(work), t, target_len - work.length(), loc, cont, sched, alloc,
                         temperature, /*sequential=*/false, rng, /*notify=*/false);
    work.x = denoise_step(work.x, work.mu, t, h, score_fn, solver, sched, rng);

    std::vector<std::size_t> keep;
    keep.reserve(s.length());
    for (std::size_t j = 0; j < work.provenance.size(); ++j)
        if (work.provenance[j] == Provenance::original) keep.push_back(j);
    SamplerState out;
    out.x = select_columns(work.x, keep);
    out.mu = select_columns(work.mu, keep);
    out.provenance.assign(keep.size(), Provenance::original);
    out.ancestry.reserve(keep.size());
    for (std::size_t j : keep) out.ancestry.push_back(work.ancestry[j]);
    return out;
}

struct StepRecord {
    double t = 0.0;
    std::size_t length_before = 0;
    std::size_t n_ins = 0;
    std::vector<std::size_t> slots;
    std::size_t length_after = 0;
};

struct SynthesisTrace {
    std::vector<StepRecord> steps;
};

using StepObserver = std::function<void(const StepRecord&, const SamplerState&)>;

// Reverse sweep over the uniform grid t_i = (N - i)/N, starting at grid index
// `start_index`. Each grid point first grows the state (schedule-driven for
// tdd/udd, everything at t=1 for oneshot), then takes one denoise step toward
// the next grid point. UDD denoises on the padded canvas and promotes its
// schedule growth to the persistent state.
inline SamplerState reverse_sweep(SamplerState state, std::size_t start_index,
                                  std::size_t skeleton_size, std::size_t target_len,
                                  LocationModel& loc, ContentModel& cont,
                                  ScoreFunction& score_fn, const NoiseSchedule& sched,
                                  const SamplerConfig& cfg, RandomStream& rng,
                                  SynthesisTrace* trace = nullptr,
                                  const StepObserver& observer = {}) {
    cfg.validate();
    const std::size_t n = cfg.steps;
    if (start_index > n) throw std::invalid_argument("reverse_sweep: start index beyond grid");
    const double h = 1.0 / static_cast<double>(n);

    for (std::size_t i = start_index; i <= n; ++i) {
        const DiffusionTime t{static_cast<double>(n - i) / static_cast<double>(n)};
        std::size_t want = 0;
        if (cfg.mode == SamplerMode::oneshot) {
            want = i == start_index ? target_len : state.length();
        } else {
            want = schedule_length(target_len, skeleton_size, t, cfg.t_min);
        }
        StepRecord rec;
        rec.t = t.value;
        rec.length_before = state.length();
        rec.n_ins = want > state.length() ? want - state.length() : 0;
        if (rec.n_ins > 0)
            state = jump_step(std::move(state), t, rec.n_ins, loc, cont, sched, cfg.allocation,
                              cfg.temperature, cfg.sequential_recompute, rng, true, &rec.slots);
        if (cfg.mode == SamplerMode::udd)
            std::fill(state.provenance.begin(), state.provenance.end(), Provenance::original);
        rec.length_after = state.length();
        if (trace) trace->steps.push_back(rec);
        if (observer) observer(rec, state);

        if (i == n) break;
        if (cfg.mode == SamplerMode::udd && state.length() < target_len) {
            state = udd_round(std::move(state), t, h, target_len, loc, cont, score_fn, sched,
                              cfg.allocation, cfg.temperature, cfg.solver, rng);
        } else {
            state.x = denoise_step(state.x, state.mu, t, h, score_fn, cfg.solver, sched, rng);
        }
    }
    return state;
}

struct SynthesisResult {
    Spectrogram x;
    SynthesisTrace trace;
    SamplerState final_state;
};

// Full synthesis from the compressed phone-level prior: x_1 = mu~ + z, then
// the reverse sweep grows it to target_len.
inline SynthesisResult synthesize(const Spectrogram& phone_means, std::size_t target_len,
                                  LocationModel& loc, ContentModel& cont,
                                  ScoreFunction& score_fn, const NoiseSchedule& sched,
                                  const SamplerConfig& cfg, RandomStream& rng,
                                  const StepObserver& observer = {}) {
    cfg.validate();
    const std::size_t n_phone = phone_means.length();
    if (n_phone == 0) throw std::invalid_argument("synthesize: empty phone prior");
    if (target_len < n_phone)
        throw std::invalid_argument("synthesize: target length " + std::to_string(target_len) +
                                    " below phone count " + std::to_string(n_phone));
    Spectrogram x1 = phone_means;
    for (double& v : x1.raw()) v += rng.normal();
    SamplerState state = make_sampler_state(std::move(x1), phone_means);

    SynthesisResult result;
    state = reverse_sweep(std::move(state), 0, n_phone, target_len, loc, cont, score_fn, sched,
                          cfg, rng, &result.trace, observer);
    result.x = state.x;
    result.final_state = std::move(state);
    return result;
}

inline SynthesisResult synthesize(const Spectrogram& phone_means, std::size_t target_len,
                                  LocationModel& loc, ContentModel& cont,
                                  ScoreFunction& score_fn, const NoiseSchedule& sched,
                                  const SamplerConfig& cfg) {
    RandomStream rng = RandomStream(cfg.seed).fork("synth");
    return synthesize(phone_means, target_len, loc, cont, score_fn, sched, cfg, rng);
}

// Degenerate variant: every insertion happens at t = 1 from a single
// location query; the rest of the sweep is fixed-length diffusion.
inline SynthesisResult oneshot_synthesize(const Spectrogram& phone_means, std::size_t target_len,
                                          LocationModel& loc, ContentModel& cont,
                                          ScoreFunction& score_fn, const NoiseSchedule& sched,
                                          SamplerConfig cfg, RandomStream& rng) {
    cfg.mode = SamplerMode::oneshot;
    return synthesize(phone_means, target_len, loc, cont, score_fn, sched, cfg, rng);
}

// Frames descending from each start column; with a phone-level start state
// this is the synthesized per-phone duration.
inline std::vector<std::size_t> ancestor_counts(const SamplerState& s, std::size_t n_ancestors) {
    std::vector<std::size_t> counts(n_ancestors, 0);
    for (std::size_t a : s.ancestry) {
        if (a >= n_ancestors) throw std::logic_error("ancestor_counts: ancestor out of range");
        ++counts[a];
    }
    return counts;
}

}  // namespace jumpdiff
