#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "jumpdiff/spectrogram.hpp"

namespace jumpdiff {

// Scores the current state's insertion slots. Logit j corresponds to slot
// j+1, so the output size equals the current length.
class LocationModel {
public:
    virtual ~LocationModel() = default;
    virtual std::vector<double> score_slots(const Spectrogram& x, const Spectrogram& mu,
                                            DiffusionTime t) = 0;
    // Called by the sampler after a column has landed at `slot` (persistent
    // insertions only). Stateless models ignore it.
    virtual void observe_insert(std::size_t /*slot*/) {}
};

// Predicts the clean content of the pending column. x_masked is the expanded
// canvas with the pending column zeroed at index `slot`; mu is the matching
// expanded prior. Predictions are residuals anchored at mu[:, slot].
class ContentModel {
public:
    virtual ~ContentModel() = default;
    virtual FrameColumn predict(const Spectrogram& x_masked, const Spectrogram& mu,
                                DiffusionTime t, std::size_t slot) = 0;
};

// Flat logits; allocation then spreads insertions evenly. This is the
// uniform-stretch reference the jump samplers are compared against.
class UniformLocationModel : public LocationModel {
public:
    std::vector<double> score_slots(const Spectrogram& x, const Spectrogram&,
                                    DiffusionTime) override {
        return std::vector<double>(x.length(), 0.0);
    }
};

// Copies the prior column: residual zero.
class PriorContentModel : public ContentModel {
public:
    FrameColumn predict(const Spectrogram&, const Spectrogram& mu, DiffusionTime,
                        std::size_t slot) override {
        return mu.column_copy(slot);
    }
};

enum class OracleMode {
    earliest,  // single peak at the slot of the earliest missing frame
    mass       // logits = log(count of missing frames per slot)
};

// Ground truth shared by the oracle pair: the clean spectrogram and which of
// its frames are currently present in the evolving state. Commits validate
// the structure on every insertion, so any bookkeeping drift throws instead
// of silently corrupting a run. When sampled allocation overshoots a gap's
// remaining frames, the surplus becomes filler copies of the left neighbor,
// stored as duplicate entries.
class OracleState {
public:
    OracleState(Spectrogram clean, std::vector<std::size_t> present)
        : clean_(std::move(clean)), present_(std::move(present)) {
        if (present_.empty() || present_.front() != 0)
            throw std::invalid_argument("OracleState: present frames must start at 0");
        for (std::size_t i = 1; i < present_.size(); ++i)
            if (present_[i] <= present_[i - 1])
                throw std::invalid_argument("OracleState: present frames must be strictly increasing");
        if (present_.back() >= clean_.length())
            throw std::invalid_argument("OracleState: present frame out of range");
        missing_ = clean_.length() - present_.size();
    }

    const Spectrogram& clean() const { return clean_; }
    const std::vector<std::size_t>& present() const { return present_; }
    std::size_t total_frames() const { return clean_.length(); }
    std::size_t missing_count() const { return missing_; }
    bool complete() const { return missing_ == 0; }

    // Missing frames that belong strictly between present_[s-1] and the next
    // present frame (or the end, for the append slot s == len).
    std::size_t gap_missing_count(std::size_t slot) const {
        auto [lo, hi] = gap_bounds(slot);
        return hi - lo - 1;
    }

    std::vector<std::size_t> slot_missing_counts() const {
        std::vector<std::size_t> counts(present_.size());
        for (std::size_t s = 1; s <= present_.size(); ++s) counts[s - 1] = gap_missing_count(s);
        return counts;
    }

    std::size_t earliest_missing() const {
        if (complete()) throw std::logic_error("OracleState: no missing frame");
        std::size_t expect = 0;
        for (std::size_t f : present_) {
            if (f > expect) break;
            if (f == expect) ++expect;  // duplicates (fillers) are skipped
        }
        return expect;
    }

    // Position the frame would occupy among the present frames.
    std::size_t slot_for_frame(std::size_t frame) const {
        return static_cast<std::size_t>(
            std::lower_bound(present_.begin(), present_.end(), frame) - present_.begin());
    }

    // Frame the next insertion at `slot` stands for. Batched same-slot
    // insertions stack right to left, so mass mode hands out the latest
    // missing frame of the gap first; earliest mode pairs with one-at-a-time
    // re-query and hands out the earliest. An exhausted gap yields a filler
    // copy of the left neighbor.
    std::size_t peek_frame(std::size_t slot, OracleMode mode) const {
        auto [lo, hi] = gap_bounds(slot);
        if (hi - lo <= 1) return lo;
        return mode == OracleMode::mass ? hi - 1 : lo + 1;
    }

    void commit(std::size_t slot, OracleMode mode) {
        auto [lo, hi] = gap_bounds(slot);
        if (hi - lo > 1) --missing_;
        const std::size_t frame = hi - lo > 1 ? (mode == OracleMode::mass ? hi - 1 : lo + 1) : lo;
        present_.insert(present_.begin() + static_cast<std::ptrdiff_t>(slot), frame);
    }

private:
    // Half-open frame bounds (lo, hi) of the gap addressed by `slot`, where
    // lo is the left neighbor's frame and hi the right neighbor's (or the
    // total length for the append slot).
    std::pair<std::size_t, std::size_t> gap_bounds(std::size_t slot) const {
        if (slot < 1 || slot > present_.size())
            throw std::out_of_range("OracleState: slot " + std::to_string(slot) + " out of range");
        const std::size_t lo = present_[slot - 1];
        const std::size_t hi = slot == present_.size() ? clean_.length() : present_[slot];
        return {lo, hi};
    }

    Spectrogram clean_;
    std::vector<std::size_t> present_;
    std::size_t missing_ = 0;
};

// Test instrumentation: slot scores computed from ground truth.
class OracleLocationModel : public LocationModel {
public:
    OracleLocationModel(std::shared_ptr<OracleState> state, OracleMode mode)
        : state_(std::move(state)), mode_(mode) {}

    std::vector<double> score_slots(const Spectrogram& x, const Spectrogram&,
                                    DiffusionTime) override {
        require_state(x.length());
        std::vector<double> logits(x.length(), 0.0);
        if (state_->complete()) return logits;
        if (mode_ == OracleMode::earliest) {
            std::fill(logits.begin(), logits.end(), -kZeroLogit);
            logits[state_->slot_for_frame(state_->earliest_missing()) - 1] = kZeroLogit;
        } else {
            const auto counts = state_->slot_missing_counts();
            for (std::size_t j = 0; j < counts.size(); ++j)
                logits[j] = counts[j] == 0 ? -kZeroLogit : std::log(static_cast<double>(counts[j]));
        }
        return logits;
    }

    void observe_insert(std::size_t slot) override { state_->commit(slot, mode_); }

private:
    // exp(-kZeroLogit) underflows to exactly 0 after softmax shifting.
    static constexpr double kZeroLogit = 1000.0;

    void require_state(std::size_t current_len) const {
        if (!state_) throw std::logic_error("OracleLocationModel: queried without ground truth");
        if (state_->present().size() != current_len)
            throw std::logic_error("OracleLocationModel: state desynchronized from sampler");
    }

    std::shared_ptr<OracleState> state_;
    OracleMode mode_;
};

// Test instrumentation: returns the true clean column of the frame the
// pending insertion stands for. Pure reader; the paired location model owns
// the commits.
class OracleContentModel : public ContentModel {
public:
    OracleContentModel(std::shared_ptr<OracleState> state, OracleMode mode)
        : state_(std::move(state)), mode_(mode) {}

    FrameColumn predict(const Spectrogram&, const Spectrogram&, DiffusionTime,
                        std::size_t slot) override {
        if (!state_) throw std::logic_error("OracleContentModel: queried without ground truth");
        return state_->clean().column_copy(state_->peek_frame(slot, mode_));
    }

private:
    std::shared_ptr<OracleState> state_;
    OracleMode mode_;
};

}  // namespace jumpdiff
