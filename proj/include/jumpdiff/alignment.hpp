#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "jumpdiff/spectrogram.hpp"

namespace jumpdiff {

struct PhoneSpan {
    std::size_t start = 0;
    std::size_t length = 0;
    bool operator==(const PhoneSpan&) const = default;
};

// Phone-to-frame mapping. Spans are contiguous, non-overlapping, start at
// frame 0 and cover [0, total_frames) with every length >= 1; construction
// rejects anything else.
class Alignment {
public:
    Alignment(std::vector<int> phones, std::vector<PhoneSpan> spans)
        : phones_(std::move(phones)), spans_(std::move(spans)) {
        if (phones_.empty() || phones_.size() != spans_.size())
            throw std::invalid_argument("Alignment: phones and spans must be nonempty and equal-sized");
        std::size_t next = 0;
        for (const auto& s : spans_) {
            if (s.start != next)
                throw std::invalid_argument("Alignment: spans must be contiguous from frame 0");
            if (s.length == 0)
                throw std::invalid_argument("Alignment: every span length must be >= 1");
            next = s.start + s.length;
        }
        total_frames_ = next;
    }

    static Alignment from_durations(std::vector<int> phones, const std::vector<std::size_t>& durations) {
        if (phones.size() != durations.size())
            throw std::invalid_argument("Alignment: phones and durations must be equal-sized");
        std::vector<PhoneSpan> spans(durations.size());
        std::size_t start = 0;
        for (std::size_t i = 0; i < durations.size(); ++i) {
            spans[i] = {start, durations[i]};
            start += durations[i];
        }
        return Alignment(std::move(phones), std::move(spans));
    }

    std::size_t size() const { return phones_.size(); }
    std::size_t total_frames() const { return total_frames_; }
    const std::vector<int>& phones() const { return phones_; }
    const std::vector<PhoneSpan>& spans() const { return spans_; }

    // Index of the phone covering frame f.
    std::size_t phone_at(std::size_t f) const {
        if (f >= total_frames_)
            throw std::out_of_range("Alignment::phone_at: frame " + std::to_string(f) + " out of range");
        auto it = std::upper_bound(spans_.begin(), spans_.end(), f,
                                   [](std::size_t v, const PhoneSpan& s) { return v < s.start; });
        return static_cast<std::size_t>(it - spans_.begin()) - 1;
    }

private:
    std::vector<int> phones_;
    std::vector<PhoneSpan> spans_;
    std::size_t total_frames_ = 0;
};

// Strictly increasing frame indices that structural corruption may never
// delete. Always contains frame 0.
class ProtectedSet {
public:
    explicit ProtectedSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
        if (indices_.empty() || indices_.front() != 0)
            throw std::invalid_argument("ProtectedSet: must be nonempty and contain frame 0");
        for (std::size_t i = 1; i < indices_.size(); ++i)
            if (indices_[i] <= indices_[i - 1])
                throw std::invalid_argument("ProtectedSet: indices must be strictly increasing");
    }

    std::size_t size() const { return indices_.size(); }
    const std::vector<std::size_t>& indices() const { return indices_; }

    bool contains(std::size_t f) const {
        return std::binary_search(indices_.begin(), indices_.end(), f);
    }

private:
    std::vector<std::size_t> indices_;
};

// The span-start frames of an alignment, ascending.
inline ProtectedSet protected_from_alignment(const Alignment& a) {
    std::vector<std::size_t> idx;
    idx.reserve(a.size());
    for (const auto& s : a.spans()) idx.push_back(s.start);
    return ProtectedSet(std::move(idx));
}

// Expands per-phone prototype columns to frame level by repetition: frame j
// carries the prototype of the phone whose span covers j.
inline Spectrogram upsample_prior(const Spectrogram& phone_means,
                                  const std::vector<std::size_t>& durations) {
    if (phone_means.length() != durations.size())
        throw std::invalid_argument("upsample_prior: one duration per phone column required");
    std::size_t total = 0;
    for (std::size_t i = 0; i < durations.size(); ++i) {
        if (durations[i] == 0)
            throw std::invalid_argument("upsample_prior: durations[" + std::to_string(i) +
                                        "] must be >= 1");
        total += durations[i];
    }
    Spectrogram out(phone_means.dim(), total);
    std::size_t frame = 0;
    for (std::size_t p = 0; p < durations.size(); ++p)
        for (std::size_t r = 0; r < durations[p]; ++r) out.set_column(frame++, phone_means.column(p));
    return out;
}

}  // namespace jumpdiff
