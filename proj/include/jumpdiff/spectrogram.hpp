#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jumpdiff {

using FrameColumn = std::vector<double>;

// Dense D x L grid of spectral values. Columns are time frames and are stored
// contiguously, so frame edits are single block moves. All edits are value
// semantic: they return new grids and never alias the input.
class Spectrogram {
public:
    Spectrogram() = default;

    Spectrogram(std::size_t dim, std::size_t length, double fill = 0.0)
        : dim_(dim), data_(dim * length, fill) {
        if (dim == 0) throw std::invalid_argument("Spectrogram: dim must be positive");
    }

    static Spectrogram from_columns(std::size_t dim, const std::vector<FrameColumn>& cols) {
        Spectrogram s(dim, cols.size());
        for (std::size_t l = 0; l < cols.size(); ++l) s.set_column(l, cols[l]);
        return s;
    }

    std::size_t dim() const { return dim_; }
    std::size_t length() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t d, std::size_t l) { return data_[l * dim_ + d]; }
    double operator()(std::size_t d, std::size_t l) const { return data_[l * dim_ + d]; }

    std::span<double> column(std::size_t l) {
        check_frame(l);
        return {data_.data() + l * dim_, dim_};
    }
    std::span<const double> column(std::size_t l) const {
        check_frame(l);
        return {data_.data() + l * dim_, dim_};
    }

    FrameColumn column_copy(std::size_t l) const {
        auto c = column(l);
        return FrameColumn(c.begin(), c.end());
    }

    void set_column(std::size_t l, std::span<const double> values) {
        check_frame(l);
        if (values.size() != dim_)
            throw std::invalid_argument("Spectrogram::set_column: column has wrong dimension");
        std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(l * dim_));
    }

    std::span<const double> raw() const { return data_; }
    std::span<double> raw() { return data_; }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    bool operator==(const Spectrogram& other) const = default;

private:
    void check_frame(std::size_t l) const {
        if (l >= length())
            throw std::out_of_range("Spectrogram: frame index " + std::to_string(l) +
                                    " out of range for length " + std::to_string(length()));
    }

    std::size_t dim_ = 0;
    std::vector<double> data_;
};

// Removes column k, preserving the order of the survivors.
inline Spectrogram delete_column(const Spectrogram& x, std::size_t k) {
    if (k >= x.length())
        throw std::out_of_range("delete_column: index " + std::to_string(k) +
                                " out of range for length " + std::to_string(x.length()));
    Spectrogram out(x.dim(), x.length() - 1);
    for (std::size_t l = 0, o = 0; l < x.length(); ++l) {
        if (l == k) continue;
        out.set_column(o++, x.column(l));
    }
    return out;
}

// Slot s places the new column at index s; columns formerly at >= s shift
// right. Slots run {1..L}: slot 0 is excluded so an inserted column always
// has a left neighbor.
inline Spectrogram insert_column(const Spectrogram& x, std::span<const double> col, std::size_t slot) {
    if (slot < 1 || slot > x.length())
        throw std::out_of_range("insert_column: slot " + std::to_string(slot) +
                                " out of range for length " + std::to_string(x.length()));
    if (col.size() != x.dim())
        throw std::invalid_argument("insert_column: column has wrong dimension");
    Spectrogram out(x.dim(), x.length() + 1);
    for (std::size_t l = 0; l < slot; ++l) out.set_column(l, x.column(l));
    out.set_column(slot, col);
    for (std::size_t l = slot; l < x.length(); ++l) out.set_column(l + 1, x.column(l));
    return out;
}

inline Spectrogram select_columns(const Spectrogram& x, std::span<const std::size_t> indices) {
    Spectrogram out(x.dim(), indices.size());
    for (std::size_t o = 0; o < indices.size(); ++o) out.set_column(o, x.column(indices[o]));
    return out;
}

// Mean absolute amplitude of one frame.
inline double frame_energy(std::span<const double> col) {
    double acc = 0.0;
    for (double v : col) acc += std::abs(v);
    return acc / static_cast<double>(col.size());
}

// Per-column label tracking which frames are originals of the persistent
// state and which were inserted by a jump. Kept in lockstep with a companion
// Spectrogram by the sampler.
enum class Provenance : std::uint8_t { original, inserted };
using ProvenanceMask = std::vector<Provenance>;

inline std::size_t count_original(const ProvenanceMask& mask) {
    return static_cast<std::size_t>(
        std::count(mask.begin(), mask.end(), Provenance::original));
}

// Process time in [0, 1].
struct DiffusionTime {
    explicit DiffusionTime(double t) : value(t) {
        if (!(t >= 0.0 && t <= 1.0))
            throw std::invalid_argument("DiffusionTime: t must lie in [0,1], got " + std::to_string(t));
    }
    double value;
};

}  // namespace jumpdiff
