#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jumpdiff {

// Raised when a jump target is requested but every column is protected.
class NoDeletableFrameError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when training produces a non-finite loss.
class TrainingError : public std::runtime_error {
public:
    TrainingError(std::size_t epoch, const std::string& what)
        : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what),
          epoch_(epoch) {}
    std::size_t epoch() const { return epoch_; }

private:
    std::size_t epoch_;
};

}  // namespace jumpdiff
