#ifndef RELAYNET_COMMON_HPP
#define RELAYNET_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace relaynet {

/// Raised when an input violates a documented precondition. The message names
/// the offending field so the CLI can report it verbatim.
class InvalidArgument : public std::invalid_argument {
public:
    InvalidArgument(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Raised when an iterative solver gives up without meeting its acceptance test.
class SolverFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Gaussian capacity function C(x) = 1/2 log2(1 + x), bits per channel use.
inline double capacity(double snr) { return 0.5 * std::log2(1.0 + snr); }

namespace detail {

inline void require_positive(double value, const char* field) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw InvalidArgument(field, "must be a finite positive number");
    }
}

/// Relative difference that degrades to absolute near zero.
inline double rel_diff(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

}  // namespace detail
}  // namespace relaynet

#endif  // RELAYNET_COMMON_HPP
