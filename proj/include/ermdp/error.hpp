#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ermdp {

enum class ErrorCode {
    DimensionMismatch,
    NonStochasticRow,
    NegativeReward,
    DiscountOutOfRange,
    SupportTooLarge,
    NonPositivePolicyEntry,
    SolveFailure,
    NonPositiveTau,
    MaxIterExceeded,
    NonPositiveValue,
    NonPositiveDual,
    COutOfRange,
    InvalidConfig,
    NonFiniteState,
    ZeroNormReference,
    InsufficientSamples,
    EmptyBuffer,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Thrown when an iteration limit is hit; carries the last residual.
class MaxIterError : public Error {
public:
    MaxIterError(const std::string& what, double residual, long iterations)
        : Error(ErrorCode::MaxIterExceeded, what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    long iterations() const noexcept { return iterations_; }

private:
    double residual_;
    long iterations_;
};

/// Thrown when a solver step produces non-finite values (learning rate too large).
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long iteration)
        : Error(ErrorCode::NonFiniteState, what), iteration_(iteration) {}

    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) throw Error(code, what);
}

}  // namespace ermdp
