#pragma once

#include <stdexcept>
#include <string>

namespace dorl {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
    using Error::Error;
};
struct RankDeficient : Error {
    explicit RankDeficient(const std::string& msg, int arm = -1) : Error(msg), arm_index(arm) {}
    int arm_index;  // offending arm for per-arm solves, -1 otherwise
};
struct NotSymmetric : Error {
    using Error::Error;
};
struct NotADistribution : Error {
    using Error::Error;
};
struct NotDivisible : Error {
    using Error::Error;
};
struct BadLambda : Error {
    using Error::Error;
};
struct DeltaTooLarge : Error {
    using Error::Error;
};
struct GammaTooLarge : Error {
    using Error::Error;
};
struct BadDims : Error {
    using Error::Error;
};
struct ZeroVector : Error {
    using Error::Error;
};
struct UnvisitedState : Error {
    using Error::Error;
};
struct BadParams : Error {
    using Error::Error;
};
struct BadAxis : Error {
    using Error::Error;
};
struct BudgetTooSmall : Error {
    using Error::Error;
};

}  // namespace dorl
