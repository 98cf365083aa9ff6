#pragma once

#include <stdexcept>
#include <string>

namespace aoii {

/// Input that violates a model invariant (bad matrix, invalid state, ...).
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A contract of an operation was violated by the caller.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A linear solve or iteration failed.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A rate constraint cannot be bracketed.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace aoii
