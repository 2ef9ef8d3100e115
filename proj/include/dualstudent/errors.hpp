#pragma once

#include <stdexcept>
#include <string>

namespace dualstudent {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Raised when a loss or parameter becomes NaN/Inf during training.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dualstudent
