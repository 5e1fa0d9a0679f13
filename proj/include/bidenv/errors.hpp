#pragma once

#include <stdexcept>
#include <string>

namespace bidenv {

// Shape mismatch between tensor operands. Message names both shapes.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated API precondition (non-scalar backward seed, empty mask, ...).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite value surfaced during forward/backward or a failed numeric check.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed dataset/checkpoint/config content.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad command line or unknown config key.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace bidenv
