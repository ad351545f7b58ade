#pragma once

#include <stdexcept>
#include <string>

namespace lrc {

// Dataset files that cannot be read or parsed (CSV grammar, CIFAR record
// framing, unreadable checkpoints).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where the math requires finite ones (loss blow-up,
// NaN in a debug-mode tensor scan).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Exact enumeration requested beyond the 2^20-pattern budget.
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lrc
