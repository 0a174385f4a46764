#pragma once

#include <stdexcept>
#include <string>

namespace maskflow {

// Validation errors map to CLI exit code 2, capacity errors to 3.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested identity label (or entity count) exceeds the bank capacity n.
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt or truncated on-disk artifact (checkpoint, sample directory, ...).
struct IntegrityError : std::runtime_error {
    explicit IntegrityError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

}  // namespace maskflow
