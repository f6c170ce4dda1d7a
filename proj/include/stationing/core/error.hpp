#pragma once

#include <stdexcept>
#include <string>

namespace stationing {

// Caller broke a documented precondition (shape, arity, range).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Invalid configuration: unknown names, degenerate sizes, bad JSON fields.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyMask : public std::runtime_error {
public:
    EmptyMask() : std::runtime_error("EmptyMask") {}
    explicit EmptyMask(const std::string& what) : std::runtime_error("EmptyMask: " + what) {}
};

// Non-finite loss or gradient during optimization.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Train/test overlap detected by the fold access log.
class LeakageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define STATIONING_REQUIRE(cond, msg)                                              \
    do {                                                                           \
        if (!(cond)) throw ::stationing::ContractViolation(std::string(msg));      \
    } while (0)

}  // namespace stationing
