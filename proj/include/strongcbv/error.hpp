#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace scbv {

/// Malformed concrete syntax. Line and column are 1-based.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : std::runtime_error(what + " at " + std::to_string(line) + ":" + std::to_string(column)),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// A normalizer ran out of its step budget. The term may diverge.
class FuelExhausted : public std::runtime_error {
public:
    explicit FuelExhausted(std::uint64_t steps)
        : std::runtime_error("fuel exhausted after " + std::to_string(steps) + " steps"),
          steps_(steps) {}

    std::uint64_t steps() const noexcept { return steps_; }

private:
    std::uint64_t steps_;
};

/// A recursive normalizer nested deeper than its native stack allows.
class RecursionLimit : public std::runtime_error {
public:
    explicit RecursionLimit(std::uint64_t depth)
        : std::runtime_error("recursion limit of " + std::to_string(depth) + " nested calls reached") {}
};

/// Unfolding a shared graph would exceed the caller's size cap.
class OverCap : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No transition applies to a non-final configuration. Always a bug.
class MachineStuck : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace scbv
