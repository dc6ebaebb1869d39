#pragma once

#include <stdexcept>
#include <string>

namespace terrace {

/// Bad user input: unknown preset, malformed config or expression,
/// parameters outside their admissible range.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown at runtime: solution escape, step-size underflow,
/// NaN contamination, exhausted window memory budget.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// The data contradicts the structure the caller asked for: no monotone
/// interface, level speeds out of order, floors that match no ladder entry.
class StructuralError : public std::runtime_error {
public:
    explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

/// A requested solution level lies outside the profile's range, so it has
/// no crossing; callers tracing levels across time treat this as data, not
/// failure.
class LevelOutOfRange : public NumericalError {
public:
    explicit LevelOutOfRange(const std::string& what) : NumericalError(what) {}
};

}  // namespace terrace
