#pragma once

#include <stdexcept>
#include <string>

namespace fgame {

/// Shape disagreement between operands.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Time or node index outside the admissible range.
class IndexError : public std::out_of_range {
public:
    explicit IndexError(const std::string& what) : std::out_of_range(what) {}
};

/// NaN/Inf produced inside a recursion. Message names stage and block.
class NumericalBreakdown : public std::runtime_error {
public:
    explicit NumericalBreakdown(const std::string& what) : std::runtime_error(what) {}
};

/// Scenario tree whose branch moments disagree with the noise specification.
class TreeInvalid : public std::runtime_error {
public:
    explicit TreeInvalid(const std::string& what) : std::runtime_error(what) {}
};

/// Range conditions fail, so no equilibrium can be selected.
class SolvabilityError : public std::runtime_error {
public:
    explicit SolvabilityError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed configuration; message carries the location inside the document.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fgame
