#pragma once

#include <stdexcept>
#include <string>

namespace lgcm {

// Shape/dimension mismatch between tensors.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Out-of-range lookup (token id, position id, ...).
class IndexError : public std::runtime_error {
public:
    explicit IndexError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numeric contract was violated (fully masked softmax row, non-scalar
// loss, empty target set, ...). Never silently produces NaN.
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/divergence during optimization.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed corpus, vocabulary or checkpoint data.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid run configuration (unknown key, bad value, mismatched model).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace lgcm
