#pragma once

#include <stdexcept>
#include <string>

namespace camlp {

// Operand shapes are incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
   public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// A documented precondition was violated by the caller.
class ContractError : public std::logic_error {
   public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Dataset or checkpoint files are missing or malformed.
class DataError : public std::runtime_error {
   public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
   public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace camlp
