#pragma once

#include <stdexcept>
#include <string>

namespace oodlr {

/// Bad parameter values or violated preconditions.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Input data that does not satisfy a file or shape contract.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace oodlr
