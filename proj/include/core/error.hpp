#pragma once

#include <stdexcept>
#include <string>

namespace core {

/// Library-wide error; what() starts with a stable kind tag such as
/// "invalid-dimension:" so callers and tests can match on it.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

}  // namespace core
