#pragma once

#include <stdexcept>
#include <string>

namespace stem {

// One exception type with a coarse category; callers that care about the
// failure mode switch on kind(), everyone else treats it as runtime_error.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    parse,
    lookup,
    contract,
    argument,
    config,
    transport,
    numeric,
    sampling,
  };

  Error(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace stem
