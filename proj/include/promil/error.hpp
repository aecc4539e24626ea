#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace promil {

// Precondition violated by an argument (empty bag, q outside (0,1), ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed file contents. `offset` is a byte offset for binary formats and
// -1 when no meaningful offset exists (structured text).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, std::int64_t offset = -1)
      : std::runtime_error(what), offset_(offset) {}
  std::int64_t offset() const noexcept { return offset_; }

 private:
  std::int64_t offset_;
};

// NaN or infinity appeared where a finite value is required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace promil
