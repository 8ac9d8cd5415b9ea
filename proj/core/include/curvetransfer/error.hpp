#pragma once

#include <stdexcept>
#include <string>

namespace curvetransfer {

// Bad input data: unreadable files, malformed CSV/JSON, schema violations,
// degenerate curves, inconsistent plans.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t epoch)
      : std::runtime_error(what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace curvetransfer
