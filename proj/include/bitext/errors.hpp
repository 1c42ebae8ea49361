#pragma once

#include <stdexcept>
#include <string>

namespace bitext {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed file, shape mismatch, out-of-range argument.
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public ValidationError {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual, const std::string& what)
      : ValidationError(what + ": dimension mismatch (" + std::to_string(expected) + " vs " +
                        std::to_string(actual) + ")"),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// A vector with zero L2 norm reached an operation that divides by it.
class ZeroNormError : public ValidationError {
 public:
  explicit ZeroNormError(const std::string& what, std::size_t row = npos)
      : ValidationError(row == npos ? what + ": zero-norm vector"
                                    : what + ": zero-norm vector at row " + std::to_string(row)),
        row_(row) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite parameter.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch)
      : Error("training diverged: non-finite parameter at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

}  // namespace bitext
