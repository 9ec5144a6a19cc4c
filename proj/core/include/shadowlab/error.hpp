#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shadowlab {

// Bad arguments: wrong channel count, shape mismatch, out-of-range parameter.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A configuration value or manifest entry that violates a module invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Raised when a diffusion trajectory or a training loss stops being finite.
class NumericalDivergence : public std::runtime_error {
 public:
  NumericalDivergence(std::size_t step, const std::string& what)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace shadowlab
