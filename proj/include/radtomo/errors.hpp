#pragma once

#include <stdexcept>
#include <string>

namespace radtomo {

/// An iterative solver exhausted its iteration budget before reaching the
/// requested tolerance. Carries the residual it did achieve.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved_residual() const { return achieved_; }

 private:
  double achieved_;
};

/// Configuration file problem; the message carries file and line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File access or parse problem on data files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A data file was produced under a different geometry than expected.
class FingerprintError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace radtomo
