#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mest {

/// Base class of every error raised by the library. Derived types name the
/// failure; `what()` carries the detail.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error { using Error::Error; };
class InvalidMatrix : public Error { using Error::Error; };

class NotPSD : public Error {
 public:
  NotPSD(const std::string& msg, double lambda_min) : Error(msg), lambda_min_(lambda_min) {}
  double lambda_min() const noexcept { return lambda_min_; }

 private:
  double lambda_min_;
};

class NotInvertible : public Error {
 public:
  NotInvertible(const std::string& msg, double lambda_min) : Error(msg), lambda_min_(lambda_min) {}
  double lambda_min() const noexcept { return lambda_min_; }

 private:
  double lambda_min_;
};

// Cholesky breakdown of a correlation matrix.
class NotPD : public Error {
 public:
  NotPD(const std::string& msg, double lambda_min) : Error(msg), lambda_min_(lambda_min) {}
  double lambda_min() const noexcept { return lambda_min_; }

 private:
  double lambda_min_;
};

class BadStart : public Error {
 public:
  BadStart(const std::string& msg, std::size_t index) : Error(msg), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Raised by minimize() only when every start stalled in its line search.
class StalledStart : public Error { using Error::Error; };

class StepOutOfDomain : public Error { using Error::Error; };
class ModelInconsistency : public Error { using Error::Error; };
class NotCentered : public Error { using Error::Error; };
class DegenerateC : public Error { using Error::Error; };
class TooFewSamples : public Error { using Error::Error; };
class SizeMismatch : public Error { using Error::Error; };
class TooLarge : public Error { using Error::Error; };
class ConditionsViolated : public Error { using Error::Error; };
class UnstableExperiment : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace mest
