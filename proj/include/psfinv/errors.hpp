#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace psfinv {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class SizeLimitError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

class AliasingError : public Error {
 public:
  AliasingError(const std::string& what, std::vector<double> coeffs = {})
      : Error(what), coeffs_(std::move(coeffs)) {}
  // Zernike coefficients of the design that violated the bound, when known.
  const std::vector<double>& coeffs() const { return coeffs_; }
  AliasingError with_coeffs(std::vector<double> c) const { return AliasingError(what(), std::move(c)); }

 private:
  std::vector<double> coeffs_;
};

// Non-finite values, singular spectra, divergence.
class NumericFailure : public Error {
 public:
  explicit NumericFailure(const std::string& what, std::vector<double> partial_curve = {})
      : Error(what), partial_curve_(std::move(partial_curve)) {}
  const std::vector<double>& partial_curve() const { return partial_curve_; }

 private:
  std::vector<double> partial_curve_;
};

class StepSizeError : public NumericFailure {
 public:
  using NumericFailure::NumericFailure;
};

}  // namespace psfinv
