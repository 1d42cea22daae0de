#pragma once

#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace spectrack {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = std::numbers::pi;

// Dimension or length mismatch between inputs that must agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A Gaussian primitive whose covariance or opacity is out of range.
class InvalidPrimitive : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad experiment or grid configuration. The message names the offending key or band.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss during optimisation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spectrack
