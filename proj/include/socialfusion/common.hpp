#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace socialfusion {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error taxonomy. ConfigError maps to CLI exit code 2, everything else to 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidInputError : public std::runtime_error {
 public:
  explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool all_finite(const Mat& m) {
  return m.allFinite();
}

inline void require_finite(const Mat& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError(what + ": non-finite values");
}

// Rounds half away from zero; the tie rule used everywhere a continuous
// coordinate is quantized to a pixel index.
inline long round_half_away(double v) {
  return static_cast<long>(v >= 0 ? std::floor(v + 0.5) : std::ceil(v - 0.5));
}

inline Vec log_softmax(const Vec& v) {
  double m = v.maxCoeff();
  double lse = std::log((v.array() - m).exp().sum()) + m;
  return v.array() - lse;
}

}  // namespace socialfusion
