#ifndef FSP_COMMON_HPP
#define FSP_COMMON_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>
#include <cmath>
#include <cstdint>

namespace fsp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;

// Thrown for malformed inputs, files, and dimension mismatches.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a numerical procedure cannot continue (degenerate fits,
// non-finite intermediates, unreachable decode states).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr double kLogZero = -1e30;  // stand-in for log(0) in DP scores

inline double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b <= kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DataError(msg);
}

}  // namespace fsp

#endif
