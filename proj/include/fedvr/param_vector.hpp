#pragma once

#include <Eigen/Dense>
#include <string>

#include "fedvr/errors.hpp"

namespace fedvr {

// Flat parameter vector. Eigen supplies the storage and elementwise algebra;
// the helpers below add the shape and finiteness checks every producer of a
// parameter-sized vector must pass.
using ParamVector = Eigen::VectorXd;

inline void check_finite(const ParamVector& v, const char* what) {
  if (!v.allFinite()) fail(Errc::non_finite, std::string(what) + " contains NaN or Inf");
}

inline void check_same_dim(const ParamVector& a, const ParamVector& b, const char* what) {
  if (a.size() != b.size())
    fail(Errc::dimension_mismatch, std::string(what) + ": " + std::to_string(a.size()) +
                                       " vs " + std::to_string(b.size()));
}

inline double grad_norm_sq(const ParamVector& g) {
  const double s = g.squaredNorm();
  require(std::isfinite(s), Errc::non_finite, "squared norm overflowed");
  return s;
}

// a*x + y with shape and finiteness validation.
inline ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
  check_same_dim(x, y, "axpy");
  require(std::isfinite(a), Errc::non_finite, "axpy scalar is not finite");
  ParamVector r = a * x + y;
  check_finite(r, "axpy result");
  return r;
}

}  // namespace fedvr
