#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"

namespace fleetcharge {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Diagonal matrices are stored by their diagonal throughout the library.
using Diagonal = Eigen::VectorXd;

/// Entries with magnitude below this are treated as exact zeros when
/// pseudo-inverting a diagonal.
inline constexpr double kPseudoInverseThreshold = 1e-12;

inline Diagonal pseudo_inverse(const Diagonal& d) {
  Diagonal out(d.size());
  for (Eigen::Index k = 0; k < d.size(); ++k)
    out[k] = std::abs(d[k]) < kPseudoInverseThreshold ? 0.0 : 1.0 / d[k];
  return out;
}

inline void require_size(const Vector& v, Eigen::Index n, const char* name) {
  if (v.size() != n)
    throw DimensionMismatch(std::string(name) + " has length " +
                            std::to_string(v.size()) + ", expected " +
                            std::to_string(n));
}

/// True when x has nonnegative entries summing to one (within tol).
inline bool on_simplex(const Vector& x, double tol = 1e-9) {
  if (x.size() == 0) return false;
  if ((x.array() < -tol).any()) return false;
  return std::abs(x.sum() - 1.0) <= tol;
}

/// Dense matrix from a stored diagonal.
inline Matrix as_dense(const Diagonal& d) { return d.asDiagonal(); }

}  // namespace fleetcharge
