// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "chirpid/errors.hpp"

namespace chirpid {

using cplx = std::complex<double>;

/// Sizes of the lifted problem for an odd lift order M.
///
/// The 2-D grid is M x ((M-1)^2 + 1); the 2-level Toeplitz/Hankel matrices
/// have m1 x m1 blocks of size m2 x m2, and the certificate has side
/// order = 2 * m1 * m2.
struct LiftDimensions {
  int m = 0;
  int n1 = 0;
  int n2 = 0;
  int m1 = 0;
  int m2 = 0;
  int order = 0;
  /// Set when the sample count is below the 2K identifiability bound.
  bool below_identifiability_bound = false;

  /// Side of the 2-level Toeplitz matrix T (and of H(Y)).
  int block_side() const { return m1 * m2; }

  static LiftDimensions for_order(int m) {
    if (m < 1 || m % 2 == 0) {
      throw DimensionError("lift order M must be odd and positive, got " + std::to_string(m));
    }
    LiftDimensions d;
    d.m = m;
    d.n1 = m;
    d.n2 = (m - 1) * (m - 1) + 1;
    d.m1 = (m + 1) / 2;
    d.m2 = ((m - 1) * (m - 1) + 2) / 2;
    d.order = 2 * d.m1 * d.m2;
    return d;
  }
};

/// N1 x N2 complex samples of a 2-D harmonic signal (both sides odd).
class GridSignal {
 public:
  GridSignal() = default;
  explicit GridSignal(Eigen::MatrixXcd entries) : entries_(std::move(entries)) {
    if (entries_.rows() % 2 == 0 || entries_.cols() % 2 == 0) {
      throw DimensionError("grid sides must be odd, got " + std::to_string(entries_.rows()) + "x" +
                           std::to_string(entries_.cols()));
    }
  }
  GridSignal(int rows, int cols) : GridSignal(Eigen::MatrixXcd::Zero(rows, cols)) {}

  int rows() const { return static_cast<int>(entries_.rows()); }
  int cols() const { return static_cast<int>(entries_.cols()); }
  const cplx& operator()(int j, int l) const { return entries_(j, l); }
  cplx& operator()(int j, int l) { return entries_(j, l); }
  const Eigen::MatrixXcd& entries() const { return entries_; }

 private:
  Eigen::MatrixXcd entries_;
};

/// Hermitian 2-level Toeplitz matrix stored by its lags t[d1, d2].
///
/// Only d1 >= 0 is stored. Within the d1 = 0 row the entries with d2 < 0
/// mirror d2 > 0 by conjugation and t[0, 0] is real; the setters keep that
/// invariant so every lag array describes a Hermitian matrix.
class TwoLevelToeplitz {
 public:
  TwoLevelToeplitz() = default;
  TwoLevelToeplitz(int m1, int m2)
      : m1_(m1), m2_(m2), lags_(static_cast<std::size_t>(m1) * (2 * m2 - 1), cplx(0.0)) {
    if (m1 < 1 || m2 < 1) throw DimensionError("Toeplitz half-sizes must be positive");
  }
  explicit TwoLevelToeplitz(const LiftDimensions& dims) : TwoLevelToeplitz(dims.m1, dims.m2) {}

  int m1() const { return m1_; }
  int m2() const { return m2_; }
  int side() const { return m1_ * m2_; }

  /// t[d1, d2] for |d1| < m1, |d2| < m2.
  cplx lag(int d1, int d2) const {
    if (d1 < 0) return std::conj(lags_[index(-d1, -d2)]);
    return lags_[index(d1, d2)];
  }

  void set_lag(int d1, int d2, cplx value) {
    if (d1 < 0) {
      d1 = -d1;
      d2 = -d2;
      value = std::conj(value);
    }
    if (d1 == 0 && d2 == 0) value = cplx(value.real(), 0.0);
    lags_[index(d1, d2)] = value;
    if (d1 == 0) lags_[index(0, -d2)] = std::conj(value);
  }

  bool same_shape(const LiftDimensions& dims) const { return m1_ == dims.m1 && m2_ == dims.m2; }

 private:
  std::size_t index(int d1, int d2) const {
    if (d1 >= m1_ || d2 <= -m2_ || d2 >= m2_) {
      throw DimensionError("Toeplitz lag (" + std::to_string(d1) + ", " + std::to_string(d2) +
                           ") out of range");
    }
    return static_cast<std::size_t>(d1) * (2 * m2_ - 1) + static_cast<std::size_t>(d2 + m2_ - 1);
  }

  int m1_ = 0;
  int m2_ = 0;
  std::vector<cplx> lags_;
};

}  // namespace chirpid
