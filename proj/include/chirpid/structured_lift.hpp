// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chirpid/chirp_model.hpp"
#include "chirpid/errors.hpp"
#include "chirpid/lift_types.hpp"

namespace chirpid {

/// Smallest odd M >= max(N, 2K + 1), or the caller's override.
inline LiftDimensions lift_dimensions(int n_samples, int k, std::optional<int> override_m = std::nullopt) {
  if (n_samples < 1 || k < 1) throw ArityError("lift_dimensions needs N >= 1 and K >= 1");
  const int lower = std::max(n_samples, 2 * k + 1);
  int m = lower % 2 == 1 ? lower : lower + 1;
  if (override_m) {
    if (*override_m % 2 == 0 || *override_m < lower) {
      throw DimensionError("override M=" + std::to_string(*override_m) + " must be odd and >= " +
                           std::to_string(lower));
    }
    m = *override_m;
  }
  auto dims = LiftDimensions::for_order(m);
  dims.below_identifiability_bound = n_samples < 2 * k;
  return dims;
}

/// 2-level Hankel matrix H(Y): block (j, l), entry (p, q) is Y[j + l, p + q].
struct HankelLift {
  Eigen::MatrixXcd matrix;
};

/// The Hermitian block matrix [[conj(T), conj(H)], [H, T]].
struct LiftedCertificate {
  Eigen::MatrixXcd matrix;
};

inline HankelLift hankel_lift(const GridSignal& grid, const LiftDimensions& dims) {
  if (grid.rows() != dims.n1 || grid.cols() != dims.n2) {
    throw DimensionError("grid is " + std::to_string(grid.rows()) + "x" + std::to_string(grid.cols()) +
                         ", lift expects " + std::to_string(dims.n1) + "x" + std::to_string(dims.n2));
  }
  const int side = dims.block_side();
  Eigen::MatrixXcd h(side, side);
  for (int j = 0; j < dims.m1; ++j)
    for (int l = 0; l < dims.m1; ++l)
      for (int p = 0; p < dims.m2; ++p)
        for (int q = 0; q < dims.m2; ++q) h(j * dims.m2 + p, l * dims.m2 + q) = grid(j + l, p + q);
  return {std::move(h)};
}

/// Adjoint of hankel_lift: out[a, b] sums weights over j + l = a, p + q = b.
inline Eigen::MatrixXcd hankel_adjoint(const Eigen::MatrixXcd& weights, const LiftDimensions& dims) {
  const int side = dims.block_side();
  if (weights.rows() != side || weights.cols() != side) {
    throw DimensionError("adjoint weights must be " + std::to_string(side) + " square");
  }
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dims.n1, dims.n2);
  for (int j = 0; j < dims.m1; ++j)
    for (int l = 0; l < dims.m1; ++l)
      for (int p = 0; p < dims.m2; ++p)
        for (int q = 0; q < dims.m2; ++q) out(j + l, p + q) += weights(j * dims.m2 + p, l * dims.m2 + q);
  return out;
}

inline Eigen::MatrixXcd materialize_toeplitz(const TwoLevelToeplitz& t, const LiftDimensions& dims) {
  if (!t.same_shape(dims)) throw DimensionError("lag array does not match the lift dimensions");
  const int side = dims.block_side();
  Eigen::MatrixXcd out(side, side);
  for (int j = 0; j < dims.m1; ++j)
    for (int l = 0; l < dims.m1; ++l)
      for (int p = 0; p < dims.m2; ++p)
        for (int q = 0; q < dims.m2; ++q) out(j * dims.m2 + p, l * dims.m2 + q) = t.lag(j - l, p - q);
  return out;
}

/// Reads the lags back off the first block column and the first row of each
/// block; inverse of materialize_toeplitz on 2-level Toeplitz input.
inline TwoLevelToeplitz toeplitz_from_matrix(const Eigen::MatrixXcd& mat, const LiftDimensions& dims) {
  TwoLevelToeplitz t(dims);
  for (int d1 = 0; d1 < dims.m1; ++d1) {
    for (int d2 = -(dims.m2 - 1); d2 < dims.m2; ++d2) {
      if (d1 == 0 && d2 < 0) continue;
      const int p = std::max(d2, 0);
      const int q = p - d2;
      t.set_lag(d1, d2, mat(d1 * dims.m2 + p, q));
    }
  }
  return t;
}

/// Which sign multiplies the centre term of the band map.
enum class TdeltaSign {
  /// T[p, q+1] - 2 cos(2 pi delta) T[p, q] + T[p+1, q]; confines rates to [-delta, delta].
  kBandLimited,
  /// Same with +2 cos(...); kept for auditing, vacuous for delta < 1/4.
  kPlusCosine,
};

inline double tdelta_center_coefficient(double delta, TdeltaSign sign) {
  const double c = 2.0 * std::cos(kTwoPi * delta);
  return sign == TdeltaSign::kBandLimited ? -c : c;
}

/// Toeplitz band map of the zero-block-lag slice t[0, .], side m2 - 1.
inline Eigen::MatrixXcd tdelta_map(const TwoLevelToeplitz& t, double delta, const LiftDimensions& dims,
                                   TdeltaSign sign = TdeltaSign::kBandLimited) {
  if (!(delta > 0.0 && delta < 0.5)) throw ParameterError("delta must lie in (0, 1/2)");
  if (!t.same_shape(dims)) throw DimensionError("lag array does not match the lift dimensions");
  const int side = dims.m2 - 1;
  const double center = tdelta_center_coefficient(delta, sign);
  Eigen::MatrixXcd out(side, side);
  for (int p = 0; p < side; ++p) {
    for (int q = 0; q < side; ++q) {
      const int e = p - q;
      out(p, q) = t.lag(0, e - 1) + center * t.lag(0, e) + t.lag(0, e + 1);
    }
  }
  return out;
}

inline LiftedCertificate assemble_certificate(const TwoLevelToeplitz& t, const HankelLift& lift,
                                              const LiftDimensions& dims) {
  const int side = dims.block_side();
  if (lift.matrix.rows() != side || lift.matrix.cols() != side) {
    throw DimensionError("Hankel lift does not match the lift dimensions");
  }
  const Eigen::MatrixXcd tm = materialize_toeplitz(t, dims);
  Eigen::MatrixXcd a(2 * side, 2 * side);
  a.topLeftCorner(side, side) = tm.conjugate();
  a.topRightCorner(side, side) = lift.matrix.conjugate();
  a.bottomLeftCorner(side, side) = lift.matrix;
  a.bottomRightCorner(side, side) = tm;
  return {std::move(a)};
}

/// Grid positions (n, n^2) pinned by the samples.
inline std::vector<std::pair<int, int>> parabola_indices(int n_samples, const LiftDimensions& dims) {
  if (n_samples < 1 || n_samples > dims.m) {
    throw DimensionError("N=" + std::to_string(n_samples) + " samples do not fit a lift of order M=" +
                         std::to_string(dims.m));
  }
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  for (int n = 0; n < n_samples; ++n) out.emplace_back(n, n * n);
  return out;
}

// The certificate satisfies A = J conj(A) J with J = [[0, I], [I, 0]]. In the
// orthonormal basis V = [[I, iI], [I, -iI]] / sqrt(2) it becomes real
// symmetric of the same side, so rank and eigenvalues carry over exactly.

/// Re(V^H A V) for a 2n x 2n complex matrix.
inline Eigen::MatrixXd to_real_form(const Eigen::MatrixXcd& a) {
  const Eigen::Index n = a.rows() / 2;
  if (a.rows() != a.cols() || a.rows() % 2 != 0) throw DimensionError("real form needs an even square matrix");
  const auto a11 = a.topLeftCorner(n, n);
  const auto a12 = a.topRightCorner(n, n);
  const auto a21 = a.bottomLeftCorner(n, n);
  const auto a22 = a.bottomRightCorner(n, n);
  Eigen::MatrixXd r(2 * n, 2 * n);
  r.topLeftCorner(n, n) = 0.5 * (a11 + a12 + a21 + a22).real();
  r.topRightCorner(n, n) = -0.5 * (a11 - a12 + a21 - a22).imag();
  r.bottomLeftCorner(n, n) = 0.5 * (a11 + a12 - a21 - a22).imag();
  r.bottomRightCorner(n, n) = 0.5 * (a11 - a12 - a21 + a22).real();
  return r;
}

/// V R V^H, the inverse of to_real_form on J-real matrices.
inline Eigen::MatrixXcd from_real_form(const Eigen::MatrixXd& r) {
  const Eigen::Index n = r.rows() / 2;
  if (r.rows() != r.cols() || r.rows() % 2 != 0) throw DimensionError("real form needs an even square matrix");
  const cplx i(0.0, 1.0);
  const Eigen::MatrixXcd r11 = r.topLeftCorner(n, n).cast<cplx>();
  const Eigen::MatrixXcd r12 = r.topRightCorner(n, n).cast<cplx>();
  const Eigen::MatrixXcd r21 = r.bottomLeftCorner(n, n).cast<cplx>();
  const Eigen::MatrixXcd r22 = r.bottomRightCorner(n, n).cast<cplx>();
  Eigen::MatrixXcd a(2 * n, 2 * n);
  a.topLeftCorner(n, n) = 0.5 * (r11 + r22 + i * (r21 - r12));
  a.topRightCorner(n, n) = 0.5 * (r11 - r22 + i * (r21 + r12));
  a.bottomLeftCorner(n, n) = 0.5 * (r11 - r22 - i * (r21 + r12));
  a.bottomRightCorner(n, n) = 0.5 * (r11 + r22 - i * (r21 - r12));
  return a;
}

/// Row-major dump, one row per line, entries written as "re+imi".
inline void write_matrix_text(std::ostream& os, const Eigen::MatrixXcd& m) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double im = m(r, c).imag();
      os << (c ? " " : "") << m(r, c).real() << (std::signbit(im) ? "-" : "+") << std::abs(im) << "i";
    }
    os << '\n';
  }
  os.flags(flags);
  os.precision(prec);
}

}  // namespace chirpid
