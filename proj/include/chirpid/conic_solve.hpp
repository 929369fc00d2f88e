// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chirpid/errors.hpp"
#include "chirpid/lift_types.hpp"

namespace chirpid {

/// [[Re h, -Im h], [Im h, Re h]]; PSD iff h is, each eigenvalue doubled.
inline Eigen::MatrixXd complex_to_real_embed(const Eigen::MatrixXcd& h, double tol = 1e-12) {
  if (h.rows() != h.cols()) throw StructureError("embedding needs a square matrix");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > tol * scale) {
    throw StructureError("matrix is not Hermitian to tolerance");
  }
  const Eigen::Index n = h.rows();
  Eigen::MatrixXd out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = h.real();
  out.topRightCorner(n, n) = -h.imag();
  out.bottomLeftCorner(n, n) = h.imag();
  out.bottomRightCorner(n, n) = h.real();
  return out;
}

namespace sdp {

using BlockMatrices = std::vector<Eigen::MatrixXd>;

/// One upper-triangle coefficient (row <= col) of a symmetric block; the
/// mirrored entry is implied.
struct Entry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Standard-form SDP:  min <C, X>  s.t.  <A_i, X> = b_i,  X = diag(X_1, ...) PSD.
/// Its dual is  max b'y  s.t.  sum_i y_i A_i + Z = C,  Z PSD.
struct SdpProblem {
  struct Constraint {
    std::vector<Entry> entries;
    double rhs = 0.0;
  };

  std::vector<int> block_sizes;
  std::vector<Entry> objective;
  std::vector<Constraint> constraints;

  int num_constraints() const { return static_cast<int>(constraints.size()); }

  void validate() const {
    if (block_sizes.empty()) throw StructureError("an SDP needs at least one cone");
    for (int s : block_sizes) {
      if (s < 1) throw StructureError("cone sizes must be positive");
    }
    auto check = [&](const Entry& e) {
      if (e.block < 0 || e.block >= static_cast<int>(block_sizes.size())) {
        throw StructureError("entry refers to a missing block");
      }
      const int n = block_sizes[static_cast<std::size_t>(e.block)];
      if (e.row < 0 || e.col < 0 || e.row >= n || e.col >= n) throw StructureError("entry outside its block");
      if (e.row > e.col) throw StructureError("entries must lie in the upper triangle (row <= col)");
      if (!std::isfinite(e.value)) throw StructureError("non-finite coefficient");
    };
    for (const auto& e : objective) check(e);
    for (const auto& c : constraints) {
      for (const auto& e : c.entries) check(e);
      if (!std::isfinite(c.rhs)) throw StructureError("non-finite right-hand side");
    }
  }
};

enum class SdpStatus {
  kOptimal,
  /// No X satisfies the constraints; a dual ray certifies it.
  kPrimalInfeasible,
  /// The dual has no feasible point (primal unbounded); a primal ray certifies it.
  kDualInfeasible,
  kNumericalFailure,
};

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal: return "optimal";
    case SdpStatus::kPrimalInfeasible: return "primal-infeasible";
    case SdpStatus::kDualInfeasible: return "dual-infeasible";
    case SdpStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

struct SdpSolution {
  SdpStatus status = SdpStatus::kNumericalFailure;
  BlockMatrices x;
  Eigen::VectorXd y;
  BlockMatrices z;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  /// ||b - A(X)|| / (1 + ||b||).
  double primal_residual = 0.0;
  /// ||C - Z - A^T y|| / (1 + ||C||).
  double dual_residual = 0.0;
  /// <X, Z> / (1 + |pobj| + |dobj|).
  double relative_gap = 0.0;
  /// On numerical failure the fields above describe the best iterate seen.
  /// Residual of the normalised infeasibility ray when status is infeasible.
  double certificate_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;

  bool optimal() const { return status == SdpStatus::kOptimal; }
  bool infeasible() const {
    return status == SdpStatus::kPrimalInfeasible || status == SdpStatus::kDualInfeasible;
  }
};

struct SdpOptions {
  double tolerance = 1e-9;
  double infeasibility_tolerance = 1e-8;
  int max_iterations = 120;
  /// Give up when the best iterate has not improved for this many steps.
  int no_progress_iterations = 8;
  /// Per-iteration progress on stderr.
  bool verbose = false;
};

/// Linear map X -> (<A_i, X>)_i over a product of PSD blocks.
class ConstraintOperator {
 public:
  virtual ~ConstraintOperator() = default;
  virtual int num_constraints() const = 0;
  virtual const std::vector<int>& block_sizes() const = 0;
  /// (<A_i, X>)_i
  virtual Eigen::VectorXd apply(const BlockMatrices& x) const = 0;
  /// sum_i y_i A_i as dense blocks.
  virtual BlockMatrices adjoint(const Eigen::VectorXd& y) const = 0;
  /// M_ij = sum over blocks of <A_i, W A_j W>.
  virtual Eigen::MatrixXd schur(const BlockMatrices& w) const = 0;
  /// Frobenius norm of A_i restricted to each block: result(i, block).
  virtual Eigen::MatrixXd block_norms() const = 0;
};

/// Computes one block's contribution to the Schur matrix; takes the scaling
/// matrix W of that block and the (unscaled) operator rows.
using SchurBlockKernel = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& w)>;

/// Constraint operator backed by per-row sparse coefficient lists. Rows are
/// normalised to unit Frobenius norm; `row_scale()` holds the factors.
class SparseOperator final : public ConstraintOperator {
 public:
  explicit SparseOperator(const SdpProblem& problem)
      : block_sizes_(problem.block_sizes),
        rows_(static_cast<std::size_t>(problem.num_constraints())),
        kernels_(problem.block_sizes.size()) {
    const int m = problem.num_constraints();
    row_scale_ = Eigen::VectorXd::Ones(m);
    block_norms_ = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(block_sizes_.size()));
    for (int i = 0; i < m; ++i) {
      auto& row = rows_[static_cast<std::size_t>(i)];
      row.resize(block_sizes_.size());
      for (const auto& e : problem.constraints[static_cast<std::size_t>(i)].entries) {
        if (e.value == 0.0) continue;
        row[static_cast<std::size_t>(e.block)].push_back({e.row, e.col, e.value});
      }
      double total = 0.0;
      for (std::size_t b = 0; b < block_sizes_.size(); ++b) {
        double sq = 0.0;
        for (const auto& c : row[b]) sq += (c.row == c.col ? 1.0 : 2.0) * c.value * c.value;
        block_norms_(i, static_cast<Eigen::Index>(b)) = std::sqrt(sq);
        total += sq;
      }
      if (total == 0.0) throw StructureError("constraint " + std::to_string(i) + " has no coefficients");
      row_scale_(i) = 1.0 / std::sqrt(total);
      block_norms_.row(i) *= row_scale_(i);
    }
  }

  int num_constraints() const override { return static_cast<int>(rows_.size()); }
  const std::vector<int>& block_sizes() const override { return block_sizes_; }
  const Eigen::VectorXd& row_scale() const { return row_scale_; }

  /// Replaces the generic Schur computation of one block. The kernel must
  /// return the contribution of the unscaled rows.
  void set_schur_kernel(int block, SchurBlockKernel kernel) {
    kernels_.at(static_cast<std::size_t>(block)) = std::move(kernel);
  }

  Eigen::VectorXd apply(const BlockMatrices& x) const override {
    Eigen::VectorXd out(num_constraints());
    for (int i = 0; i < num_constraints(); ++i) {
      double acc = 0.0;
      const auto& row = rows_[static_cast<std::size_t>(i)];
      for (std::size_t b = 0; b < row.size(); ++b) {
        const auto& xb = x[b];
        for (const auto& c : row[b]) acc += (c.row == c.col ? 1.0 : 2.0) * c.value * xb(c.row, c.col);
      }
      out(i) = acc * row_scale_(i);
    }
    return out;
  }

  BlockMatrices adjoint(const Eigen::VectorXd& y) const override {
    BlockMatrices out;
    for (int s : block_sizes_) out.push_back(Eigen::MatrixXd::Zero(s, s));
    for (int i = 0; i < num_constraints(); ++i) {
      const double yi = y(i) * row_scale_(i);
      if (yi == 0.0) continue;
      const auto& row = rows_[static_cast<std::size_t>(i)];
      for (std::size_t b = 0; b < row.size(); ++b) {
        auto& ob = out[b];
        for (const auto& c : row[b]) {
          ob(c.row, c.col) += yi * c.value;
          if (c.row != c.col) ob(c.col, c.row) += yi * c.value;
        }
      }
    }
    return out;
  }

  Eigen::MatrixXd schur(const BlockMatrices& w) const override {
    const int m = num_constraints();
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t b = 0; b < block_sizes_.size(); ++b) {
      if (kernels_[b]) {
        total += kernels_[b](w[b]);
      } else {
        total += generic_schur_block(b, w[b]);
      }
    }
    // Row normalisation: M_scaled = D M D.
    return row_scale_.asDiagonal() * total * row_scale_.asDiagonal();
  }

  /// Unscaled contribution of one block computed from the sparse rows:
  /// for each i, D_i = W A_i W, then M_ij = <A_j, D_i>.
  Eigen::MatrixXd generic_schur_block(std::size_t b, const Eigen::MatrixXd& w) const {
    const int m = num_constraints();
    const Eigen::Index n = block_sizes_[b];
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
    std::vector<int> touched;
    std::vector<int> slot(static_cast<std::size_t>(n), -1);
    Eigen::MatrixXd aw;
    Eigen::MatrixXd wcols;
    for (int i = 0; i < m; ++i) {
      const auto& ri = rows_[static_cast<std::size_t>(i)][b];
      if (ri.empty()) continue;
      touched.clear();
      for (const auto& c : ri) {
        for (int idx : {c.row, c.col}) {
          if (slot[static_cast<std::size_t>(idx)] < 0) {
            slot[static_cast<std::size_t>(idx)] = static_cast<int>(touched.size());
            touched.push_back(idx);
          }
        }
      }
      const auto k = static_cast<Eigen::Index>(touched.size());
      // (A_i W) restricted to the touched rows.
      aw.setZero(k, n);
      for (const auto& c : ri) {
        aw.row(slot[static_cast<std::size_t>(c.row)]) += c.value * w.row(c.col);
        if (c.row != c.col) aw.row(slot[static_cast<std::size_t>(c.col)]) += c.value * w.row(c.row);
      }
      wcols.resize(n, k);
      for (Eigen::Index t = 0; t < k; ++t) wcols.col(t) = w.col(touched[static_cast<std::size_t>(t)]);
      const Eigen::MatrixXd d = wcols * aw;
      for (int idx : touched) slot[static_cast<std::size_t>(idx)] = -1;
      for (int j = i; j < m; ++j) {
        double acc = 0.0;
        for (const auto& c : rows_[static_cast<std::size_t>(j)][b]) {
          acc += (c.row == c.col ? 1.0 : 2.0) * c.value * d(c.row, c.col);
        }
        out(i, j) = acc;
        out(j, i) = acc;
      }
    }
    return out;
  }

  Eigen::MatrixXd block_norms() const override { return block_norms_; }

 private:
  struct Coef {
    int row;
    int col;
    double value;
  };

  std::vector<int> block_sizes_;
  std::vector<std::vector<std::vector<Coef>>> rows_;
  std::vector<SchurBlockKernel> kernels_;
  Eigen::VectorXd row_scale_;
  Eigen::MatrixXd block_norms_;
};

namespace detail {

inline double inner(const BlockMatrices& a, const BlockMatrices& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k].cwiseProduct(b[k]).sum();
  return acc;
}

inline double frobenius(const BlockMatrices& a) { return std::sqrt(inner(a, a)); }

inline void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

/// Largest alpha in (0, inf] with X + alpha dX PSD, given X = L L^T.
inline double max_step(const Eigen::MatrixXd& chol_lower, const Eigen::MatrixXd& dx) {
  const auto tri = chol_lower.triangularView<Eigen::Lower>();
  Eigen::MatrixXd t = tri.solve(dx);
  t = tri.solve(t.transpose()).eval();
  symmetrize(t);
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t, Eigen::EigenvaluesOnly).eigenvalues()(0);
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

/// Nesterov-Todd scaling of one block: W Z W = X, with G^{-1} X G^{-T} =
/// G^T Z G = diag(lambda) and W = G G^T.
struct NtScaling {
  Eigen::MatrixXd g;
  Eigen::MatrixXd g_inv;
  Eigen::MatrixXd w;
  Eigen::VectorXd lambda;
  Eigen::MatrixXd chol_x;
  Eigen::MatrixXd chol_z;
  bool ok = false;
};

inline NtScaling nt_scaling(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) {
  NtScaling s;
  Eigen::LLT<Eigen::MatrixXd> lx(x);
  Eigen::LLT<Eigen::MatrixXd> lz(z);
  if (lx.info() != Eigen::Success || lz.info() != Eigen::Success) return s;
  s.chol_x = lx.matrixL();
  s.chol_z = lz.matrixL();
  const Eigen::MatrixXd prod = s.chol_z.transpose() * s.chol_x;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(prod, Eigen::ComputeFullU | Eigen::ComputeFullV);
  s.lambda = svd.singularValues();
  if (!(s.lambda.minCoeff() > 0.0)) return s;
  const Eigen::VectorXd isqrt = s.lambda.cwiseSqrt().cwiseInverse();
  s.g = s.chol_x * svd.matrixV() * isqrt.asDiagonal();
  // G^{-1} = diag(sqrt(lambda)) V^T L^{-1}
  const Eigen::MatrixXd lt_inv_v =
      s.chol_x.transpose().triangularView<Eigen::Upper>().solve(svd.matrixV());
  s.g_inv = s.lambda.cwiseSqrt().asDiagonal() * lt_inv_v.transpose();
  s.w = s.g * s.g.transpose();
  symmetrize(s.w);
  s.ok = true;
  return s;
}

}  // namespace detail

/// Infeasible-start primal-dual path following with NT scaling and a
/// Mehrotra predictor-corrector. `c` and `b` are in the operator's original
/// (unscaled) units; rows are rescaled internally through the operator.
inline SdpSolution solve_sdp(const SparseOperator& op, const BlockMatrices& c, const Eigen::VectorXd& b,
                             const SdpOptions& opts = {}) {
  using detail::frobenius;
  using detail::inner;
  const int m = op.num_constraints();
  const auto& sizes = op.block_sizes();
  const std::size_t nb = sizes.size();
  if (b.size() != m || c.size() != nb) throw DimensionError("objective/rhs do not match the operator");

  // Scaled data: rows have unit norm; b and C are further divided by their norms.
  const Eigen::VectorXd bs_raw = b.cwiseProduct(op.row_scale());
  const double norm_b = std::max(1.0, bs_raw.norm());
  const double norm_c = std::max(1.0, frobenius(c));
  const Eigen::VectorXd bs = bs_raw / norm_b;
  BlockMatrices cs = c;
  for (auto& blk : cs) blk /= norm_c;
  const double bs_norm = bs.norm();
  const double cs_norm = frobenius(cs);

  int n_total = 0;
  for (int s : sizes) n_total += s;

  const Eigen::MatrixXd bnorms = op.block_norms();
  BlockMatrices x(nb), z(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const int n = sizes[k];
    double xi = std::max(10.0, std::sqrt(static_cast<double>(n)));
    double eta = std::max({10.0, std::sqrt(static_cast<double>(n)), cs[k].norm()});
    for (int i = 0; i < m; ++i) {
      const double an = bnorms(i, static_cast<Eigen::Index>(k));
      xi = std::max(xi, n * (1.0 + std::abs(bs(i))) / (1.0 + an));
      eta = std::max(eta, an);
    }
    x[k] = xi * Eigen::MatrixXd::Identity(n, n);
    z[k] = eta * Eigen::MatrixXd::Identity(n, n);
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);

  SdpSolution sol;
  auto finish = [&](SdpStatus status, int iter) {
    sol.status = status;
    sol.iterations = iter;
    sol.x = x;
    sol.z = z;
    for (auto& blk : sol.x) blk *= norm_b;
    for (auto& blk : sol.z) blk *= norm_c;
    sol.y = y.cwiseProduct(op.row_scale()) * norm_c;
    sol.primal_objective = inner(cs, x) * norm_b * norm_c;
    sol.dual_objective = bs.dot(y) * norm_b * norm_c;
    return sol;
  };
  // Best iterate by max(gap, pinf, dinf), returned when the method stalls.
  struct Snapshot {
    BlockMatrices x, z;
    Eigen::VectorXd y;
    double measure = std::numeric_limits<double>::infinity();
    double gap = 0.0, pinf = 0.0, dinf = 0.0;
    int iter = 0;
  } best;
  auto fail = [&](int iter) {
    if (std::isfinite(best.measure)) {
      x = best.x;
      z = best.z;
      y = best.y;
      sol.relative_gap = best.gap;
      sol.primal_residual = best.pinf;
      sol.dual_residual = best.dinf;
    }
    return finish(SdpStatus::kNumericalFailure, iter);
  };

  int stalled = 0;
  double best_ray = std::numeric_limits<double>::infinity();
  int last_ray_iter = 0;
  for (int iter = 0; iter <= opts.max_iterations; ++iter) {
    const Eigen::VectorXd rp = bs - op.apply(x);
    BlockMatrices aty = op.adjoint(y);
    BlockMatrices rd(nb);
    for (std::size_t k = 0; k < nb; ++k) rd[k] = cs[k] - z[k] - aty[k];
    const double pobj = inner(cs, x);
    const double dobj = bs.dot(y);
    const double xz = inner(x, z);
    const double mu = xz / n_total;

    sol.primal_residual = rp.norm() / (1.0 + bs_norm);
    sol.dual_residual = frobenius(rd) / (1.0 + cs_norm);
    sol.relative_gap = std::max(xz, std::abs(pobj - dobj)) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (opts.verbose) {
      std::fprintf(stderr, "  ipm %3d  pobj % .10e  dobj % .10e  gap %.2e  pinf %.2e  dinf %.2e\n", iter,
                   pobj * norm_b * norm_c, dobj * norm_b * norm_c, sol.relative_gap, sol.primal_residual,
                   sol.dual_residual);
    }
    const double measure = std::max({sol.relative_gap, sol.primal_residual, sol.dual_residual});
    if (measure <= opts.tolerance) return finish(SdpStatus::kOptimal, iter);
    double ray_res = std::numeric_limits<double>::infinity();
    // Dual ray: b'y > 0 with A^T y + Z ~ C bounded.
    if (dobj > 0.0) {
      BlockMatrices ray = aty;
      for (std::size_t k = 0; k < nb; ++k) ray[k] += z[k];
      const double res = frobenius(ray) / dobj;
      ray_res = std::min(ray_res, res);
      if (res < opts.infeasibility_tolerance) {
        sol.certificate_residual = res;
        return finish(SdpStatus::kPrimalInfeasible, iter);
      }
    }
    // Primal ray: <C, X> < 0 with A(X) bounded.
    if (pobj < 0.0) {
      const double res = op.apply(x).norm() / (-pobj);
      ray_res = std::min(ray_res, res);
      if (res < opts.infeasibility_tolerance) {
        sol.certificate_residual = res;
        return finish(SdpStatus::kDualInfeasible, iter);
      }
    }
    // A diverging iterate that keeps sharpening a ray is still progress.
    if (ray_res < 0.5 * best_ray) {
      best_ray = ray_res;
      last_ray_iter = iter;
    }
    if (measure < best.measure) {
      best = {x, z, y, measure, sol.relative_gap, sol.primal_residual, sol.dual_residual, iter};
    } else if (iter - std::max(best.iter, last_ray_iter) >= opts.no_progress_iterations) {
      return fail(iter);
    }
    if (iter == opts.max_iterations) break;

    std::vector<detail::NtScaling> nt(nb);
    BlockMatrices w(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      nt[k] = detail::nt_scaling(x[k], z[k]);
      if (!nt[k].ok) return fail(iter);
      w[k] = nt[k].w;
    }
    Eigen::MatrixXd schur = op.schur(w);
    Eigen::LLT<Eigen::MatrixXd> chol(schur);
    if (chol.info() != Eigen::Success) {
      const double bump = 1e-13 * std::max(1.0, schur.diagonal().maxCoeff());
      schur.diagonal().array() += bump;
      chol.compute(schur);
      if (chol.info() != Eigen::Success) return fail(iter);
    }

    // W Rd W is shared by predictor and corrector.
    BlockMatrices wrdw(nb);
    for (std::size_t k = 0; k < nb; ++k) wrdw[k] = w[k] * rd[k] * w[k];
    const Eigen::VectorXd a_wrdw = op.apply(wrdw);

    auto direction = [&](const BlockMatrices& rc, BlockMatrices& dx, Eigen::VectorXd& dy, BlockMatrices& dz) {
      const Eigen::VectorXd rhs = rp - op.apply(rc) + a_wrdw;
      dy = chol.solve(rhs);
      // One step of iterative refinement.
      dy += chol.solve(rhs - schur * dy);
      const BlockMatrices atdy = op.adjoint(dy);
      dz.resize(nb);
      dx.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        dz[k] = rd[k] - atdy[k];
        detail::symmetrize(dz[k]);
        dx[k] = rc[k] - w[k] * dz[k] * w[k];
        detail::symmetrize(dx[k]);
      }
      // Refine the full Newton system: the residual r = rp - A(dX) is fed
      // back with rc = rd = 0, where dX = W A^T(dy) W has no cancellation.
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXd r = rp - op.apply(dx);
        Eigen::VectorXd ddy = chol.solve(r);
        ddy += chol.solve(r - schur * ddy);
        const BlockMatrices at = op.adjoint(ddy);
        for (std::size_t k = 0; k < nb; ++k) {
          Eigen::MatrixXd corr = w[k] * at[k] * w[k];
          detail::symmetrize(corr);
          dx[k] += corr;
          dz[k] -= at[k];
        }
        dy += ddy;
      }
    };
    auto step_lengths = [&](const BlockMatrices& dx, const BlockMatrices& dz) {
      double ap = std::numeric_limits<double>::infinity();
      double ad = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, detail::max_step(nt[k].chol_x, dx[k]));
        ad = std::min(ad, detail::max_step(nt[k].chol_z, dz[k]));
      }
      return std::pair{ap, ad};
    };

    // Predictor.
    BlockMatrices rc(nb);
    for (std::size_t k = 0; k < nb; ++k) rc[k] = -x[k];
    BlockMatrices dx, dz;
    Eigen::VectorXd dy;
    direction(rc, dx, dy, dz);
    auto [ap, ad] = step_lengths(dx, dz);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double xz_pred = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      xz_pred += (x[k] + ap * dx[k]).cwiseProduct(z[k] + ad * dz[k]).sum();
    }
    const double expon = std::max(1.0, 3.0 * std::min(ap, ad) * std::min(ap, ad));
    const double sigma = std::min(1.0, std::pow(std::max(xz_pred, 0.0) / xz, expon));

    // Corrector, in the NT-scaled space where X~ = Z~ = diag(lambda).
    for (std::size_t k = 0; k < nb; ++k) {
      const auto& s = nt[k];
      const Eigen::MatrixXd dxs = s.g_inv * dx[k] * s.g_inv.transpose();
      const Eigen::MatrixXd dzs = s.g.transpose() * dz[k] * s.g;
      Eigen::MatrixXd h = -0.5 * (dxs * dzs + dzs.transpose() * dxs.transpose());
      h.diagonal().array() += sigma * mu;
      h.diagonal() -= s.lambda.cwiseProduct(s.lambda);
      const Eigen::Index n = h.rows();
      Eigen::MatrixXd u(n, n);
      for (Eigen::Index col = 0; col < n; ++col)
        for (Eigen::Index row = 0; row < n; ++row) u(row, col) = 2.0 * h(row, col) / (s.lambda(row) + s.lambda(col));
      rc[k] = s.g * u * s.g.transpose();
      detail::symmetrize(rc[k]);
    }
    direction(rc, dx, dy, dz);
    std::tie(ap, ad) = step_lengths(dx, dz);
    const double gamma = 0.9 + 0.09 * std::min({1.0, ap, ad});
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);

    // The step-length estimate loses accuracy once X or Z is badly
    // conditioned; shorten the step until the new iterate factors.
    auto advance = [&](BlockMatrices& v, const BlockMatrices& dv, double& alpha) {
      BlockMatrices trial(nb);
      for (int attempt = 0; attempt < 30; ++attempt) {
        bool ok = true;
        for (std::size_t k = 0; k < nb && ok; ++k) {
          trial[k] = v[k] + alpha * dv[k];
          detail::symmetrize(trial[k]);
          ok = Eigen::LLT<Eigen::MatrixXd>(trial[k]).info() == Eigen::Success;
        }
        if (ok) {
          v = std::move(trial);
          return;
        }
        alpha *= 0.8;
      }
      alpha = 0.0;
    };
    advance(x, dx, ap);
    advance(z, dz, ad);
    y += ad * dy;

    stalled = (std::max(ap, ad) < 1e-6) ? stalled + 1 : 0;
    if (stalled >= 3) return fail(iter + 1);
  }
  return fail(opts.max_iterations);
}

/// Dense objective blocks of a problem (upper entries mirrored).
inline BlockMatrices dense_objective(const SdpProblem& problem) {
  BlockMatrices c;
  for (int s : problem.block_sizes) c.push_back(Eigen::MatrixXd::Zero(s, s));
  for (const auto& e : problem.objective) {
    auto& blk = c[static_cast<std::size_t>(e.block)];
    blk(e.row, e.col) += e.value;
    if (e.row != e.col) blk(e.col, e.row) += e.value;
  }
  return c;
}

inline Eigen::VectorXd rhs_vector(const SdpProblem& problem) {
  Eigen::VectorXd b(problem.num_constraints());
  for (int i = 0; i < problem.num_constraints(); ++i) b(i) = problem.constraints[static_cast<std::size_t>(i)].rhs;
  return b;
}

inline SdpSolution solve_sdp(const SdpProblem& problem, double tol = 1e-9) {
  problem.validate();
  SdpOptions opts;
  opts.tolerance = tol;
  const SparseOperator op(problem);
  return solve_sdp(op, dense_objective(problem), rhs_vector(problem), opts);
}

/// Sparse text dump: header lines "blocks", block sizes, rhs; then one
/// coefficient per line as "matrix block row col value" with matrix 0 = C
/// and i >= 1 = A_i, 1-based indices, upper triangle only.
inline void write_sparse_sdp(std::ostream& os, const SdpProblem& problem) {
  char buf[96];
  os << problem.num_constraints() << "\n" << problem.block_sizes.size() << "\n";
  for (std::size_t k = 0; k < problem.block_sizes.size(); ++k) os << (k ? " " : "") << problem.block_sizes[k];
  os << "\n";
  for (int i = 0; i < problem.num_constraints(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", problem.constraints[static_cast<std::size_t>(i)].rhs);
    os << (i ? " " : "") << buf;
  }
  os << "\n";
  auto emit = [&](int mat, const Entry& e) {
    std::snprintf(buf, sizeof buf, "%d %d %d %d %.17g\n", mat, e.block + 1, e.row + 1, e.col + 1, e.value);
    os << buf;
  };
  for (const auto& e : problem.objective) emit(0, e);
  for (int i = 0; i < problem.num_constraints(); ++i) {
    for (const auto& e : problem.constraints[static_cast<std::size_t>(i)].entries) emit(i + 1, e);
  }
}

}  // namespace sdp
}  // namespace chirpid
