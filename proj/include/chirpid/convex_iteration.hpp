// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chirpid/chirp_model.hpp"
#include "chirpid/conic_solve.hpp"
#include "chirpid/errors.hpp"
#include "chirpid/structured_lift.hpp"
#include "chirpid/structured_schur.hpp"

namespace chirpid {

/// Orthogonal projector W onto the trailing eigenspace of the certificate.
struct WeightMatrix {
  Eigen::MatrixXcd matrix;
  /// The K-th and (K+1)-th largest eigenvalues agreed to 1e-12.
  bool boundary_tie = false;

  static WeightMatrix identity(int side) { return {Eigen::MatrixXcd::Identity(side, side), false}; }
};

struct IterationOptions {
  int max_iterations = 50;
  double rank_tolerance = 1e-8;
  double solver_tolerance = 1e-9;
  /// A stalled subproblem is still used when its certificate residual is
  /// below solver_accept_tolerance and its relative gap below
  /// solver_gap_accept; the rank residual then decides convergence.
  double solver_accept_tolerance = 1e-7;
  double solver_gap_accept = 1e-3;
  std::optional<int> m_override;
  TdeltaSign tdelta_sign = TdeltaSign::kBandLimited;
  /// Use the FFT Schur kernel for the certificate block.
  bool structured_schur = true;
  /// Stagnation window: stop when the rank residual improved by less than
  /// stagnation_ratio (relative) over this many iterations.
  int stagnation_window = 5;
  double stagnation_ratio = 1e-3;
  bool verbose = false;

  void validate() const {
    if (max_iterations < 1) throw ParameterError("max_iterations must be >= 1");
    if (!(rank_tolerance > 0.0) || !(solver_tolerance > 0.0)) throw ParameterError("tolerances must be positive");
    if (!(solver_accept_tolerance >= solver_tolerance)) {
      throw ParameterError("solver_accept_tolerance must be >= solver_tolerance");
    }
    if (!(solver_gap_accept >= solver_tolerance)) throw ParameterError("solver_gap_accept must be >= solver_tolerance");
  }
};

enum class FeasibilityStatus { kConverged, kMaxIterations, kSubproblemFailed };

inline const char* to_string(FeasibilityStatus s) {
  switch (s) {
    case FeasibilityStatus::kConverged: return "converged";
    case FeasibilityStatus::kMaxIterations: return "max-iterations";
    case FeasibilityStatus::kSubproblemFailed: return "subproblem-failed";
  }
  return "unknown";
}

struct IterationRecord {
  int iteration = 0;
  /// <A^(j), W^(j-1)>
  double objective = 0.0;
  double rank_residual = 0.0;
  double solve_seconds = 0.0;
  int solver_iterations = 0;
};

struct FeasibilityResult {
  TwoLevelToeplitz t;
  GridSignal grid;
  LiftDimensions dims;
  int iterations = 0;
  double rank_residual = 0.0;
  std::vector<IterationRecord> trace;
  FeasibilityStatus status = FeasibilityStatus::kMaxIterations;
  std::vector<std::string> warnings;
  bool boundary_tie = false;

  bool converged() const { return status == FeasibilityStatus::kConverged; }
};

/// Sum of the order - k smallest eigenvalues over the trace.
inline double rank_residual(const LiftedCertificate& certificate, int k) {
  const Eigen::Index n = certificate.matrix.rows();
  if (k < 0 || k > n) throw ParameterError("rank bound outside [0, order]");
  const Eigen::VectorXd ev =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(certificate.matrix, Eigen::EigenvaluesOnly).eigenvalues();
  const double tail = ev.head(n - k).sum();
  const double trace = certificate.matrix.trace().real();
  return tail / std::max(trace, 1e-300);
}

/// Projector onto the eigenvectors of the order - k smallest eigenvalues.
inline WeightMatrix update_weight(const LiftedCertificate& certificate, int k) {
  const Eigen::Index n = certificate.matrix.rows();
  if (k < 0 || k > n) throw ParameterError("rank bound outside [0, order]");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(certificate.matrix);
  if (es.info() != Eigen::Success) throw StructureError("eigendecomposition of the certificate failed");
  const Eigen::Index tail = n - k;
  WeightMatrix w;
  const Eigen::MatrixXcd u = es.eigenvectors().leftCols(tail);
  w.matrix = u * u.adjoint();
  if (tail > 0 && k > 0) {
    const auto& ev = es.eigenvalues();
    const double scale = std::max(1.0, std::abs(ev(n - 1)));
    w.boundary_tie = std::abs(ev(tail) - ev(tail - 1)) <= 1e-12 * scale;
  }
  return w;
}

/// The weighted subproblem as a standard-form SDP whose dual variables are
/// the free real parameters of (T, Y).
///
/// Block 0 is the certificate in its real form (side `order`), block 1 the
/// real embedding of the band map (side 2 (m2 - 1)). Each constraint row is
/// the coefficient matrix of one real unknown: Re/Im of a canonical lag
/// t[d1, d2] (d1 > 0, or d1 = 0 and d2 >= 0; Im t[0, 0] is not a variable),
/// then Re/Im of each grid entry not pinned by the samples.
class WeightedSubproblem {
 public:
  enum class Kind { kLagRe, kLagIm, kGridRe, kGridIm };
  struct Variable {
    Kind kind;
    int a;
    int b;
  };

  WeightedSubproblem(const SampleVector& samples, double delta, const LiftDimensions& dims,
                     TdeltaSign sign = TdeltaSign::kBandLimited, bool structured_schur = true)
      : samples_(samples), delta_(delta), dims_(dims), sign_(sign) {
    if (!(delta > 0.0 && delta < 0.5)) throw ParameterError("delta must lie in (0, 1/2)");
    pinned_ = parabola_indices(samples.length(), dims);
    build();
    op_.emplace(problem_);
    if (structured_schur) {
      schur_kernel_.emplace(dims_, num_lag_variables(), lag_index_re_, lag_index_im_, grid_index_re_,
                            grid_index_im_, problem_.num_constraints());
      op_->set_schur_kernel(0, [this](const Eigen::MatrixXd& w) { return schur_kernel_->compute(w); });
    }
    c_ = sdp::dense_objective(problem_);
  }

  WeightedSubproblem(const WeightedSubproblem&) = delete;
  WeightedSubproblem& operator=(const WeightedSubproblem&) = delete;

  const sdp::SdpProblem& problem() const { return problem_; }
  const LiftDimensions& dims() const { return dims_; }
  const std::vector<Variable>& variables() const { return variables_; }
  int num_lag_variables() const { return num_lag_vars_; }

  /// Fills the right-hand side b_i = <F_i, W_real> for a complex weight.
  Eigen::VectorXd objective_coefficients(const Eigen::MatrixXcd& weight) const {
    sdp::BlockMatrices wb{to_real_form(weight),
                          Eigen::MatrixXd::Zero(problem_.block_sizes[1], problem_.block_sizes[1])};
    return op_->apply(wb).cwiseQuotient(op_->row_scale());
  }

  struct Solution {
    TwoLevelToeplitz t;
    GridSignal grid;
    /// <A(T, Y), W> including the constant part from the pinned samples.
    double objective = 0.0;
    sdp::SdpSolution sdp;
    /// The solver stalled and the best iterate met only the accept tolerance.
    bool reduced_accuracy = false;
  };

  Solution solve(const Eigen::MatrixXcd& weight, double tol, bool verbose = false, double accept_tol = 0.0,
                 double gap_accept = 0.0) {
    const Eigen::VectorXd b = objective_coefficients(weight);
    sdp::SdpOptions opts;
    opts.tolerance = tol;
    opts.verbose = verbose;
    Solution out;
    out.sdp = sdp::solve_sdp(*op_, c_, b, opts);
    if (out.sdp.infeasible()) {
      throw InfeasibleError(std::string("weighted subproblem is ") + sdp::to_string(out.sdp.status) +
                            " (is some chirp rate above delta?)");
    }
    out.reduced_accuracy = !out.sdp.optimal() && out.sdp.status == sdp::SdpStatus::kNumericalFailure &&
                           out.sdp.y.size() > 0 && out.sdp.dual_residual <= accept_tol &&
                           out.sdp.relative_gap <= gap_accept;
    if (!out.sdp.optimal() && !out.reduced_accuracy) {
      throw SolverFailure("conic solver stopped with status " + std::string(sdp::to_string(out.sdp.status)) +
                          " (gap " + std::to_string(out.sdp.relative_gap) + ", pinf " +
                          std::to_string(out.sdp.primal_residual) + ", dinf " +
                          std::to_string(out.sdp.dual_residual) + ")");
    }
    const Eigen::VectorXd x = -out.sdp.y;
    std::tie(out.t, out.grid) = unpack(x);
    const double constant = sdp::detail::inner(c_, {to_real_form(weight), Eigen::MatrixXd::Zero(c_[1].rows(), c_[1].cols())});
    out.objective = b.dot(x) + constant;
    return out;
  }

  /// (T, Y) from the vector of real unknowns.
  std::pair<TwoLevelToeplitz, GridSignal> unpack(const Eigen::VectorXd& x) const {
    TwoLevelToeplitz t(dims_);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(dims_.n1, dims_.n2);
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      const auto& v = variables_[i];
      const double val = x(static_cast<Eigen::Index>(i));
      switch (v.kind) {
        case Kind::kLagRe: t.set_lag(v.a, v.b, t.lag(v.a, v.b) + cplx(val, 0.0)); break;
        case Kind::kLagIm: t.set_lag(v.a, v.b, t.lag(v.a, v.b) + cplx(0.0, val)); break;
        case Kind::kGridRe: y(v.a, v.b) += cplx(val, 0.0); break;
        case Kind::kGridIm: y(v.a, v.b) += cplx(0.0, val); break;
      }
    }
    for (const auto& [row, col] : pinned_) y(row, col) = samples_[row];
    return {std::move(t), GridSignal(std::move(y))};
  }

  /// Real unknowns of a given (T, Y); the inverse of unpack on the free part.
  Eigen::VectorXd pack(const TwoLevelToeplitz& t, const GridSignal& grid) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(variables_.size()));
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      const auto& v = variables_[i];
      switch (v.kind) {
        case Kind::kLagRe: x(static_cast<Eigen::Index>(i)) = t.lag(v.a, v.b).real(); break;
        case Kind::kLagIm: x(static_cast<Eigen::Index>(i)) = t.lag(v.a, v.b).imag(); break;
        case Kind::kGridRe: x(static_cast<Eigen::Index>(i)) = grid(v.a, v.b).real(); break;
        case Kind::kGridIm: x(static_cast<Eigen::Index>(i)) = grid(v.a, v.b).imag(); break;
      }
    }
    return x;
  }

  const sdp::SparseOperator& op() const { return *op_; }
  const sdp::BlockMatrices& constant_blocks() const { return c_; }

 private:
  int lag_slot(int d1, int d2) const { return d1 * (2 * dims_.m2 - 1) + d2 + dims_.m2 - 1; }

  void build() {
    const int m1 = dims_.m1;
    const int m2 = dims_.m2;
    const int nc = dims_.block_side();
    lag_index_re_.assign(static_cast<std::size_t>(m1 * (2 * m2 - 1)), -1);
    lag_index_im_.assign(lag_index_re_.size(), -1);
    for (int d1 = 0; d1 < m1; ++d1) {
      for (int d2 = (d1 == 0 ? 0 : -(m2 - 1)); d2 < m2; ++d2) {
        lag_index_re_[static_cast<std::size_t>(lag_slot(d1, d2))] = static_cast<int>(variables_.size());
        variables_.push_back({Kind::kLagRe, d1, d2});
        if (d1 == 0 && d2 == 0) continue;
        lag_index_im_[static_cast<std::size_t>(lag_slot(d1, d2))] = static_cast<int>(variables_.size());
        variables_.push_back({Kind::kLagIm, d1, d2});
      }
    }
    num_lag_vars_ = static_cast<int>(variables_.size());
    Eigen::MatrixXi pinned = Eigen::MatrixXi::Constant(dims_.n1, dims_.n2, -1);
    for (std::size_t n = 0; n < pinned_.size(); ++n) pinned(pinned_[n].first, pinned_[n].second) = static_cast<int>(n);
    grid_index_re_ = Eigen::MatrixXi::Constant(dims_.n1, dims_.n2, -1);
    grid_index_im_ = Eigen::MatrixXi::Constant(dims_.n1, dims_.n2, -1);
    for (int a = 0; a < dims_.n1; ++a) {
      for (int b = 0; b < dims_.n2; ++b) {
        if (pinned(a, b) >= 0) continue;
        grid_index_re_(a, b) = static_cast<int>(variables_.size());
        variables_.push_back({Kind::kGridRe, a, b});
        grid_index_im_(a, b) = static_cast<int>(variables_.size());
        variables_.push_back({Kind::kGridIm, a, b});
      }
    }

    const int tsize = m2 - 1;
    problem_.block_sizes = {2 * nc, 2 * tsize};
    problem_.constraints.assign(variables_.size(), {});
    auto add = [&](int var, int block, int row, int col, double value) {
      if (var < 0 || value == 0.0) return;
      problem_.constraints[static_cast<std::size_t>(var)].entries.push_back({block, row, col, value});
    };
    auto constant = [&](int block, int row, int col, double value) {
      if (value != 0.0) problem_.objective.push_back({block, row, col, value});
    };
    // Canonical lag index and conjugation sign for an arbitrary lag.
    auto lag_vars = [&](int d1, int d2) {
      int sgn = 1;
      if (d1 < 0 || (d1 == 0 && d2 < 0)) {
        d1 = -d1;
        d2 = -d2;
        sgn = -1;
      }
      const auto s = static_cast<std::size_t>(lag_slot(d1, d2));
      return std::tuple{lag_index_re_[s], lag_index_im_[s], sgn};
    };

    // Certificate real form:
    //   [[Re T + Re H, Im T - Im H], [-Im T - Im H, Re T - Re H]].
    for (int j = 0; j < m1; ++j) {
      for (int p = 0; p < m2; ++p) {
        const int rho = j * m2 + p;
        for (int l = 0; l < m1; ++l) {
          for (int q = 0; q < m2; ++q) {
            const int sig = l * m2 + q;
            const auto [u, v, sgn] = lag_vars(j - l, p - q);
            const int a = j + l;
            const int b = p + q;
            const int pin = pinned(a, b);
            const int g = grid_index_re_(a, b);
            const int h = grid_index_im_(a, b);
            const cplx yv = pin >= 0 ? samples_[pin] : cplx(0.0);
            if (rho <= sig) {
              add(u, 0, rho, sig, 1.0);
              add(g, 0, rho, sig, 1.0);
              constant(0, rho, sig, yv.real());
              add(u, 0, nc + rho, nc + sig, 1.0);
              add(g, 0, nc + rho, nc + sig, -1.0);
              constant(0, nc + rho, nc + sig, -yv.real());
            }
            add(v, 0, rho, nc + sig, static_cast<double>(sgn));
            add(h, 0, rho, nc + sig, -1.0);
            constant(0, rho, nc + sig, -yv.imag());
          }
        }
      }
    }

    // Band map: T_d[p, q] = t0[e - 1] + c t0[e] + t0[e + 1], e = p - q,
    // embedded as [[Re, -Im], [Im, Re]].
    const double center = tdelta_center_coefficient(delta_, sign_);
    for (int p = 0; p < tsize; ++p) {
      for (int q = 0; q < tsize; ++q) {
        const int e = p - q;
        std::map<int, double> re_coef;
        std::map<int, double> im_coef;
        for (const auto& [lag, coef] : {std::pair{e - 1, 1.0}, std::pair{e, center}, std::pair{e + 1, 1.0}}) {
          const auto [u, v, sgn] = lag_vars(0, lag);
          re_coef[u] += coef;
          if (v >= 0) im_coef[v] += sgn * coef;
        }
        if (p <= q) {
          for (const auto& [var, coef] : re_coef) {
            add(var, 1, p, q, coef);
            add(var, 1, tsize + p, tsize + q, coef);
          }
        }
        for (const auto& [var, coef] : im_coef) add(var, 1, p, tsize + q, -coef);
      }
    }
  }

  SampleVector samples_;
  double delta_;
  LiftDimensions dims_;
  TdeltaSign sign_;
  std::vector<std::pair<int, int>> pinned_;
  std::vector<Variable> variables_;
  int num_lag_vars_ = 0;
  std::vector<int> lag_index_re_;
  std::vector<int> lag_index_im_;
  Eigen::MatrixXi grid_index_re_;
  Eigen::MatrixXi grid_index_im_;
  sdp::SdpProblem problem_;
  std::optional<sdp::SparseOperator> op_;
  std::optional<StructuredSchur> schur_kernel_;
  sdp::BlockMatrices c_;
};

/// Minimises <A(T, Y), W> over the PSD certificate, the band-map constraint
/// and the parabola pins.
inline std::pair<TwoLevelToeplitz, GridSignal> solve_weighted_subproblem(const SampleVector& samples, double delta,
                                                                         const WeightMatrix& w,
                                                                         const LiftDimensions& dims, double tol,
                                                                         TdeltaSign sign = TdeltaSign::kBandLimited) {
  if (w.matrix.rows() != dims.order || w.matrix.cols() != dims.order) {
    throw DimensionError("weight side does not match the certificate order");
  }
  WeightedSubproblem sub(samples, delta, dims, sign);
  auto sol = sub.solve(w.matrix, tol);
  return {std::move(sol.t), std::move(sol.grid)};
}

inline LiftedCertificate certificate_of(const TwoLevelToeplitz& t, const GridSignal& grid, const LiftDimensions& dims) {
  return assemble_certificate(t, hankel_lift(grid, dims), dims);
}

/// Convex iteration from W = I until the certificate has rank k.
inline FeasibilityResult run_feasibility(const SampleVector& samples, int k, double delta,
                                         const IterationOptions& opts = {}) {
  opts.validate();
  if (k < 1) throw ArityError("model order K must be >= 1");
  if (!(delta > 0.0 && delta < 0.5)) throw ParameterError("delta must lie in (0, 1/2)");
  const int n = samples.length();
  FeasibilityResult result;
  result.dims = lift_dimensions(n, k, opts.m_override);
  if (result.dims.below_identifiability_bound) {
    result.warnings.push_back("N=" + std::to_string(n) + " < 2K=" + std::to_string(2 * k) +
                              ": the parameters cannot be uniquely identifiable");
  }
  WeightedSubproblem sub(samples, delta, result.dims, opts.tdelta_sign, opts.structured_schur);
  WeightMatrix w = WeightMatrix::identity(result.dims.order);
  std::vector<double> history;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    WeightedSubproblem::Solution sol;
    try {
      sol = sub.solve(w.matrix, opts.solver_tolerance, opts.verbose, opts.solver_accept_tolerance,
                      opts.solver_gap_accept);
    } catch (const SolverFailure& e) {
      result.warnings.push_back(std::string("iteration ") + std::to_string(it) + ": " + e.what());
      result.status = FeasibilityStatus::kSubproblemFailed;
      if (it == 1) {
        result.t = TwoLevelToeplitz(result.dims);
        result.grid = GridSignal(result.dims.n1, result.dims.n2);
      }
      return result;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (sol.reduced_accuracy) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "iteration %d: subproblem solved to reduced accuracy (gap %.1e, pinf %.1e, dinf %.1e)",
                    it, sol.sdp.relative_gap, sol.sdp.primal_residual, sol.sdp.dual_residual);
      result.warnings.push_back(buf);
    }
    const auto cert = certificate_of(sol.t, sol.grid, result.dims);
    const double resid = rank_residual(cert, k);
    result.t = std::move(sol.t);
    result.grid = std::move(sol.grid);
    result.iterations = it;
    result.rank_residual = resid;
    result.trace.push_back({it, sol.objective, resid, secs, sol.sdp.iterations});
    if (opts.verbose) {
      std::fprintf(stderr, "iter %d objective %.6e rank_residual %.3e (%d ipm, %.2fs)\n", it, sol.objective, resid,
                   sol.sdp.iterations, secs);
    }
    if (resid <= opts.rank_tolerance) {
      result.status = FeasibilityStatus::kConverged;
      return result;
    }
    history.push_back(resid);
    const auto win = static_cast<std::size_t>(opts.stagnation_window);
    if (history.size() > win) {
      const double old = history[history.size() - 1 - win];
      if (old - resid < opts.stagnation_ratio * old) {
        result.warnings.push_back("rank residual stagnated at " + std::to_string(resid));
        break;
      }
    }
    w = update_weight(cert, k);
    result.boundary_tie = result.boundary_tie || w.boundary_tie;
  }
  result.status = FeasibilityStatus::kMaxIterations;
  return result;
}

}  // namespace chirpid
