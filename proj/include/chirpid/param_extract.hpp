// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chirpid/chirp_model.hpp"
#include "chirpid/convex_iteration.hpp"
#include "chirpid/errors.hpp"
#include "chirpid/structured_lift.hpp"

namespace chirpid {

/// One atom of a 2-level Vandermonde decomposition.
struct Atom {
  double power = 0.0;
  double freq = 0.0;
  double rate = 0.0;
};

struct DecompositionResult {
  std::vector<Atom> atoms;
  /// ||T - sum_k p_k a_k a_k^H||_F / ||T||_F.
  double residual = 0.0;
  /// The Psi_f eigenvalues collided and the randomised combination was used.
  bool used_fallback = false;
};

struct ExtractOptions {
  /// Eigenvalues of Psi_f closer than this count as repeated.
  double repeat_tolerance = 1e-8;
  /// T has numerical rank below K when lambda_K <= this * lambda_max.
  double rank_floor = 1e-11;
  int fallback_attempts = 3;
  std::uint64_t fallback_seed = 0x9e3779b97f4a7c15ULL;
};

namespace detail {

/// Row indices of the m1 m2 block that have a successor under a shift of
/// the block index (level 1) or of the within-block index (level 2).
inline std::pair<std::vector<int>, std::vector<int>> shift_rows(const LiftDimensions& dims, int level) {
  std::vector<int> from, to;
  for (int j = 0; j < dims.m1; ++j) {
    for (int p = 0; p < dims.m2; ++p) {
      const int jn = level == 1 ? j + 1 : j;
      const int pn = level == 1 ? p : p + 1;
      if (jn >= dims.m1 || pn >= dims.m2) continue;
      from.push_back(j * dims.m2 + p);
      to.push_back(jn * dims.m2 + pn);
    }
  }
  return {std::move(from), std::move(to)};
}

/// Least-squares Psi with U[from] Psi = U[to].
inline Eigen::MatrixXcd shift_operator(const Eigen::MatrixXcd& u, const LiftDimensions& dims, int level) {
  const auto [from, to] = shift_rows(dims, level);
  Eigen::MatrixXcd a(static_cast<Eigen::Index>(from.size()), u.cols());
  Eigen::MatrixXcd b(a.rows(), u.cols());
  for (std::size_t r = 0; r < from.size(); ++r) {
    a.row(static_cast<Eigen::Index>(r)) = u.row(from[r]);
    b.row(static_cast<Eigen::Index>(r)) = u.row(to[r]);
  }
  return a.completeOrthogonalDecomposition().solve(b);
}

inline double min_pairwise_gap(const Eigen::VectorXcd& ev) {
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < ev.size(); ++a)
    for (Eigen::Index b = a + 1; b < ev.size(); ++b) gap = std::min(gap, std::abs(ev(a) - ev(b)));
  return gap;
}

inline double angle_cycles(cplx z) { return wrap_cycles(std::arg(z) / kTwoPi); }

}  // namespace detail

/// Powers of fixed atoms by nonnegative least squares on the lags of T.
inline std::vector<double> fit_powers(const TwoLevelToeplitz& t, const std::vector<std::pair<double, double>>& fr,
                                      const LiftDimensions& dims) {
  const int m1 = dims.m1;
  const int m2 = dims.m2;
  const auto k = static_cast<Eigen::Index>(fr.size());
  const Eigen::Index rows = static_cast<Eigen::Index>(m1) * (2 * m2 - 1);
  Eigen::MatrixXd a(2 * rows, k);
  Eigen::VectorXd b(2 * rows);
  Eigen::Index r = 0;
  for (int d1 = 0; d1 < m1; ++d1) {
    for (int d2 = -(m2 - 1); d2 < m2; ++d2, ++r) {
      const cplx lag = t.lag(d1, d2);
      b(r) = lag.real();
      b(rows + r) = lag.imag();
      for (Eigen::Index c = 0; c < k; ++c) {
        const cplx z = unit_phasor(d1 * fr[static_cast<std::size_t>(c)].first +
                                   d2 * fr[static_cast<std::size_t>(c)].second);
        a(r, c) = z.real();
        a(rows + r, c) = z.imag();
      }
    }
  }
  // Active-set NNLS on a tiny problem: drop the most negative coefficient
  // until all are nonnegative.
  std::vector<Eigen::Index> active(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) active[static_cast<std::size_t>(c)] = c;
  std::vector<double> p(static_cast<std::size_t>(k), 0.0);
  Eigen::VectorXd full = a.colPivHouseholderQr().solve(b);
  const double scale = std::max(full.cwiseAbs().maxCoeff(), 1e-300);
  if (full.minCoeff() < -1e-8 * scale) {
    throw DegeneracyError("atom power fit is negative (" + std::to_string(full.minCoeff()) + ")");
  }
  while (!active.empty()) {
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t c = 0; c < active.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(active[c]);
    const Eigen::VectorXd sol = sub.colPivHouseholderQr().solve(b);
    Eigen::Index worst = 0;
    const double mn = sol.minCoeff(&worst);
    if (mn >= 0.0) {
      for (std::size_t c = 0; c < active.size(); ++c) p[static_cast<std::size_t>(active[c])] = sol(static_cast<Eigen::Index>(c));
      break;
    }
    active.erase(active.begin() + worst);
  }
  return p;
}

inline TwoLevelToeplitz toeplitz_from_atoms(const std::vector<Atom>& atoms, const LiftDimensions& dims) {
  TwoLevelToeplitz t(dims);
  for (int d1 = 0; d1 < dims.m1; ++d1) {
    for (int d2 = (d1 == 0 ? 0 : -(dims.m2 - 1)); d2 < dims.m2; ++d2) {
      cplx acc = 0.0;
      for (const auto& a : atoms) acc += a.power * unit_phasor(d1 * a.freq + d2 * a.rate);
      if (d1 == 0 && d2 == 0) acc = acc.real();
      t.set_lag(d1, d2, acc);
    }
  }
  return t;
}

/// Vandermonde decomposition of a PSD 2-level Toeplitz matrix of rank k via
/// two shift-invariance operators sharing one eigenbasis.
inline DecompositionResult cf_decompose(const TwoLevelToeplitz& t, int k, const LiftDimensions& dims,
                                        const ExtractOptions& opts = {}) {
  if (k < 1) throw ArityError("cf_decompose needs k >= 1");
  if (k >= std::min(dims.m1, dims.m2)) {
    throw DimensionError("k=" + std::to_string(k) + " must be below min(m1, m2)=" +
                         std::to_string(std::min(dims.m1, dims.m2)));
  }
  const Eigen::MatrixXcd tm = materialize_toeplitz(t, dims);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(tm);
  if (es.info() != Eigen::Success) throw StructureError("eigendecomposition of T failed");
  const Eigen::Index n = tm.rows();
  const auto& ev = es.eigenvalues();
  const double lmax = ev(n - 1);
  if (!(lmax > 0.0) || ev(n - k) <= opts.rank_floor * lmax) {
    throw RankDeficiencyError("T has numerical rank below " + std::to_string(k));
  }
  if (ev(0) < -1e-7 * std::max(tm.trace().real(), 1e-300)) {
    throw StructureError("T is not positive semidefinite");
  }
  const Eigen::MatrixXcd u = es.eigenvectors().rightCols(k);
  const Eigen::MatrixXcd psi_f = detail::shift_operator(u, dims, 1);
  const Eigen::MatrixXcd psi_t = detail::shift_operator(u, dims, 2);

  DecompositionResult out;
  Eigen::MatrixXcd basis;
  {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(psi_f);
    if (ces.info() == Eigen::Success && detail::min_pairwise_gap(ces.eigenvalues()) > opts.repeat_tolerance) {
      basis = ces.eigenvectors();
    }
  }
  if (basis.size() == 0) {
    out.used_fallback = true;
    std::mt19937_64 rng(opts.fallback_seed);
    std::uniform_real_distribution<double> phase(0.0, 1.0);
    for (int attempt = 0; attempt < opts.fallback_attempts && basis.size() == 0; ++attempt) {
      const cplx rho = unit_phasor(phase(rng));
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(psi_f + rho * psi_t);
      if (ces.info() == Eigen::Success && detail::min_pairwise_gap(ces.eigenvalues()) > opts.repeat_tolerance) {
        basis = ces.eigenvectors();
      }
    }
    if (basis.size() == 0) throw DegeneracyError("could not pair the shift-invariance eigenvalues");
  }
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(basis);
  const Eigen::VectorXcd df = lu.solve(psi_f * basis).diagonal();
  const Eigen::VectorXcd dt = lu.solve(psi_t * basis).diagonal();
  std::vector<std::pair<double, double>> fr;
  for (Eigen::Index c = 0; c < k; ++c) fr.push_back({detail::angle_cycles(df(c)), detail::angle_cycles(dt(c))});
  const auto powers = fit_powers(t, fr, dims);
  for (std::size_t c = 0; c < fr.size(); ++c) out.atoms.push_back({powers[c], fr[c].first, fr[c].second});
  std::sort(out.atoms.begin(), out.atoms.end(), [](const Atom& a, const Atom& b) {
    return a.freq != b.freq ? a.freq < b.freq : a.rate < b.rate;
  });
  const Eigen::MatrixXcd rebuilt = materialize_toeplitz(toeplitz_from_atoms(out.atoms, dims), dims);
  out.residual = (tm - rebuilt).norm() / std::max(tm.norm(), 1e-300);
  return out;
}

struct IdentifyDiagnostics {
  int iterations = 0;
  double rank_residual = 0.0;
  double ls_residual = 0.0;
  double cf_residual = 0.0;
  FeasibilityStatus status = FeasibilityStatus::kMaxIterations;
  /// False when the sample count cannot determine (f, tau) separately.
  bool identifiable = true;
  std::vector<IterationRecord> trace;
  std::vector<std::string> warnings;
};

struct IdentifyResult {
  /// Reported as extracted; rates may exceed delta (see warnings). Empty
  /// when the sample count cannot identify the parameters.
  std::vector<ChirpComponent> components;
  /// For non-identifiable inputs: one of the many consistent solutions.
  std::vector<ChirpComponent> representative;
  /// For K=1, N=2: f+tau wrapped to (-1/2, 1/2], the only determined
  /// combination of f and tau.
  std::optional<double> freq_plus_rate;
  IdentifyDiagnostics diagnostics;
  LiftDimensions dims;

  bool converged() const { return diagnostics.status == FeasibilityStatus::kConverged; }
};

/// Warnings for sample counts that cannot determine the parameters.
inline std::vector<std::string> identifiability_warnings(int n, int k) {
  std::vector<std::string> out;
  if (k == 1 && n < 3) {
    out.push_back("N=" + std::to_string(n) +
                  " samples of a single chirp determine only f+tau, not f and tau individually; at least 3 are needed");
  } else if (n < 2 * k) {
    out.push_back("N=" + std::to_string(n) + " < 2K=" + std::to_string(2 * k) +
                  ": the parameters cannot be uniquely identifiable");
  }
  return out;
}

/// Samples -> feasibility -> Vandermonde decomposition -> amplitudes.
inline IdentifyResult identify(const SampleVector& samples, int k, double delta, const IterationOptions& opts = {}) {
  IdentifyResult out;
  const auto feas = run_feasibility(samples, k, delta, opts);
  auto& diag = out.diagnostics;
  out.dims = feas.dims;
  diag.iterations = feas.iterations;
  diag.rank_residual = feas.rank_residual;
  diag.status = feas.status;
  diag.trace = feas.trace;
  diag.warnings = feas.warnings;
  const int n = samples.length();
  diag.identifiable = n >= 2 * k && !(k == 1 && n < 3);
  // run_feasibility already reports N < 2K; the single-chirp case is stricter.
  if (k == 1 && n < 3) {
    const auto extra = identifiability_warnings(n, k);
    diag.warnings.insert(diag.warnings.end(), extra.begin(), extra.end());
  }
  if (feas.boundary_tie) diag.warnings.push_back("eigenvalue tie at the rank boundary during the weight update");
  if (feas.status == FeasibilityStatus::kSubproblemFailed) return out;

  DecompositionResult dec;
  try {
    dec = cf_decompose(feas.t, k, feas.dims);
  } catch (const Error& e) {
    if (feas.converged()) throw;
    diag.warnings.push_back(std::string("extraction after non-convergence failed: ") + e.what());
    return out;
  }
  diag.cf_residual = dec.residual;
  std::vector<std::pair<double, double>> fr;
  for (const auto& a : dec.atoms) fr.push_back({a.freq, a.rate});
  const auto fit = recover_amplitudes(fr, samples);
  diag.ls_residual = fit.residual;
  for (std::size_t c = 0; c < fr.size(); ++c) {
    out.components.push_back({fit.amplitudes[c], fr[c].first, fr[c].second});
    if (std::abs(fr[c].second) > delta + 1e-6) {
      diag.warnings.push_back("component " + std::to_string(c) + " has rate " + std::to_string(fr[c].second) +
                              " beyond delta " + std::to_string(delta));
    }
  }
  const double ynorm = samples.values().norm();
  if (fit.residual > 1e-4 * ynorm) {
    if (feas.converged()) {
      throw ExtractionInconsistency("least-squares residual " + std::to_string(fit.residual) +
                                    " exceeds 1e-4 ||y|| = " + std::to_string(1e-4 * ynorm));
    }
    diag.warnings.push_back("least-squares residual " + std::to_string(fit.residual) + " is large");
  }
  if (!diag.identifiable) {
    if (k == 1 && n == 2) {
      out.freq_plus_rate = wrap_cycles(out.components[0].freq + out.components[0].rate);
    }
    out.representative = std::move(out.components);
    out.components.clear();
  }
  return out;
}

}  // namespace chirpid
