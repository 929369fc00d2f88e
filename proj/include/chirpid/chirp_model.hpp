// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chirpid/errors.hpp"
#include "chirpid/lift_types.hpp"

namespace chirpid {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Two (f, tau) pairs closer than this in both coordinates are the same atom.
inline constexpr double kDistinctTolerance = 1e-9;

/// Maps a value in cycles to the principal interval (-1/2, 1/2].
inline double wrap_cycles(double x) {
  double w = x - std::round(x);
  if (w <= -0.5) w += 1.0;
  if (w > 0.5) w -= 1.0;
  return w;
}

/// exp(i 2 pi cycles), with the integer part removed before the trig call.
inline cplx unit_phasor(double cycles) {
  const double r = cycles - std::round(cycles);
  return {std::cos(kTwoPi * r), std::sin(kTwoPi * r)};
}

/// One linear chirp: complex amplitude, initial frequency (cycles/sample) and
/// rate (cycles/sample^2).
struct ChirpComponent {
  cplx amplitude{1.0, 0.0};
  double freq = 0.0;
  double rate = 0.0;

  /// Phase of the n-th sample in cycles.
  double phase_cycles(double n) const { return freq * n + rate * (n * n); }
};

/// K >= 1 chirps sharing the rate bound delta in (0, 1/2).
class ChirpMixture {
 public:
  ChirpMixture(std::vector<ChirpComponent> components, double delta)
      : components_(std::move(components)), delta_(delta) {
    if (components_.empty()) throw ArityError("a chirp mixture needs at least one component");
    if (!(delta_ > 0.0 && delta_ < 0.5)) {
      throw ParameterError("rate bound delta must lie in (0, 1/2), got " + std::to_string(delta_));
    }
    for (const auto& c : components_) {
      if (!(std::abs(c.freq) <= 0.5)) {
        throw ParameterError("initial frequency outside [-1/2, 1/2]: " + std::to_string(c.freq));
      }
      if (!(std::abs(c.rate) <= delta_)) {
        throw ParameterError("chirp rate " + std::to_string(c.rate) + " exceeds delta " +
                             std::to_string(delta_));
      }
      if (c.amplitude == cplx(0.0)) throw ParameterError("component amplitude must be nonzero");
    }
    for (std::size_t a = 0; a < components_.size(); ++a) {
      for (std::size_t b = a + 1; b < components_.size(); ++b) {
        const double df = std::abs(wrap_cycles(components_[a].freq - components_[b].freq));
        const double dr = std::abs(components_[a].rate - components_[b].rate);
        if (std::max(df, dr) <= kDistinctTolerance) {
          throw ParameterError("components " + std::to_string(a) + " and " + std::to_string(b) +
                               " share the same (f, tau)");
        }
      }
    }
  }

  int size() const { return static_cast<int>(components_.size()); }
  double delta() const { return delta_; }
  const std::vector<ChirpComponent>& components() const { return components_; }
  const ChirpComponent& operator[](int k) const { return components_[static_cast<std::size_t>(k)]; }

  /// Copy sorted by (f, tau), the order used in every report.
  ChirpMixture canonical() const {
    auto sorted = components_;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.freq != b.freq ? a.freq < b.freq : a.rate < b.rate;
    });
    return ChirpMixture(std::move(sorted), delta_);
  }

 private:
  std::vector<ChirpComponent> components_;
  double delta_;
};

/// N uniformly spaced complex samples y[0..N-1].
class SampleVector {
 public:
  SampleVector() = default;
  explicit SampleVector(Eigen::VectorXcd values) : values_(std::move(values)) {
    if (values_.size() < 1) throw ArityError("a sample vector needs at least one sample");
  }

  int length() const { return static_cast<int>(values_.size()); }
  const cplx& operator[](int n) const { return values_(n); }
  const Eigen::VectorXcd& values() const { return values_; }

 private:
  Eigen::VectorXcd values_;
};

inline SampleVector synthesize_samples(std::span<const ChirpComponent> components, int n_samples) {
  if (n_samples < 1) throw ArityError("n_samples must be positive");
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n_samples);
  for (int n = 0; n < n_samples; ++n) {
    for (const auto& c : components) {
      y(n) += c.amplitude * unit_phasor(c.freq * n + c.rate * static_cast<double>(n * n));
    }
  }
  return SampleVector(std::move(y));
}

inline SampleVector synthesize_samples(const ChirpMixture& mixture, int n_samples) {
  return synthesize_samples(std::span(mixture.components()), n_samples);
}

/// Y[j, l] = sum_k s_k exp(i 2 pi (j f_k + l tau_k)). The parabola slice
/// Y[n, n^2] follows the same arithmetic as synthesize_samples.
inline GridSignal synthesize_grid(const ChirpMixture& mixture, int n1, int n2) {
  if (n1 < 1 || n2 < 1 || n1 % 2 == 0 || n2 % 2 == 0) {
    throw DimensionError("grid sides must be odd and positive");
  }
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n1, n2);
  for (int j = 0; j < n1; ++j) {
    for (int l = 0; l < n2; ++l) {
      for (const auto& c : mixture.components()) {
        y(j, l) += c.amplitude * unit_phasor(c.freq * j + c.rate * static_cast<double>(l));
      }
    }
  }
  return GridSignal(std::move(y));
}

/// Ground-truth 2-level Toeplitz certificate:
/// t[d1, d2] = sum_k |s_k| exp(i 2 pi (d1 f_k + d2 tau_k)).
inline TwoLevelToeplitz synthesize_toeplitz(const ChirpMixture& mixture, int m) {
  if (m < 3 || m % 2 == 0) throw DimensionError("certificate order M must be odd and >= 3");
  const auto dims = LiftDimensions::for_order(m);
  TwoLevelToeplitz t(dims);
  for (int d1 = 0; d1 < dims.m1; ++d1) {
    for (int d2 = -(dims.m2 - 1); d2 < dims.m2; ++d2) {
      if (d1 == 0 && d2 < 0) continue;
      cplx acc(0.0);
      for (const auto& c : mixture.components()) {
        acc += std::abs(c.amplitude) * unit_phasor(c.freq * d1 + c.rate * d2);
      }
      t.set_lag(d1, d2, acc);
    }
  }
  return t;
}

struct AmplitudeFit {
  std::vector<cplx> amplitudes;
  /// Euclidean norm of B s - y.
  double residual = 0.0;
  double condition = 0.0;
};

/// Least-squares amplitudes for fixed (f, tau) pairs, B[n, k] =
/// exp(i 2 pi (f_k n + tau_k n^2)), solved by Householder QR.
inline AmplitudeFit recover_amplitudes(std::span<const std::pair<double, double>> freqs_rates,
                                       const SampleVector& samples, double max_condition = 1e12) {
  const int n = samples.length();
  const int k = static_cast<int>(freqs_rates.size());
  if (k < 1 || k > n) {
    throw ArityError("need 1 <= K <= N for amplitude recovery (K=" + std::to_string(k) +
                     ", N=" + std::to_string(n) + ")");
  }
  Eigen::MatrixXcd basis(n, k);
  for (int col = 0; col < k; ++col) {
    const auto [f, tau] = freqs_rates[static_cast<std::size_t>(col)];
    for (int row = 0; row < n; ++row) {
      basis(row, col) = unit_phasor(f * row + tau * static_cast<double>(row * row));
    }
  }
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(basis).singularValues();
  const double condition = sv(k - 1) > 0.0 ? sv(0) / sv(k - 1) : std::numeric_limits<double>::infinity();
  if (!(condition <= max_condition)) {
    throw DegenerateBasisError("chirp basis condition number " + std::to_string(condition) +
                               " exceeds " + std::to_string(max_condition));
  }
  const Eigen::VectorXcd s = basis.householderQr().solve(samples.values());
  AmplitudeFit fit;
  fit.amplitudes.assign(s.data(), s.data() + k);
  fit.residual = (basis * s - samples.values()).norm();
  fit.condition = condition;
  return fit;
}

/// Errors of an estimate after the best one-to-one pairing with the truth.
struct MatchReport {
  /// pairing[k] is the estimate index matched to truth component k.
  std::vector<int> pairing;
  std::vector<double> freq_errors;
  std::vector<double> rate_errors;
  std::vector<double> amplitude_errors;
  double worst = 0.0;

  bool all_below(double threshold) const { return worst < threshold; }
};

/// Brute-force pairing minimising sum(|df| + |dtau|) over all K! matchings.
inline MatchReport match_error(std::span<const ChirpComponent> truth,
                               std::span<const ChirpComponent> estimate) {
  if (truth.size() != estimate.size()) {
    throw ArityError("match_error needs equal component counts (" + std::to_string(truth.size()) +
                     " vs " + std::to_string(estimate.size()) + ")");
  }
  const int k = static_cast<int>(truth.size());
  if (k > 8) throw ArityError("match_error enumerates permutations; K must be <= 8");
  auto freq_err = [&](int a, int b) {
    return std::abs(wrap_cycles(truth[static_cast<std::size_t>(a)].freq -
                                estimate[static_cast<std::size_t>(b)].freq));
  };
  auto rate_err = [&](int a, int b) {
    return std::abs(truth[static_cast<std::size_t>(a)].rate - estimate[static_cast<std::size_t>(b)].rate);
  };
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int a = 0; a < k; ++a) cost += freq_err(a, perm[a]) + rate_err(a, perm[a]);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  MatchReport report;
  report.pairing = best;
  for (int a = 0; a < k; ++a) {
    const int b = best[static_cast<std::size_t>(a)];
    report.freq_errors.push_back(freq_err(a, b));
    report.rate_errors.push_back(rate_err(a, b));
    report.amplitude_errors.push_back(
        std::abs(truth[static_cast<std::size_t>(a)].amplitude - estimate[static_cast<std::size_t>(b)].amplitude));
    report.worst = std::max({report.worst, report.freq_errors.back(), report.rate_errors.back()});
  }
  return report;
}

inline MatchReport match_error(const ChirpMixture& truth, const ChirpMixture& estimate) {
  return match_error(std::span(truth.components()), std::span(estimate.components()));
}

}  // namespace chirpid
