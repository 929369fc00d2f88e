// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chirpid/chirp_model.hpp"
#include "chirpid/errors.hpp"

namespace chirpid {

/// Exact inversion from three samples of one chirp:
///   s = y0,  f = arg(y0^-3 y1^4 y2^-1) / 4 pi,  tau = arg(y0 y1^-2 y2) / 4 pi.
/// The exponents of f are the ones that cancel s; with y2 instead of y2^-1
/// the phase would be 2 pi (6 f + 8 tau). Valid for |f| < 1/4 and
/// |tau| < 1/4; outside that range f and tau alias.
inline ChirpComponent single_chirp_closed_form(const SampleVector& samples) {
  if (samples.length() < 3) throw ArityError("the closed form needs N >= 3 samples");
  const cplx y0 = samples[0], y1 = samples[1], y2 = samples[2];
  if (y0 == cplx(0.0) || y1 == cplx(0.0) || y2 == cplx(0.0)) {
    throw DivisionError("closed form divides by y[0], y[1] and y[2]");
  }
  // Phases are combined additively to avoid overflow in the powers.
  const double a0 = std::arg(y0), a1 = std::arg(y1), a2 = std::arg(y2);
  const double pf = std::arg(std::polar(1.0, -3.0 * a0 + 4.0 * a1 - a2));
  const double pt = std::arg(std::polar(1.0, a0 - 2.0 * a1 + a2));
  ChirpComponent c;
  c.amplitude = y0;
  c.freq = pf / (4.0 * std::numbers::pi);
  c.rate = pt / (4.0 * std::numbers::pi);
  return c;
}

/// Box search over (f_1..f_K, tau_1..tau_K) with geometric refinement.
struct GridSearchSpec {
  /// [lo, hi] per frequency and per rate, one entry per component.
  std::vector<std::pair<double, double>> freq_ranges;
  std::vector<std::pair<double, double>> rate_ranges;
  int freq_steps = 41;
  int rate_steps = 41;
  int refinements = 3;
  static constexpr double kMaxCells = 1e8;

  int k() const { return static_cast<int>(freq_ranges.size()); }

  double cells() const {
    return std::pow(static_cast<double>(freq_steps), k()) * std::pow(static_cast<double>(rate_steps), k());
  }

  void validate() const {
    if (freq_ranges.empty() || freq_ranges.size() != rate_ranges.size()) {
      throw ParameterError("grid spec needs one frequency and one rate range per component");
    }
    if (k() > 2) throw ArityError("grid oracle is limited to K <= 2");
    if (freq_steps < 2 || rate_steps < 2) throw ParameterError("grid needs at least 2 steps per axis");
    if (refinements < 0) throw ParameterError("refinement levels must be >= 0");
    for (const auto& r : freq_ranges)
      if (!(r.first <= r.second)) throw ParameterError("empty frequency range");
    for (const auto& r : rate_ranges)
      if (!(r.first <= r.second)) throw ParameterError("empty rate range");
    if (cells() > kMaxCells) throw ParameterError("grid exceeds 1e8 cells per refinement");
  }
};

struct GridOracleResult {
  std::vector<ChirpComponent> components;
  /// Least-squares residual per level, the first being the coarse grid.
  std::vector<double> residual_by_level;
};

namespace detail {

/// Residual of the best amplitude fit for fixed parameters.
inline double ls_residual(const std::vector<std::pair<double, double>>& fr, const SampleVector& y,
                          std::vector<cplx>* amps = nullptr) {
  const int n = y.length();
  const auto k = static_cast<Eigen::Index>(fr.size());
  Eigen::MatrixXcd b(n, k);
  for (Eigen::Index c = 0; c < k; ++c)
    for (int r = 0; r < n; ++r)
      b(r, c) = unit_phasor(fr[static_cast<std::size_t>(c)].first * r +
                            fr[static_cast<std::size_t>(c)].second * static_cast<double>(r) * r);
  const auto qr = b.colPivHouseholderQr();
  const Eigen::VectorXcd s = qr.solve(y.values());
  if (amps) amps->assign(s.data(), s.data() + k);
  return (b * s - y.values()).norm();
}

}  // namespace detail

/// Exhaustive least-squares search; ties keep the lexicographically smallest
/// grid cell, so the result does not depend on evaluation order.
inline GridOracleResult grid_oracle(const SampleVector& samples, int k, const GridSearchSpec& spec) {
  spec.validate();
  if (k != spec.k()) throw ArityError("k does not match the grid spec");
  if (samples.length() < 2 * k) throw ArityError("grid oracle needs N >= 2K");
  auto fr_lo = spec.freq_ranges;
  auto tr_lo = spec.rate_ranges;
  GridOracleResult out;
  std::vector<std::pair<double, double>> best(static_cast<std::size_t>(k));
  double best_res = std::numeric_limits<double>::infinity();
  const int axes = 2 * k;
  for (int level = 0; level <= spec.refinements; ++level) {
    std::vector<int> steps(static_cast<std::size_t>(axes));
    std::vector<std::pair<double, double>> ranges(static_cast<std::size_t>(axes));
    for (int c = 0; c < k; ++c) {
      ranges[static_cast<std::size_t>(c)] = fr_lo[static_cast<std::size_t>(c)];
      ranges[static_cast<std::size_t>(k + c)] = tr_lo[static_cast<std::size_t>(c)];
      steps[static_cast<std::size_t>(c)] = spec.freq_steps;
      steps[static_cast<std::size_t>(k + c)] = spec.rate_steps;
    }
    auto node = [&](int axis, int i) {
      const auto& r = ranges[static_cast<std::size_t>(axis)];
      return r.first + (r.second - r.first) * i / (steps[static_cast<std::size_t>(axis)] - 1);
    };
    std::vector<int> idx(static_cast<std::size_t>(axes), 0);
    std::vector<std::pair<double, double>> fr(static_cast<std::size_t>(k));
    bool have_level_best = false;
    std::vector<std::pair<double, double>> level_best;
    double level_res = std::numeric_limits<double>::infinity();
    // Odometer over the grid with the first axis most significant, so
    // strict improvement keeps the lexicographically smallest minimiser.
    while (true) {
      for (int c = 0; c < k; ++c) fr[static_cast<std::size_t>(c)] = {node(c, idx[static_cast<std::size_t>(c)]),
                                                                     node(k + c, idx[static_cast<std::size_t>(k + c)])};
      const double res = detail::ls_residual(fr, samples);
      if (!have_level_best || res < level_res) {
        level_res = res;
        level_best = fr;
        have_level_best = true;
      }
      int axis = axes - 1;
      while (axis >= 0 && ++idx[static_cast<std::size_t>(axis)] == steps[static_cast<std::size_t>(axis)]) {
        idx[static_cast<std::size_t>(axis)] = 0;
        --axis;
      }
      if (axis < 0) break;
    }
    // A refined grid need not contain the incumbent itself; keep it unless
    // strictly beaten.
    if (level == 0 || level_res < best_res) {
      best_res = level_res;
      best = level_best;
    }
    out.residual_by_level.push_back(best_res);
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      const auto shrink = [](std::pair<double, double>& r, const std::pair<double, double>& bounds, double centre) {
        const double half = 0.05 * (r.second - r.first);
        r = {std::max(bounds.first, centre - half), std::min(bounds.second, centre + half)};
      };
      shrink(fr_lo[c], spec.freq_ranges[c], best[c].first);
      shrink(tr_lo[c], spec.rate_ranges[c], best[c].second);
    }
  }
  std::vector<cplx> amps;
  detail::ls_residual(best, samples, &amps);
  for (int c = 0; c < k; ++c) {
    out.components.push_back({amps[static_cast<std::size_t>(c)], best[static_cast<std::size_t>(c)].first,
                              best[static_cast<std::size_t>(c)].second});
  }
  return out;
}

/// N x N discrete chirp Fourier transform,
///   X[k, m] = N^{-1/2} sum_n y[n] exp(-i 2 pi (m n^2 + k n) / N),
/// indexed by frequency bin k and rate bin m.
struct DcftSpectrum {
  int n = 0;
  Eigen::MatrixXcd values;

  /// (k, m) of the largest magnitude; ties go to the smallest (k, m).
  std::pair<int, int> peak() const {
    std::pair<int, int> best{0, 0};
    double mag = -1.0;
    for (int k = 0; k < n; ++k) {
      for (int m = 0; m < n; ++m) {
        const double v = std::abs(values(k, m));
        if (v > mag) {
          mag = v;
          best = {k, m};
        }
      }
    }
    return best;
  }

  /// Peak bins as (f, tau) in cycles, wrapped to (-1/2, 1/2].
  std::pair<double, double> peak_parameters() const {
    const auto [k, m] = peak();
    return {wrap_cycles(static_cast<double>(k) / n), wrap_cycles(static_cast<double>(m) / n)};
  }

  void write_csv(std::ostream& os) const {
    os << "k,m,magnitude\n";
    char buf[64];
    for (int k = 0; k < n; ++k) {
      for (int m = 0; m < n; ++m) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", k, m, std::abs(values(k, m)));
        os << buf;
      }
    }
  }
};

inline DcftSpectrum dcft(const SampleVector& samples) {
  const int n = samples.length();
  DcftSpectrum out;
  out.n = n;
  out.values = Eigen::MatrixXcd::Zero(n, n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < n; ++k) {
    for (int m = 0; m < n; ++m) {
      cplx acc = 0.0;
      for (int t = 0; t < n; ++t) {
        // Exponent reduced modulo N in integers before the division.
        const long long e = (static_cast<long long>(m) * t % n * t + static_cast<long long>(k) * t) % n;
        acc += samples[t] * unit_phasor(-static_cast<double>(e) / n);
      }
      out.values(k, m) = acc * norm;
    }
  }
  return out;
}

}  // namespace chirpid
