// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "chirpid/chirp_model.hpp"
#include "chirpid/errors.hpp"
#include "chirpid/io.hpp"
#include "chirpid/param_extract.hpp"

namespace chirpid {

/// SplitMix64; portable and bit-identical on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Stream for one Monte Carlo trial. The state depends only on
  /// (seed, n, trial), so the draws do not depend on scheduling.
  static SplitMix64 for_trial(std::uint64_t seed, int n, int trial) {
    SplitMix64 mix(seed);
    const std::uint64_t base = mix.next();
    SplitMix64 key((static_cast<std::uint64_t>(static_cast<std::uint32_t>(n)) << 32) |
                   static_cast<std::uint32_t>(trial));
    return SplitMix64(base ^ key.next());
  }

 private:
  std::uint64_t state_;
};

struct CannedScenario {
  std::string label;
  std::vector<ChirpComponent> components;
  int n_samples = 0;
  double delta = 0.0;
};

/// Canned well-separated mixtures for K = 2, 3, 4 at N = 2K.
inline std::vector<CannedScenario> table1_scenarios() {
  const double pi = std::numbers::pi;
  auto s = [](double phase) { return std::polar(1.0, phase); };
  return {
      {"K2", {{s(pi / 4), 0.25, 0.02}, {s(pi / 6), -0.3, 0.012}}, 4, 0.05},
      {"K3", {{s(pi / 4), 0.0, 0.001}, {s(pi / 6), 0.33, 0.009}, {s(pi / 10), -0.34, 0.005}}, 6, 0.01},
      {"K4",
       {{s(pi / 4), 0.0, 0.001}, {s(pi / 6), 0.24, 0.004}, {s(pi / 10), 0.49, 0.006}, {s(2 * pi / 5), -0.25, 0.009}},
       8,
       0.01},
  };
}

/// Crossing, sub-Nyquist chirp pair at N = 4 and N = 9.
inline std::vector<CannedScenario> table2_scenarios() {
  const double pi = std::numbers::pi;
  const std::vector<ChirpComponent> comps{{std::polar(1.0, pi / 4), -0.1, 0.04}, {std::polar(1.0, pi / 6), 0.4, -0.01}};
  return {{"N4", comps, 4, 0.05}, {"N9", comps, 9, 0.05}};
}

/// Intervals the random mixtures are drawn from. Each parameter is uniform
/// on centre +/- width/2; phases are uniform on [0, 2 pi).
struct McDistribution {
  std::vector<ChirpComponent> centres;
  double delta = 0.05;
  double amplitude_width = 0.02;
  double freq_width = 0.2;
  double rate_width = 0.002;

  /// Defaults for K: the canned K-chirp mixture as centres.
  static McDistribution for_order(int k) {
    for (const auto& row : table1_scenarios()) {
      if (static_cast<int>(row.components.size()) == k) {
        McDistribution d;
        d.centres = row.components;
        d.delta = row.delta;
        return d;
      }
    }
    throw ParameterError("no default Monte Carlo centres for K=" + std::to_string(k) + " (K must be 2, 3 or 4)");
  }

  void validate() const {
    if (centres.empty()) throw ArityError("Monte Carlo distribution needs at least one centre");
    if (!(amplitude_width >= 0.0 && freq_width >= 0.0 && rate_width >= 0.0)) {
      throw ParameterError("interval widths must be nonnegative");
    }
    for (const auto& c : centres) {
      if (std::abs(c.amplitude) - amplitude_width / 2 <= 0.0) throw ParameterError("amplitude interval reaches zero");
      if (std::abs(c.rate) + rate_width / 2 > delta) throw ParameterError("rate interval exceeds delta");
    }
  }

  std::vector<ChirpComponent> draw(SplitMix64& rng) const {
    std::vector<ChirpComponent> out;
    for (const auto& c : centres) {
      ChirpComponent d;
      const double mag = std::abs(c.amplitude) + amplitude_width * (rng.uniform() - 0.5);
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      d.amplitude = std::polar(mag, phase);
      d.freq = c.freq + freq_width * (rng.uniform() - 0.5);
      d.rate = c.rate + rate_width * (rng.uniform() - 0.5);
      out.push_back(d);
    }
    return out;
  }

  std::string describe() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "|s| width %g, f width %g, tau width %g, delta %g", amplitude_width, freq_width,
                  rate_width, delta);
    return buf;
  }
};

struct McConfig {
  std::vector<int> n_list{4, 5, 6, 7, 8, 9};
  int trials = 100;
  std::uint64_t seed = 1;
  double threshold = 1e-6;
  int jobs = 1;
  McDistribution distribution = McDistribution::for_order(2);
  IterationOptions options;
};

struct McTrial {
  bool success = false;
  /// Largest |df| or |dtau| after matching; infinity when identify failed.
  double worst_error = std::numeric_limits<double>::infinity();
};

struct McRow {
  int n = 0;
  int trials = 0;
  int successes = 0;
  double rate() const { return trials > 0 ? static_cast<double>(successes) / trials : 0.0; }
};

struct MonteCarloReport {
  std::vector<McRow> rows;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  std::string distribution;

  const McRow& row(int n) const {
    for (const auto& r : rows)
      if (r.n == n) return r;
    throw ParameterError("no Monte Carlo row for N=" + std::to_string(n));
  }

  void write_csv(std::ostream& os) const {
    os << "N,trials,successes,rate,threshold,seed\n";
    for (const auto& r : rows) {
      os << r.n << ',' << r.trials << ',' << r.successes << ',' << io::real(r.rate()) << ','
         << io::real(threshold) << ',' << seed << '\n';
    }
  }
};

/// One seeded trial; any failure of the pipeline counts as unsuccessful.
inline McTrial run_trial(const McConfig& cfg, int n, int trial) {
  auto rng = SplitMix64::for_trial(cfg.seed, n, trial);
  const auto truth = cfg.distribution.draw(rng);
  McTrial out;
  try {
    const auto samples = synthesize_samples(std::span<const ChirpComponent>(truth), n);
    const auto res = identify(samples, static_cast<int>(truth.size()), cfg.distribution.delta, cfg.options);
    if (!res.converged() || res.components.size() != truth.size()) return out;
    const auto rep = match_error(std::span<const ChirpComponent>(truth), std::span<const ChirpComponent>(res.components));
    out.worst_error = rep.worst;
    out.success = rep.all_below(cfg.threshold);
  } catch (const Error&) {
  }
  return out;
}

/// All trials of one configuration; jobs > 1 spreads trials over threads
/// and the outcome is reduced in trial order.
inline std::vector<std::vector<McTrial>> run_trials(const McConfig& cfg) {
  if (cfg.trials < 1) throw ParameterError("trials must be >= 1");
  if (cfg.jobs < 1) throw ParameterError("jobs must be >= 1");
  cfg.distribution.validate();
  const int per_n = cfg.trials;
  const int total = per_n * static_cast<int>(cfg.n_list.size());
  std::vector<McTrial> flat(static_cast<std::size_t>(total));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < total; i = next++) {
      flat[static_cast<std::size_t>(i)] = run_trial(cfg, cfg.n_list[static_cast<std::size_t>(i / per_n)], i % per_n);
    }
  };
  const int jobs = std::min(cfg.jobs, total);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  std::vector<std::vector<McTrial>> out(cfg.n_list.size());
  for (int i = 0; i < total; ++i) out[static_cast<std::size_t>(i / per_n)].push_back(flat[static_cast<std::size_t>(i)]);
  return out;
}

inline MonteCarloReport run_montecarlo(const McConfig& cfg) {
  const auto trials = run_trials(cfg);
  MonteCarloReport rep;
  rep.threshold = cfg.threshold;
  rep.seed = cfg.seed;
  rep.distribution = cfg.distribution.describe();
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
    McRow row;
    row.n = cfg.n_list[i];
    row.trials = cfg.trials;
    for (const auto& t : trials[i]) row.successes += t.success ? 1 : 0;
    rep.rows.push_back(row);
  }
  return rep;
}

/// Outcome of identify on one canned scenario.
struct ScenarioOutcome {
  CannedScenario scenario;
  IdentifyResult result;
  MatchReport match;
  bool matched = false;
  std::string error;

  double max_error() const { return matched ? match.worst : std::numeric_limits<double>::infinity(); }
};

inline ScenarioOutcome run_scenario(const CannedScenario& sc, const IterationOptions& opts = {}) {
  ScenarioOutcome out;
  out.scenario = sc;
  try {
    const ChirpMixture mix(sc.components, sc.delta);
    out.result = identify(synthesize_samples(mix, sc.n_samples), mix.size(), sc.delta, opts);
    if (out.result.components.size() == sc.components.size()) {
      out.match = match_error(std::span<const ChirpComponent>(sc.components),
                              std::span<const ChirpComponent>(out.result.components));
      out.matched = true;
    }
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

/// Summary CSV: one row per scenario with the largest parameter error.
inline void write_summary_csv(std::ostream& os, const std::vector<ScenarioOutcome>& rows) {
  os << "scenario,K,N,delta,status,iterations,rank_residual,max_freq_error,max_rate_error,max_error\n";
  for (const auto& r : rows) {
    double mf = std::numeric_limits<double>::infinity(), mt = mf;
    if (r.matched) {
      mf = *std::max_element(r.match.freq_errors.begin(), r.match.freq_errors.end());
      mt = *std::max_element(r.match.rate_errors.begin(), r.match.rate_errors.end());
    }
    const std::string status = r.error.empty() ? std::string(to_string(r.result.diagnostics.status)) : "error";
    os << r.scenario.label << ',' << r.scenario.components.size() << ',' << r.scenario.n_samples << ','
       << io::real(r.scenario.delta) << ',' << status << ',' << r.result.diagnostics.iterations << ','
       << io::real(r.result.diagnostics.rank_residual) << ',' << io::real(mf) << ',' << io::real(mt) << ','
       << io::real(r.max_error()) << '\n';
  }
}

/// Per-component CSV: truth, estimate and absolute errors.
inline void write_components_csv(std::ostream& os, const std::vector<ScenarioOutcome>& rows) {
  os << "scenario,component,f_true,tau_true,f_est,tau_est,f_error,tau_error,amplitude_error\n";
  for (const auto& r : rows) {
    if (!r.matched) continue;
    for (std::size_t c = 0; c < r.scenario.components.size(); ++c) {
      const auto& t = r.scenario.components[c];
      const auto& e = r.result.components[static_cast<std::size_t>(r.match.pairing[c])];
      os << r.scenario.label << ',' << c << ',' << io::real(t.freq) << ',' << io::real(t.rate) << ','
         << io::real(e.freq) << ',' << io::real(e.rate) << ',' << io::real(r.match.freq_errors[c]) << ','
         << io::real(r.match.rate_errors[c]) << ',' << io::real(r.match.amplitude_errors[c]) << '\n';
    }
  }
}

/// Seed, threshold and the interval mapping used for a Monte Carlo run.
inline std::string cfg_json(const McConfig& cfg) {
  io::Writer w;
  w.open('{');
  w.key("seed").integer(static_cast<long long>(cfg.seed));
  w.key("trials").integer(cfg.trials);
  w.key("threshold").num(cfg.threshold);
  w.key("delta").num(cfg.distribution.delta);
  w.key("amplitude_width").num(cfg.distribution.amplitude_width);
  w.key("freq_width").num(cfg.distribution.freq_width);
  w.key("rate_width").num(cfg.distribution.rate_width);
  w.key("centres").open('[');
  for (const auto& c : cfg.distribution.centres) io::write_component(w, c);
  w.close(']');
  w.close('}');
  return w.str();
}

/// Runs a named experiment and writes its CSV files into dir. Returns the
/// paths written.
inline std::vector<std::filesystem::path> run_experiment(const std::string& name, const std::filesystem::path& dir,
                                                         const IterationOptions& opts, const McConfig& mc) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& file, const std::string& text) {
    const auto p = dir / file;
    io::write_file(p.string(), text);
    written.push_back(p);
  };
  if (name == "table1" || name == "table2") {
    const auto scenarios = name == "table1" ? table1_scenarios() : table2_scenarios();
    std::vector<ScenarioOutcome> rows;
    for (const auto& sc : scenarios) rows.push_back(run_scenario(sc, opts));
    std::ostringstream summary, comps;
    write_summary_csv(summary, rows);
    write_components_csv(comps, rows);
    emit(name + ".csv", summary.str());
    emit(name + "_components.csv", comps.str());
  } else if (name == "fig1") {
    McConfig cfg = mc;
    cfg.options = opts;
    std::ostringstream os;
    run_montecarlo(cfg).write_csv(os);
    emit("fig1.csv", os.str());
    emit("fig1_config.json", cfg_json(cfg));
  } else {
    throw ParameterError("unknown experiment '" + name + "' (expected table1, table2 or fig1)");
  }
  return written;
}

}  // namespace chirpid
