// SPDX-License-Identifier: Apache-2.0
// chirpid command-line tool.
//
// Exit codes: 0 converged / success, 1 invalid input (schema, usage, I/O),
// 2 not converged (iteration limit, stagnation or solver stall),
// 3 infeasible subproblem, 4 extraction inconsistency.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chirpid/experiments.hpp"
#include "chirpid/io.hpp"
#include "chirpid/oracles.hpp"
#include "chirpid/param_extract.hpp"

namespace {

using namespace chirpid;

enum Exit { kOk = 0, kInvalid = 1, kNotConverged = 2, kInfeasible = 3, kInconsistent = 4 };

struct Globals {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::optional<double> tol_rank;
  std::optional<double> tol_solver;
  std::optional<int> max_iter;
  std::optional<int> m;
  std::string tdelta_sign = "lemma2";
  bool verbose = false;
};

IterationOptions make_options(const Globals& g, IterationOptions base = {}) {
  if (g.tol_rank) base.rank_tolerance = *g.tol_rank;
  if (g.tol_solver) {
    base.solver_tolerance = *g.tol_solver;
    base.solver_accept_tolerance = std::max(base.solver_accept_tolerance, *g.tol_solver);
    base.solver_gap_accept = std::max(base.solver_gap_accept, *g.tol_solver);
  }
  if (g.max_iter) base.max_iterations = *g.max_iter;
  if (g.m) base.m_override = *g.m;
  base.tdelta_sign = g.tdelta_sign == "theorem3" ? TdeltaSign::kPlusCosine : TdeltaSign::kBandLimited;
  base.validate();
  return base;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    io::write_file(path, text);
  }
}

void print_trace(const IdentifyResult& r) {
  std::fprintf(stderr, "iteration,objective,rank_residual,solve_seconds,solver_iterations\n");
  for (const auto& t : r.diagnostics.trace) {
    std::fprintf(stderr, "%d,%.17g,%.17g,%.6f,%d\n", t.iteration, t.objective, t.rank_residual, t.solve_seconds,
                 t.solver_iterations);
  }
}

std::pair<double, double> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw SchemaError("range '" + s + "' must look like lo:hi");
  try {
    return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw SchemaError("range '" + s + "' must look like lo:hi");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chirp parameter identification from few samples"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for randomised commands")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads for Monte Carlo trials")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--tol-rank", g.tol_rank, "Rank residual at which convex iteration stops");
  app.add_option("--tol-solver", g.tol_solver, "Conic solver tolerance");
  app.add_option("--max-iter", g.max_iter, "Convex iteration limit");
  app.add_option("--m", g.m, "Override the odd lift size M");
  app.add_option("--tdelta-sign", g.tdelta_sign, "Sign of the off-diagonal taps of the rate constraint")
      ->check(CLI::IsMember({"lemma2", "theorem3"}))
      ->capture_default_str();
  app.add_flag("--verbose", g.verbose, "Print the iteration trace as CSV on stderr");

  std::string in_path, out_path;

  auto* synth = app.add_subcommand("synth", "Synthesize the samples of a scenario");
  synth->add_option("scenario", in_path, "Scenario JSON")->required();
  synth->add_option("-o,--output", out_path, "Sample JSON (default stdout)");

  int k = 0;
  double delta = 0.0;
  auto* ident = app.add_subcommand("identify", "Recover chirp parameters from samples");
  ident->add_option("samples", in_path, "Sample JSON")->required();
  ident->add_option("-k,--k", k, "Number of chirps")->required()->check(CLI::PositiveNumber);
  ident->add_option("--delta", delta, "Chirp rate bound, 0 < delta < 1/2")->required();
  ident->add_option("-o,--output", out_path, "Result JSON (default stdout)");

  auto* single = app.add_subcommand("oracle-single", "Closed-form inversion of one chirp from three samples");
  single->add_option("samples", in_path, "Sample JSON")->required();
  single->add_option("-o,--output", out_path, "Component JSON (default stdout)");

  std::vector<std::string> freq_ranges, rate_ranges;
  GridSearchSpec grid_spec;
  auto* grid = app.add_subcommand("grid-oracle", "Brute-force least-squares search for K <= 2");
  grid->add_option("samples", in_path, "Sample JSON")->required();
  grid->add_option("-k,--k", k, "Number of chirps")->required()->check(CLI::Range(1, 2));
  grid->add_option("--freq-range", freq_ranges, "lo:hi per component")->required();
  grid->add_option("--rate-range", rate_ranges, "lo:hi per component")->required();
  grid->add_option("--freq-steps", grid_spec.freq_steps)->capture_default_str();
  grid->add_option("--rate-steps", grid_spec.rate_steps)->capture_default_str();
  grid->add_option("--refinements", grid_spec.refinements)->capture_default_str();
  grid->add_option("-o,--output", out_path, "Result JSON (default stdout)");

  auto* dcft_cmd = app.add_subcommand("dcft", "Discrete chirp Fourier transform magnitudes as CSV");
  dcft_cmd->add_option("samples", in_path, "Sample JSON")->required();
  dcft_cmd->add_option("-o,--output", out_path, "CSV k,m,magnitude (default stdout)");

  McConfig mc;
  int mc_k = 2;
  double amp_width = -1, freq_width = -1, rate_width = -1;
  auto* montecarlo = app.add_subcommand("montecarlo", "Success rate of identify over random mixtures");
  montecarlo->add_option("-k,--k", mc_k, "Number of chirps; centres are the canned mixture of that order")
      ->check(CLI::Range(2, 4))
      ->capture_default_str();
  montecarlo->add_option("--n", mc.n_list, "Sample counts")->delimiter(',')->capture_default_str();
  montecarlo->add_option("--trials", mc.trials, "Trials per sample count")->check(CLI::PositiveNumber)->capture_default_str();
  montecarlo->add_option("--threshold", mc.threshold, "Success threshold on |df| and |dtau|")->capture_default_str();
  montecarlo->add_option("--amplitude-width", amp_width, "Interval length for |s| (default 0.02)");
  montecarlo->add_option("--freq-width", freq_width, "Interval length for f (default 0.2)");
  montecarlo->add_option("--rate-width", rate_width, "Interval length for tau (default 0.002)");
  montecarlo->add_option("-o,--output", out_path, "CSV N,trials,successes,rate,threshold,seed (default stdout)");

  std::string exp_name;
  std::string exp_dir = ".";
  auto* experiment = app.add_subcommand("experiment", "Canned experiments: table1, table2, fig1");
  experiment->add_option("name", exp_name, "Experiment name")->required()->check(CLI::IsMember({"table1", "table2", "fig1"}));
  experiment->add_option("--out", exp_dir, "Output directory")->capture_default_str();
  experiment->add_option("--trials", mc.trials, "Trials per N for fig1")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*synth) {
      const auto sc = io::parse_scenario_text(io::read_file(in_path), in_path);
      emit(out_path, io::samples_json(synthesize_samples(sc.mixture, sc.n_samples)));
      return kOk;
    }
    if (*ident) {
      const auto samples = io::parse_samples_text(io::read_file(in_path), in_path);
      const auto opts = make_options(g);
      const auto res = identify(samples, k, delta, opts);
      if (g.verbose) print_trace(res);
      for (const auto& w : res.diagnostics.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      emit(out_path, io::result_json(res));
      return res.converged() ? kOk : kNotConverged;
    }
    if (*single) {
      const auto samples = io::parse_samples_text(io::read_file(in_path), in_path);
      io::Writer w;
      io::write_component(w, single_chirp_closed_form(samples));
      emit(out_path, w.str());
      return kOk;
    }
    if (*grid) {
      const auto samples = io::parse_samples_text(io::read_file(in_path), in_path);
      for (const auto& s : freq_ranges) grid_spec.freq_ranges.push_back(parse_range(s));
      for (const auto& s : rate_ranges) grid_spec.rate_ranges.push_back(parse_range(s));
      const auto res = grid_oracle(samples, k, grid_spec);
      io::Writer w;
      w.open('{');
      w.key("components").open('[');
      for (const auto& c : res.components) io::write_component(w, c);
      w.close(']');
      w.key("residual_by_level").reals(res.residual_by_level);
      w.close('}');
      emit(out_path, w.str());
      return kOk;
    }
    if (*dcft_cmd) {
      const auto samples = io::parse_samples_text(io::read_file(in_path), in_path);
      const auto spec = dcft(samples);
      std::ostringstream os;
      spec.write_csv(os);
      emit(out_path, os.str());
      const auto [pk, pm] = spec.peak();
      const auto [pf, pt] = spec.peak_parameters();
      std::fprintf(stderr, "peak k=%d m=%d f=%.6g tau=%.6g |X|=%.6g\n", pk, pm, pf, pt, std::abs(spec.values(pk, pm)));
      return kOk;
    }
    if (*montecarlo) {
      mc.seed = g.seed;
      mc.jobs = g.jobs;
      mc.options = make_options(g);
      mc.distribution = McDistribution::for_order(mc_k);
      if (amp_width >= 0) mc.distribution.amplitude_width = amp_width;
      if (freq_width >= 0) mc.distribution.freq_width = freq_width;
      if (rate_width >= 0) mc.distribution.rate_width = rate_width;
      std::fprintf(stderr, "distribution: %s\n", mc.distribution.describe().c_str());
      std::ostringstream os;
      run_montecarlo(mc).write_csv(os);
      emit(out_path, os.str());
      return kOk;
    }
    if (*experiment) {
      mc.seed = g.seed;
      mc.jobs = g.jobs;
      for (const auto& p : run_experiment(exp_name, exp_dir, make_options(g), mc)) {
        std::fprintf(stderr, "wrote %s\n", p.string().c_str());
      }
      return kOk;
    }
  } catch (const InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kInfeasible;
  } catch (const ExtractionInconsistency& e) {
    std::fprintf(stderr, "extraction inconsistency: %s\n", e.what());
    return kInconsistent;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "schema error: %s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  }
  return kInvalid;
}
