// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chirpid/chirp_model.hpp"
#include "chirpid/convex_iteration.hpp"
#include "chirpid/errors.hpp"
#include "chirpid/param_extract.hpp"

namespace chirpid::io {

using nlohmann::json;

/// Formats a real with 17 significant digits; non-finite values become null.
inline std::string real(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quoted(const std::string& s) { return json(s).dump(); }

/// Minimal streaming writer with fixed two-space indentation.
class Writer {
 public:
  Writer& open(char c) {
    sep();
    out_ << c;
    first_.push_back(true);
    return *this;
  }
  Writer& close(char c) {
    const bool empty = first_.back();
    first_.pop_back();
    if (!empty) newline();
    out_ << c;
    return *this;
  }
  Writer& key(const std::string& k) {
    sep();
    out_ << quoted(k) << ": ";
    pending_key_ = true;
    return *this;
  }
  Writer& raw(const std::string& v) {
    sep();
    out_ << v;
    return *this;
  }
  Writer& num(double v) { return raw(real(v)); }
  Writer& integer(long long v) { return raw(std::to_string(v)); }
  Writer& str(const std::string& v) { return raw(quoted(v)); }
  Writer& boolean(bool v) { return raw(v ? "true" : "false"); }
  /// Arrays of reals on one line.
  Writer& reals(const std::vector<double>& v) {
    sep();
    out_ << '[';
    for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? ", " : "") << real(v[i]);
    out_ << ']';
    return *this;
  }
  std::string str() const { return out_.str() + "\n"; }

 private:
  void newline() { out_ << '\n' << std::string(2 * first_.size(), ' '); }
  void sep() {
    if (pending_key_) {
      pending_key_ = false;
      return;
    }
    if (first_.empty()) return;
    if (!first_.back()) out_ << ',';
    first_.back() = false;
    newline();
  }

  std::ostringstream out_;
  std::vector<bool> first_;
  bool pending_key_ = false;
};

namespace detail {

inline void require_object(const json& j, const std::string& what, const std::set<std::string>& required,
                           const std::set<std::string>& optional = {}) {
  if (!j.is_object()) throw SchemaError(what + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!required.count(k) && !optional.count(k)) throw SchemaError(what + ": unknown field \"" + k + "\"");
  }
  for (const auto& k : required) {
    if (!j.contains(k)) throw SchemaError(what + ": missing field \"" + k + "\"");
  }
}

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw SchemaError(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(what + " must be finite");
  return v;
}

inline long long integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) throw SchemaError(what + " must be an integer");
  return j.get<long long>();
}

inline json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(origin + ": malformed JSON (" + e.what() + ")");
  }
}

}  // namespace detail

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

// ---- components and mixtures ----

inline void write_component(Writer& w, const ChirpComponent& c) {
  w.open('{');
  w.key("re").num(c.amplitude.real());
  w.key("im").num(c.amplitude.imag());
  w.key("f").num(c.freq);
  w.key("tau").num(c.rate);
  w.close('}');
}

inline ChirpComponent parse_component(const json& j, const std::string& what) {
  detail::require_object(j, what, {"re", "im", "f", "tau"});
  ChirpComponent c;
  c.amplitude = {detail::number(j["re"], what + ".re"), detail::number(j["im"], what + ".im")};
  c.freq = detail::number(j["f"], what + ".f");
  c.rate = detail::number(j["tau"], what + ".tau");
  return c;
}

inline std::vector<ChirpComponent> parse_components(const json& j, const std::string& what) {
  if (!j.is_array()) throw SchemaError(what + " must be an array");
  std::vector<ChirpComponent> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_component(j[i], what + "[" + std::to_string(i) + "]"));
  return out;
}

inline void write_mixture(Writer& w, const ChirpMixture& m) {
  w.open('{');
  w.key("delta").num(m.delta());
  w.key("components").open('[');
  for (const auto& c : m.components()) write_component(w, c);
  w.close(']');
  w.close('}');
}

inline std::string mixture_json(const ChirpMixture& m) {
  Writer w;
  write_mixture(w, m);
  return w.str();
}

inline ChirpMixture parse_mixture(const json& j, const std::string& what = "mixture") {
  detail::require_object(j, what, {"delta", "components"});
  auto comps = parse_components(j["components"], what + ".components");
  if (comps.empty()) throw SchemaError(what + ".components must not be empty");
  try {
    return ChirpMixture(std::move(comps), detail::number(j["delta"], what + ".delta"));
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(what + ": " + e.what());
  }
}

// ---- samples ----

inline std::string samples_json(const SampleVector& s) {
  Writer w;
  std::vector<double> re, im;
  for (int n = 0; n < s.length(); ++n) {
    re.push_back(s[n].real());
    im.push_back(s[n].imag());
  }
  w.open('{');
  w.key("n").integer(s.length());
  w.key("re").reals(re);
  w.key("im").reals(im);
  w.close('}');
  return w.str();
}

inline SampleVector parse_samples(const json& j, const std::string& what = "samples") {
  detail::require_object(j, what, {"n", "re", "im"});
  const long long n = detail::integer(j["n"], what + ".n");
  const auto& re = j["re"];
  const auto& im = j["im"];
  if (!re.is_array() || !im.is_array()) throw SchemaError(what + ": re and im must be arrays");
  if (n < 1) throw SchemaError(what + ".n must be positive");
  if (re.size() != static_cast<std::size_t>(n) || im.size() != static_cast<std::size_t>(n)) {
    throw SchemaError(what + ": re/im lengths must equal n");
  }
  Eigen::VectorXcd v(n);
  for (long long i = 0; i < n; ++i) {
    v(i) = {detail::number(re[static_cast<std::size_t>(i)], what + ".re"),
            detail::number(im[static_cast<std::size_t>(i)], what + ".im")};
  }
  return SampleVector(std::move(v));
}

inline SampleVector parse_samples_text(const std::string& text, const std::string& origin = "samples") {
  return parse_samples(detail::parse_text(text, origin), origin);
}

// ---- iteration options ----

inline IterationOptions parse_options(const json& j, IterationOptions base = {}) {
  detail::require_object(j, "options", {},
                         {"max_iterations", "rank_tolerance", "solver_tolerance", "m", "tdelta_sign"});
  if (j.contains("max_iterations")) base.max_iterations = static_cast<int>(detail::integer(j["max_iterations"], "options.max_iterations"));
  if (j.contains("rank_tolerance")) base.rank_tolerance = detail::number(j["rank_tolerance"], "options.rank_tolerance");
  if (j.contains("solver_tolerance")) base.solver_tolerance = detail::number(j["solver_tolerance"], "options.solver_tolerance");
  if (j.contains("m")) {
    const long long m = detail::integer(j["m"], "options.m");
    if (m < 1 || m % 2 == 0) throw SchemaError("options.m must be a positive odd integer");
    base.m_override = static_cast<int>(m);
  }
  if (j.contains("tdelta_sign")) {
    if (!j["tdelta_sign"].is_string()) throw SchemaError("options.tdelta_sign must be a string");
    const auto s = j["tdelta_sign"].get<std::string>();
    if (s == "lemma2") base.tdelta_sign = TdeltaSign::kBandLimited;
    else if (s == "theorem3") base.tdelta_sign = TdeltaSign::kPlusCosine;
    else throw SchemaError("options.tdelta_sign must be \"lemma2\" or \"theorem3\"");
  }
  try {
    base.validate();
  } catch (const Error& e) {
    throw SchemaError(std::string("options: ") + e.what());
  }
  return base;
}

// ---- scenarios ----

struct Scenario {
  ChirpMixture mixture;
  int n_samples = 0;
  /// Rate bound handed to identification (may differ from the mixture's).
  double delta = 0.0;
  std::optional<std::uint64_t> seed;
  std::optional<json> options;
};

inline Scenario parse_scenario(const json& j) {
  detail::require_object(j, "scenario", {"mixture", "n_samples", "delta"}, {"seed", "options"});
  Scenario s{parse_mixture(j["mixture"]), 0, 0.0, std::nullopt, std::nullopt};
  const long long n = detail::integer(j["n_samples"], "scenario.n_samples");
  if (n < 1) throw SchemaError("scenario.n_samples must be positive");
  s.n_samples = static_cast<int>(n);
  s.delta = detail::number(j["delta"], "scenario.delta");
  if (!(s.delta > 0.0 && s.delta < 0.5)) throw SchemaError("scenario.delta must lie in (0, 1/2)");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw SchemaError("scenario.seed must be a nonnegative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("options")) {
    parse_options(j["options"]);
    s.options = j["options"];
  }
  return s;
}

inline Scenario parse_scenario_text(const std::string& text, const std::string& origin = "scenario") {
  return parse_scenario(detail::parse_text(text, origin));
}

// ---- identification results ----

inline std::string result_json(const IdentifyResult& r) {
  Writer w;
  const auto& d = r.diagnostics;
  w.open('{');
  w.key("components").open('[');
  for (const auto& c : r.components) write_component(w, c);
  w.close(']');
  if (!r.representative.empty()) {
    w.key("representative").open('[');
    for (const auto& c : r.representative) write_component(w, c);
    w.close(']');
  }
  if (r.freq_plus_rate) w.key("f_plus_tau").num(*r.freq_plus_rate);
  w.key("diagnostics").open('{');
  w.key("status").str(to_string(d.status));
  w.key("identifiable").boolean(d.identifiable);
  w.key("iterations").integer(d.iterations);
  w.key("rank_residual").num(d.rank_residual);
  w.key("ls_residual").num(d.ls_residual);
  w.key("cf_residual").num(d.cf_residual);
  w.key("lift_order").integer(r.dims.m);
  w.key("trace").open('[');
  for (const auto& t : d.trace) {
    w.open('{');
    w.key("iteration").integer(t.iteration);
    w.key("objective").num(t.objective);
    w.key("rank_residual").num(t.rank_residual);
    w.key("solver_iterations").integer(t.solver_iterations);
    w.close('}');
  }
  w.close(']');
  w.key("warnings").open('[');
  for (const auto& s : d.warnings) w.str(s);
  w.close(']');
  w.close('}');
  w.close('}');
  return w.str();
}

struct ParsedResult {
  std::vector<ChirpComponent> components;
  std::vector<ChirpComponent> representative;
  std::optional<double> freq_plus_rate;
  std::string status;
  bool identifiable = true;
  int iterations = 0;
  double rank_residual = 0.0;
  double ls_residual = 0.0;
  std::vector<std::string> warnings;
};

inline ParsedResult parse_result_text(const std::string& text, const std::string& origin = "result") {
  const json j = detail::parse_text(text, origin);
  detail::require_object(j, origin, {"components", "diagnostics"}, {"representative", "f_plus_tau"});
  ParsedResult r;
  r.components = parse_components(j["components"], "components");
  if (j.contains("representative")) r.representative = parse_components(j["representative"], "representative");
  if (j.contains("f_plus_tau")) r.freq_plus_rate = detail::number(j["f_plus_tau"], "f_plus_tau");
  const auto& d = j["diagnostics"];
  detail::require_object(d, "diagnostics", {"iterations", "rank_residual", "ls_residual", "warnings"},
                         {"status", "identifiable", "cf_residual", "lift_order", "trace"});
  r.iterations = static_cast<int>(detail::integer(d["iterations"], "diagnostics.iterations"));
  auto maybe_number = [](const json& v, const std::string& what) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : detail::number(v, what);
  };
  r.rank_residual = maybe_number(d["rank_residual"], "diagnostics.rank_residual");
  r.ls_residual = maybe_number(d["ls_residual"], "diagnostics.ls_residual");
  if (d.contains("status")) r.status = d["status"].get<std::string>();
  if (d.contains("identifiable")) r.identifiable = d["identifiable"].get<bool>();
  if (!d["warnings"].is_array()) throw SchemaError("diagnostics.warnings must be an array");
  for (const auto& s : d["warnings"]) {
    if (!s.is_string()) throw SchemaError("warnings must be strings");
    r.warnings.push_back(s.get<std::string>());
  }
  return r;
}

}  // namespace chirpid::io
