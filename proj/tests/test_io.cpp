// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "chirpid/io.hpp"
#include "test_support.hpp"

using namespace chirpid;

TEST(Writer, Layout) {
  io::Writer w;
  w.open('{');
  w.key("a").num(0.5);
  w.key("b").open('[');
  w.close(']');
  w.key("c").reals({1.0, 2.5});
  w.key("d").str("x\"y");
  w.close('}');
  const auto j = io::json::parse(w.str());
  EXPECT_EQ(j["a"], 0.5);
  EXPECT_TRUE(j["b"].empty());
  EXPECT_EQ(j["c"][1], 2.5);
  EXPECT_EQ(j["d"], "x\"y");
  EXPECT_EQ(w.str().back(), '\n');
}

TEST(Writer, RealFormatting) {
  EXPECT_EQ(io::real(0.1), "0.10000000000000001");
  EXPECT_EQ(io::real(-2.0), "-2");
  EXPECT_EQ(io::real(std::nan("")), "null");
  EXPECT_EQ(io::real(INFINITY), "null");
}

TEST(Samples, RoundTripIsBitExact) {
  std::mt19937_64 gen(1);
  for (int n : {1, 2, 9, 30}) {
    const SampleVector s(chirpid::test::random_complex(gen, n, 1));
    const auto back = io::parse_samples_text(io::samples_json(s));
    ASSERT_EQ(back.length(), n);
    for (int i = 0; i < n; ++i) EXPECT_EQ(back[i], s[i]);
  }
}

TEST(Samples, SchemaErrors) {
  EXPECT_THROW(io::parse_samples_text("{\"n\": 2, \"re\": [1, 2], \"im\": [0, 0"), SchemaError);
  EXPECT_THROW(io::parse_samples_text("{\"n\": 2, \"re\": [1, 2], \"im\": [0]}"), SchemaError);
  EXPECT_THROW(io::parse_samples_text("{\"n\": 2, \"re\": [1, 2], \"im\": [0, 0], \"x\": 1}"), SchemaError);
  EXPECT_THROW(io::parse_samples_text("{\"n\": 2, \"re\": [1, \"2\"], \"im\": [0, 0]}"), SchemaError);
  EXPECT_THROW(io::parse_samples_text("{\"n\": 0, \"re\": [], \"im\": []}"), SchemaError);
  EXPECT_THROW(io::parse_samples_text("{\"n\": 1.5, \"re\": [1], \"im\": [0]}"), SchemaError);
  EXPECT_THROW(io::parse_samples_text("[1, 2]"), SchemaError);
  EXPECT_NO_THROW(io::parse_samples_text("{\"n\": 1, \"re\": [1], \"im\": [0]}"));
}

TEST(Mixture, RoundTrip) {
  const auto m = chirpid::test::k2_row();
  const auto back = io::parse_mixture(io::json::parse(io::mixture_json(m)));
  EXPECT_EQ(back.delta(), m.delta());
  ASSERT_EQ(back.size(), 2);
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(back[k].amplitude, m[k].amplitude);
    EXPECT_EQ(back[k].freq, m[k].freq);
    EXPECT_EQ(back[k].rate, m[k].rate);
  }
}

TEST(Mixture, SchemaErrors) {
  using io::json;
  EXPECT_THROW(io::parse_mixture(json::parse(R"({"delta": 0.1, "components": []})")), SchemaError);
  EXPECT_THROW(io::parse_mixture(json::parse(R"({"delta": 0.1, "components": [{"re": 1, "im": 0, "f": 0}]})")),
               SchemaError);
  EXPECT_THROW(io::parse_mixture(json::parse(R"({"delta": 0.6, "components": [{"re": 1, "im": 0, "f": 0, "tau": 0}]})")),
               SchemaError);
  EXPECT_THROW(io::parse_mixture(json::parse(R"({"delta": 0.1, "components": [{"re": 1, "im": 0, "f": 0, "tau": 0.2}]})")),
               SchemaError);
  EXPECT_THROW(io::parse_mixture(json::parse(R"({"delta": 0.1, "components": [{"re": 0, "im": 0, "f": 0, "tau": 0}]})")),
               SchemaError);
}

TEST(Scenario, ParsesShippedFiles) {
  const std::filesystem::path dir = CHIRPID_SCENARIO_DIR;
  int count = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    const auto s = io::parse_scenario_text(io::read_file(e.path().string()), e.path().string());
    EXPECT_GE(s.n_samples, 2);
    EXPECT_GT(s.delta, 0.0);
    ++count;
  }
  EXPECT_GE(count, 7);
}

TEST(Scenario, OptionsAndErrors) {
  const std::string base = R"({"mixture": {"delta": 0.1, "components": [{"re": 1, "im": 0, "f": 0.1, "tau": 0.02}]},
                               "n_samples": 3, "delta": 0.1)";
  const auto s = io::parse_scenario_text(base + R"(, "seed": 7, "options": {"max_iterations": 4, "m": 5}})");
  EXPECT_EQ(*s.seed, 7u);
  const auto o = io::parse_options(*s.options);
  EXPECT_EQ(o.max_iterations, 4);
  EXPECT_EQ(*o.m_override, 5);
  EXPECT_THROW(io::parse_scenario_text(base + R"(, "options": {"m": 4}})"), SchemaError);
  EXPECT_THROW(io::parse_scenario_text(base + R"(, "options": {"tdelta_sign": "plus"}})"), SchemaError);
  EXPECT_THROW(io::parse_scenario_text(base + R"(, "options": {"max_iterations": 0}})"), SchemaError);
  EXPECT_THROW(io::parse_scenario_text(base + R"(, "seed": -1})"), SchemaError);
  EXPECT_THROW(io::parse_scenario_text(base + R"(, "extra": 1})"), SchemaError);
  EXPECT_EQ(io::parse_options(io::json::parse(R"({"tdelta_sign": "theorem3"})")).tdelta_sign, TdeltaSign::kPlusCosine);
}

TEST(Result, RoundTrip) {
  IdentifyResult r;
  r.components = {{cplx(0.5, -0.25), 0.1, 0.01}, {cplx(1.0, 0.0), -0.3, -0.02}};
  r.diagnostics.status = FeasibilityStatus::kConverged;
  r.diagnostics.iterations = 3;
  r.diagnostics.rank_residual = 1.5e-10;
  r.diagnostics.ls_residual = 2e-12;
  r.diagnostics.trace = {{1, 4.0, 0.1, 0.5, 20}, {2, 1e-3, 1e-6, 0.4, 25}};
  r.diagnostics.warnings = {"first", "second \"quoted\""};
  r.dims = LiftDimensions::for_order(5);
  const auto text = io::result_json(r);
  const auto p = io::parse_result_text(text);
  ASSERT_EQ(p.components.size(), 2u);
  EXPECT_EQ(p.components[0].amplitude, r.components[0].amplitude);
  EXPECT_EQ(p.components[1].rate, -0.02);
  EXPECT_EQ(p.status, "converged");
  EXPECT_EQ(p.iterations, 3);
  EXPECT_EQ(p.rank_residual, 1.5e-10);
  EXPECT_EQ(p.warnings, r.diagnostics.warnings);
  EXPECT_FALSE(p.freq_plus_rate.has_value());
  // Timing is not part of the output, so equal inputs give equal text.
  r.diagnostics.trace[0].solve_seconds = 99.0;
  EXPECT_EQ(io::result_json(r), text);
  EXPECT_EQ(io::json::parse(text)["diagnostics"]["lift_order"], 5);
}

TEST(Result, NonIdentifiableFields) {
  IdentifyResult r;
  r.representative = {{cplx(1.0, 0.0), 0.2, -0.01}};
  r.freq_plus_rate = 0.19;
  r.diagnostics.identifiable = false;
  const auto p = io::parse_result_text(io::result_json(r));
  EXPECT_TRUE(p.components.empty());
  ASSERT_EQ(p.representative.size(), 1u);
  EXPECT_EQ(*p.freq_plus_rate, 0.19);
  EXPECT_FALSE(p.identifiable);
}

TEST(Files, ReadWriteAndMissing) {
  const auto path = (std::filesystem::temp_directory_path() / "chirpid_io_test.txt").string();
  io::write_file(path, "abc\n");
  EXPECT_EQ(io::read_file(path), "abc\n");
  std::filesystem::remove(path);
  EXPECT_THROW(io::read_file(path), std::runtime_error);
}
