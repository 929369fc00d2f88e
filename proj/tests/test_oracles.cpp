// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "chirpid/oracles.hpp"
#include "test_support.hpp"

using namespace chirpid;

namespace {

SampleVector samples_of(std::initializer_list<cplx> v) {
  Eigen::VectorXcd y(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const auto& x : v) y(i++) = x;
  return SampleVector(std::move(y));
}

}  // namespace

TEST(ClosedForm, ConstantSignal) {
  const auto c = single_chirp_closed_form(samples_of({1.0, 1.0, 1.0}));
  EXPECT_EQ(c.amplitude, cplx(1.0));
  EXPECT_EQ(c.freq, 0.0);
  EXPECT_EQ(c.rate, 0.0);
}

TEST(ClosedForm, KnownChirp) {
  const cplx s = std::polar(1.0, std::numbers::pi / 4);
  const auto y = synthesize_samples(std::vector<ChirpComponent>{{s, 0.1, 0.05}}, 3);
  const auto c = single_chirp_closed_form(y);
  EXPECT_LT(std::abs(c.amplitude - s), 1e-12);
  EXPECT_NEAR(c.freq, 0.1, 1e-12);
  EXPECT_NEAR(c.rate, 0.05, 1e-12);
}

TEST(ClosedForm, FrequencyAliasesBeyondQuarter) {
  const auto y = synthesize_samples(std::vector<ChirpComponent>{{1.0, 0.3, 0.05}}, 3);
  const auto c = single_chirp_closed_form(y);
  EXPECT_NEAR(c.freq, -0.2, 1e-12);
  EXPECT_NEAR(c.rate, 0.05, 1e-12);
}

TEST(ClosedForm, RecoversRandomChirps) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> f(-0.2499, 0.2499), ph(-std::numbers::pi, std::numbers::pi), mag(0.1, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    const ChirpComponent truth{std::polar(mag(gen), ph(gen)), f(gen), f(gen)};
    const auto c = single_chirp_closed_form(synthesize_samples(std::vector<ChirpComponent>{truth}, 3 + trial % 3));
    EXPECT_NEAR(c.freq, truth.freq, 1e-12);
    EXPECT_NEAR(c.rate, truth.rate, 1e-12);
    EXPECT_LT(std::abs(c.amplitude - truth.amplitude), 1e-12 * std::abs(truth.amplitude));
  }
}

TEST(ClosedForm, Errors) {
  EXPECT_THROW(single_chirp_closed_form(samples_of({1.0, 1.0})), ArityError);
  EXPECT_THROW(single_chirp_closed_form(samples_of({1.0, 0.0, 1.0})), DivisionError);
  EXPECT_THROW(single_chirp_closed_form(samples_of({1.0, 1.0, 0.0})), DivisionError);
}

TEST(GridOracle, OnGridSingleChirp) {
  const ChirpComponent truth{std::polar(2.0, 0.3), 0.15, -0.04};
  const auto y = synthesize_samples(std::vector<ChirpComponent>{truth}, 4);
  GridSearchSpec spec;
  spec.freq_ranges = {{-0.25, 0.25}};
  spec.rate_ranges = {{-0.1, 0.1}};
  spec.freq_steps = 11;
  spec.rate_steps = 11;
  spec.refinements = 0;
  const auto r = grid_oracle(y, 1, spec);
  ASSERT_EQ(r.components.size(), 1u);
  EXPECT_NEAR(r.components[0].freq, 0.15, 1e-12);
  EXPECT_NEAR(r.components[0].rate, -0.04, 1e-12);
  EXPECT_LT(std::abs(r.components[0].amplitude - truth.amplitude), 1e-10);
  EXPECT_LT(r.residual_by_level[0], 1e-10);
}

TEST(GridOracle, TwoChirpsSixSamples) {
  const std::vector<ChirpComponent> truth{{1.0, -0.2, 0.02}, {std::polar(0.7, 1.0), 0.1, -0.01}};
  const auto y = synthesize_samples(truth, 6);
  GridSearchSpec spec;
  spec.freq_ranges = {{-0.3, -0.1}, {0.0, 0.2}};
  spec.rate_ranges = {{-0.03, 0.03}, {-0.03, 0.03}};
  spec.freq_steps = 11;
  spec.rate_steps = 7;
  spec.refinements = 1;
  const auto r = grid_oracle(y, 2, spec);
  const auto m = match_error(truth, r.components);
  EXPECT_LT(m.worst, 1e-10);
  EXPECT_LT(r.residual_by_level.back(), 1e-9);
}

TEST(GridOracle, OffGridResidualNonincreasing) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> f(-0.2, 0.2), tau(-0.05, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    const ChirpComponent truth{1.0, f(gen), tau(gen)};
    const auto y = synthesize_samples(std::vector<ChirpComponent>{truth}, 5);
    GridSearchSpec spec;
    spec.freq_ranges = {{-0.25, 0.25}};
    spec.rate_ranges = {{-0.06, 0.06}};
    spec.freq_steps = 21;
    spec.rate_steps = 21;
    spec.refinements = 4;
    const auto r = grid_oracle(y, 1, spec);
    ASSERT_EQ(r.residual_by_level.size(), 5u);
    for (std::size_t l = 1; l < r.residual_by_level.size(); ++l)
      EXPECT_LE(r.residual_by_level[l], r.residual_by_level[l - 1]);
    EXPECT_LT(std::abs(r.components[0].freq - truth.freq), 1e-3);
  }
}

TEST(GridOracle, ZeroSignalPicksSmallestCell) {
  GridSearchSpec spec;
  spec.freq_ranges = {{-0.2, 0.2}};
  spec.rate_ranges = {{-0.1, 0.1}};
  spec.freq_steps = 5;
  spec.rate_steps = 5;
  spec.refinements = 2;
  const auto r = grid_oracle(SampleVector(Eigen::VectorXcd::Zero(4)), 1, spec);
  EXPECT_EQ(r.components[0].freq, -0.2);
  EXPECT_EQ(r.components[0].rate, -0.1);
  EXPECT_EQ(r.components[0].amplitude, cplx(0.0));
}

TEST(GridOracle, SpecValidation) {
  GridSearchSpec spec;
  spec.freq_ranges = {{0, 0.1}, {0, 0.1}, {0, 0.1}};
  spec.rate_ranges = spec.freq_ranges;
  EXPECT_THROW(spec.validate(), ArityError);
  spec.freq_ranges = {{0, 0.1}, {0, 0.1}};
  spec.rate_ranges = spec.freq_ranges;
  spec.freq_steps = spec.rate_steps = 101;
  EXPECT_THROW(spec.validate(), ParameterError);
  spec.freq_steps = spec.rate_steps = 11;
  spec.freq_ranges[0] = {0.1, 0.0};
  EXPECT_THROW(spec.validate(), ParameterError);
  spec.freq_ranges[0] = {0.0, 0.1};
  EXPECT_NO_THROW(spec.validate());
  EXPECT_THROW(grid_oracle(SampleVector(Eigen::VectorXcd::Ones(3)), 2, spec), ArityError);
}

TEST(Dcft, AllOnesPeak) {
  const auto s = dcft(SampleVector(Eigen::VectorXcd::Ones(9)));
  EXPECT_EQ(s.peak(), std::make_pair(0, 0));
  EXPECT_NEAR(std::abs(s.values(0, 0)), 3.0, 1e-12);
}

TEST(Dcft, OnGridChirpPrimeLength) {
  // N prime: the matched rate bin holds a single peak of height sqrt(N);
  // every other rate bin is a quadratic Gauss sum of modulus 1.
  const int n = 7;
  const auto y = synthesize_samples(std::vector<ChirpComponent>{{1.0, 2.0 / n, 3.0 / n}}, n);
  const auto s = dcft(y);
  EXPECT_EQ(s.peak(), std::make_pair(2, 3));
  for (int k = 0; k < n; ++k)
    for (int m = 0; m < n; ++m) {
      const double want = m != 3 ? 1.0 : (k == 2 ? std::sqrt(7.0) : 0.0);
      EXPECT_NEAR(std::abs(s.values(k, m)), want, 1e-12) << k << "," << m;
    }
  const auto [f, tau] = s.peak_parameters();
  EXPECT_NEAR(f, 2.0 / 7, 1e-15);
  EXPECT_NEAR(tau, 3.0 / 7, 1e-15);
}

TEST(Dcft, Linear) {
  std::mt19937_64 gen(4);
  const Eigen::VectorXcd a = chirpid::test::random_complex(gen, 8, 1);
  const Eigen::VectorXcd b = chirpid::test::random_complex(gen, 8, 1);
  const cplx alpha(0.3, -1.2);
  const auto sa = dcft(SampleVector(a)), sb = dcft(SampleVector(b));
  const auto sc = dcft(SampleVector(Eigen::VectorXcd(alpha * a + b)));
  EXPECT_LT((sc.values - (alpha * sa.values + sb.values)).norm(), 1e-12);
}

TEST(Dcft, CoarseBinsMissOffGridChirps) {
  // Sixteen samples of the two-chirp pair: the peak is confined to bins
  // 1/16 apart and cross terms pull it further, so it misses both chirps.
  const std::vector<ChirpComponent> truth{{std::polar(1.0, std::numbers::pi / 4), -0.1, 0.04},
                                          {std::polar(1.0, std::numbers::pi / 6), 0.4, -0.01}};
  const auto s = dcft(synthesize_samples(truth, 16));
  const auto [f, tau] = s.peak_parameters();
  double best = 1.0;
  for (const auto& c : truth)
    best = std::min(best, std::max(std::abs(wrap_cycles(f - c.freq)), std::abs(wrap_cycles(tau - c.rate))));
  EXPECT_GT(best, 1e-3);
}

TEST(Dcft, CsvFormat) {
  std::ostringstream os;
  dcft(samples_of({1.0, 1.0})).write_csv(os);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, 16), "k,m,magnitude\n0,");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}
