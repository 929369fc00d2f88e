// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <gtest/gtest.h>

#include "chirpid/convex_iteration.hpp"
#include "test_support.hpp"

using namespace chirpid;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& gen, int n) {
  std::normal_distribution<double> nd;
  const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return nd(gen); });
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

class SchurKernel : public ::testing::TestWithParam<int> {};

TEST_P(SchurKernel, MatchesGenericSchur) {
  const int m = GetParam();
  const auto dims = LiftDimensions::for_order(m);
  const int n = std::min(m, 4);
  const auto samples = synthesize_samples(chirpid::test::k2_row(), n);
  const WeightedSubproblem fast(samples, 0.05, dims, TdeltaSign::kBandLimited, true);
  const WeightedSubproblem slow(samples, 0.05, dims, TdeltaSign::kBandLimited, false);
  std::mt19937_64 gen(static_cast<std::uint64_t>(m));
  for (int trial = 0; trial < 3; ++trial) {
    const sdp::BlockMatrices w{random_spd(gen, dims.order), random_spd(gen, 2 * (dims.m2 - 1))};
    const Eigen::MatrixXd a = fast.op().schur(w);
    const Eigen::MatrixXd b = slow.op().schur(w);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10 * b.cwiseAbs().maxCoeff()) << "M=" << m;
    EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-10 * a.cwiseAbs().maxCoeff());
  }
}

INSTANTIATE_TEST_SUITE_P(Orders, SchurKernel, ::testing::Values(3, 5, 7));

TEST(SchurKernel, IdentityScalingGivesGram) {
  // With W = I the Schur entries are <A_i, A_j>, computed here densely.
  const auto dims = LiftDimensions::for_order(3);
  const auto samples = synthesize_samples(chirpid::test::k2_row(), 3);
  const WeightedSubproblem sub(samples, 0.05, dims);
  const auto& p = sub.problem();
  const sdp::BlockMatrices w{Eigen::MatrixXd::Identity(dims.order, dims.order),
                             Eigen::MatrixXd::Zero(2 * (dims.m2 - 1), 2 * (dims.m2 - 1))};
  std::vector<Eigen::MatrixXd> a;
  for (const auto& c : p.constraints) {
    Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(dims.order, dims.order);
    for (const auto& e : c.entries) {
      if (e.block != 0) continue;
      blk(e.row, e.col) += e.value;
      if (e.row != e.col) blk(e.col, e.row) += e.value;
    }
    a.push_back(blk);
  }
  const Eigen::MatrixXd s = sub.op().schur(w);
  const auto& scale = sub.op().row_scale();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double want = a[i].cwiseProduct(a[j]).sum() * scale(i) * scale(j);
      EXPECT_NEAR(s(i, j), want, 1e-12);
    }
}
