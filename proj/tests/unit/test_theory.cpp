#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>
#include <random>

#include "bcs/block_inference.hpp"
#include "bcs/error.hpp"
#include "bcs/synth.hpp"
#include "bcs/theory.hpp"
#include "helpers.hpp"

using namespace bcs;

namespace {

const ConditionCheck* find_check(const ConditionReport& r, const std::string& name, CheckStatus status) {
  for (const auto& c : r.checks)
    if (c.name == name && c.status == status) return &c;
  return nullptr;
}

BlockAssignment planted_assignment(const PlantedModel& m) {
  BlockAssignment a;
  for (Index l : m.labels) {
    a.block.push_back(l);
    a.residual.push_back(0.0);
  }
  return a;
}

// Smallest dependent subset by brute force over all column subsets.
Index brute_spark(const Matrix& a) {
  const Index n = a.cols();
  Index best = n + 1;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Index> cols;
    for (Index j = 0; j < n; ++j)
      if (mask & (1u << j)) cols.push_back(j);
    Matrix sub(a.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Index>(c)) = a.col(cols[c]);
    Eigen::FullPivLU<Matrix> lu(sub);
    lu.setThreshold(1e-10);
    if (lu.rank() < sub.cols()) best = std::min(best, sub.cols());
  }
  return best;
}

}  // namespace

TEST(Spark, Examples) {
  EXPECT_EQ(spark(Matrix::Identity(3, 3)).value, 4);
  Matrix a(3, 3);
  a << 1, 0, 1, 0, 1, 1, 0, 0, 0;
  EXPECT_EQ(spark(a).value, 3);
  Matrix dup(3, 3);
  dup << 1, 1, 0, 2, 2, 1, 3, 3, 0;
  EXPECT_EQ(spark(dup).value, 2);
}

TEST(Spark, UnverifiedBeyondSearch) {
  std::mt19937_64 rng(1);
  const auto r = spark(test::gaussian(6, 8, rng), 3);
  EXPECT_FALSE(r.verified());
  EXPECT_EQ(r.searched_up_to, 3);
}

TEST(Spark, MatchesBruteForceAndBounds) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    Matrix a = test::gaussian(4, 6, rng);
    if (t % 3 == 0) a.col(5) = a.col(1) - 2 * a.col(3);
    if (t % 4 == 0) a.row(3).setZero();
    const auto s = spark(a, 6);
    ASSERT_TRUE(s.verified());
    EXPECT_EQ(*s.value, brute_spark(a));
    EXPECT_GE(*s.value, 2);
    Eigen::FullPivLU<Matrix> lu(a);
    EXPECT_LE(*s.value, lu.rank() + 1);
  }
}

TEST(Coherence, Examples) {
  const Index n = 16;
  Matrix e1 = Matrix::Zero(n, 1);
  e1(0, 0) = 1;
  EXPECT_DOUBLE_EQ(coherence(e1), 16.0);
  EXPECT_NEAR(coherence(Matrix::Constant(n, 1, 1.0 / std::sqrt(16.0))), 1.0, 1e-12);
  EXPECT_THROW(coherence(2 * e1), ContractViolation);
}

TEST(Coherence, BruteForce) {
  std::mt19937_64 rng(3);
  const Matrix u = test::orthonormal(64, 4, rng);
  double best = 0.0;
  for (Index row = 0; row < 64; ++row)
    for (Index c = 0; c < 4; ++c) best = std::max(best, u(row, c) * u(row, c));
  const double mu = coherence(u);
  EXPECT_NEAR(mu, 64.0 / 4.0 * best, 1e-12 * mu);
  EXPECT_GE(mu, 1.0);
  EXPECT_LE(mu, 16.0);
}

TEST(MuEll, Examples) {
  const Index m = 8;
  Matrix y = Matrix::Zero(m, m);
  y(0, 0) = 1;
  EXPECT_NEAR(mu_ell(y, 1).mu0, static_cast<double>(m), 1e-12);
  EXPECT_THROW(mu_ell(y, 2), RankDeficient);

  const Matrix g = random_low_rank(20, 30, 2, 4);
  const auto mu = mu_ell(g, 2);
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix u = svd.matrixU().leftCols(2), v = svd.matrixV().leftCols(2);
  const double mu0 = std::max(20.0 / 2 * u.cwiseAbs2().maxCoeff(),
                              30.0 / 2 * v.cwiseAbs2().maxCoeff());
  const double mu1 = (u * v.transpose()).cwiseAbs().maxCoeff() * std::sqrt(20.0 * 30.0 / 2.0);
  EXPECT_NEAR(mu.mu0, mu0, 1e-9 * mu0);
  EXPECT_NEAR(mu.mu1, mu1, 1e-9 * mu1);
  EXPECT_NEAR(mu.mu, std::max(mu1 * mu1, mu0), 1e-9 * mu.mu);
  EXPECT_GE(mu.mu, 1.0);
  EXPECT_TRUE(std::isfinite(mu.mu));
}

TEST(Theorem1, WorkedExample) {
  const auto b = theorem1_sample_bound(1.0, 2, 64, 100, 2.0);
  const double exact = 32.0 * 2 * 164 * 2 * std::log(200.0);
  EXPECT_NEAR(b.exact, exact, 1e-12 * exact);
  EXPECT_EQ(b.required, 111223);
  EXPECT_NEAR(static_cast<double>(b.required), 111230.0, 10.0);
  const double p = 1 - 6 * std::log(100.0) * std::pow(164.0, 2 - 2 * 2.0) - std::pow(100.0, 2 - 2 * std::sqrt(2.0));
  EXPECT_NEAR(b.probability, p, 1e-12);
}

TEST(Theorem1, MonotoneAndLinear) {
  const auto b2 = theorem1_sample_bound(1.0, 2, 64, 100, 2.0);
  const auto b3 = theorem1_sample_bound(1.0, 2, 64, 100, 3.0);
  EXPECT_GT(b3.required, b2.required);
  EXPECT_GT(b3.probability, b2.probability);
  const auto k4 = theorem1_sample_bound(1.0, 4, 64, 100, 2.0);
  EXPECT_DOUBLE_EQ(k4.exact, 2 * b2.exact);
  EXPECT_NEAR(theorem1_sample_bound(1.0, 2, 64, 100, 1e6).probability, 1.0, 1e-12);
  EXPECT_THROW(theorem1_sample_bound(1.0, 2, 64, 100, 1.0), ContractViolation);
}

TEST(Coupon, Examples) {
  EXPECT_EQ(coupon_collector_bound(1, 3), 0.0);
  EXPECT_EQ(coupon_collector_bound(5, 0), 1.0);
  const double draws = 2 * 64 * std::log(64.0);
  const double b = coupon_collector_bound(64, draws);
  EXPECT_NEAR(b, 64 * std::pow(1 - 1.0 / 64, draws), 1e-15);
  EXPECT_NEAR(b, 1.0 / 64, 0.002);
  EXPECT_LE(b, std::pow(64.0, -1.0));
}

TEST(Coupon, ChainAndMonotone) {
  for (Index n : {2, 5, 16, 64, 300})
    for (double beta : {1.5, 2.0, 3.0}) {
      const double draws = beta * static_cast<double>(n) * std::log(static_cast<double>(n));
      EXPECT_LE(coupon_collector_bound(n, draws), std::pow(static_cast<double>(n), 1 - beta) * (1 + 1e-12));
      double prev = 1.0;
      for (double d = 0; d < draws; d += draws / 7) {
        const double v = coupon_collector_bound(n, d);
        EXPECT_LE(v, prev);
        prev = v;
      }
    }
}

TEST(Uniqueness, PlantedPasses) {
  const auto m = generate_planted(12, 3, 2, 5, 6);
  const auto r = check_dl_uniqueness(m.dict, m.codes);
  EXPECT_TRUE(r.overall) << r.to_json();
}

TEST(Uniqueness, RichnessFails) {
  const Index sizes[] = {2, 2};
  const Index counts[] = {3, 3};
  auto m = generate_planted(8, sizes, counts, 1);
  // Keep only two signals of block 1.
  std::vector<BlockSparseCode> codes;
  for (std::size_t i = 0; i < m.codes.size(); ++i)
    if (!(m.labels[i] == 1 && i == m.codes.size() - 1)) codes.push_back(m.codes[i]);
  const auto r = check_dl_uniqueness(m.dict, codes);
  EXPECT_FALSE(r.overall);
  const auto* c = find_check(r, "richness", CheckStatus::kFail);
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->block, 1);
}

TEST(Uniqueness, DuplicatedAtomFailsSupport) {
  auto m = generate_planted(8, 2, 2, 4, 2);
  Matrix atoms = m.dict.atoms();
  atoms.col(3) = atoms.col(0);
  const BlockDictionary dict(atoms, m.dict.blocks(), 2);
  const auto r = check_dl_uniqueness(dict, m.codes);
  EXPECT_FALSE(r.overall);
  const auto* c = find_check(r, "support", CheckStatus::kFail);
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->measured, 2.0);
}

TEST(Proposition1, FullObservationPasses) {
  const auto m = generate_planted(6, 2, 2, 8, 3);
  const auto ms = measure(m.signals, std::vector<SensingMatrix>(16, make_pixel_mask(6, test::iota(6))));
  Proposition1Options opt;
  opt.beta = 0.5;
  const auto r = proposition1_check(ms, m.dict, planted_assignment(m), opt);
  EXPECT_TRUE(r.overall) << r.to_json();
}

TEST(Proposition1, ShortMeasurementNamed) {
  const auto m = generate_planted(6, 1, 3, 8, 3);
  std::vector<SensingMatrix> s(8, make_pixel_mask(6, test::iota(6)));
  s[5] = make_pixel_mask(6, {0, 4});
  const auto ms = measure(m.signals, s);
  const auto r = proposition1_check(ms, m.dict, planted_assignment(m));
  const auto* c = find_check(r, "measurements_per_signal", CheckStatus::kFail);
  ASSERT_NE(c, nullptr);
  EXPECT_NE(c->detail.find("5"), std::string::npos);
}

TEST(Proposition1, MissingCoordinateRank) {
  const Index n = 10;
  const auto m = generate_planted(n, 1, 2, 30, 4);
  std::vector<SensingMatrix> s;
  std::mt19937_64 rng(5);
  for (Index i = 0; i < 30; ++i) {
    std::vector<Index> rows;
    for (Index p = 0; p < n; ++p)
      if (p != 7 && (rng() & 1)) rows.push_back(p);
    if (rows.size() < 2) rows = {0, 1};
    s.push_back(make_pixel_mask(n, rows));
  }
  const auto ms = measure(m.signals, s);
  const auto r = proposition1_check(ms, m.dict, planted_assignment(m));
  const auto* c = find_check(r, "union_rank", CheckStatus::kFail);
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->measured, static_cast<double>(n - 1));
}

TEST(ConditionReport, JsonAndOverall) {
  ConditionReport r;
  r.add({"a", std::nullopt, CheckStatus::kPass, 1, 1, ""});
  EXPECT_TRUE(r.overall);
  r.add({"b", 0, CheckStatus::kUnverified, 0, 0, "search limit"});
  EXPECT_FALSE(r.overall);
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["overall"], false);
  EXPECT_EQ(j["checks"].size(), 2u);
  EXPECT_EQ(j["checks"][1]["status"], "unverified");
}
