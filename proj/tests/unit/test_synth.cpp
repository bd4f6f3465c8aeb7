#include <gtest/gtest.h>

#include <cmath>

#include "bcs/error.hpp"
#include "bcs/synth.hpp"
#include "helpers.hpp"

using namespace bcs;

TEST(Planted, ExactModel) {
  const auto m = generate_planted(12, 3, 2, 7, 1);
  EXPECT_EQ(m.signals.cols(), 21);
  EXPECT_EQ(m.dict.num_blocks(), 3);
  for (Index l = 0; l < 3; ++l) EXPECT_LE(m.dict.orthonormality_error(l), 1e-12);
  EXPECT_LE((reconstruct_all(m.dict, m.codes) - m.signals).norm(), 1e-12 * m.signals.norm());
  EXPECT_EQ(m.labels[0], 0);
  EXPECT_EQ(m.labels[20], 2);
  std::vector<SensingMatrix> full(21, make_pixel_mask(12, test::iota(12)));
  EXPECT_EQ(objective(measure(m.signals, full), m.dict, m.codes), 0.0);
  const auto again = generate_planted(12, 3, 2, 7, 1);
  EXPECT_EQ(again.signals, m.signals);
}

TEST(Planted, CollinearPair) {
  const auto m = generate_planted(5, 1, 1, 2, 3);
  Eigen::FullPivLU<Matrix> lu(m.signals);
  EXPECT_EQ(lu.rank(), 1);
}

TEST(Planted, RichnessEnforced) {
  const Index sizes[] = {2, 3};
  const Index counts[] = {3, 3};
  try {
    generate_planted(6, sizes, counts, 1);
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(SensorFactories, Sizes) {
  for (const auto& s : random_pixel_masks(10, 5, 0.3, 1)) EXPECT_EQ(s.rows(), 3);
  for (const auto& s : random_gaussian_sensors(10, 5, 0.55, 1)) EXPECT_EQ(s.rows(), 6);
}

TEST(SignalPsnr, PeakAndInf) {
  const Matrix a = Matrix::Constant(2, 2, 4.0);
  EXPECT_TRUE(std::isinf(signal_psnr(a, a)));
  const Matrix b = a.array() + 1.0;
  EXPECT_NEAR(signal_psnr(a, b), 20 * std::log10(4.0), 1e-12);
  EXPECT_NEAR(signal_psnr(a, b, 10.0), 20.0, 1e-12);
}

TEST(Spearman, Cases) {
  const double x[] = {1, 2, 3, 4};
  const double up[] = {0, 0.5, 0.5, 1};
  const double down[] = {4, 3, 2, 1};
  const double flat[] = {1, 1, 1, 1};
  EXPECT_GT(spearman(x, up), 0.9);
  EXPECT_DOUBLE_EQ(spearman(x, down), -1.0);
  EXPECT_DOUBLE_EQ(spearman(x, flat), 0.0);
}

TEST(Phase, FullObservationAlwaysSucceeds) {
  PhaseConfig c;
  c.n = 12;
  c.L = 2;
  c.k = 2;
  c.count = 30;
  c.fractions = {1.0};
  c.trials = 2;
  c.learner.max_outer_iters = 20;
  const auto r = phase_transition(c);
  ASSERT_EQ(r.summary.size(), 1u);
  EXPECT_DOUBLE_EQ(r.summary[0].frequency, 1.0);
  EXPECT_EQ(r.trials.size(), 2u);
}

TEST(Phase, InfiniteThresholdNeverSucceeds) {
  PhaseConfig c;
  c.n = 12;
  c.L = 2;
  c.k = 2;
  c.count = 20;
  c.fractions = {0.5, 0.9};
  c.trials = 2;
  c.threshold_db = std::numeric_limits<double>::infinity();
  c.learner.max_outer_iters = 3;
  c.learner.restarts = 1;
  const auto r = phase_transition(c);
  for (const auto& t : r.trials)
    if (!std::isinf(t.psnr_db)) EXPECT_FALSE(t.success);
}

TEST(Phase, TrialSeedsIndependentOfOrder) {
  EXPECT_EQ(trial_seed(5, 2, 3), trial_seed(5, 2, 3));
  EXPECT_NE(trial_seed(5, 2, 3), trial_seed(5, 3, 2));
  EXPECT_NE(trial_seed(5, 2, 3), trial_seed(6, 2, 3));
}

TEST(RankOracle, TwoLines) {
  Matrix x(3, 6);
  x << 1, 2, -1, 0, 0, 0,
       0, 0, 0, 1, 3, -2,
       1, 2, -1, 1, 3, -2;
  const auto r = rank_clustering_oracle(x, 1);
  EXPECT_EQ(r.clusters, 2);
  const std::vector<Index> expected{0, 0, 0, 1, 1, 1};
  EXPECT_TRUE(same_partition(r.labels, expected));
}

TEST(RankOracle, OneSubspaceAndFullDimension) {
  const auto m = generate_planted(6, 1, 2, 8, 2);
  EXPECT_EQ(rank_clustering_oracle(m.signals, 2).clusters, 1);
  const auto full = rank_clustering_oracle(generate_planted(3, 2, 1, 4, 1).signals, 3);
  EXPECT_EQ(full.clusters, 1);
  EXPECT_FALSE(full.warnings.empty());
  EXPECT_THROW(rank_clustering_oracle(Matrix::Random(4, 13), 1), ContractViolation);
}

TEST(RankOracle, AgreesWithPlanted) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = generate_planted(8, 3, 2, 4, seed);
    EXPECT_TRUE(same_partition(rank_clustering_oracle(m.signals, 2).labels, m.labels));
  }
}

TEST(SamePartition, Relabeling) {
  const std::vector<Index> a{0, 0, 1, 2}, b{5, 5, 3, 1}, c{0, 1, 1, 2};
  EXPECT_TRUE(same_partition(a, b));
  EXPECT_FALSE(same_partition(a, c));
}

TEST(LowRank, SamplingHelpers) {
  const Matrix m = random_low_rank(10, 15, 3, 2);
  Eigen::FullPivLU<Matrix> lu(m);
  EXPECT_EQ(lu.rank(), 3);
  EXPECT_EQ(sample_entries_exact(m, 40, 1).observed_count(), 40);
  const auto obs = sample_entries(m, 0.5, 1);
  EXPECT_GT(obs.observed_count(), 40);
  EXPECT_LT(obs.observed_count(), 110);
}
