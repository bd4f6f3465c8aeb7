#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "bcs/error.hpp"
#include "bcs/io.hpp"
#include "bcs/learner.hpp"
#include "bcs/synth.hpp"
#include "helpers.hpp"

using namespace bcs;

namespace {

MeasurementSet full_observation(const Matrix& x) {
  return measure(x, std::vector<SensingMatrix>(static_cast<std::size_t>(x.cols()),
                                               make_pixel_mask(x.rows(), test::iota(x.rows()))));
}

LearnerConfig small_config(Index k, Index r, int iters) {
  LearnerConfig c;
  c.k_max = k;
  c.r = r;
  c.max_outer_iters = iters;
  c.seed = 3;
  return c;
}

double relative_error(const Matrix& truth, const LearnerState& st) {
  return (reconstruct_all(st.dict, st.codes) - truth).norm() / truth.norm();
}

// Drops blocks no signal uses, keeping codes on the remaining blocks.
std::pair<BlockDictionary, std::vector<BlockSparseCode>> used_blocks(const LearnerState& st) {
  const auto members = block_members(st.codes, st.dict.num_blocks());
  std::vector<Index> keep;
  for (Index l = 0; l < st.dict.num_blocks(); ++l)
    if (!members[static_cast<std::size_t>(l)].empty()) keep.push_back(l);
  Index cols = 0;
  for (Index l : keep) cols += st.dict.block_size(l);
  Matrix atoms(st.dict.n(), cols);
  std::vector<std::vector<Index>> blocks;
  Index c = 0;
  for (Index l : keep) {
    blocks.emplace_back();
    for (Index j : st.dict.block(l)) {
      atoms.col(c) = st.dict.atoms().col(j);
      blocks.back().push_back(c++);
    }
  }
  BlockDictionary dict(atoms, blocks, st.dict.k_max());
  std::vector<BlockSparseCode> codes;
  for (const auto& code : st.codes) {
    const auto at = std::find(keep.begin(), keep.end(), *code.active_block) - keep.begin();
    codes.push_back(BlockSparseCode::on_block(dict, at, code.block_coefficients(st.dict)));
  }
  return {dict, codes};
}

}  // namespace

TEST(LearnerConfig, Validation) {
  LearnerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.k_max = 300;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = LearnerConfig{};
  c.max_outer_iters = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = LearnerConfig{};
  c.restarts = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  EXPECT_EQ(parse_init_mode(to_string(InitMode::kSignals)), InitMode::kSignals);
  EXPECT_THROW(parse_init_mode("zeros"), ContractViolation);
}

TEST(InitialDictionary, SingletonsByDefault) {
  const auto model = generate_planted(8, 2, 2, 4, 1);
  const auto ms = full_observation(model.signals);
  auto c = small_config(2, 6, 1);
  const auto d = initial_dictionary(ms, c);
  EXPECT_EQ(d.num_blocks(), 6);
  for (Index j = 0; j < 6; ++j) EXPECT_NEAR(d.atoms().col(j).norm(), 1.0, 1e-12);
  c.L_init = 3;
  EXPECT_EQ(initial_dictionary(ms, c).num_blocks(), 3);
  EXPECT_EQ(initial_dictionary(ms, c).atoms(), initial_dictionary(ms, c).atoms());
}

TEST(Learner, RecoversFullyObservedPlantedModel) {
  const auto model = generate_planted(16, 3, 2, 200, 5);
  const auto ms = full_observation(model.signals);
  const auto st = learn(ms, small_config(2, 12, 30));
  EXPECT_LT(st.objective_trace.back(), 1e-8);
  const auto [dict, codes] = used_blocks(st);
  EXPECT_EQ(dict.num_blocks(), 3);
  EXPECT_TRUE(equivalent_solutions(dict, codes, model.dict, model.codes));
}

TEST(Learner, RecoversHalfObservedPlantedModel) {
  const auto model = generate_planted(16, 3, 2, 200, 5);
  const auto ms = measure(model.signals, random_pixel_masks(16, model.signals.cols(), 0.5, 6));
  const auto st = learn(ms, small_config(2, 12, 40));
  EXPECT_LT(relative_error(model.signals, st), 1e-3);
}

TEST(Learner, CompositeStepsNonincreasing) {
  std::mt19937_64 rng(2);
  const auto model = generate_planted(12, 3, 2, 30, 8);
  const Matrix noisy = model.signals + 0.05 * test::gaussian(12, model.signals.cols(), rng);
  const auto ms = measure(noisy, random_gaussian_sensors(12, noisy.cols(), 0.5, 9));
  const auto st = learn(ms, small_config(2, 12, 8), nullptr, [](const IterationRecord& rec) {
    EXPECT_LE(rec.objective_after_bomp, rec.objective_before_bomp * (1 + 1e-9) + 1e-300);
    EXPECT_LE(rec.objective_after_pass, rec.objective_after_bomp * (1 + 1e-9) + 1e-300);
  });
  EXPECT_LE(st.iterations.size(), 8u);
  EXPECT_EQ(st.objective_trace.size(), st.iterations.size());
  for (const auto& c : st.codes) EXPECT_TRUE(c.active_block.has_value());
}

TEST(Learner, DeterministicForSeed) {
  const auto model = generate_planted(10, 2, 2, 20, 4);
  const auto ms = measure(model.signals, random_pixel_masks(10, model.signals.cols(), 0.6, 1));
  auto c = small_config(2, 8, 5);
  const auto a = learn(ms, c);
  c.threads = 3;
  const auto b = learn(ms, c);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
  EXPECT_EQ(a.dict.atoms(), b.dict.atoms());
}

TEST(Learner, RestartsKeepBest) {
  const auto model = generate_planted(10, 2, 2, 20, 4);
  const auto ms = measure(model.signals, random_pixel_masks(10, model.signals.cols(), 0.5, 1));
  auto c = small_config(2, 8, 4);
  const double single = learn(ms, c).objective_trace.back();
  c.restarts = 3;
  const auto best = learn(ms, c);
  EXPECT_LE(best.objective_trace.back(), single);
}

TEST(Learner, ResumeContinues) {
  const auto model = generate_planted(10, 2, 2, 20, 4);
  const auto ms = measure(model.signals, random_pixel_masks(10, model.signals.cols(), 0.6, 1));
  auto c = small_config(2, 8, 3);
  const auto first = learn(ms, c);
  const auto more = learn(ms, c, &first);
  EXPECT_GT(more.iterations.size(), first.iterations.size());
  EXPECT_LE(more.objective_trace.back(), first.objective_trace.back() * (1 + 1e-9));
}

TEST(DeadBlocks, FindAndReseed) {
  const auto model = generate_planted(8, 3, 2, 6, 2);
  const auto ms = full_observation(model.signals);
  LearnerState st;
  st.dict = model.dict;
  st.codes = model.codes;
  for (std::size_t i = 0; i < st.codes.size(); ++i) {
    st.assignment.block.push_back(model.labels[i]);
    st.assignment.residual.push_back(0.0);
  }
  std::mt19937_64 rng(1);
  EXPECT_TRUE(find_dead_blocks(st).empty());
  const auto same = reseed_dead_blocks(ms, st, {}, rng);
  EXPECT_EQ(same.dict.atoms(), st.dict.atoms());

  // Empty block 2 by moving its members to block 0.
  for (std::size_t i = 0; i < st.codes.size(); ++i) {
    if (model.labels[i] == 2) {
      st.codes[i] = BlockSparseCode::on_block(st.dict, 0, Vector::Zero(2));
      st.assignment.block[i] = 0;
    }
  }
  EXPECT_EQ(find_dead_blocks(st), std::vector<Index>{2});
  const auto reseeded = reseed_dead_block(ms, st, 2, rng);
  EXPECT_NE(reseeded.dict.block_matrix(2), st.dict.block_matrix(2));
  EXPECT_EQ(reseeded.dict.block_matrix(0), st.dict.block_matrix(0));
  EXPECT_EQ(reseeded.dict.block_matrix(1), st.dict.block_matrix(1));
  for (Index j : reseeded.dict.block(2)) EXPECT_NEAR(reseeded.dict.atoms().col(j).norm(), 1.0, 1e-12);
}

TEST(Checkpoint, RoundTrip) {
  const auto model = generate_planted(10, 2, 2, 20, 4);
  const auto ms = measure(model.signals, random_pixel_masks(10, model.signals.cols(), 0.6, 1));
  const auto st = learn(ms, small_config(2, 8, 3));
  const auto dir = std::filesystem::temp_directory_path() / "bcs_checkpoint_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(st, dir.string());
  const auto back = load_checkpoint(dir.string());
  EXPECT_EQ(back.dict.atoms(), st.dict.atoms());
  EXPECT_EQ(back.dict.num_blocks(), st.dict.num_blocks());
  EXPECT_EQ(back.objective_trace, st.objective_trace);
  EXPECT_EQ(back.assignment.block, st.assignment.block);
  for (std::size_t i = 0; i < st.codes.size(); ++i) EXPECT_EQ(back.codes[i].coefficients, st.codes[i].coefficients);
  std::filesystem::remove_all(dir);
}
