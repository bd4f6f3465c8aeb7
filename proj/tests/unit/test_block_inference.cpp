#include <gtest/gtest.h>

#include <random>

#include "bcs/block_inference.hpp"
#include "bcs/error.hpp"
#include "bcs/synth.hpp"
#include "helpers.hpp"

using namespace bcs;

namespace {

MeasurementSet full_observation(const Matrix& x) {
  std::vector<SensingMatrix> s;
  for (Index i = 0; i < x.cols(); ++i) s.push_back(make_pixel_mask(x.rows(), test::iota(x.rows())));
  return measure(x, s);
}

}  // namespace

TEST(Bomp, ExactMembership) {
  const Index sizes[] = {2, 2, 2};
  const auto dict = BlockDictionary::contiguous(Matrix::Identity(6, 6), sizes, 2);
  const auto a = make_pixel_mask(6, test::iota(6));
  const Vector y = (Vector(6) << 0, 0, 0, 0, 3, -1).finished();
  const auto fit = bomp_assign_one(y, a, dict);
  EXPECT_EQ(fit.block, 2);
  EXPECT_LE(fit.residual, 1e-10);
  EXPECT_TRUE(fit.coefficients.isApprox((Vector(2) << 3, -1).finished()));
}

TEST(Bomp, TieGoesToLowerIndex) {
  Matrix atoms(3, 2);
  atoms << 1, 1, 0, 0, 0, 0;
  const auto dict = BlockDictionary(atoms, {{0}, {1}}, 1);
  const auto fit = bomp_assign_one((Vector(3) << 1, 1, 1).finished(), make_pixel_mask(3, {0, 1, 2}), dict);
  EXPECT_EQ(fit.block, 0);
}

TEST(Bomp, SkipsInfeasibleBlocks) {
  const Index sizes[] = {1, 3};
  const auto dict = BlockDictionary::contiguous(Matrix::Identity(4, 4), sizes, 3);
  const auto a = make_pixel_mask(4, {0, 1});
  std::vector<std::string> warnings;
  const auto fit = bomp_assign_one((Vector(2) << 1, 2).finished(), a, dict, &warnings);
  EXPECT_EQ(fit.block, 0);
  EXPECT_EQ(warnings.size(), 1u);
  const Index big[] = {3};
  const auto only_big = BlockDictionary::contiguous(Matrix::Identity(4, 3), big, 3);
  EXPECT_THROW(bomp_assign_one((Vector(2) << 1, 2).finished(), a, only_big), NoFeasibleBlock);
}

TEST(Bomp, ResidualIsGlobalArgmin) {
  std::mt19937_64 rng(4);
  const auto model = generate_planted(12, 4, 3, 6, 8);
  const auto sensors = random_gaussian_sensors(12, model.signals.cols(), 0.6, 9);
  const auto ms = measure(model.signals + 0.3 * test::gaussian(12, model.signals.cols(), rng), sensors);
  const auto result = bomp_assign_all(ms, model.dict);
  for (Index i = 0; i < ms.size(); ++i) {
    const auto& m = ms[i];
    for (Index l = 0; l < model.dict.num_blocks(); ++l) {
      const Matrix phi = m.sensor.apply(model.dict.block_matrix(l));
      const Vector s = phi.colPivHouseholderQr().solve(m.y);
      EXPECT_LE(result.assignment.residual[static_cast<std::size_t>(i)], (m.y - phi * s).norm() + 1e-12);
    }
    EXPECT_NO_THROW(validate_code(result.codes[static_cast<std::size_t>(i)], model.dict));
    EXPECT_TRUE(result.codes[static_cast<std::size_t>(i)].active_block.has_value());
  }
}

TEST(Bomp, RecoversPlantedClustering) {
  const auto model = generate_planted(16, 3, 2, 10, 12);
  const auto result = bomp_assign_all(full_observation(model.signals), model.dict);
  for (Index i = 0; i < model.signals.cols(); ++i)
    EXPECT_EQ(*result.assignment.block[static_cast<std::size_t>(i)], model.labels[static_cast<std::size_t>(i)]);
  EXPECT_EQ(result.assignment.members(3)[1].size(), 10u);
}

TEST(Bomp, SingleBlockTakesAll) {
  const auto model = generate_planted(8, 1, 2, 6, 3);
  const auto result = bomp_assign_all(full_observation(model.signals), model.dict);
  for (const auto& b : result.assignment.block) EXPECT_EQ(*b, 0);
}

TEST(Bomp, AllowUnassigned) {
  const Index sizes[] = {3};
  const auto dict = BlockDictionary::contiguous(Matrix::Identity(4, 3), sizes, 3);
  const Matrix x = Matrix::Ones(4, 1);
  const auto ms = measure(x, {make_pixel_mask(4, {0})});
  EXPECT_THROW(bomp_assign_all(ms, dict), NoFeasibleBlock);
  BompOptions opt;
  opt.allow_unassigned = true;
  const auto result = bomp_assign_all(ms, dict, opt);
  EXPECT_FALSE(result.assignment.block[0].has_value());
}

TEST(Bomp, ThreadCountDoesNotChangeResult) {
  const auto model = generate_planted(10, 3, 2, 20, 6);
  const auto ms = measure(model.signals, random_pixel_masks(10, model.signals.cols(), 0.6, 2));
  BompOptions one, four;
  four.threads = 4;
  const auto a = bomp_assign_all(ms, model.dict, one);
  const auto b = bomp_assign_all(ms, model.dict, four);
  EXPECT_EQ(a.assignment.block, b.assignment.block);
  EXPECT_EQ(a.assignment.residual, b.assignment.residual);
}

TEST(Sac, IdenticalUsageMerged) {
  const Index sizes[] = {1, 1, 1};
  const auto dict = BlockDictionary::contiguous(Matrix::Identity(3, 3), sizes, 2);
  const std::vector<std::vector<Index>> usage{{0, 1, 2}, {0, 1, 2}, {5, 6}};
  const auto r = sac_merge(dict, usage, 2);
  EXPECT_EQ(r.merges, 1);
  EXPECT_EQ(r.dict.num_blocks(), 2);
  EXPECT_EQ(r.dict.block(0), (std::vector<Index>{0, 1}));
  EXPECT_EQ(r.old_to_new, (std::vector<Index>{0, 0, 1}));
}

TEST(Sac, DisjointNeverMerged) {
  const Index sizes[] = {1, 1};
  const auto dict = BlockDictionary::contiguous(Matrix::Identity(2, 2), sizes, 2);
  SacOptions opt;
  opt.threshold = 1e-9;
  const auto r = sac_merge(dict, {{0, 1}, {2, 3}}, 2, opt);
  EXPECT_EQ(r.merges, 0);
}

TEST(Sac, RespectsKMaxAndConservesAtoms) {
  const Index sizes[] = {1, 1, 1, 1, 1};
  const auto dict = BlockDictionary::contiguous(Matrix::Identity(5, 5), sizes, 2);
  const std::vector<std::vector<Index>> usage(5, std::vector<Index>{0, 1, 2});
  const auto r = sac_merge(dict, usage, 2);
  EXPECT_EQ(r.dict.num_blocks() + r.merges, 5);
  Index atoms = 0;
  for (Index l = 0; l < r.dict.num_blocks(); ++l) {
    EXPECT_LE(r.dict.block_size(l), 2);
    atoms += r.dict.block_size(l);
  }
  EXPECT_EQ(atoms, 5);
  EXPECT_EQ(r.dict.atoms(), dict.atoms());
}

TEST(Sac, MergesSplitPlantedSubspace) {
  const auto model = generate_planted(12, 2, 2, 30, 17);
  // Split each planted 2-atom block into two singletons.
  const auto split = BlockDictionary(model.dict.atoms(), {{0}, {1}, {2}, {3}}, 2);
  const auto ms = full_observation(model.signals);
  const auto usage = compute_usage(ms, split);
  const auto r = sac_merge(split, usage, 2);
  EXPECT_EQ(r.dict.num_blocks(), 2);
  EXPECT_EQ(r.dict.block(0), (std::vector<Index>{0, 1}));
  EXPECT_EQ(r.dict.block(1), (std::vector<Index>{2, 3}));
}

TEST(Sac, RemapKeepsReconstruction) {
  const auto model = generate_planted(8, 2, 1, 4, 2);
  const auto r = sac_merge(model.dict, {{0, 1}, {0, 1}}, 2);
  ASSERT_EQ(r.merges, 1);
  const auto codes = remap_codes(model.codes, r.old_to_new);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    EXPECT_EQ(*codes[i].active_block, 0);
    EXPECT_TRUE(codes[i].reconstruct(r.dict).isApprox(model.codes[i].reconstruct(model.dict)));
  }
}
