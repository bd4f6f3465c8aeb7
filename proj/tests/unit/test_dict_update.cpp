#include <gtest/gtest.h>

#include <random>

#include "bcs/dict_update.hpp"
#include "bcs/error.hpp"
#include "bcs/synth.hpp"
#include "helpers.hpp"

using namespace bcs;

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

BlockAssignment assignment_of(const PlantedModel& model) {
  BlockAssignment a;
  for (Index l : model.labels) {
    a.block.push_back(l);
    a.residual.push_back(0.0);
  }
  return a;
}

}  // namespace

TEST(Kron, VecIdentity) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 10; ++t) {
    const Matrix a = test::gaussian(3, 5, rng);
    const Matrix d = test::gaussian(5, 2, rng);
    const Vector s = test::gaussian(2, 1, rng).col(0);
    EXPECT_TRUE((a * d * s).isApprox(kron(s.transpose(), a) * vec(d), 1e-13));
  }
}

TEST(KronSystem, Shape) {
  const auto model = generate_planted(6, 1, 2, 5, 1);
  const auto ms = measure(model.signals, random_gaussian_sensors(6, 5, 4.0 / 6.0, 2));
  const auto omega = test::iota(5);
  const auto sys = build_kron_system(ms, omega, model.codes, model.dict, 0);
  EXPECT_EQ(sys.design.rows(), 20);
  EXPECT_EQ(sys.design.cols(), 12);
  EXPECT_EQ(sys.rhs.size(), 20);
}

TEST(KronSystem, ScalarCodeIdentitySensor) {
  const Index sizes[] = {1};
  const auto dict = BlockDictionary::contiguous(Matrix::Identity(4, 1), sizes, 1);
  const Matrix x = (Matrix(4, 1) << 1, 2, 3, 4).finished();
  const auto ms = measure(x, {make_pixel_mask(4, test::iota(4))});
  std::vector<BlockSparseCode> codes{BlockSparseCode::on_block(dict, 0, Vector::Ones(1))};
  const Index omega[] = {0};
  const auto sys = build_kron_system(ms, omega, codes, dict, 0);
  EXPECT_EQ(sys.design, Matrix::Identity(4, 4));
  EXPECT_EQ(sys.rhs, x.col(0));
}

TEST(KronSystem, RowBlocksMatchDefinition) {
  std::mt19937_64 rng(3);
  const auto model = generate_planted(5, 2, 2, 4, 7);
  const auto ms = measure(model.signals, random_gaussian_sensors(5, model.signals.cols(), 0.6, 4));
  const auto omega = bcs::block_members(model.codes, 2)[1];
  const auto sys = build_kron_system(ms, omega, model.codes, model.dict, 1);
  Index row = 0;
  for (Index i : omega) {
    const auto& m = ms[i];
    const Vector s = model.codes[static_cast<std::size_t>(i)].block_coefficients(model.dict);
    const Matrix expected = kron(s.transpose(), m.sensor.dense());
    EXPECT_TRUE(sys.design.middleRows(row, m.sensor.rows()).isApprox(expected));
    EXPECT_EQ(sys.rhs.segment(row, m.sensor.rows()), m.y);
    row += m.sensor.rows();
  }
}

TEST(KronSystem, EmptyBlock) {
  const auto model = generate_planted(5, 1, 2, 4, 7);
  const auto ms = measure(model.signals, random_gaussian_sensors(5, 4, 0.6, 4));
  EXPECT_THROW(build_kron_system(ms, {}, model.codes, model.dict, 0), EmptyBlock);
}

TEST(DictUpdate, RecoversPlantedBlock) {
  const auto model = generate_planted(8, 1, 2, 30, 5);
  const auto ms = measure(model.signals, random_gaussian_sensors(8, 30, 0.5, 6));
  const auto omega = test::iota(30);
  const auto sys = build_kron_system(ms, omega, model.codes, model.dict, 0);
  const auto upd = update_dictionary_block(sys);
  EXPECT_EQ(upd.rank, 16);
  EXPECT_FALSE(upd.rank_deficient);
  EXPECT_LE((upd.block - model.dict.block_matrix(0)).norm(), 1e-8);
}

TEST(DictUpdate, SquareSystemIsDirectSolve) {
  std::mt19937_64 rng(2);
  KronSystem sys;
  sys.design = test::gaussian(6, 6, rng) + 3 * Matrix::Identity(6, 6);
  sys.rhs = test::gaussian(6, 1, rng).col(0);
  sys.n = 3;
  sys.k = 2;
  const auto upd = update_dictionary_block(sys);
  const Vector direct = sys.design.lu().solve(sys.rhs);
  EXPECT_TRUE(vec(upd.block).isApprox(direct, 1e-10));
}

TEST(DictUpdate, ZeroCodesGiveZeroBlock) {
  const Index sizes[] = {2};
  const auto dict = BlockDictionary::contiguous(Matrix::Identity(3, 2), sizes, 2);
  const Matrix x = Matrix::Ones(3, 2);
  const auto ms = measure(x, {make_pixel_mask(3, {0, 1, 2}), make_pixel_mask(3, {0, 1, 2})});
  std::vector<BlockSparseCode> codes(2, BlockSparseCode::on_block(dict, 0, Vector::Zero(2)));
  const auto omega = test::iota(2);
  const auto upd = update_dictionary_block(build_kron_system(ms, omega, codes, dict, 0));
  EXPECT_EQ(upd.rank, 0);
  EXPECT_TRUE(upd.rank_deficient);
  EXPECT_EQ(upd.block, Matrix::Zero(3, 2));
}

TEST(DictUpdate, DesignRankIsProductOfRanks) {
  const auto model = generate_planted(5, 1, 2, 6, 3);
  const auto ms = measure(model.signals, random_pixel_masks(5, 6, 0.6, 1));
  const auto omega = test::iota(6);
  const auto uni = build_union(ms.sensors(omega));
  if (uni.rank() == 5) {
    const auto sys = build_kron_system(ms, omega, model.codes, model.dict, 0);
    Eigen::JacobiSVD<Matrix> svd(sys.design);
    svd.setThreshold(1e-10);
    // Full-rank Gamma does not imply full-rank B per signal, so only an upper bound holds in general.
    EXPECT_LE(svd.rank(), 2 * 5);
  }
  // With full observation of every signal the product rule is exact.
  std::vector<SensingMatrix> full(6, make_pixel_mask(5, test::iota(5)));
  const auto ms_full = measure(model.signals, full);
  const auto sys = build_kron_system(ms_full, omega, model.codes, model.dict, 0);
  Eigen::JacobiSVD<Matrix> svd(sys.design);
  svd.setThreshold(1e-10);
  EXPECT_EQ(svd.rank(), 2 * 5);
}

TEST(DictUpdate, RoutesAgree) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto model = generate_planted(7, 2, 2, 8, seed);
    std::mt19937_64 rng(seed);
    const Matrix noisy = model.signals + 0.2 * test::gaussian(7, model.signals.cols(), rng);
    for (bool pixel : {false, true}) {
      const auto sensors = pixel ? random_pixel_masks(7, model.signals.cols(), 0.6, seed)
                                 : random_gaussian_sensors(7, model.signals.cols(), 0.6, seed);
      const auto ms = measure(noisy, sensors);
      const auto omega = block_members(model.codes, 2)[0];
      const auto dense = update_dictionary_block(ms, omega, model.codes, model.dict, 0, DictUpdateMethod::kDenseKron);
      const auto normal =
          update_dictionary_block(ms, omega, model.codes, model.dict, 0, DictUpdateMethod::kNormalEquations);
      EXPECT_LE((dense.block - normal.block).norm(), 1e-8 * dense.block.norm());
      if (pixel) {
        const auto rows = update_dictionary_block(ms, omega, model.codes, model.dict, 0, DictUpdateMethod::kPixelRows);
        EXPECT_LE((dense.block - rows.block).norm(), 1e-8 * dense.block.norm());
      }
    }
  }
}

TEST(DictUpdate, PixelRouteRejectsGaussian) {
  const auto model = generate_planted(5, 1, 2, 4, 1);
  const auto ms = measure(model.signals, random_gaussian_sensors(5, 4, 0.6, 1));
  const auto omega = test::iota(4);
  EXPECT_THROW(update_dictionary_block(ms, omega, model.codes, model.dict, 0, DictUpdateMethod::kPixelRows),
               ContractViolation);
}

TEST(DictUpdate, MethodNames) {
  for (auto m : {DictUpdateMethod::kAuto, DictUpdateMethod::kDenseKron, DictUpdateMethod::kNormalEquations,
                 DictUpdateMethod::kPixelRows})
    EXPECT_EQ(parse_dict_update_method(to_string(m)), m);
  EXPECT_THROW(parse_dict_update_method("qr"), ContractViolation);
}

TEST(Orthogonalize, OrthonormalInputUnchanged) {
  std::mt19937_64 rng(7);
  const Matrix q = test::orthonormal(6, 3, rng);
  const std::vector<Vector> codes{Vector::Ones(3), (Vector(3) << 1, -2, 0.5).finished()};
  const auto o = orthogonalize_block(q, codes);
  EXPECT_TRUE(o.q.isApprox(q, 1e-12));
  EXPECT_TRUE(o.r.isApprox(Matrix::Identity(3, 3), 1e-12));
  for (std::size_t i = 0; i < codes.size(); ++i) EXPECT_TRUE(o.codes[i].isApprox(codes[i], 1e-12));
}

TEST(Orthogonalize, ScalingAbsorbedIntoCodes) {
  std::mt19937_64 rng(8);
  const Matrix q = test::orthonormal(6, 2, rng);
  const std::vector<Vector> codes{(Vector(2) << 1, 3).finished()};
  const auto o = orthogonalize_block(2 * q, codes);
  EXPECT_LE((o.q.transpose() * o.q - Matrix::Identity(2, 2)).norm(), 1e-12);
  EXPECT_TRUE(o.codes[0].isApprox(2 * codes[0], 1e-12));
  EXPECT_TRUE((o.q * o.codes[0]).isApprox(2 * q * codes[0], 1e-12));
}

TEST(Orthogonalize, PreservesReconstructions) {
  std::mt19937_64 rng(9);
  const Matrix d = test::gaussian(7, 3, rng);
  const std::vector<Vector> codes{test::gaussian(3, 1, rng).col(0), test::gaussian(3, 1, rng).col(0)};
  const auto o = orthogonalize_block(d, codes);
  EXPECT_TRUE((o.q * o.r).isApprox(d, 1e-12));
  for (std::size_t i = 0; i < codes.size(); ++i) EXPECT_TRUE((o.q * o.codes[i]).isApprox(d * codes[i], 1e-12));
}

TEST(Orthogonalize, RankDeficientThrows) {
  Matrix d(3, 2);
  d << 1, 2, 0, 0, 0, 0;
  EXPECT_THROW(orthogonalize_block(d), RankDeficient);
}

TEST(Coefficients, IdentitySensorProjects) {
  std::mt19937_64 rng(10);
  const Matrix q = test::orthonormal(5, 2, rng);
  const Vector y = test::gaussian(5, 1, rng).col(0);
  const auto s = update_coefficients(q, make_pixel_mask(5, test::iota(5)), y);
  EXPECT_TRUE(s.isApprox(q.transpose() * y, 1e-12));
}

TEST(Coefficients, ConsistentSystemExact) {
  std::mt19937_64 rng(11);
  const Matrix q = test::orthonormal(8, 3, rng);
  const Vector truth = (Vector(3) << 1, -2, 4).finished();
  const auto a = make_gaussian(5, 8, 3);
  const auto s = update_coefficients(q, a, a.apply(Vector(q * truth)));
  EXPECT_LE((s - truth).norm(), 1e-10);
  EXPECT_THROW(update_coefficients(q, make_pixel_mask(8, {0, 1}), Vector::Ones(2)), NumericalError);
}

TEST(BlockPass, PlantedDataExact) {
  const auto model = generate_planted(10, 2, 2, 20, 13);
  const auto ms = measure(model.signals, random_pixel_masks(10, model.signals.cols(), 0.6, 14));
  const auto pass = run_block_pass(ms, model.dict, model.codes, assignment_of(model));
  EXPECT_LE(pass.objective, 1e-16 * model.signals.squaredNorm() + 1e-24);
}

TEST(BlockPass, RepeatedPassesNonincreasing) {
  std::mt19937_64 rng(1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto model = generate_planted(10, 3, 2, 12, seed);
    const Matrix noisy = model.signals + 0.3 * test::gaussian(10, model.signals.cols(), rng);
    const auto ms = measure(noisy, random_gaussian_sensors(10, noisy.cols(), 0.5, seed + 50));
    // Start from a perturbed dictionary so the passes have work to do.
    BlockDictionary dict = model.dict;
    for (Index l = 0; l < 3; ++l)
      dict = dict.with_block_atoms(l, dict.block_matrix(l) + 0.3 * test::gaussian(10, 2, rng));
    auto codes = model.codes;
    const auto assignment = assignment_of(model);
    double prev = objective(ms, dict, codes);
    for (int it = 0; it < 5; ++it) {
      auto pass = run_block_pass(ms, dict, codes, assignment);
      EXPECT_LE(pass.objective, prev * (1 + 1e-9));
      double running = prev;
      for (const auto& b : pass.blocks) {
        EXPECT_LE(b.objective_after, running * (1 + 1e-9));
        running = b.objective_after;
      }
      prev = pass.objective;
      dict = std::move(pass.dict);
      codes = std::move(pass.codes);
    }
  }
}

TEST(BlockPass, SingleBlockIsTruncatedSvd) {
  std::mt19937_64 rng(21);
  const Matrix x = test::gaussian(6, 15, rng);
  const Index k = 2;
  std::vector<SensingMatrix> full(15, make_pixel_mask(6, test::iota(6)));
  const auto ms = measure(x, full);
  const Index sizes[] = {k};
  const auto dict = BlockDictionary::contiguous(test::orthonormal(6, k, rng), sizes, k);
  std::vector<BlockSparseCode> codes;
  BlockAssignment assignment;
  for (Index i = 0; i < 15; ++i) {
    codes.push_back(BlockSparseCode::on_block(dict, 0, dict.block_matrix(0).transpose() * x.col(i)));
    assignment.block.push_back(0);
    assignment.residual.push_back(0.0);
  }
  // Alternating passes converge to the Eckart-Young optimum.
  PassResult pass{dict, codes, 0.0, {}};
  for (int it = 0; it < 200; ++it) pass = run_block_pass(ms, pass.dict, pass.codes, assignment);
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU);
  const double optimum = svd.singularValues().tail(6 - k).squaredNorm();
  EXPECT_NEAR(pass.objective, optimum, 1e-6 * optimum);
  EXPECT_LE(max_principal_angle(pass.dict.block_matrix(0), svd.matrixU().leftCols(k)), 1e-3);
}

TEST(BlockPass, EmptyBlockSkipped) {
  const auto model = generate_planted(6, 2, 1, 3, 4);
  const auto ms = measure(model.signals, std::vector<SensingMatrix>(6, make_pixel_mask(6, test::iota(6))));
  auto assignment = assignment_of(model);
  std::vector<BlockSparseCode> codes = model.codes;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (*codes[i].active_block == 1) {
      codes[i] = BlockSparseCode::on_block(model.dict, 0, Vector::Zero(1));
      assignment.block[i] = 0;
    }
  }
  const auto pass = run_block_pass(ms, model.dict, codes, assignment);
  EXPECT_TRUE(pass.blocks[1].skipped_empty);
  EXPECT_EQ(pass.dict.block_matrix(1), model.dict.block_matrix(1));
}
