#include "bcs/dict_update.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "bcs/error.hpp"
#include "parallel.hpp"

namespace bcs {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::vector<Index> sorted_omega(std::span<const Index> omega) {
  std::vector<Index> out(omega.begin(), omega.end());
  std::sort(out.begin(), out.end());
  return out;
}

Vector active_coefficients(const BlockSparseCode& code, const BlockDictionary& dict, Index block, Index i) {
  if (code.active_block != block) {
    std::ostringstream os;
    os << "dictionary update: signal " << i << " is not active on block " << block;
    detail::throw_contract(os.str());
  }
  return code.block_coefficients(dict);
}

void check_inputs(const MeasurementSet& measurements, std::span<const Index> omega,
                  std::span<const BlockSparseCode> codes, const BlockDictionary& dict, Index block) {
  BCS_REQUIRE(measurements.n() == dict.n(), "dictionary update: measurement and dictionary dimensions differ");
  BCS_REQUIRE(static_cast<Index>(codes.size()) == measurements.size(),
              "dictionary update: code count differs from measurement count");
  BCS_REQUIRE(block >= 0 && block < dict.num_blocks(), "dictionary update: block index out of range");
  if (omega.empty()) {
    std::ostringstream os;
    os << "dictionary update: block " << block << " has no assigned signals";
    throw EmptyBlock(os.str());
  }
  for (Index i : omega)
    BCS_REQUIRE(i >= 0 && i < measurements.size(), "dictionary update: signal index out of range");
}

// Pseudoinverse solve of a symmetric positive semidefinite system.
Vector psd_pinv_solve(const Matrix& a, const Vector& b, double cutoff, Index* rank) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  const Vector& lambda = eig.eigenvalues();
  const Matrix& v = eig.eigenvectors();
  Vector coeff = v.transpose() * b;
  Index r = 0;
  for (Index j = 0; j < lambda.size(); ++j) {
    if (lambda(j) > cutoff) {
      coeff(j) /= lambda(j);
      ++r;
    } else {
      coeff(j) = 0.0;
    }
  }
  if (rank) *rank = r;
  return v * coeff;
}

DictBlockUpdate from_vec(const Vector& x, Index n, Index k, Index rank) {
  DictBlockUpdate out;
  out.block = Eigen::Map<const Matrix>(x.data(), n, k);
  out.rank = rank;
  out.rank_deficient = rank < n * k;
  return out;
}

DictBlockUpdate solve_normal_equations(const MeasurementSet& measurements, const std::vector<Index>& omega,
                                       std::span<const BlockSparseCode> codes, const BlockDictionary& dict,
                                       Index block) {
  const Index n = dict.n();
  const Index k = dict.block_size(block);
  Matrix gram = Matrix::Zero(k * n, k * n);
  Vector rhs = Vector::Zero(k * n);
  for (Index i : omega) {
    const auto& m = measurements[i];
    const Vector s = active_coefficients(codes[static_cast<std::size_t>(i)], dict, block, i);
    const Matrix ata = m.sensor.gram();
    const Vector aty = m.sensor.apply_transpose(m.y);
    for (Index a = 0; a < k; ++a) {
      rhs.segment(a * n, n) += s(a) * aty;
      for (Index b = 0; b < k; ++b) gram.block(a * n, b * n, n, n) += (s(a) * s(b)) * ata;
    }
  }
  const double lambda_max = gram.size() ? Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly)
                                              .eigenvalues()
                                              .maxCoeff()
                                        : 0.0;
  const double cutoff = std::max(0.0, static_cast<double>(k * n) * kEps * lambda_max);
  Index rank = 0;
  const Vector x = lambda_max > 0.0 ? psd_pinv_solve(gram, rhs, cutoff, &rank) : Vector::Zero(k * n);
  return from_vec(x, n, k, rank);
}

DictBlockUpdate solve_pixel_rows(const MeasurementSet& measurements, const std::vector<Index>& omega,
                                 std::span<const BlockSparseCode> codes, const BlockDictionary& dict, Index block) {
  const Index n = dict.n();
  const Index k = dict.block_size(block);
  std::vector<Matrix> grams(static_cast<std::size_t>(n), Matrix::Zero(k, k));
  Matrix rhs = Matrix::Zero(k, n);
  for (Index i : omega) {
    const auto& m = measurements[i];
    BCS_REQUIRE(m.sensor.kind() == SensingKind::kPixelMask,
                "dictionary update: pixel-row method needs pixel-mask sensors");
    const Vector s = active_coefficients(codes[static_cast<std::size_t>(i)], dict, block, i);
    const Matrix sst = s * s.transpose();
    const auto& ids = m.sensor.row_ids();
    for (Index j = 0; j < m.sensor.rows(); ++j) {
      const Index p = ids[static_cast<std::size_t>(j)];
      grams[static_cast<std::size_t>(p)] += sst;
      rhs.col(p) += m.y(j) * s;
    }
  }
  std::vector<Vector> lambdas(static_cast<std::size_t>(n));
  std::vector<Matrix> vecs(static_cast<std::size_t>(n));
  double lambda_max = 0.0;
  for (Index p = 0; p < n; ++p) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(grams[static_cast<std::size_t>(p)]);
    lambdas[static_cast<std::size_t>(p)] = eig.eigenvalues();
    vecs[static_cast<std::size_t>(p)] = eig.eigenvectors();
    lambda_max = std::max(lambda_max, eig.eigenvalues().maxCoeff());
  }
  const double cutoff = static_cast<double>(k * n) * kEps * lambda_max;
  Matrix d = Matrix::Zero(n, k);
  Index rank = 0;
  for (Index p = 0; p < n; ++p) {
    const auto& lambda = lambdas[static_cast<std::size_t>(p)];
    const auto& v = vecs[static_cast<std::size_t>(p)];
    Vector coeff = v.transpose() * rhs.col(p);
    for (Index j = 0; j < k; ++j) {
      if (lambda_max > 0.0 && lambda(j) > cutoff) {
        coeff(j) /= lambda(j);
        ++rank;
      } else {
        coeff(j) = 0.0;
      }
    }
    d.row(p) = (v * coeff).transpose();
  }
  DictBlockUpdate out;
  out.block = std::move(d);
  out.rank = rank;
  out.rank_deficient = rank < n * k;
  return out;
}

}  // namespace

const char* to_string(DictUpdateMethod method) {
  switch (method) {
    case DictUpdateMethod::kAuto:
      return "auto";
    case DictUpdateMethod::kDenseKron:
      return "dense";
    case DictUpdateMethod::kNormalEquations:
      return "normal";
    case DictUpdateMethod::kPixelRows:
      return "pixel";
  }
  return "?";
}

DictUpdateMethod parse_dict_update_method(const std::string& text) {
  if (text == "auto") return DictUpdateMethod::kAuto;
  if (text == "dense") return DictUpdateMethod::kDenseKron;
  if (text == "normal") return DictUpdateMethod::kNormalEquations;
  if (text == "pixel") return DictUpdateMethod::kPixelRows;
  detail::throw_contract("unknown dictionary update method '" + text + "' (expected auto, dense, normal or pixel)");
}

KronSystem build_kron_system(const MeasurementSet& measurements, std::span<const Index> omega,
                             std::span<const BlockSparseCode> codes, const BlockDictionary& dict, Index block) {
  check_inputs(measurements, omega, codes, dict, block);
  KronSystem sys;
  sys.block = block;
  sys.n = dict.n();
  sys.k = dict.block_size(block);
  sys.signal_order = sorted_omega(omega);
  Index rows = 0;
  for (Index i : sys.signal_order) rows += measurements[i].sensor.rows();
  sys.design = Matrix::Zero(rows, sys.k * sys.n);
  sys.rhs.resize(rows);
  Index row = 0;
  for (Index i : sys.signal_order) {
    const auto& m = measurements[i];
    const Vector s = active_coefficients(codes[static_cast<std::size_t>(i)], dict, block, i);
    const Matrix a = m.sensor.dense();
    for (Index j = 0; j < sys.k; ++j) sys.design.block(row, j * sys.n, a.rows(), sys.n) = s(j) * a;
    sys.rhs.segment(row, a.rows()) = m.y;
    row += a.rows();
  }
  return sys;
}

DictBlockUpdate update_dictionary_block(const KronSystem& system) {
  BCS_REQUIRE(system.design.rows() > 0, "update_dictionary_block: empty system");
  BCS_REQUIRE(system.design.cols() == system.n * system.k, "update_dictionary_block: design has wrong width");
  Eigen::BDCSVD<Matrix> svd(system.design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const double sigma_max = sigma.size() ? sigma(0) : 0.0;
  const double cutoff =
      static_cast<double>(std::max(system.design.rows(), system.design.cols())) * kEps * sigma_max;
  Vector coeff = svd.matrixU().transpose() * system.rhs;
  Index rank = 0;
  for (Index j = 0; j < sigma.size(); ++j) {
    if (sigma_max > 0.0 && sigma(j) > cutoff) {
      coeff(j) /= sigma(j);
      ++rank;
    } else {
      coeff(j) = 0.0;
    }
  }
  const Vector x = svd.matrixV() * coeff;
  return from_vec(x, system.n, system.k, rank);
}

DictBlockUpdate update_dictionary_block(const MeasurementSet& measurements, std::span<const Index> omega,
                                        std::span<const BlockSparseCode> codes, const BlockDictionary& dict,
                                        Index block, DictUpdateMethod method) {
  check_inputs(measurements, omega, codes, dict, block);
  const auto order = sorted_omega(omega);
  if (method == DictUpdateMethod::kAuto) {
    const bool all_pixels = std::all_of(order.begin(), order.end(), [&](Index i) {
      return measurements[i].sensor.kind() == SensingKind::kPixelMask;
    });
    method = all_pixels ? DictUpdateMethod::kPixelRows : DictUpdateMethod::kNormalEquations;
  }
  switch (method) {
    case DictUpdateMethod::kDenseKron:
      return update_dictionary_block(build_kron_system(measurements, order, codes, dict, block));
    case DictUpdateMethod::kPixelRows:
      return solve_pixel_rows(measurements, order, codes, dict, block);
    case DictUpdateMethod::kNormalEquations:
    case DictUpdateMethod::kAuto:
      break;
  }
  return solve_normal_equations(measurements, order, codes, dict, block);
}

Orthogonalized orthogonalize_block(const Matrix& block, std::span<const Vector> block_codes) {
  BCS_REQUIRE(block.cols() >= 1 && block.rows() >= block.cols(), "orthogonalize_block: block must be tall");
  Eigen::JacobiSVD<Matrix> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const Index k = block.cols();
  if (!(sigma(0) > 0.0) || !(sigma(k - 1) > 1e-10 * sigma(0))) {
    Index rank = 0;
    while (rank < k && sigma(rank) > 1e-10 * sigma(0)) ++rank;
    std::ostringstream os;
    os << "orthogonalize_block: block has numerical rank " << rank << " < " << k;
    throw RankDeficient(rank, os.str());
  }
  // Polar form of the thin SVD: Q = U V^T is the orthonormal matrix closest
  // to D, so an already orthonormal block is returned unchanged.
  const Matrix& u = svd.matrixU();
  const Matrix& v = svd.matrixV();
  Orthogonalized out;
  out.q = u * v.transpose();
  out.r = v * sigma.asDiagonal() * v.transpose();
  out.codes.reserve(block_codes.size());
  for (const auto& s : block_codes) {
    BCS_REQUIRE(s.size() == k, "orthogonalize_block: code length differs from block size");
    out.codes.push_back(out.r * s);
  }
  return out;
}

Vector update_coefficients(const Matrix& q, const SensingMatrix& sensor, const Vector& y, double max_condition) {
  BCS_REQUIRE(sensor.cols() == q.rows(), "update_coefficients: sensor and block dimensions differ");
  BCS_REQUIRE(y.size() == sensor.rows(), "update_coefficients: measurement length differs from sensor rows");
  const Index k = q.cols();
  if (sensor.rows() < k) {
    std::ostringstream os;
    os << "update_coefficients: m_i=" << sensor.rows() << " < k=" << k;
    throw NumericalError(os.str());
  }
  const Matrix phi = sensor.apply(q);
  const Matrix gram = phi.transpose() * phi;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(k - 1);
  if (!(lo > 0.0) || hi / lo > max_condition) {
    std::ostringstream os;
    os << "update_coefficients: Gram matrix is singular or ill-conditioned (lambda range " << lo << ".." << hi << ")";
    throw NumericalError(os.str());
  }
  return gram.llt().solve(phi.transpose() * y);
}

PassResult run_block_pass(const MeasurementSet& measurements, BlockDictionary dict,
                          std::vector<BlockSparseCode> codes, const BlockAssignment& assignment,
                          const PassOptions& options) {
  BCS_REQUIRE(assignment.size() == measurements.size(), "run_block_pass: assignment size differs from measurements");
  for (Index i = 0; i < measurements.size(); ++i) {
    if (codes[static_cast<std::size_t>(i)].active_block != assignment.block[static_cast<std::size_t>(i)]) {
      std::ostringstream os;
      os << "run_block_pass: code of signal " << i << " disagrees with its assignment";
      detail::throw_contract(os.str());
    }
  }
  Vector residuals = squared_residuals(measurements, dict, codes);
  const auto members = assignment.members(dict.num_blocks());

  PassResult out;
  for (Index l = 0; l < dict.num_blocks(); ++l) {
    const auto& omega = members[static_cast<std::size_t>(l)];
    BlockPassReport report;
    report.block = l;
    report.signals = static_cast<Index>(omega.size());
    if (omega.empty()) {
      report.skipped_empty = true;
      report.objective_after = residuals.sum();
      out.blocks.push_back(report);
      continue;
    }

    const auto update = update_dictionary_block(measurements, omega, codes, dict, l, options.method);
    report.update_rank = update.rank;
    report.rank_deficient_update = update.rank_deficient;

    std::vector<Vector> block_codes;
    block_codes.reserve(omega.size());
    for (Index i : omega) block_codes.push_back(codes[static_cast<std::size_t>(i)].block_coefficients(dict));

    Matrix q;
    try {
      auto orth = orthogonalize_block(update.block, block_codes);
      dict = std::move(dict).with_block_atoms(l, orth.q);
      for (std::size_t j = 0; j < omega.size(); ++j)
        codes[static_cast<std::size_t>(omega[j])] = BlockSparseCode::on_block(dict, l, orth.codes[j]);
      q = std::move(orth.q);
    } catch (const RankDeficient&) {
      report.reverted = true;
      q = dict.block_matrix(l);
    }

    std::vector<char> failed(omega.size(), 0);
    std::vector<Vector> fresh(omega.size());
    detail::parallel_for(static_cast<Index>(omega.size()), options.threads, [&](Index j) {
      const auto& m = measurements[omega[static_cast<std::size_t>(j)]];
      try {
        fresh[static_cast<std::size_t>(j)] = update_coefficients(q, m.sensor, m.y, options.max_condition);
      } catch (const NumericalError&) {
        failed[static_cast<std::size_t>(j)] = 1;
      }
    });
    for (std::size_t j = 0; j < omega.size(); ++j) {
      const Index i = omega[j];
      const auto& m = measurements[i];
      if (failed[j]) {
        ++report.coefficient_failures;
      } else {
        codes[static_cast<std::size_t>(i)] = BlockSparseCode::on_block(dict, l, fresh[j]);
      }
      const Vector s = codes[static_cast<std::size_t>(i)].block_coefficients(dict);
      residuals(i) = (m.y - m.sensor.apply(q) * s).squaredNorm();
    }
    report.objective_after = residuals.sum();
    out.blocks.push_back(report);
  }
  out.objective = residuals.sum();
  out.dict = std::move(dict);
  out.codes = std::move(codes);
  return out;
}

}  // namespace bcs
