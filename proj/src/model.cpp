#include "bcs/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bcs/error.hpp"

namespace bcs {

BlockDictionary::BlockDictionary(Matrix atoms, std::vector<std::vector<Index>> blocks, Index k_max)
    : atoms_(std::move(atoms)), blocks_(std::move(blocks)), k_max_(k_max) {
  BCS_REQUIRE(atoms_.rows() >= 1 && atoms_.cols() >= 1, "BlockDictionary: empty atom matrix");
  BCS_REQUIRE(k_max_ >= 1, "BlockDictionary: k_max must be positive");
  BCS_REQUIRE(!blocks_.empty(), "BlockDictionary: no blocks");
  std::vector<char> used(static_cast<std::size_t>(atoms_.cols()), 0);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    const auto k = static_cast<Index>(b.size());
    if (k < 1 || k > k_max_ || k > atoms_.rows()) {
      std::ostringstream os;
      os << "BlockDictionary: block " << l << " has size " << k << " (k_max=" << k_max_ << ", n=" << atoms_.rows()
         << ")";
      detail::throw_contract(os.str());
    }
    for (Index c : b) {
      if (c < 0 || c >= atoms_.cols()) {
        std::ostringstream os;
        os << "BlockDictionary: block " << l << " references column " << c << " outside [0, " << atoms_.cols()
           << ")";
        detail::throw_contract(os.str());
      }
      if (used[static_cast<std::size_t>(c)]) {
        std::ostringstream os;
        os << "BlockDictionary: column " << c << " appears in more than one block";
        detail::throw_contract(os.str());
      }
      used[static_cast<std::size_t>(c)] = 1;
    }
  }
  BCS_REQUIRE(atoms_.allFinite(), "BlockDictionary: non-finite atoms");
}

BlockDictionary BlockDictionary::contiguous(Matrix atoms, std::span<const Index> sizes, Index k_max) {
  std::vector<std::vector<Index>> blocks;
  Index next = 0;
  for (Index k : sizes) {
    std::vector<Index> b(static_cast<std::size_t>(std::max<Index>(k, 0)));
    std::iota(b.begin(), b.end(), next);
    next += k;
    blocks.push_back(std::move(b));
  }
  return BlockDictionary(std::move(atoms), std::move(blocks), k_max);
}

const std::vector<Index>& BlockDictionary::block(Index l) const {
  BCS_REQUIRE(l >= 0 && l < num_blocks(), "BlockDictionary: block index out of range");
  return blocks_[static_cast<std::size_t>(l)];
}

Matrix BlockDictionary::block_matrix(Index l) const {
  const auto& b = block(l);
  Matrix d(n(), static_cast<Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) d.col(static_cast<Index>(j)) = atoms_.col(b[j]);
  return d;
}

void BlockDictionary::set_block_atoms(Index l, const Matrix& d) {
  const auto& b = block(l);
  BCS_REQUIRE(d.rows() == n() && d.cols() == static_cast<Index>(b.size()),
              "BlockDictionary::with_block_atoms: replacement has wrong shape");
  BCS_REQUIRE(d.allFinite(), "BlockDictionary::with_block_atoms: non-finite atoms");
  for (std::size_t j = 0; j < b.size(); ++j) atoms_.col(b[j]) = d.col(static_cast<Index>(j));
}

BlockDictionary BlockDictionary::with_block_atoms(Index l, const Matrix& d) const& {
  BlockDictionary out = *this;
  out.set_block_atoms(l, d);
  return out;
}

BlockDictionary BlockDictionary::with_block_atoms(Index l, const Matrix& d) && {
  set_block_atoms(l, d);
  return std::move(*this);
}

double BlockDictionary::orthonormality_error(Index l) const {
  const Matrix d = block_matrix(l);
  return (d.transpose() * d - Matrix::Identity(d.cols(), d.cols())).cwiseAbs().maxCoeff();
}

BlockSparseCode BlockSparseCode::unassigned(Index r) { return {Vector::Zero(r), std::nullopt}; }

BlockSparseCode BlockSparseCode::on_block(const BlockDictionary& dict, Index block, const Vector& block_coefficients) {
  const auto& b = dict.block(block);
  BCS_REQUIRE(block_coefficients.size() == static_cast<Index>(b.size()),
              "BlockSparseCode::on_block: coefficient count does not match block size");
  BlockSparseCode code{Vector::Zero(dict.r()), block};
  for (std::size_t j = 0; j < b.size(); ++j) code.coefficients(b[j]) = block_coefficients(static_cast<Index>(j));
  return code;
}

Vector BlockSparseCode::block_coefficients(const BlockDictionary& dict) const {
  if (!active_block) return Vector();
  const auto& b = dict.block(*active_block);
  Vector s(static_cast<Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) s(static_cast<Index>(j)) = coefficients(b[j]);
  return s;
}

Signal BlockSparseCode::reconstruct(const BlockDictionary& dict) const {
  if (!active_block) return Signal::Zero(dict.n());
  return dict.block_matrix(*active_block) * block_coefficients(dict);
}

void validate_code(const BlockSparseCode& code, const BlockDictionary& dict) {
  BCS_REQUIRE(code.coefficients.size() == dict.r(), "BlockSparseCode: coefficient vector length differs from r");
  std::vector<char> allowed(static_cast<std::size_t>(dict.r()), 0);
  if (code.active_block) {
    BCS_REQUIRE(*code.active_block >= 0 && *code.active_block < dict.num_blocks(),
                "BlockSparseCode: active block out of range");
    for (Index c : dict.block(*code.active_block)) allowed[static_cast<std::size_t>(c)] = 1;
  }
  for (Index c = 0; c < dict.r(); ++c) {
    if (!allowed[static_cast<std::size_t>(c)] && code.coefficients(c) != 0.0) {
      std::ostringstream os;
      os << "BlockSparseCode: nonzero coefficient at column " << c << " outside the active block";
      detail::throw_contract(os.str());
    }
  }
}

std::vector<std::vector<Index>> block_members(std::span<const BlockSparseCode> codes, Index num_blocks) {
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(num_blocks));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto& a = codes[i].active_block;
    if (!a) continue;
    BCS_REQUIRE(*a >= 0 && *a < num_blocks, "block_members: active block out of range");
    members[static_cast<std::size_t>(*a)].push_back(static_cast<Index>(i));
  }
  return members;
}

namespace {

void check_pair(const MeasurementSet& measurements, const BlockDictionary& dict, const BlockSparseCode& code,
                Index i) {
  const auto& m = measurements[i];
  if (m.sensor.cols() != dict.n() || code.coefficients.size() != dict.r()) {
    std::ostringstream os;
    os << "objective: dimension mismatch at signal " << i << " (sensor n=" << m.sensor.cols()
       << ", dictionary n=" << dict.n() << ", code length " << code.coefficients.size() << ", r=" << dict.r() << ")";
    detail::throw_contract(os.str());
  }
}

double residual_sq(const Measurement& m, const BlockDictionary& dict, const BlockSparseCode& code) {
  if (!code.active_block) return m.y.squaredNorm();
  return (m.y - m.sensor.apply(code.reconstruct(dict))).squaredNorm();
}

}  // namespace

Vector squared_residuals(const MeasurementSet& measurements, const BlockDictionary& dict,
                         std::span<const BlockSparseCode> codes) {
  if (static_cast<Index>(codes.size()) != measurements.size()) {
    std::ostringstream os;
    os << "objective: " << codes.size() << " codes for " << measurements.size() << " measurements";
    detail::throw_contract(os.str());
  }
  Vector out(measurements.size());
  for (Index i = 0; i < measurements.size(); ++i) {
    const auto& code = codes[static_cast<std::size_t>(i)];
    check_pair(measurements, dict, code, i);
    out(i) = residual_sq(measurements[i], dict, code);
  }
  return out;
}

double objective(const MeasurementSet& measurements, const BlockDictionary& dict,
                 std::span<const BlockSparseCode> codes) {
  return squared_residuals(measurements, dict, codes).sum();
}

double per_block_objective(const MeasurementSet& measurements, std::span<const Index> omega,
                           const BlockDictionary& dict, Index block, std::span<const BlockSparseCode> codes) {
  BCS_REQUIRE(static_cast<Index>(codes.size()) == measurements.size(),
              "per_block_objective: code count differs from measurement count");
  const Matrix d = dict.block_matrix(block);
  double total = 0.0;
  for (Index i : omega) {
    BCS_REQUIRE(i >= 0 && i < measurements.size(), "per_block_objective: signal index out of range");
    const auto& code = codes[static_cast<std::size_t>(i)];
    check_pair(measurements, dict, code, i);
    if (code.active_block != block) {
      std::ostringstream os;
      os << "per_block_objective: signal " << i << " is not active on block " << block;
      detail::throw_contract(os.str());
    }
    const auto& m = measurements[i];
    total += (m.y - m.sensor.apply(d) * code.block_coefficients(dict)).squaredNorm();
  }
  return total;
}

Matrix orthonormal_basis(const Matrix& a) {
  if (a.cols() == 0) return Matrix(a.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Index rank = 0;
  const double cutoff = s.size() ? 1e-10 * s(0) : 0.0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  return svd.matrixU().leftCols(rank);
}

std::vector<double> principal_angles(const Matrix& a, const Matrix& b) {
  BCS_REQUIRE(a.rows() == b.rows(), "principal_angles: ambient dimensions differ");
  Matrix qa = orthonormal_basis(a);
  Matrix qb = orthonormal_basis(b);
  if (qb.cols() > qa.cols()) std::swap(qa, qb);
  const Index k = qb.cols();
  if (k == 0) return {};
  const Matrix c = qa.transpose() * qb;
  Eigen::JacobiSVD<Matrix> cos_svd(c);
  Eigen::JacobiSVD<Matrix> sin_svd(qb - qa * c);
  // cosines come out descending, sines ascending: both index angles ascending.
  const Vector cosines = cos_svd.singularValues();
  Vector sines = sin_svd.singularValues().reverse();
  std::vector<double> angles(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    const double cs = std::clamp(i < cosines.size() ? cosines(i) : 0.0, 0.0, 1.0);
    const double sn = std::clamp(i < sines.size() ? sines(i) : 1.0, 0.0, 1.0);
    angles[static_cast<std::size_t>(i)] = cs * cs >= 0.5 ? std::asin(sn) : std::acos(cs);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

double max_principal_angle(const Matrix& a, const Matrix& b) {
  const auto angles = principal_angles(a, b);
  return angles.empty() ? 0.0 : angles.back();
}

bool equivalent_solutions(const BlockDictionary& dict_a, std::span<const BlockSparseCode> codes_a,
                          const BlockDictionary& dict_b, std::span<const BlockSparseCode> codes_b, double tol) {
  if (dict_a.n() != dict_b.n() || codes_a.size() != codes_b.size()) return false;
  if (dict_a.num_blocks() != dict_b.num_blocks()) return false;
  std::vector<Index> sizes_a, sizes_b;
  for (Index l = 0; l < dict_a.num_blocks(); ++l) sizes_a.push_back(dict_a.block_size(l));
  for (Index l = 0; l < dict_b.num_blocks(); ++l) sizes_b.push_back(dict_b.block_size(l));
  std::sort(sizes_a.begin(), sizes_a.end());
  std::sort(sizes_b.begin(), sizes_b.end());
  if (sizes_a != sizes_b) return false;

  std::vector<char> matched(static_cast<std::size_t>(dict_b.num_blocks()), 0);
  for (Index la = 0; la < dict_a.num_blocks(); ++la) {
    const Matrix da = dict_a.block_matrix(la);
    bool found = false;
    for (Index lb = 0; lb < dict_b.num_blocks() && !found; ++lb) {
      if (matched[static_cast<std::size_t>(lb)] || dict_b.block_size(lb) != da.cols()) continue;
      const Matrix db = dict_b.block_matrix(lb);
      if (orthonormal_basis(da).cols() != orthonormal_basis(db).cols()) continue;
      if (max_principal_angle(da, db) <= tol) {
        matched[static_cast<std::size_t>(lb)] = 1;
        found = true;
      }
    }
    if (!found) return false;
  }

  for (std::size_t i = 0; i < codes_a.size(); ++i) {
    if (codes_a[i].coefficients.size() != dict_a.r() || codes_b[i].coefficients.size() != dict_b.r()) return false;
    const Signal xa = codes_a[i].reconstruct(dict_a);
    const Signal xb = codes_b[i].reconstruct(dict_b);
    if ((xa - xb).norm() > tol * std::max(1.0, xa.norm())) return false;
  }
  return true;
}

}  // namespace bcs
