#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bcs/sensing.hpp"

namespace bcs {

using Signal = Vector;

/// n x r atom matrix whose columns are partitioned into L disjoint blocks.
///
/// Blocks are explicit column-index lists, so merging blocks never moves
/// atoms: an atom keeps its column for the dictionary's whole life.
class BlockDictionary {
 public:
  BlockDictionary() = default;
  /// Validates disjointness, index range and 1 <= k_l <= min(k_max, n).
  BlockDictionary(Matrix atoms, std::vector<std::vector<Index>> blocks, Index k_max);

  /// Contiguous blocks of the given sizes over the leading columns.
  static BlockDictionary contiguous(Matrix atoms, std::span<const Index> sizes, Index k_max);

  Index n() const { return atoms_.rows(); }
  Index r() const { return atoms_.cols(); }
  Index k_max() const { return k_max_; }
  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  const Matrix& atoms() const { return atoms_; }
  const std::vector<std::vector<Index>>& blocks() const { return blocks_; }
  const std::vector<Index>& block(Index l) const;
  Index block_size(Index l) const { return static_cast<Index>(block(l).size()); }
  /// D[l] as a dense n x k_l matrix.
  Matrix block_matrix(Index l) const;
  /// Copy with the columns of block l replaced by `d` (n x k_l).
  BlockDictionary with_block_atoms(Index l, const Matrix& d) const&;
  BlockDictionary with_block_atoms(Index l, const Matrix& d) &&;
  /// max |D[l]^T D[l] - I|.
  double orthonormality_error(Index l) const;

 private:
  void set_block_atoms(Index l, const Matrix& d);

  Matrix atoms_;
  std::vector<std::vector<Index>> blocks_;
  Index k_max_ = 1;
};

/// Length-r coefficient vector that is nonzero only on its active block.
struct BlockSparseCode {
  Vector coefficients;
  std::optional<Index> active_block;

  static BlockSparseCode unassigned(Index r);
  static BlockSparseCode on_block(const BlockDictionary& dict, Index block, const Vector& block_coefficients);
  /// s_i[l] for the active block; empty when unassigned.
  Vector block_coefficients(const BlockDictionary& dict) const;
  /// D s_i.
  Signal reconstruct(const BlockDictionary& dict) const;
};

/// Throws ContractViolation when the code breaks one-block sparsity.
void validate_code(const BlockSparseCode& code, const BlockDictionary& dict);

/// Index sets omega_l = { i : active_block(i) = l }.
std::vector<std::vector<Index>> block_members(std::span<const BlockSparseCode> codes, Index num_blocks);

/// sum_i ||y_i - A_i D s_i||^2.
double objective(const MeasurementSet& measurements, const BlockDictionary& dict,
                 std::span<const BlockSparseCode> codes);

/// Per-signal squared residuals ||y_i - A_i D s_i||^2.
Vector squared_residuals(const MeasurementSet& measurements, const BlockDictionary& dict,
                         std::span<const BlockSparseCode> codes);

/// sum over i in omega of ||y_i - A_i D[l] s_i[l]||^2; every listed code must be active on `block`.
double per_block_objective(const MeasurementSet& measurements, std::span<const Index> omega,
                           const BlockDictionary& dict, Index block, std::span<const BlockSparseCode> codes);

/// Orthonormal basis of span(a) (numerical rank cutoff 1e-10 relative).
Matrix orthonormal_basis(const Matrix& a);

/// Principal angles between span(a) and span(b), ascending, in radians.
std::vector<double> principal_angles(const Matrix& a, const Matrix& b);

/// Largest principal angle between two subspaces of equal dimension.
double max_principal_angle(const Matrix& a, const Matrix& b);

/// Equality up to block permutation and invertible per-block transforms:
/// matched blocks must span the same subspace and every reconstruction D s_i
/// must agree within `tol`.
bool equivalent_solutions(const BlockDictionary& dict_a, std::span<const BlockSparseCode> codes_a,
                          const BlockDictionary& dict_b, std::span<const BlockSparseCode> codes_b,
                          double tol = 1e-6);

}  // namespace bcs
