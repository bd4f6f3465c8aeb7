#pragma once

#include <span>
#include <string>
#include <vector>

#include "bcs/block_inference.hpp"
#include "bcs/model.hpp"

namespace bcs {

/// Stacked least-squares system for one block: design row-block j is
/// s_{i_j}[l]^T (x) A_{i_j}, rhs segment j is y_{i_j}; unknowns are vec(D[l])
/// in column-major order.
struct KronSystem {
  Matrix design;
  Vector rhs;
  Index block = -1;
  Index n = 0;
  Index k = 0;
  std::vector<Index> signal_order;
};

/// Builds the dense system over `omega` (sorted ascending before stacking).
/// Throws EmptyBlock for an empty omega.
KronSystem build_kron_system(const MeasurementSet& measurements, std::span<const Index> omega,
                             std::span<const BlockSparseCode> codes, const BlockDictionary& dict, Index block);

struct DictBlockUpdate {
  Matrix block;  // n x k_l
  Index rank = 0;
  bool rank_deficient = false;
};

/// Minimum-norm least-squares solution B^+ rhs reshaped to n x k. Singular
/// values below max(rows, cols) * eps * sigma_max count as zero.
DictBlockUpdate update_dictionary_block(const KronSystem& system);

enum class DictUpdateMethod {
  kAuto,             // pixel rows when every sensor is a pixel mask, otherwise normal equations
  kDenseKron,        // explicit B and its pseudoinverse
  kNormalEquations,  // sum_i (s s^T) (x) (A^T A), never forms B
  kPixelRows,        // normal equations decoupled per pixel (pixel masks only)
};

const char* to_string(DictUpdateMethod method);
/// auto, dense, normal or pixel.
DictUpdateMethod parse_dict_update_method(const std::string& text);

/// Same minimizer as the dense path, computed from accumulated normal
/// equations. Eigenvalues of B^T B below k n * eps * lambda_max count as zero.
DictBlockUpdate update_dictionary_block(const MeasurementSet& measurements, std::span<const Index> omega,
                                        std::span<const BlockSparseCode> codes, const BlockDictionary& dict,
                                        Index block, DictUpdateMethod method = DictUpdateMethod::kAuto);

struct Orthogonalized {
  Matrix q;  // n x k, orthonormal columns
  Matrix r;  // k x k, D = Q R
  std::vector<Vector> codes;  // R s_i
};

/// Thin SVD D = U S V^T; Q = U V^T, R = V S V^T, codes mapped through R so
/// that D s = Q (R s). An orthonormal D comes back as Q = D, R = I.
/// Throws RankDeficient when sigma_min <= 1e-10 sigma_max.
Orthogonalized orthogonalize_block(const Matrix& block, std::span<const Vector> block_codes = {});

/// argmin_s ||y - A Q s|| via Q^T A^T A Q s = Q^T A^T y. Throws NumericalError
/// when m < k or the Gram matrix condition number exceeds max_condition.
Vector update_coefficients(const Matrix& q, const SensingMatrix& sensor, const Vector& y,
                           double max_condition = 1e12);

struct PassOptions {
  DictUpdateMethod method = DictUpdateMethod::kAuto;
  double max_condition = 1e12;
  int threads = 1;
};

struct BlockPassReport {
  Index block = -1;
  Index signals = 0;
  bool skipped_empty = false;
  Index update_rank = 0;
  bool rank_deficient_update = false;
  /// Updated block lost rank; the previous block was kept.
  bool reverted = false;
  Index coefficient_failures = 0;
  double objective_after = 0.0;
};

struct PassResult {
  BlockDictionary dict;
  std::vector<BlockSparseCode> codes;
  double objective = 0.0;
  std::vector<BlockPassReport> blocks;
};

/// One sweep over the blocks in ascending order: dictionary update,
/// orthogonalization, coefficient update. Signals whose coefficient solve
/// fails keep their (rotated) previous coefficients, so each step is
/// non-increasing in the objective.
PassResult run_block_pass(const MeasurementSet& measurements, BlockDictionary dict,
                          std::vector<BlockSparseCode> codes, const BlockAssignment& assignment,
                          const PassOptions& options = {});

}  // namespace bcs
