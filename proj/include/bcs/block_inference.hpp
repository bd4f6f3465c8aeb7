#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bcs/model.hpp"

namespace bcs {

/// Least-squares fit of one measurement against one block.
struct BlockFit {
  Index block = -1;
  Vector coefficients;
  double residual = 0.0;  // ||y - A D[l] s||_2
};

/// Solve min_s ||y - phi s|| through the k x k normal equations.
/// Returns nullopt when phi has fewer rows than columns or the Gram matrix
/// has reciprocal condition below 1 / max_condition.
std::optional<Vector> solve_block_least_squares(const Matrix& phi, const Vector& y, double max_condition = 1e12);

/// K=1 block matching pursuit: every block is fitted by least squares and the
/// smallest residual wins (ties go to the lower block index). Blocks whose
/// Gram matrix is singular are skipped with a warning appended to `warnings`.
/// Throws NoFeasibleBlock when every block is skipped.
BlockFit bomp_assign_one(const Vector& y, const SensingMatrix& sensor, const BlockDictionary& dict,
                         std::vector<std::string>* warnings = nullptr, double max_condition = 1e12);

/// Per-signal block choice and residual norm. Unassigned entries only occur
/// when assignment was run with `allow_unassigned`.
struct BlockAssignment {
  std::vector<std::optional<Index>> block;
  std::vector<double> residual;

  Index size() const { return static_cast<Index>(block.size()); }
  std::vector<std::vector<Index>> members(Index num_blocks) const;
};

struct BompOptions {
  /// Leave infeasible signals unassigned instead of throwing.
  bool allow_unassigned = false;
  double max_condition = 1e12;
  int threads = 1;
};

struct BompResult {
  BlockAssignment assignment;
  std::vector<BlockSparseCode> codes;
  std::vector<std::string> warnings;
};

BompResult bomp_assign_all(const MeasurementSet& measurements, const BlockDictionary& dict,
                           const BompOptions& options = {});

struct UsageOptions {
  /// Greedy fitting stops once the residual energy falls to this fraction of ||y||^2.
  double energy_fraction = 0.01;
  /// Most blocks a signal may use; 0 means k_max.
  Index max_blocks = 0;
  double max_condition = 1e12;
  int threads = 1;
};

/// Multi-block usage sets: each signal is fitted greedily by several blocks
/// (best residual reduction first, joint least-squares refit after every
/// pick) until the residual drops below the energy threshold. Returns, for
/// each block, the ascending list of signals that picked it.
std::vector<std::vector<Index>> compute_usage(const MeasurementSet& measurements, const BlockDictionary& dict,
                                              const UsageOptions& options = {});

enum class SimilarityScore { kJaccard, kOverlap };

struct SacOptions {
  double threshold = 0.1;
  SimilarityScore score = SimilarityScore::kJaccard;
};

struct SacResult {
  BlockDictionary dict;
  /// new block index for every input block
  std::vector<Index> old_to_new;
  Index merges = 0;
};

/// Greedy agglomeration: merge the most similar admissible pair (combined size
/// <= k_max, score strictly above threshold) until none is left. The atom
/// matrix is untouched; a merged block lists the first block's columns, then
/// the second's, and takes the lower of the two positions.
SacResult sac_merge(const BlockDictionary& dict, const std::vector<std::vector<Index>>& usage, Index k_max,
                    const SacOptions& options = {});

/// Rewrites codes after a merge. Coefficients keep their columns, so D s_i is unchanged.
std::vector<BlockSparseCode> remap_codes(std::vector<BlockSparseCode> codes, const std::vector<Index>& old_to_new);

}  // namespace bcs
