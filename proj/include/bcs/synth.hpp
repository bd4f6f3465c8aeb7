#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bcs/learner.hpp"
#include "bcs/model.hpp"

namespace bcs {

/// Ground truth for recovery experiments: x_i = D s_i with orthonormal blocks.
struct PlantedModel {
  BlockDictionary dict;
  std::vector<BlockSparseCode> codes;
  Matrix signals;  // n x N, block 0 signals first
  std::vector<Index> labels;
  std::vector<Index> counts;
  std::uint64_t seed = 0;
};

/// Orthonormalized Gaussian blocks and i.i.d. N(0,1) coefficients. Requires
/// counts[l] >= sizes[l] + 1.
PlantedModel generate_planted(Index n, std::span<const Index> sizes, std::span<const Index> counts,
                              std::uint64_t seed);
PlantedModel generate_planted(Index n, Index L, Index k, Index count, std::uint64_t seed);

/// Pixel masks observing round(fraction * n) coordinates per signal, drawn
/// uniformly without replacement.
std::vector<SensingMatrix> random_pixel_masks(Index n, Index count, double fraction, std::uint64_t seed);

/// Independent Gaussian sensing matrices of round(fraction * n) rows.
std::vector<SensingMatrix> random_gaussian_sensors(Index n, Index count, double fraction, std::uint64_t seed);

/// 10 log10(peak^2 / MSE) over all entries; +inf when MSE = 0. A non-positive
/// peak selects max |reference|.
double signal_psnr(const Matrix& reference, const Matrix& estimate, double peak = 0.0);

/// Reconstructions D s_i stacked as columns.
Matrix reconstruct_all(const BlockDictionary& dict, std::span<const BlockSparseCode> codes);

struct PhaseConfig {
  Index n = 32;
  Index L = 3;
  Index k = 4;
  Index count = 128;
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int trials = 10;
  double threshold_db = 40.0;
  std::uint64_t seed = 0;
  LearnerConfig learner = default_learner();
  /// Sets learner.r = 2 L k and learner.k_max = k before running.
  bool size_learner = true;
  int threads = 1;

  /// 50 outer iterations and 3 restarts.
  static LearnerConfig default_learner();
};

struct PhaseTrial {
  double fraction = 0.0;
  int trial = 0;
  double psnr_db = 0.0;
  bool success = false;
  std::string reason;
};

struct PhaseRow {
  double fraction = 0.0;
  double frequency = 0.0;
};

struct PhaseResult {
  std::vector<PhaseTrial> trials;
  std::vector<PhaseRow> summary;
};

/// Seed for trial t at fraction index f, independent of scheduling.
std::uint64_t trial_seed(std::uint64_t master, std::size_t fraction_index, int trial);

/// One planted model (from the master seed); for every fraction and trial a
/// fresh set of pixel masks, a full learner run and a PSNR against the planted
/// signals. Learner errors count as failures and fill `reason`.
PhaseResult phase_transition(const PhaseConfig& config);
/// Same experiment on a given ground truth; n, L, k and count in `config`
/// are ignored, and learner sizing uses the model's block count and largest block.
PhaseResult phase_transition(const PhaseConfig& config, const PlantedModel& model);

/// Spearman rank correlation (average ranks for ties); 0 when either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

struct RankClustering {
  std::vector<Index> labels;  // cluster id per signal, numbered by first appearance
  Index clusters = 0;
  std::vector<std::string> warnings;
};

/// Exhaustive clustering by rank tests on all (k+1)-subsets of columns: any
/// subset of rank <= k lies in one subspace, and such subsets are chained.
/// Limited to N <= 12.
RankClustering rank_clustering_oracle(const Matrix& signals, Index k);

/// U V^T with i.i.d. N(0,1) factors of the given rank.
Matrix random_low_rank(Index rows, Index cols, Index rank, std::uint64_t seed);

/// Each entry observed independently with probability `fraction`.
ObservationMatrix sample_entries(const Matrix& full, double fraction, std::uint64_t seed);

/// Exactly `count` entries observed, uniform without replacement.
ObservationMatrix sample_entries_exact(const Matrix& full, Index count, std::uint64_t seed);

/// True when two labelings describe the same partition.
bool same_partition(std::span<const Index> a, std::span<const Index> b);

}  // namespace bcs
