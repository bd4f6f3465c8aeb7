#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bcs/block_inference.hpp"
#include "bcs/dict_update.hpp"
#include "bcs/model.hpp"

namespace bcs {

enum class InitMode {
  kRandom,   // Gaussian atoms normalized to unit length
  kSignals,  // zero-filled back-projections A_i^T y_i of randomly chosen signals
};

const char* to_string(InitMode mode);
InitMode parse_init_mode(const std::string& text);

struct LearnerConfig {
  Index k_max = 8;
  Index r = 256;
  /// Number of initial blocks; 0 means r singletons.
  Index L_init = 0;
  int max_outer_iters = 10;
  /// Independent fresh runs; the one with the lowest final objective is kept.
  int restarts = 1;
  double objective_rel_tol = 1e-5;
  double sac_threshold = 0.1;
  /// SAC runs on iterations 1, 1+N, 1+2N, ...; 0 disables it.
  int sac_every = 1;
  double usage_energy_fraction = 0.01;
  std::uint64_t seed = 0;
  bool reseed_dead_blocks = true;
  /// Also treat blocks whose last dictionary update was rank deficient as dead.
  bool reseed_rank_deficient = true;
  InitMode init = InitMode::kRandom;
  DictUpdateMethod method = DictUpdateMethod::kAuto;
  double max_condition = 1e12;
  int threads = 1;

  void validate() const;
};

/// Objective values around one outer iteration.
struct IterationRecord {
  int iteration = 0;
  int restart = 0;
  Index blocks = 0;
  Index merges = 0;
  Index reseeded = 0;
  Index unassigned = 0;
  double objective_before_bomp = 0.0;
  double objective_after_bomp = 0.0;
  double objective_after_pass = 0.0;
  std::vector<BlockPassReport> pass;
};

struct LearnerState {
  BlockDictionary dict;
  std::vector<BlockSparseCode> codes;
  BlockAssignment assignment;
  /// Objective after every block pass.
  std::vector<double> objective_trace;
  std::vector<IterationRecord> iterations;
  std::vector<std::string> warnings;
};

/// Initial dictionary: r atoms in L_init contiguous blocks (singletons by default).
BlockDictionary initial_dictionary(const MeasurementSet& measurements, const LearnerConfig& config);

using IterationCallback = std::function<void(const IterationRecord&)>;

/// Alternates SAC, BOMP and block passes until the relative objective decrease
/// drops below the tolerance or max_outer_iters is reached. Passing `resume`
/// continues from a saved state instead of a fresh initialization (restarts
/// are then ignored).
LearnerState learn(const MeasurementSet& measurements, const LearnerConfig& config,
                   const LearnerState* resume = nullptr, const IterationCallback& on_iteration = {});

/// Blocks that are empty, hold no more signals than atoms, are (optionally)
/// flagged rank deficient by the last pass, or span a subspace already
/// covered by another live block.
std::vector<Index> find_dead_blocks(const LearnerState& state, bool include_rank_deficient = true);

/// Replaces the atoms of each listed block with normalized residual
/// back-projections A_i^T (y_i - A_i D s_i) of the worst-fit signals, one signal
/// per atom and no signal used twice. Members of a reseeded block become
/// unassigned. Other blocks are untouched.
LearnerState reseed_dead_blocks(const MeasurementSet& measurements, LearnerState state,
                                std::span<const Index> blocks, std::mt19937_64& rng);

LearnerState reseed_dead_block(const MeasurementSet& measurements, LearnerState state, Index block,
                               std::mt19937_64& rng);

}  // namespace bcs
