#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bcs/block_inference.hpp"
#include "bcs/model.hpp"

namespace bcs {

struct SparkResult {
  /// Smallest dependent column count; cols+1 for full column rank. Empty when
  /// no dependent subset exists up to `searched_up_to` but one may exist above.
  std::optional<Index> value;
  Index searched_up_to = 0;
  bool verified() const { return value.has_value(); }
};

/// Exhaustive search over column subsets of size <= max_subset, rank cutoff
/// 1e-10 sigma_max of the whole matrix.
SparkResult spark(const Matrix& a, Index max_subset = 6);

/// (n/k) max_{u,v} (z_u^T e_v)^2 for a basis with orthonormal columns.
double coherence(const Matrix& basis);

struct MuEll {
  double mu0 = 0.0;
  double mu1 = 0.0;
  double mu = 0.0;  // max(mu1^2, mu0)
};

/// Coherence parameters of the rank-k truncated SVD of y.
MuEll mu_ell(const Matrix& y, Index k);

struct SampleBound {
  double exact = 0.0;     // 32 mu k (M1+M2) beta ln(2 M2)
  std::int64_t required = 0;  // ceil(exact)
  double probability = 0.0;   // clamped to [0, 1]
};

SampleBound theorem1_sample_bound(double mu, Index k, Index m1, Index m2, double beta);

/// min(1, n (1 - 1/n)^draws).
double coupon_collector_bound(Index n, double draws);

enum class CheckStatus { kPass, kFail, kUnverified };
const char* to_string(CheckStatus status);

struct ConditionCheck {
  std::string name;
  std::optional<Index> block;
  CheckStatus status = CheckStatus::kPass;
  double measured = 0.0;
  double required = 0.0;
  std::string detail;
};

struct ConditionReport {
  std::vector<ConditionCheck> checks;
  /// True when every check passed; an unverified check keeps this false.
  bool overall = true;

  void add(ConditionCheck check);
  std::string to_json(int indent = 2) const;
};

struct UniquenessOptions {
  Index max_subset = 6;
  /// Subsets tested exhaustively up to this count, otherwise sampled.
  std::int64_t exhaustive_limit = 10000;
  std::int64_t samples = 10000;
  std::uint64_t seed = 0;
};

/// Support (spark of A~ D, or of D when `uni` is null), richness (|omega_l| > k_l)
/// and non-degeneracy (every k_l-subset of block codes has rank k_l).
ConditionReport check_dl_uniqueness(const BlockDictionary& dict, std::span<const BlockSparseCode> codes,
                                    const UnionMatrix* uni = nullptr, const UniquenessOptions& options = {});

struct Proposition1Options {
  /// Constant in |Omega| >= beta k n ln n for row-subset sensing.
  double beta = 2.0;
};

/// Per nonempty block: |omega_l| >= n, |Omega| large enough, m_i >= k_l for
/// every member, and rank of the stacked sensing rows equal to n.
ConditionReport proposition1_check(const MeasurementSet& measurements, const BlockDictionary& dict,
                                   const BlockAssignment& assignment, const Proposition1Options& options = {});

}  // namespace bcs
