#pragma once

#include <string>
#include <vector>

#include "bcs/sensing.hpp"

namespace bcs {

struct SvtConfig {
  double tau = 1.0;
  double delta = 1.0;
  int max_iters = 2000;
  /// Stop once ||P_Omega(Y - M)||_F / ||P_Omega(M)||_F < tol.
  double tol = 1e-6;

  void validate() const;
  /// tau = 5 sqrt(rows cols), delta = 1.2 rows cols / |Omega|.
  static SvtConfig standard(Index rows, Index cols, Index observed);
};

/// U max(S - tau, 0) V^T.
Matrix shrink_singular_values(const Matrix& z, double tau);

struct SvtResult {
  Matrix y;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Singular value thresholding: Y = shrink(X, tau), X += delta P_Omega(M - Y).
/// Throws Divergence when the residual climbs to 10x its running minimum.
SvtResult svt_complete(const ObservationMatrix& obs, const SvtConfig& config);

struct CompletedFactors {
  Matrix d;  // n x k, orthonormal columns
  Matrix s;  // k x N
  double residual = 0.0;  // ||X - D S||_F with X = pinv(A~) Y
};

/// X = pinv(A~) Y, then the rank-k truncated SVD X ~ U_k (S_k V_k^T).
/// Throws RankDeficient when rank(A~) < n.
CompletedFactors factor_completed(const Matrix& y, const UnionMatrix& uni, Index k);

}  // namespace bcs
