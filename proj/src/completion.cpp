#include "bcs/completion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bcs/error.hpp"

namespace bcs {

void SvtConfig::validate() const {
  BCS_REQUIRE(tau > 0.0 && std::isfinite(tau), "svt: tau must be positive");
  BCS_REQUIRE(delta > 0.0 && std::isfinite(delta), "svt: delta must be positive");
  BCS_REQUIRE(max_iters >= 1, "svt: max_iters must be at least 1");
  BCS_REQUIRE(tol >= 0.0, "svt: tol must be nonnegative");
}

SvtConfig SvtConfig::standard(Index rows, Index cols, Index observed) {
  BCS_REQUIRE(rows > 0 && cols > 0 && observed > 0, "svt: standard schedule needs a nonempty observation");
  SvtConfig c;
  c.tau = 5.0 * std::sqrt(static_cast<double>(rows) * static_cast<double>(cols));
  c.delta = 1.2 * static_cast<double>(rows) * static_cast<double>(cols) / static_cast<double>(observed);
  return c;
}

Matrix shrink_singular_values(const Matrix& z, double tau) {
  BCS_REQUIRE(z.allFinite(), "shrink_singular_values: non-finite input");
  BCS_REQUIRE(tau >= 0.0, "shrink_singular_values: tau must be nonnegative");
  if (z.size() == 0) return z;
  Eigen::BDCSVD<Matrix> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = (svd.singularValues().array() - tau).max(0.0).matrix();
  Index keep = 0;
  while (keep < s.size() && s(keep) > 0.0) ++keep;
  if (keep == 0) return Matrix::Zero(z.rows(), z.cols());
  return svd.matrixU().leftCols(keep) * s.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).transpose();
}

SvtResult svt_complete(const ObservationMatrix& obs, const SvtConfig& config) {
  config.validate();
  BCS_REQUIRE(obs.observed_count() > 0, "svt_complete: no observed entries");
  SvtResult out;
  if (const auto rows = obs.missing_rows(); !rows.empty()) {
    std::ostringstream os;
    os << "svt_complete: " << rows.size() << " row(s) entirely unobserved (first: " << rows.front()
       << "); no recovery guarantee";
    out.warnings.push_back(os.str());
  }
  if (const auto cols = obs.missing_cols(); !cols.empty()) {
    std::ostringstream os;
    os << "svt_complete: " << cols.size() << " column(s) entirely unobserved (first: " << cols.front()
       << "); no recovery guarantee";
    out.warnings.push_back(os.str());
  }

  std::vector<Index> us, vs;
  Vector values(obs.observed_count());
  us.reserve(static_cast<std::size_t>(obs.observed_count()));
  vs.reserve(static_cast<std::size_t>(obs.observed_count()));
  for (const auto& [key, value] : obs.entries()) {
    values(static_cast<Index>(us.size())) = value;
    us.push_back(key.first);
    vs.push_back(key.second);
  }
  const double norm_m = values.norm();
  Matrix x = Matrix::Zero(obs.rows(), obs.cols());
  if (norm_m == 0.0) {
    out.y = x;
    out.converged = true;
    return out;
  }

  // Kick start: the first iterations leave Y = 0 until X crosses tau.
  {
    const Matrix pm = obs.to_dense(0.0);
    Eigen::BDCSVD<Matrix> svd(pm);
    const double top = svd.singularValues()(0);
    const double k0 = std::ceil(config.tau / (config.delta * top));
    if (k0 > 0.0) x = (k0 * config.delta) * pm;
  }

  double best = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= config.max_iters; ++it) {
    out.y = shrink_singular_values(x, config.tau);
    double sq = 0.0;
    for (std::size_t e = 0; e < us.size(); ++e) {
      const double diff = values(static_cast<Index>(e)) - out.y(us[e], vs[e]);
      sq += diff * diff;
      x(us[e], vs[e]) += config.delta * diff;
    }
    out.residual = std::sqrt(sq) / norm_m;
    out.iterations = it;
    if (!std::isfinite(out.residual)) throw Divergence("svt_complete: residual became non-finite; try a smaller delta");
    if (out.residual < config.tol) {
      out.converged = true;
      break;
    }
    best = std::min(best, out.residual);
    if (out.residual > 10.0 * best) {
      std::ostringstream os;
      os << "svt_complete: residual grew to " << out.residual << " from a minimum of " << best
         << " at iteration " << it << "; try a smaller delta";
      throw Divergence(os.str());
    }
  }
  return out;
}

CompletedFactors factor_completed(const Matrix& y, const UnionMatrix& uni, Index k) {
  BCS_REQUIRE(y.rows() == uni.rows(), "factor_completed: Y and the union matrix have different row counts");
  BCS_REQUIRE(k >= 1 && k <= std::min(uni.cols(), y.cols()), "factor_completed: k out of range");
  const Index rank = uni.rank();
  if (rank < uni.cols()) {
    std::ostringstream os;
    os << "factor_completed: union matrix has rank " << rank << " < n=" << uni.cols();
    throw RankDeficient(rank, os.str());
  }
  const Matrix x = uni.matrix().completeOrthogonalDecomposition().solve(y);
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  CompletedFactors out;
  out.d = svd.matrixU().leftCols(k);
  out.s = svd.singularValues().head(k).asDiagonal() * svd.matrixV().leftCols(k).transpose();
  out.residual = (x - out.d * out.s).norm();
  return out;
}

}  // namespace bcs
