#include "bcs/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bcs/error.hpp"

namespace bcs {

namespace {

Index rank_above(const Matrix& a, double cutoff) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  Index r = 0;
  while (r < s.size() && s(r) > cutoff) ++r;
  return r;
}

Matrix gather(const Matrix& a, const std::vector<Index>& cols) {
  Matrix out(a.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = a.col(cols[j]);
  return out;
}

// Advances `idx` (strictly increasing, values < n) to the next combination.
bool next_combination(std::vector<Index>& idx, Index n) {
  const auto k = static_cast<Index>(idx.size());
  for (Index j = k - 1; j >= 0; --j) {
    auto& v = idx[static_cast<std::size_t>(j)];
    if (v < n - k + j) {
      ++v;
      for (Index t = j + 1; t < k; ++t) idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
      return true;
    }
  }
  return false;
}

double binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (Index j = 1; j <= k; ++j) out = out * static_cast<double>(n - k + j) / static_cast<double>(j);
  return out;
}

double max_sigma(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

std::string list_head(const std::vector<Index>& items, std::size_t limit = 10) {
  std::ostringstream os;
  for (std::size_t j = 0; j < items.size() && j < limit; ++j) os << (j ? ", " : "") << items[j];
  if (items.size() > limit) os << ", ... (" << items.size() << " total)";
  return os.str();
}

}  // namespace

SparkResult spark(const Matrix& a, Index max_subset) {
  BCS_REQUIRE(a.size() > 0, "spark: empty matrix");
  BCS_REQUIRE(max_subset >= 1, "spark: max_subset must be positive");
  const double cutoff = 1e-10 * max_sigma(a);
  const Index cols = a.cols();
  const Index full_rank = rank_above(a, cutoff);
  SparkResult out;
  if (full_rank == cols) {
    out.value = cols + 1;
    out.searched_up_to = cols;
    return out;
  }
  // Any rank+1 columns are dependent, so the search never needs to go further.
  const Index limit = std::min(max_subset, full_rank + 1);
  for (Index size = 1; size <= limit; ++size) {
    std::vector<Index> idx(static_cast<std::size_t>(size));
    std::iota(idx.begin(), idx.end(), Index{0});
    do {
      if (rank_above(gather(a, idx), cutoff) < size) {
        out.value = size;
        out.searched_up_to = size;
        return out;
      }
    } while (next_combination(idx, cols));
    out.searched_up_to = size;
  }
  return out;
}

double coherence(const Matrix& basis) {
  BCS_REQUIRE(basis.cols() >= 1 && basis.rows() >= basis.cols(), "coherence: basis must be tall and nonempty");
  const Matrix gram = basis.transpose() * basis;
  BCS_REQUIRE((gram - Matrix::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff() <= 1e-10,
              "coherence: basis columns are not orthonormal");
  const double top = basis.cwiseAbs2().maxCoeff();
  return static_cast<double>(basis.rows()) / static_cast<double>(basis.cols()) * top;
}

MuEll mu_ell(const Matrix& y, Index k) {
  BCS_REQUIRE(k >= 1 && k <= std::min(y.rows(), y.cols()), "mu_ell: k out of range");
  Eigen::JacobiSVD<Matrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const Index rank = s(0) > 0.0 ? rank_above(y, 1e-10 * s(0)) : 0;
  if (rank < k) {
    std::ostringstream os;
    os << "mu_ell: matrix has rank " << rank << " < k=" << k;
    throw RankDeficient(rank, os.str());
  }
  const Matrix u = svd.matrixU().leftCols(k);
  const Matrix v = svd.matrixV().leftCols(k);
  const double m1 = static_cast<double>(std::min(y.rows(), y.cols()));
  const double m2 = static_cast<double>(std::max(y.rows(), y.cols()));
  MuEll out;
  out.mu0 = std::max(coherence(u), coherence(v));
  out.mu1 = (u * v.transpose()).cwiseAbs().maxCoeff() * std::sqrt(m1 * m2 / static_cast<double>(k));
  out.mu = std::max(out.mu1 * out.mu1, out.mu0);
  return out;
}

SampleBound theorem1_sample_bound(double mu, Index k, Index m1, Index m2, double beta) {
  BCS_REQUIRE(beta > 1.0, "theorem1_sample_bound: beta must exceed 1");
  BCS_REQUIRE(mu > 0.0 && k > 0 && m1 > 0 && m2 > 0, "theorem1_sample_bound: arguments must be positive");
  const double a = static_cast<double>(m1);
  const double b = static_cast<double>(m2);
  SampleBound out;
  out.exact = 32.0 * mu * static_cast<double>(k) * (a + b) * beta * std::log(2.0 * b);
  out.required = static_cast<std::int64_t>(std::ceil(out.exact));
  const double p = 1.0 - 6.0 * std::log(b) * std::pow(a + b, 2.0 - 2.0 * beta) - std::pow(b, 2.0 - 2.0 * std::sqrt(beta));
  out.probability = std::clamp(p, 0.0, 1.0);
  return out;
}

double coupon_collector_bound(Index n, double draws) {
  BCS_REQUIRE(n >= 1, "coupon_collector_bound: n must be positive");
  BCS_REQUIRE(draws >= 0.0, "coupon_collector_bound: draws must be nonnegative");
  const double nn = static_cast<double>(n);
  return std::min(1.0, nn * std::pow(1.0 - 1.0 / nn, draws));
}

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::kPass:
      return "pass";
    case CheckStatus::kFail:
      return "fail";
    case CheckStatus::kUnverified:
      return "unverified";
  }
  return "?";
}

void ConditionReport::add(ConditionCheck check) {
  overall = overall && check.status == CheckStatus::kPass;
  checks.push_back(std::move(check));
}

std::string ConditionReport::to_json(int indent) const {
  nlohmann::ordered_json j;
  j["overall"] = overall;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    if (c.block)
      e["block"] = *c.block;
    else
      e["block"] = nullptr;
    e["status"] = to_string(c.status);
    e["measured"] = c.measured;
    e["required"] = c.required;
    e["detail"] = c.detail;
    j["checks"].push_back(std::move(e));
  }
  return j.dump(indent);
}

ConditionReport check_dl_uniqueness(const BlockDictionary& dict, std::span<const BlockSparseCode> codes,
                                    const UnionMatrix* uni, const UniquenessOptions& options) {
  ConditionReport report;
  const auto members = block_members(codes, dict.num_blocks());
  Index widest = 0;
  for (Index l = 0; l < dict.num_blocks(); ++l)
    if (!members[static_cast<std::size_t>(l)].empty()) widest = std::max(widest, dict.block_size(l));

  {
    Matrix ad = dict.atoms();
    if (uni) {
      BCS_REQUIRE(uni->cols() == dict.n(), "check_dl_uniqueness: union matrix and dictionary dimensions differ");
      ad = uni->matrix() * dict.atoms();
    }
    const auto sp = spark(ad, options.max_subset);
    ConditionCheck c;
    c.name = "support";
    c.required = static_cast<double>(2 * widest + 1);
    if (sp.value) {
      c.measured = static_cast<double>(*sp.value);
      c.status = *sp.value > 2 * widest ? CheckStatus::kPass : CheckStatus::kFail;
      c.detail = "spark = " + std::to_string(*sp.value) + ", need k_l < spark/2 for k_l up to " + std::to_string(widest);
    } else if (sp.searched_up_to >= 2 * widest) {
      c.measured = static_cast<double>(sp.searched_up_to + 1);
      c.status = CheckStatus::kPass;
      c.detail = "no dependent subset up to size " + std::to_string(sp.searched_up_to) + ", so spark > 2 k_l";
    } else {
      c.measured = static_cast<double>(sp.searched_up_to + 1);
      c.status = CheckStatus::kUnverified;
      c.detail = "no dependent subset up to size " + std::to_string(sp.searched_up_to) +
                 "; spark not determined (raise max_subset)";
    }
    report.add(std::move(c));
  }

  std::mt19937_64 rng(options.seed);
  for (Index l = 0; l < dict.num_blocks(); ++l) {
    const auto& omega = members[static_cast<std::size_t>(l)];
    const Index k = dict.block_size(l);
    const auto pop = static_cast<Index>(omega.size());
    if (pop == 0) continue;

    ConditionCheck rich;
    rich.name = "richness";
    rich.block = l;
    rich.measured = static_cast<double>(pop);
    rich.required = static_cast<double>(k + 1);
    rich.status = pop > k ? CheckStatus::kPass : CheckStatus::kFail;
    rich.detail = "|omega| = " + std::to_string(pop) + ", need > k = " + std::to_string(k);
    report.add(std::move(rich));

    Matrix s(k, pop);
    for (Index j = 0; j < pop; ++j) s.col(j) = codes[static_cast<std::size_t>(omega[static_cast<std::size_t>(j)])].block_coefficients(dict);
    ConditionCheck nd;
    nd.name = "non_degeneracy";
    nd.block = l;
    nd.required = static_cast<double>(k);
    const Index subset = std::min(k, pop);
    const double total = binomial(pop, subset);
    std::int64_t tested = 0;
    std::vector<Index> bad;
    auto test = [&](const std::vector<Index>& idx) {
      ++tested;
      const Matrix sub = gather(s, idx);
      const double top = max_sigma(sub);
      if (top == 0.0 || rank_above(sub, 1e-10 * top) < subset) bad = idx;
    };
    std::vector<Index> idx(static_cast<std::size_t>(subset));
    if (total <= static_cast<double>(options.exhaustive_limit)) {
      std::iota(idx.begin(), idx.end(), Index{0});
      do test(idx);
      while (bad.empty() && next_combination(idx, pop));
      nd.detail = "exhaustive over " + std::to_string(tested) + " subsets";
    } else {
      std::vector<Index> all(static_cast<std::size_t>(pop));
      std::iota(all.begin(), all.end(), Index{0});
      for (std::int64_t t = 0; t < options.samples && bad.empty(); ++t) {
        for (Index j = 0; j < subset; ++j) {
          std::uniform_int_distribution<Index> pick(j, pop - 1);
          std::swap(all[static_cast<std::size_t>(j)], all[static_cast<std::size_t>(pick(rng))]);
        }
        idx.assign(all.begin(), all.begin() + subset);
        std::sort(idx.begin(), idx.end());
        test(idx);
      }
      nd.detail = "sampled " + std::to_string(tested) + " of about " + std::to_string(total) + " subsets";
    }
    nd.measured = static_cast<double>(tested);
    if (!bad.empty()) {
      std::vector<Index> signals;
      for (Index j : bad) signals.push_back(omega[static_cast<std::size_t>(j)]);
      nd.status = CheckStatus::kFail;
      nd.detail += "; degenerate subset: signals " + list_head(signals);
    }
    report.add(std::move(nd));
  }
  return report;
}

ConditionReport proposition1_check(const MeasurementSet& measurements, const BlockDictionary& dict,
                                   const BlockAssignment& assignment, const Proposition1Options& options) {
  BCS_REQUIRE(measurements.n() == dict.n(), "proposition1_check: measurement and dictionary dimensions differ");
  BCS_REQUIRE(assignment.size() == measurements.size(), "proposition1_check: assignment size differs");
  BCS_REQUIRE(options.beta > 0.0, "proposition1_check: beta must be positive");
  ConditionReport report;
  const Index n = dict.n();
  const auto members = assignment.members(dict.num_blocks());
  for (Index l = 0; l < dict.num_blocks(); ++l) {
    const auto& omega = members[static_cast<std::size_t>(l)];
    if (omega.empty()) continue;
    const Index k = dict.block_size(l);
    const auto pop = static_cast<Index>(omega.size());

    ConditionCheck count;
    count.name = "signals_per_block";
    count.block = l;
    count.measured = static_cast<double>(pop);
    count.required = static_cast<double>(n);
    count.status = pop >= n ? CheckStatus::kPass : CheckStatus::kFail;
    count.detail = "|omega| = " + std::to_string(pop) + ", need >= n = " + std::to_string(n);
    report.add(std::move(count));

    Index observed = 0;
    bool all_gaussian = true;
    std::vector<Index> short_signals;
    for (Index i : omega) {
      const auto& sensor = measurements[i].sensor;
      observed += sensor.rows();
      all_gaussian = all_gaussian && sensor.kind() == SensingKind::kGaussian;
      if (sensor.rows() < k) short_signals.push_back(i);
    }
    ConditionCheck obs;
    obs.name = "observations";
    obs.block = l;
    obs.measured = static_cast<double>(observed);
    if (all_gaussian) {
      obs.required = static_cast<double>(k * n);
      obs.detail = "|Omega| >= k n (gaussian sensing)";
    } else {
      obs.required = options.beta * static_cast<double>(k * n) * std::log(static_cast<double>(n));
      std::ostringstream os;
      os << "|Omega| >= beta k n ln n with beta = " << options.beta << " (row-subset sensing)";
      obs.detail = os.str();
    }
    obs.status = obs.measured >= obs.required ? CheckStatus::kPass : CheckStatus::kFail;
    report.add(std::move(obs));

    ConditionCheck per;
    per.name = "measurements_per_signal";
    per.block = l;
    per.required = static_cast<double>(k);
    Index smallest = std::numeric_limits<Index>::max();
    for (Index i : omega) smallest = std::min(smallest, measurements[i].sensor.rows());
    per.measured = static_cast<double>(smallest);
    per.status = short_signals.empty() ? CheckStatus::kPass : CheckStatus::kFail;
    per.detail = short_signals.empty() ? "m_i >= k for every signal"
                                       : "m_i < k = " + std::to_string(k) + " for signals " + list_head(short_signals);
    report.add(std::move(per));

    ConditionCheck rank;
    rank.name = "union_rank";
    rank.block = l;
    rank.required = static_cast<double>(n);
    const auto sensors = measurements.sensors(omega);
    bool mixed = false;
    for (const auto& s : sensors) mixed = mixed || s.kind() != sensors.front().kind();
    Index r = 0;
    std::vector<Index> unseen;
    if (mixed) {
      Index rows = 0;
      for (const auto& s : sensors) rows += s.rows();
      Matrix gamma(rows, n);
      Index at = 0;
      for (const auto& s : sensors) {
        gamma.middleRows(at, s.rows()) = s.dense();
        at += s.rows();
      }
      Eigen::ColPivHouseholderQR<Matrix> qr(gamma);
      r = qr.rank();
    } else {
      const UnionMatrix uni = build_union(sensors);
      r = uni.rank();
      if (sensors.front().kind() == SensingKind::kPixelMask) {
        std::set<Index> seen;
        for (const auto& s : sensors) seen.insert(s.row_ids().begin(), s.row_ids().end());
        for (Index p = 0; p < n; ++p)
          if (!seen.count(p)) unseen.push_back(p);
      }
    }
    rank.measured = static_cast<double>(r);
    rank.status = r == n ? CheckStatus::kPass : CheckStatus::kFail;
    rank.detail = "rank of stacked sensing rows = " + std::to_string(r);
    if (!unseen.empty()) rank.detail += "; never observed coordinates " + list_head(unseen);
    report.add(std::move(rank));
  }
  return report;
}

}  // namespace bcs
