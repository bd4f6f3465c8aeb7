#include "bcs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "bcs/error.hpp"
#include "parallel.hpp"

namespace bcs {

namespace {

std::vector<Index> sample_without_replacement(Index n, Index m, std::mt19937_64& rng) {
  std::vector<Index> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), Index{0});
  for (Index j = 0; j < m; ++j) {
    std::uniform_int_distribution<Index> pick(j, n - 1);
    std::swap(ids[static_cast<std::size_t>(j)], ids[static_cast<std::size_t>(pick(rng))]);
  }
  ids.resize(static_cast<std::size_t>(m));
  std::sort(ids.begin(), ids.end());
  return ids;
}

Index rows_for(Index n, double fraction) {
  BCS_REQUIRE(fraction > 0.0 && fraction <= 1.0, "observation fraction must lie in (0, 1]");
  return std::clamp<Index>(static_cast<Index>(std::llround(fraction * static_cast<double>(n))), 1, n);
}

Index numerical_rank(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Index r = 0;
  while (r < s.size() && s(r) > 1e-10 * s(0)) ++r;
  return r;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

PlantedModel generate_planted(Index n, std::span<const Index> sizes, std::span<const Index> counts,
                              std::uint64_t seed) {
  BCS_REQUIRE(n >= 1, "generate_planted: n must be positive");
  BCS_REQUIRE(!sizes.empty() && sizes.size() == counts.size(),
              "generate_planted: sizes and counts must be nonempty and of equal length");
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    std::ostringstream os;
    os << "generate_planted: block " << l;
    BCS_REQUIRE(sizes[l] >= 1 && sizes[l] <= n, os.str() + " must have 1 <= k <= n");
    BCS_REQUIRE(counts[l] >= sizes[l] + 1, os.str() + " violates richness (needs at least k+1 signals)");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index r = std::accumulate(sizes.begin(), sizes.end(), Index{0});
  const Index total = std::accumulate(counts.begin(), counts.end(), Index{0});
  Matrix atoms(n, r);
  Index col = 0;
  for (Index k : sizes) {
    Matrix g(n, k);
    for (Index j = 0; j < k; ++j)
      for (Index p = 0; p < n; ++p) g(p, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    atoms.middleCols(col, k) = qr.householderQ() * Matrix::Identity(n, k);
    col += k;
  }
  PlantedModel model;
  model.dict = BlockDictionary::contiguous(std::move(atoms), sizes, *std::max_element(sizes.begin(), sizes.end()));
  model.signals.resize(n, total);
  model.counts.assign(counts.begin(), counts.end());
  model.seed = seed;
  Index i = 0;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    for (Index c = 0; c < counts[l]; ++c, ++i) {
      Vector s(sizes[l]);
      for (Index j = 0; j < sizes[l]; ++j) s(j) = normal(rng);
      model.codes.push_back(BlockSparseCode::on_block(model.dict, static_cast<Index>(l), s));
      model.signals.col(i) = model.codes.back().reconstruct(model.dict);
      model.labels.push_back(static_cast<Index>(l));
    }
  }
  return model;
}

PlantedModel generate_planted(Index n, Index L, Index k, Index count, std::uint64_t seed) {
  BCS_REQUIRE(L >= 1, "generate_planted: L must be positive");
  std::vector<Index> sizes(static_cast<std::size_t>(L), k);
  std::vector<Index> counts(static_cast<std::size_t>(L), count);
  return generate_planted(n, sizes, counts, seed);
}

std::vector<SensingMatrix> random_pixel_masks(Index n, Index count, double fraction, std::uint64_t seed) {
  const Index m = rows_for(n, fraction);
  std::mt19937_64 rng(seed);
  std::vector<SensingMatrix> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) out.push_back(make_pixel_mask(n, sample_without_replacement(n, m, rng)));
  return out;
}

std::vector<SensingMatrix> random_gaussian_sensors(Index n, Index count, double fraction, std::uint64_t seed) {
  const Index m = rows_for(n, fraction);
  std::mt19937_64 rng(seed);
  std::vector<SensingMatrix> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) out.push_back(make_gaussian(m, n, rng()));
  return out;
}

double signal_psnr(const Matrix& reference, const Matrix& estimate, double peak) {
  BCS_REQUIRE(reference.rows() == estimate.rows() && reference.cols() == estimate.cols(),
              "signal_psnr: shapes differ");
  BCS_REQUIRE(reference.size() > 0, "signal_psnr: empty input");
  if (peak <= 0.0) peak = reference.cwiseAbs().maxCoeff();
  const double mse = (reference - estimate).squaredNorm() / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

Matrix reconstruct_all(const BlockDictionary& dict, std::span<const BlockSparseCode> codes) {
  Matrix out(dict.n(), static_cast<Index>(codes.size()));
  for (std::size_t i = 0; i < codes.size(); ++i) out.col(static_cast<Index>(i)) = codes[i].reconstruct(dict);
  return out;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t fraction_index, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(fraction_index), static_cast<std::uint32_t>(trial)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

LearnerConfig PhaseConfig::default_learner() {
  LearnerConfig c;
  c.max_outer_iters = 50;
  c.restarts = 3;
  return c;
}

PhaseResult phase_transition(const PhaseConfig& config) {
  return phase_transition(config, generate_planted(config.n, config.L, config.k, config.count, config.seed));
}

PhaseResult phase_transition(const PhaseConfig& config, const PlantedModel& model) {
  BCS_REQUIRE(config.trials >= 1, "phase_transition: trials must be at least 1");
  BCS_REQUIRE(!config.fractions.empty(), "phase_transition: no fractions given");
  for (double f : config.fractions)
    BCS_REQUIRE(f > 0.0 && f <= 1.0, "phase_transition: fractions must lie in (0, 1]");
  BCS_REQUIRE(model.signals.cols() > 0 && model.dict.num_blocks() > 0, "phase_transition: empty model");
  const Index total = model.signals.cols();
  const Index n = model.signals.rows();
  Index k = 0;
  for (Index l = 0; l < model.dict.num_blocks(); ++l) k = std::max(k, model.dict.block_size(l));

  PhaseResult out;
  const auto trials = static_cast<std::size_t>(config.trials);
  out.trials.resize(config.fractions.size() * trials);
  detail::parallel_for(static_cast<Index>(out.trials.size()), config.threads, [&](Index job) {
    const auto f = static_cast<std::size_t>(job) / trials;
    const int t = static_cast<int>(static_cast<std::size_t>(job) % trials);
    PhaseTrial& row = out.trials[static_cast<std::size_t>(job)];
    row.fraction = config.fractions[f];
    row.trial = t;
    const std::uint64_t seed = trial_seed(config.seed, f, t);
    try {
      auto sensors = random_pixel_masks(n, total, row.fraction, seed);
      const MeasurementSet ms = measure(model.signals, std::move(sensors));
      LearnerConfig lc = config.learner;
      if (config.size_learner) {
        lc.r = 2 * model.dict.num_blocks() * k;
        lc.k_max = k;
      }
      lc.seed = seed;
      lc.threads = 1;
      const LearnerState state = learn(ms, lc);
      row.psnr_db = signal_psnr(model.signals, reconstruct_all(state.dict, state.codes));
      row.success = row.psnr_db > config.threshold_db || std::isinf(row.psnr_db);
    } catch (const std::exception& e) {
      row.psnr_db = std::numeric_limits<double>::quiet_NaN();
      row.success = false;
      row.reason = e.what();
    }
  });
  for (std::size_t f = 0; f < config.fractions.size(); ++f) {
    Index wins = 0;
    for (std::size_t t = 0; t < trials; ++t) wins += out.trials[f * trials + t].success ? 1 : 0;
    out.summary.push_back({config.fractions[f], static_cast<double>(wins) / static_cast<double>(trials)});
  }
  return out;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  BCS_REQUIRE(a.size() == b.size() && !a.empty(), "spearman: inputs must be nonempty and of equal length");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

RankClustering rank_clustering_oracle(const Matrix& signals, Index k) {
  const Index count = signals.cols();
  const Index n = signals.rows();
  BCS_REQUIRE(count <= 12, "rank_clustering_oracle: limited to N <= 12 signals");
  BCS_REQUIRE(k >= 1, "rank_clustering_oracle: k must be positive");
  RankClustering out;
  out.labels.assign(static_cast<std::size_t>(count), 0);
  if (count == 0) return out;
  if (k >= n || k + 1 > count) {
    out.clusters = 1;
    out.warnings.push_back("rank_clustering_oracle: k >= n or N <= k, every signal falls in one cluster");
    return out;
  }
  std::vector<Index> parent(static_cast<std::size_t>(count));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] =
        parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  std::vector<bool> pick(static_cast<std::size_t>(count), false);
  std::fill(pick.begin(), pick.begin() + (k + 1), true);
  Matrix sub(n, k + 1);
  do {
    std::vector<Index> ids;
    for (Index i = 0; i < count; ++i)
      if (pick[static_cast<std::size_t>(i)]) ids.push_back(i);
    for (Index j = 0; j <= k; ++j) sub.col(j) = signals.col(ids[static_cast<std::size_t>(j)]);
    if (numerical_rank(sub) <= k) {
      for (Index j = 1; j <= k; ++j) parent[static_cast<std::size_t>(find(ids[static_cast<std::size_t>(j)]))] =
          find(ids[0]);
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  std::map<Index, Index> ids;
  for (Index i = 0; i < count; ++i) {
    const Index root = find(i);
    auto it = ids.find(root);
    if (it == ids.end()) it = ids.emplace(root, static_cast<Index>(ids.size())).first;
    out.labels[static_cast<std::size_t>(i)] = it->second;
  }
  out.clusters = static_cast<Index>(ids.size());
  return out;
}

Matrix random_low_rank(Index rows, Index cols, Index rank, std::uint64_t seed) {
  BCS_REQUIRE(rows >= 1 && cols >= 1 && rank >= 1 && rank <= std::min(rows, cols),
              "random_low_rank: rank must lie in [1, min(rows, cols)]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix u(rows, rank), v(cols, rank);
  for (Index j = 0; j < u.size(); ++j) u.data()[j] = normal(rng);
  for (Index j = 0; j < v.size(); ++j) v.data()[j] = normal(rng);
  return u * v.transpose();
}

ObservationMatrix sample_entries(const Matrix& full, double fraction, std::uint64_t seed) {
  BCS_REQUIRE(fraction > 0.0 && fraction <= 1.0, "sample_entries: fraction must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  ObservationMatrix obs(full.rows(), full.cols());
  for (Index v = 0; v < full.cols(); ++v)
    for (Index u = 0; u < full.rows(); ++u)
      if (uniform(rng) < fraction) obs.set(u, v, full(u, v));
  return obs;
}

ObservationMatrix sample_entries_exact(const Matrix& full, Index count, std::uint64_t seed) {
  BCS_REQUIRE(count >= 0 && count <= full.size(), "sample_entries_exact: count out of range");
  std::mt19937_64 rng(seed);
  const auto ids = sample_without_replacement(full.size(), count, rng);
  ObservationMatrix obs(full.rows(), full.cols());
  for (Index id : ids) obs.set(id % full.rows(), id / full.rows(), full(id % full.rows(), id / full.rows()));
  return obs;
}

bool same_partition(std::span<const Index> a, std::span<const Index> b) {
  if (a.size() != b.size()) return false;
  std::map<Index, Index> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [x, fresh_x] = ab.emplace(a[i], b[i]);
    auto [y, fresh_y] = ba.emplace(b[i], a[i]);
    if ((!fresh_x && x->second != b[i]) || (!fresh_y && y->second != a[i])) return false;
  }
  return true;
}

}  // namespace bcs
