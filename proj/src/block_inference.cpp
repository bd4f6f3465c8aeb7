#include "bcs/block_inference.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <sstream>

#include "bcs/error.hpp"
#include "parallel.hpp"

namespace bcs {

std::optional<Vector> solve_block_least_squares(const Matrix& phi, const Vector& y, double max_condition) {
  if (phi.rows() < phi.cols() || phi.cols() == 0) return std::nullopt;
  const Matrix gram = phi.transpose() * phi;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) return std::nullopt;
  if (!(llt.rcond() * max_condition >= 1.0)) return std::nullopt;
  Vector s = llt.solve(phi.transpose() * y);
  if (!s.allFinite()) return std::nullopt;
  return s;
}

namespace {

Matrix gather_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = m.col(cols[j]);
  return out;
}

struct OneResult {
  std::optional<BlockFit> fit;
  std::vector<Index> skipped;
};

OneResult assign_one(const Vector& y, const Matrix& projected_atoms, const BlockDictionary& dict,
                     double max_condition) {
  OneResult out;
  double best = std::numeric_limits<double>::infinity();
  for (Index l = 0; l < dict.num_blocks(); ++l) {
    const Matrix phi = gather_columns(projected_atoms, dict.block(l));
    auto s = solve_block_least_squares(phi, y, max_condition);
    if (!s) {
      out.skipped.push_back(l);
      continue;
    }
    const double res = (y - phi * *s).norm();
    if (res < best) {
      best = res;
      out.fit = BlockFit{l, std::move(*s), res};
    }
  }
  return out;
}

std::string skip_message(Index signal, const std::vector<Index>& skipped) {
  std::ostringstream os;
  if (signal >= 0) os << "signal " << signal << ": ";
  os << "skipped " << skipped.size() << " block(s) with singular Gram matrix (first: "
     << skipped.front() << ")";
  return os.str();
}

}  // namespace

BlockFit bomp_assign_one(const Vector& y, const SensingMatrix& sensor, const BlockDictionary& dict,
                         std::vector<std::string>* warnings, double max_condition) {
  BCS_REQUIRE(sensor.cols() == dict.n(), "bomp_assign_one: sensor and dictionary dimensions differ");
  BCS_REQUIRE(y.size() == sensor.rows(), "bomp_assign_one: measurement length differs from sensor rows");
  auto res = assign_one(y, sensor.apply(dict.atoms()), dict, max_condition);
  if (!res.skipped.empty() && warnings) warnings->push_back(skip_message(-1, res.skipped));
  if (!res.fit) throw NoFeasibleBlock(-1, "bomp_assign_one: no block admits a least-squares fit");
  return std::move(*res.fit);
}

std::vector<std::vector<Index>> BlockAssignment::members(Index num_blocks) const {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(num_blocks));
  for (std::size_t i = 0; i < block.size(); ++i)
    if (block[i]) out[static_cast<std::size_t>(*block[i])].push_back(static_cast<Index>(i));
  return out;
}

BompResult bomp_assign_all(const MeasurementSet& measurements, const BlockDictionary& dict,
                           const BompOptions& options) {
  BCS_REQUIRE(measurements.n() == dict.n(), "bomp_assign_all: measurement and dictionary dimensions differ");
  const Index count = measurements.size();
  std::vector<OneResult> results(static_cast<std::size_t>(count));
  detail::parallel_for(count, options.threads, [&](Index i) {
    const auto& m = measurements[i];
    results[static_cast<std::size_t>(i)] =
        assign_one(m.y, m.sensor.apply(dict.atoms()), dict, options.max_condition);
  });

  BompResult out;
  out.assignment.block.resize(static_cast<std::size_t>(count));
  out.assignment.residual.resize(static_cast<std::size_t>(count));
  out.codes.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    auto& r = results[static_cast<std::size_t>(i)];
    if (!r.skipped.empty()) out.warnings.push_back(skip_message(i, r.skipped));
    if (!r.fit) {
      if (!options.allow_unassigned) {
        std::ostringstream os;
        os << "bomp_assign_all: signal " << i << " has no feasible block (m_i=" << measurements[i].sensor.rows()
           << ")";
        throw NoFeasibleBlock(i, os.str());
      }
      out.assignment.block[static_cast<std::size_t>(i)] = std::nullopt;
      out.assignment.residual[static_cast<std::size_t>(i)] = measurements[i].y.norm();
      out.codes.push_back(BlockSparseCode::unassigned(dict.r()));
      continue;
    }
    out.assignment.block[static_cast<std::size_t>(i)] = r.fit->block;
    out.assignment.residual[static_cast<std::size_t>(i)] = r.fit->residual;
    out.codes.push_back(BlockSparseCode::on_block(dict, r.fit->block, r.fit->coefficients));
  }
  return out;
}

std::vector<std::vector<Index>> compute_usage(const MeasurementSet& measurements, const BlockDictionary& dict,
                                              const UsageOptions& options) {
  BCS_REQUIRE(measurements.n() == dict.n(), "compute_usage: measurement and dictionary dimensions differ");
  const Index max_blocks = options.max_blocks > 0 ? options.max_blocks : dict.k_max();
  const Index count = measurements.size();
  std::vector<std::vector<Index>> picked(static_cast<std::size_t>(count));

  detail::parallel_for(count, options.threads, [&](Index i) {
    const auto& m = measurements[i];
    const double energy = m.y.squaredNorm();
    if (energy == 0.0) return;
    const Matrix projected = m.sensor.apply(dict.atoms());
    std::vector<char> taken(static_cast<std::size_t>(dict.num_blocks()), 0);
    std::vector<Index> columns;
    std::vector<Index> chosen;
    Vector residual = m.y;
    for (Index step = 0; step < max_blocks; ++step) {
      Index best = -1;
      double best_gain = 0.0;
      const double current = residual.squaredNorm();
      for (Index l = 0; l < dict.num_blocks(); ++l) {
        if (taken[static_cast<std::size_t>(l)]) continue;
        const auto& cols = dict.block(l);
        if (static_cast<Index>(columns.size() + cols.size()) > m.sensor.rows()) continue;
        const Matrix phi = gather_columns(projected, cols);
        auto s = solve_block_least_squares(phi, residual, options.max_condition);
        if (!s) continue;
        const double gain = current - (residual - phi * *s).squaredNorm();
        if (gain > best_gain) {
          best_gain = gain;
          best = l;
        }
      }
      if (best < 0) break;
      std::vector<Index> trial = columns;
      const auto& cols = dict.block(best);
      trial.insert(trial.end(), cols.begin(), cols.end());
      const Matrix phi = gather_columns(projected, trial);
      auto s = solve_block_least_squares(phi, m.y, options.max_condition);
      if (!s) break;
      taken[static_cast<std::size_t>(best)] = 1;
      columns = std::move(trial);
      chosen.push_back(best);
      residual = m.y - phi * *s;
      if (residual.squaredNorm() <= options.energy_fraction * energy) break;
    }
    picked[static_cast<std::size_t>(i)] = std::move(chosen);
  });

  std::vector<std::vector<Index>> usage(static_cast<std::size_t>(dict.num_blocks()));
  for (Index i = 0; i < count; ++i)
    for (Index l : picked[static_cast<std::size_t>(i)]) usage[static_cast<std::size_t>(l)].push_back(i);
  return usage;
}

namespace {

using Bits = std::vector<std::uint64_t>;

Index popcount(const Bits& b) {
  Index c = 0;
  for (auto w : b) c += std::popcount(w);
  return c;
}

Index intersection_count(const Bits& a, const Bits& b) {
  Index c = 0;
  for (std::size_t w = 0; w < a.size(); ++w) c += std::popcount(a[w] & b[w]);
  return c;
}

double similarity(Index inter, Index size_a, Index size_b, SimilarityScore score) {
  if (score == SimilarityScore::kJaccard) {
    const Index uni = size_a + size_b - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  const Index lo = std::min(size_a, size_b);
  return lo == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(lo);
}

}  // namespace

SacResult sac_merge(const BlockDictionary& dict, const std::vector<std::vector<Index>>& usage, Index k_max,
                    const SacOptions& options) {
  const Index num_blocks = dict.num_blocks();
  BCS_REQUIRE(static_cast<Index>(usage.size()) == num_blocks, "sac_merge: need one usage set per block");
  BCS_REQUIRE(k_max >= 1, "sac_merge: k_max must be positive");

  Index max_signal = -1;
  for (const auto& u : usage)
    for (Index i : u) {
      BCS_REQUIRE(i >= 0, "sac_merge: negative signal index in usage set");
      max_signal = std::max(max_signal, i);
    }
  const std::size_t words = static_cast<std::size_t>((max_signal + 64) / 64);

  const auto nb = static_cast<std::size_t>(num_blocks);
  std::vector<Bits> bits(nb, Bits(words, 0));
  std::vector<Index> set_size(nb);
  std::vector<std::vector<Index>> atoms(nb);
  std::vector<char> alive(nb, 1);
  std::vector<Index> parent(nb);
  for (std::size_t l = 0; l < nb; ++l) {
    for (Index i : usage[l]) bits[l][static_cast<std::size_t>(i) / 64] |= std::uint64_t{1} << (i % 64);
    set_size[l] = popcount(bits[l]);
    atoms[l] = dict.block(static_cast<Index>(l));
    parent[l] = static_cast<Index>(l);
  }

  Matrix score = Matrix::Zero(num_blocks, num_blocks);
  auto refresh = [&](std::size_t a) {
    for (std::size_t b = 0; b < nb; ++b) {
      if (b == a || !alive[b]) continue;
      const double s = similarity(intersection_count(bits[a], bits[b]), set_size[a], set_size[b], options.score);
      score(static_cast<Index>(a), static_cast<Index>(b)) = s;
      score(static_cast<Index>(b), static_cast<Index>(a)) = s;
    }
  };
  for (std::size_t a = 0; a < nb; ++a) refresh(a);

  Index merges = 0;
  while (true) {
    double best = options.threshold;
    std::size_t best_a = nb, best_b = nb;
    for (std::size_t a = 0; a < nb; ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = a + 1; b < nb; ++b) {
        if (!alive[b]) continue;
        if (static_cast<Index>(atoms[a].size() + atoms[b].size()) > k_max) continue;
        const double s = score(static_cast<Index>(a), static_cast<Index>(b));
        if (s > best) {
          best = s;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a == nb) break;
    atoms[best_a].insert(atoms[best_a].end(), atoms[best_b].begin(), atoms[best_b].end());
    for (std::size_t w = 0; w < words; ++w) bits[best_a][w] |= bits[best_b][w];
    set_size[best_a] = popcount(bits[best_a]);
    alive[best_b] = 0;
    parent[best_b] = static_cast<Index>(best_a);
    refresh(best_a);
    ++merges;
  }

  std::vector<Index> position(nb, -1);
  std::vector<std::vector<Index>> blocks;
  for (std::size_t l = 0; l < nb; ++l) {
    if (!alive[l]) continue;
    position[l] = static_cast<Index>(blocks.size());
    blocks.push_back(std::move(atoms[l]));
  }
  std::vector<Index> old_to_new(nb);
  for (std::size_t l = 0; l < nb; ++l) {
    auto root = static_cast<std::size_t>(l);
    while (!alive[root]) root = static_cast<std::size_t>(parent[root]);
    old_to_new[l] = position[root];
  }
  return {BlockDictionary(dict.atoms(), std::move(blocks), std::max(k_max, dict.k_max())), std::move(old_to_new),
          merges};
}

std::vector<BlockSparseCode> remap_codes(std::vector<BlockSparseCode> codes, const std::vector<Index>& old_to_new) {
  for (auto& c : codes) {
    if (!c.active_block) continue;
    BCS_REQUIRE(*c.active_block >= 0 && *c.active_block < static_cast<Index>(old_to_new.size()),
                "remap_codes: active block outside the merge map");
    c.active_block = old_to_new[static_cast<std::size_t>(*c.active_block)];
  }
  return codes;
}

}  // namespace bcs
