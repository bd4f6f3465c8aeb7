#include "bcs/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bcs/error.hpp"

namespace bcs {

namespace {

constexpr std::size_t kMaxStoredWarnings = 20;

std::mt19937_64 tagged_rng(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

Vector random_unit(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  do {
    for (Index p = 0; p < n; ++p) v(p) = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

void add_warnings(LearnerState& state, const std::vector<std::string>& warnings, std::size_t& dropped) {
  for (const auto& w : warnings) {
    if (state.warnings.size() < kMaxStoredWarnings)
      state.warnings.push_back(w);
    else
      ++dropped;
  }
}

LearnerState fresh_state(const MeasurementSet& measurements, const LearnerConfig& config) {
  LearnerState state;
  state.dict = initial_dictionary(measurements, config);
  const auto count = static_cast<std::size_t>(measurements.size());
  state.codes.assign(count, BlockSparseCode::unassigned(state.dict.r()));
  state.assignment.block.assign(count, std::nullopt);
  state.assignment.residual.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    state.assignment.residual[i] = measurements[static_cast<Index>(i)].y.norm();
  return state;
}

void check_resume(const MeasurementSet& measurements, const LearnerState& state) {
  BCS_REQUIRE(state.dict.n() == measurements.n(), "learn: resumed dictionary has the wrong signal dimension");
  BCS_REQUIRE(static_cast<Index>(state.codes.size()) == measurements.size() &&
                  state.assignment.size() == measurements.size(),
              "learn: resumed state has the wrong number of signals");
  for (std::size_t i = 0; i < state.codes.size(); ++i) {
    BCS_REQUIRE(state.codes[i].active_block == state.assignment.block[i],
                "learn: resumed codes disagree with the resumed assignment");
    validate_code(state.codes[i], state.dict);
  }
}

}  // namespace

const char* to_string(InitMode mode) {
  switch (mode) {
    case InitMode::kRandom:
      return "random";
    case InitMode::kSignals:
      return "signals";
  }
  return "?";
}

InitMode parse_init_mode(const std::string& text) {
  if (text == "random") return InitMode::kRandom;
  if (text == "signals" || text == "patches") return InitMode::kSignals;
  detail::throw_contract("unknown init mode '" + text + "' (expected random or signals)");
}

void LearnerConfig::validate() const {
  BCS_REQUIRE(k_max >= 1, "learner: k_max must be at least 1");
  BCS_REQUIRE(r >= k_max, "learner: r must be at least k_max");
  BCS_REQUIRE(max_outer_iters >= 1, "learner: max_outer_iters must be at least 1");
  BCS_REQUIRE(restarts >= 1, "learner: restarts must be at least 1");
  BCS_REQUIRE(L_init >= 0 && L_init <= r, "learner: L_init must lie in [0, r]");
  BCS_REQUIRE(objective_rel_tol >= 0.0, "learner: objective_rel_tol must be nonnegative");
  BCS_REQUIRE(sac_threshold >= 0.0 && sac_threshold < 1.0, "learner: sac_threshold must lie in [0, 1)");
  BCS_REQUIRE(sac_every >= 0, "learner: sac_every must be nonnegative");
  BCS_REQUIRE(usage_energy_fraction >= 0.0 && usage_energy_fraction < 1.0,
              "learner: usage_energy_fraction must lie in [0, 1)");
  BCS_REQUIRE(max_condition >= 1.0, "learner: max_condition must be at least 1");
}

BlockDictionary initial_dictionary(const MeasurementSet& measurements, const LearnerConfig& config) {
  config.validate();
  BCS_REQUIRE(!measurements.empty(), "learner: no measurements");
  const Index n = measurements.n();
  const Index r = config.r;
  const Index blocks = config.L_init == 0 ? r : config.L_init;
  const Index widest = (r + blocks - 1) / blocks;
  {
    std::ostringstream os;
    os << "learner: r=" << r << " atoms in " << blocks << " blocks needs blocks of " << widest
       << " atoms, above k_max=" << config.k_max << " or n=" << n;
    BCS_REQUIRE(widest <= config.k_max && widest <= n, os.str());
  }

  auto rng = tagged_rng(config.seed, 1);
  Matrix atoms(n, r);
  Index filled = 0;
  if (config.init == InitMode::kSignals) {
    std::vector<Index> order(static_cast<std::size_t>(measurements.size()));
    std::iota(order.begin(), order.end(), Index{0});
    const Index take = std::min(r, measurements.size());
    for (Index j = 0; j < take; ++j) {
      std::uniform_int_distribution<Index> pick(j, measurements.size() - 1);
      std::swap(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(pick(rng))]);
      const auto& m = measurements[order[static_cast<std::size_t>(j)]];
      Vector v = m.sensor.apply_transpose(m.y);
      if (v.norm() > 0.0) atoms.col(filled++) = v / v.norm();
    }
  }
  while (filled < r) atoms.col(filled++) = random_unit(n, rng);

  std::vector<Index> sizes(static_cast<std::size_t>(blocks), r / blocks);
  for (Index l = 0; l < r % blocks; ++l) ++sizes[static_cast<std::size_t>(l)];
  return BlockDictionary::contiguous(std::move(atoms), sizes, config.k_max);
}

std::vector<Index> find_dead_blocks(const LearnerState& state, bool include_rank_deficient) {
  const Index count = state.dict.num_blocks();
  const auto members = state.assignment.members(count);
  const std::vector<BlockPassReport>* last = nullptr;
  if (include_rank_deficient && !state.iterations.empty() &&
      static_cast<Index>(state.iterations.back().pass.size()) == count)
    last = &state.iterations.back().pass;
  std::vector<Index> dead;
  for (Index l = 0; l < count; ++l) {
    const auto pop = static_cast<Index>(members[static_cast<std::size_t>(l)].size());
    bool is_dead = pop <= state.dict.block_size(l);
    if (!is_dead && last) {
      const auto& rep = (*last)[static_cast<std::size_t>(l)];
      is_dead = rep.rank_deficient_update || rep.reverted;
    }
    if (is_dead) dead.push_back(l);
  }
  // Redundant blocks: span inside the span of a live block that is larger or,
  // at equal size, holds more signals (lower index on ties).
  std::vector<char> gone(static_cast<std::size_t>(count), 0);
  for (Index l : dead) gone[static_cast<std::size_t>(l)] = 1;
  std::vector<Matrix> bases(static_cast<std::size_t>(count));
  for (Index l = 0; l < count; ++l)
    if (!gone[static_cast<std::size_t>(l)]) bases[static_cast<std::size_t>(l)] = orthonormal_basis(state.dict.block_matrix(l));
  const auto pop = [&](Index l) { return members[static_cast<std::size_t>(l)].size(); };
  for (Index l = 0; l < count; ++l) {
    if (gone[static_cast<std::size_t>(l)]) continue;
    const Matrix& bl = bases[static_cast<std::size_t>(l)];
    for (Index j = 0; j < count; ++j) {
      if (j == l || gone[static_cast<std::size_t>(j)]) continue;
      const Matrix& bj = bases[static_cast<std::size_t>(j)];
      if (bj.cols() < bl.cols() || bl.cols() == 0) continue;
      if (bj.cols() == bl.cols() && (pop(j) < pop(l) || (pop(j) == pop(l) && j > l))) continue;
      const double leak = (bl - bj * (bj.transpose() * bl)).norm();
      if (leak <= 1e-6) {
        gone[static_cast<std::size_t>(l)] = 1;
        dead.push_back(l);
        break;
      }
    }
  }
  std::sort(dead.begin(), dead.end());
  return dead;
}

LearnerState reseed_dead_blocks(const MeasurementSet& measurements, LearnerState state,
                                std::span<const Index> blocks, std::mt19937_64& rng) {
  if (blocks.empty()) return state;
  BCS_REQUIRE(static_cast<Index>(state.codes.size()) == measurements.size(),
              "reseed_dead_blocks: state and measurements disagree on signal count");
  std::vector<Index> targets(blocks.begin(), blocks.end());
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  for (Index l : targets)
    BCS_REQUIRE(l >= 0 && l < state.dict.num_blocks(), "reseed_dead_blocks: block index out of range");

  const BlockDictionary old_dict = state.dict;
  const std::vector<BlockSparseCode> old_codes = state.codes;
  const Vector res = squared_residuals(measurements, old_dict, old_codes);
  std::vector<Index> order(static_cast<std::size_t>(res.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return res(a) > res(b); });
  std::size_t cursor = 0;

  const auto members = state.assignment.members(state.dict.num_blocks());
  for (Index l : targets) {
    for (Index i : members[static_cast<std::size_t>(l)]) {
      state.codes[static_cast<std::size_t>(i)] = BlockSparseCode::unassigned(state.dict.r());
      state.assignment.block[static_cast<std::size_t>(i)] = std::nullopt;
      state.assignment.residual[static_cast<std::size_t>(i)] = measurements[i].y.norm();
    }
    const Index k = state.dict.block_size(l);
    Matrix d(state.dict.n(), k);
    for (Index j = 0; j < k; ++j) {
      Vector v;
      while (cursor < order.size()) {
        const Index i = order[cursor++];
        const auto& m = measurements[i];
        v = m.sensor.apply_transpose(m.y - m.sensor.apply(old_codes[static_cast<std::size_t>(i)].reconstruct(old_dict)));
        if (v.norm() > 0.0 && v.allFinite()) break;
        v.resize(0);
      }
      d.col(j) = v.size() ? Vector(v / v.norm()) : random_unit(state.dict.n(), rng);
    }
    state.dict = std::move(state.dict).with_block_atoms(l, d);
  }
  return state;
}

LearnerState reseed_dead_block(const MeasurementSet& measurements, LearnerState state, Index block,
                               std::mt19937_64& rng) {
  const Index one[] = {block};
  return reseed_dead_blocks(measurements, std::move(state), one, rng);
}

namespace {

// Seed of restart j > 0; restart 0 uses the configured seed itself.
std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 3u,
                    static_cast<std::uint32_t>(restart)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return static_cast<std::uint64_t>(words[0]) << 32 | words[1];
}

LearnerState learn_run(const MeasurementSet& measurements, const LearnerConfig& config, const LearnerState* resume,
                       const IterationCallback& on_iteration, int restart) {
  LearnerState state;
  if (resume) {
    check_resume(measurements, *resume);
    state = *resume;
  } else {
    state = fresh_state(measurements, config);
  }
  auto rng = tagged_rng(config.seed, 2);
  std::size_t dropped_warnings = 0;
  double previous = state.objective_trace.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                  : state.objective_trace.back();

  for (int it = 1; it <= config.max_outer_iters; ++it) {
    IterationRecord rec;
    rec.iteration = static_cast<int>(state.iterations.size()) + 1;
    rec.restart = restart;

    bool disturbed = false;
    if (config.reseed_dead_blocks && !state.iterations.empty()) {
      const auto dead = find_dead_blocks(state, config.reseed_rank_deficient);
      if (!dead.empty()) {
        const auto members = state.assignment.members(state.dict.num_blocks());
        for (Index l : dead) disturbed = disturbed || !members[static_cast<std::size_t>(l)].empty();
        state = reseed_dead_blocks(measurements, std::move(state), dead, rng);
        rec.reseeded = static_cast<Index>(dead.size());
      }
    }

    const bool sac_due = config.sac_every > 0 && (rec.iteration - 1) % config.sac_every == 0;
    const bool can_grow = std::any_of(state.dict.blocks().begin(), state.dict.blocks().end(),
                                      [&](const auto& b) { return static_cast<Index>(b.size()) < config.k_max; });
    if (sac_due && can_grow && state.dict.num_blocks() > 1) {
      UsageOptions usage_opts;
      usage_opts.energy_fraction = config.usage_energy_fraction;
      usage_opts.max_condition = config.max_condition;
      usage_opts.threads = config.threads;
      const auto usage = compute_usage(measurements, state.dict, usage_opts);
      SacOptions sac_opts;
      sac_opts.threshold = config.sac_threshold;
      auto sac = sac_merge(state.dict, usage, config.k_max, sac_opts);
      if (sac.merges > 0) {
        state.codes = remap_codes(std::move(state.codes), sac.old_to_new);
        for (auto& b : state.assignment.block)
          if (b) b = sac.old_to_new[static_cast<std::size_t>(*b)];
        state.dict = std::move(sac.dict);
        rec.merges = sac.merges;
      }
    }
    rec.blocks = state.dict.num_blocks();

    const Vector before = squared_residuals(measurements, state.dict, state.codes);
    rec.objective_before_bomp = before.sum();

    BompOptions bomp_opts;
    bomp_opts.allow_unassigned = true;
    bomp_opts.max_condition = config.max_condition;
    bomp_opts.threads = config.threads;
    auto bomp = bomp_assign_all(measurements, state.dict, bomp_opts);
    add_warnings(state, bomp.warnings, dropped_warnings);
    // A signal whose current block became infeasible for BOMP keeps its
    // current code when that fit is still better than BOMP's choice.
    for (Index i = 0; i < measurements.size(); ++i) {
      const auto u = static_cast<std::size_t>(i);
      const double fresh = bomp.assignment.residual[u] * bomp.assignment.residual[u];
      if (fresh > before(i)) {
        bomp.codes[u] = state.codes[u];
        bomp.assignment.block[u] = state.codes[u].active_block;
        bomp.assignment.residual[u] = std::sqrt(before(i));
      }
    }
    rec.unassigned = static_cast<Index>(
        std::count(bomp.assignment.block.begin(), bomp.assignment.block.end(), std::nullopt));
    if (rec.unassigned == measurements.size() && state.iterations.empty())
      throw NoFeasibleBlock(-1, "learn: initialization failed, no signal admits a fit on any block");
    state.codes = std::move(bomp.codes);
    state.assignment = std::move(bomp.assignment);
    rec.objective_after_bomp = objective(measurements, state.dict, state.codes);

    PassOptions pass_opts;
    pass_opts.method = config.method;
    pass_opts.max_condition = config.max_condition;
    pass_opts.threads = config.threads;
    auto pass = run_block_pass(measurements, std::move(state.dict), std::move(state.codes), state.assignment,
                               pass_opts);
    state.dict = std::move(pass.dict);
    state.codes = std::move(pass.codes);
    for (Index i = 0; i < measurements.size(); ++i) {
      const auto u = static_cast<std::size_t>(i);
      const auto& m = measurements[i];
      state.assignment.residual[u] = (m.y - m.sensor.apply(state.codes[u].reconstruct(state.dict))).norm();
    }
    rec.objective_after_pass = pass.objective;
    rec.pass = std::move(pass.blocks);
    state.objective_trace.push_back(rec.objective_after_pass);
    state.iterations.push_back(rec);
    if (on_iteration) on_iteration(state.iterations.back());

    const double current = rec.objective_after_pass;
    if (current == 0.0) break;
    if (!disturbed && std::isfinite(previous) && previous > 0.0 &&
        (previous - current) / previous < config.objective_rel_tol)
      break;
    previous = current;
  }
  if (dropped_warnings > 0) {
    std::ostringstream os;
    os << dropped_warnings << " further warning(s) suppressed";
    state.warnings.push_back(os.str());
  }
  return state;
}

}  // namespace

LearnerState learn(const MeasurementSet& measurements, const LearnerConfig& config, const LearnerState* resume,
                   const IterationCallback& on_iteration) {
  config.validate();
  BCS_REQUIRE(!measurements.empty(), "learn: no measurements");
  if (resume || config.restarts == 1) return learn_run(measurements, config, resume, on_iteration, 0);
  LearnerState best;
  for (int j = 0; j < config.restarts; ++j) {
    LearnerConfig run = config;
    if (j > 0) run.seed = restart_seed(config.seed, j);
    LearnerState state = learn_run(measurements, run, nullptr, on_iteration, j);
    if (j == 0 || state.objective_trace.back() < best.objective_trace.back()) best = std::move(state);
  }
  return best;
}

}  // namespace bcs
