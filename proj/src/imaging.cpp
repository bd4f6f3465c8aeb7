#include "bcs/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bcs/error.hpp"
#include "parallel.hpp"

namespace bcs {

namespace {

std::vector<Index> origin_list(Index extent, Index patch, Index stride) {
  std::vector<Index> out;
  for (Index o = 0; o + patch <= extent; o += stride) out.push_back(o);
  if (out.empty() || out.back() != extent - patch) out.push_back(extent - patch);
  return out;
}

Index reflect_index(Index i, Index extent) {
  if (extent == 1) return 0;
  const Index period = 2 * (extent - 1);
  i %= period;
  if (i < 0) i += period;
  return i < extent ? i : period - i;
}

Vector patch_vector(const Matrix& pixels, Index r0, Index c0, Index p) {
  Vector v(p * p);
  for (Index c = 0; c < p; ++c)
    for (Index r = 0; r < p; ++r) v(c * p + r) = pixels(r0 + r, c0 + c);
  return v;
}

nlohmann::ordered_json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

PatchGrid make_patch_grid(Index height, Index width, Index patch, Index stride) {
  BCS_REQUIRE(patch >= 1 && stride >= 1, "make_patch_grid: patch and stride must be positive");
  BCS_REQUIRE(patch <= std::min(height, width), "make_patch_grid: patch larger than the image");
  PatchGrid grid;
  grid.height = height;
  grid.width = width;
  grid.patch = patch;
  grid.stride = stride;
  const auto rows = origin_list(height, patch, stride);
  const auto cols = origin_list(width, patch, stride);
  grid.counts = Matrix::Zero(height, width);
  for (Index r : rows)
    for (Index c : cols) {
      grid.origins.emplace_back(r, c);
      grid.counts.block(r, c, patch, patch).array() += 1.0;
    }
  return grid;
}

PatchSet extract_patches(const GrayImage& img, const PatchGrid& grid) {
  BCS_REQUIRE(img.height() == grid.height && img.width() == grid.width, "extract_patches: grid does not match image");
  const Index p = grid.patch;
  PatchSet out;
  out.patches.resize(grid.n(), grid.size());
  out.observed.resize(static_cast<std::size_t>(grid.size()));
  for (Index j = 0; j < grid.size(); ++j) {
    const auto [r0, c0] = grid.origins[static_cast<std::size_t>(j)];
    out.patches.col(j) = patch_vector(img.pixels, r0, c0, p);
    auto& obs = out.observed[static_cast<std::size_t>(j)];
    for (Index c = 0; c < p; ++c)
      for (Index r = 0; r < p; ++r)
        if (img.observed(r0 + r, c0 + c)) obs.push_back(c * p + r);
  }
  return out;
}

SensingPartition sensing_partition(Index height, Index width, Index patch) {
  BCS_REQUIRE(patch >= 1 && patch <= std::min(height, width), "sensing_partition: patch larger than the image");
  SensingPartition out;
  out.padded_height = (height + patch - 1) / patch * patch;
  out.padded_width = (width + patch - 1) / patch * patch;
  out.tiles = make_patch_grid(out.padded_height, out.padded_width, patch, patch);
  out.reconstruction = make_patch_grid(height, width, patch, 1);
  return out;
}

GrayImage reflect_pad(const GrayImage& img, Index height, Index width) {
  BCS_REQUIRE(height >= img.height() && width >= img.width(), "reflect_pad: target smaller than the image");
  GrayImage out;
  out.pixels.resize(height, width);
  if (img.has_mask()) out.mask.resize(height, width);
  for (Index c = 0; c < width; ++c) {
    const Index sc = reflect_index(c, img.width());
    for (Index r = 0; r < height; ++r) {
      const Index sr = reflect_index(r, img.height());
      out.pixels(r, c) = img.pixels(sr, sc);
      if (img.has_mask()) out.mask(r, c) = img.mask(sr, sc);
    }
  }
  return out;
}

GrayImage reconstruct_image(const Matrix& patches, const PatchGrid& grid, bool clamp) {
  BCS_REQUIRE(patches.rows() == grid.n() && patches.cols() == grid.size(),
              "reconstruct_image: need one n-vector per grid patch");
  const Index p = grid.patch;
  Matrix sum = Matrix::Zero(grid.height, grid.width);
  for (Index j = 0; j < grid.size(); ++j) {
    const auto [r0, c0] = grid.origins[static_cast<std::size_t>(j)];
    for (Index c = 0; c < p; ++c)
      for (Index r = 0; r < p; ++r) sum(r0 + r, c0 + c) += patches(c * p + r, j);
  }
  if ((grid.counts.array() <= 0.0).any()) throw InternalError("reconstruct_image: grid leaves a pixel uncovered");
  GrayImage out;
  out.pixels = sum.cwiseQuotient(grid.counts);
  if (clamp) out.pixels = out.pixels.cwiseMax(0.0).cwiseMin(255.0);
  return out;
}

double psnr(const GrayImage& reference, const GrayImage& estimate, double peak) {
  BCS_REQUIRE(reference.height() == estimate.height() && reference.width() == estimate.width(),
              "psnr: image dimensions differ");
  BCS_REQUIRE(reference.pixels.size() > 0, "psnr: empty image");
  const double mse = (reference.pixels - estimate.pixels).squaredNorm() / static_cast<double>(reference.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr_over(const GrayImage& reference, const GrayImage& estimate, const Mask& select, double peak) {
  BCS_REQUIRE(reference.height() == estimate.height() && reference.width() == estimate.width() &&
                  select.rows() == reference.height() && select.cols() == reference.width(),
              "psnr_over: dimensions differ");
  const Index count = select.count();
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  const double sq = (reference.pixels - estimate.pixels).array().square().cwiseProduct(select.cast<double>()).sum();
  if (sq == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / (sq / static_cast<double>(count)));
}

Mask make_random_mask(Index height, Index width, double fraction, std::uint64_t seed) {
  BCS_REQUIRE(height >= 1 && width >= 1, "make_random_mask: empty image");
  BCS_REQUIRE(fraction > 0.0 && fraction <= 1.0, "make_random_mask: fraction must lie in (0, 1]");
  const Index total = height * width;
  const auto keep = static_cast<Index>(std::llround(fraction * static_cast<double>(total)));
  std::vector<Index> ids(static_cast<std::size_t>(total));
  std::iota(ids.begin(), ids.end(), Index{0});
  std::mt19937_64 rng(seed);
  for (Index j = 0; j < keep; ++j) {
    std::uniform_int_distribution<Index> pick(j, total - 1);
    std::swap(ids[static_cast<std::size_t>(j)], ids[static_cast<std::size_t>(pick(rng))]);
  }
  Mask mask = Mask::Constant(height, width, false);
  for (Index j = 0; j < keep; ++j) mask(ids[static_cast<std::size_t>(j)] % height, ids[static_cast<std::size_t>(j)] / height) = true;
  return mask;
}

GrayImage apply_mask(const GrayImage& img, const Mask& mask) {
  BCS_REQUIRE(mask.rows() == img.height() && mask.cols() == img.width(), "apply_mask: mask dimensions differ");
  GrayImage out;
  out.pixels = img.pixels.cwiseProduct(mask.cast<double>().matrix());
  out.mask = mask;
  return out;
}

GrayImage zero_fill(const GrayImage& observed) {
  GrayImage out;
  out.pixels = observed.has_mask() ? Matrix(observed.pixels.cwiseProduct(observed.mask.cast<double>().matrix()))
                                   : observed.pixels;
  return out;
}

GrayImage tile_mean_fill(const GrayImage& observed, Index patch) {
  BCS_REQUIRE(patch >= 1, "tile_mean_fill: patch must be positive");
  GrayImage out;
  out.pixels = observed.pixels;
  if (!observed.has_mask()) return out;
  const Matrix w = observed.mask.cast<double>().matrix();
  const double global_count = w.sum();
  const double global_mean = global_count > 0 ? observed.pixels.cwiseProduct(w).sum() / global_count : 0.0;
  for (Index r0 = 0; r0 < observed.height(); r0 += patch)
    for (Index c0 = 0; c0 < observed.width(); c0 += patch) {
      const Index h = std::min(patch, observed.height() - r0);
      const Index wd = std::min(patch, observed.width() - c0);
      const double cnt = w.block(r0, c0, h, wd).sum();
      const double mean =
          cnt > 0 ? observed.pixels.block(r0, c0, h, wd).cwiseProduct(w.block(r0, c0, h, wd)).sum() / cnt : global_mean;
      for (Index c = c0; c < c0 + wd; ++c)
        for (Index r = r0; r < r0 + h; ++r)
          if (!observed.mask(r, c)) out.pixels(r, c) = mean;
    }
  return out;
}

const char* to_string(InpaintMethod method) { return method == InpaintMethod::kAls ? "als" : "svt"; }

InpaintMethod parse_inpaint_method(const std::string& text) {
  if (text == "als") return InpaintMethod::kAls;
  if (text == "svt") return InpaintMethod::kSvt;
  detail::throw_contract("unknown inpainting method '" + text + "' (expected als or svt)");
}

namespace {

// Replaces each populated block by the SVT completion of its clustered measurements.
void refine_blocks_with_svt(const MeasurementSet& ms, LearnerState& state, const InpaintConfig& config,
                            std::vector<std::string>& warnings) {
  const auto members = state.assignment.members(state.dict.num_blocks());
  for (Index l = 0; l < state.dict.num_blocks(); ++l) {
    const auto& omega = members[static_cast<std::size_t>(l)];
    if (omega.empty()) continue;
    const auto sensors = ms.sensors(omega);
    const UnionMatrix uni = build_union(sensors);
    const Index k = state.dict.block_size(l);
    std::ostringstream tag;
    tag << "svt block " << l << ": ";
    if (uni.rank() < ms.n() || static_cast<Index>(omega.size()) < k) {
      warnings.push_back(tag.str() + "members do not observe every coordinate; keeping the ALS block");
      continue;
    }
    const ObservationMatrix obs = assemble_observation(ms, omega, uni);
    SvtConfig svt = SvtConfig::standard(obs.rows(), obs.cols(), obs.observed_count());
    if (config.svt_tau > 0.0) svt.tau = config.svt_tau;
    if (config.svt_delta > 0.0) svt.delta = config.svt_delta;
    svt.max_iters = config.svt_max_iters;
    svt.tol = config.svt_tol;
    try {
      const SvtResult done = svt_complete(obs, svt);
      const CompletedFactors f = factor_completed(done.y, uni, k);
      state.dict = std::move(state.dict).with_block_atoms(l, f.d);
    } catch (const Error& e) {
      warnings.push_back(tag.str() + e.what() + "; keeping the ALS block");
    }
  }
  BompOptions opts;
  opts.allow_unassigned = true;
  opts.threads = config.threads;
  auto bomp = bomp_assign_all(ms, state.dict, opts);
  state.codes = std::move(bomp.codes);
  state.assignment = std::move(bomp.assignment);
}

}  // namespace

InpaintResult inpaint(const GrayImage& observed, const InpaintConfig& config, const IterationCallback& on_iteration) {
  const Index p = config.patch;
  const Index n = p * p;
  BCS_REQUIRE(p >= 1 && p <= std::min(observed.height(), observed.width()), "inpaint: patch larger than the image");
  const SensingPartition part = sensing_partition(observed.height(), observed.width(), p);
  const GrayImage padded = reflect_pad(observed, part.padded_height, part.padded_width);
  const PatchSet tiles = extract_patches(padded, part.tiles);

  std::vector<Measurement> items;
  for (Index j = 0; j < tiles.patches.cols(); ++j) {
    const auto& obs = tiles.observed[static_cast<std::size_t>(j)];
    if (obs.empty()) continue;
    SensingMatrix sensor = make_pixel_mask(n, obs);
    Vector y = sensor.apply(Vector(tiles.patches.col(j)));
    items.push_back({std::move(sensor), std::move(y)});
  }
  BCS_REQUIRE(!items.empty(), "inpaint: no observed pixels");
  const MeasurementSet ms(n, std::move(items));

  InpaintResult out;
  out.tiles_used = ms.size();
  LearnerConfig lc = config.learner;
  lc.threads = config.threads;
  if (config.method == InpaintMethod::kSvt) lc.max_outer_iters = 1;
  out.state = learn(ms, lc, nullptr, on_iteration);
  out.warnings = out.state.warnings;
  if (config.method == InpaintMethod::kSvt) refine_blocks_with_svt(ms, out.state, config, out.warnings);

  const PatchSet recon = extract_patches(observed, part.reconstruction);
  const GrayImage fallback = tile_mean_fill(observed, p);
  const PatchSet fallback_patches = extract_patches(fallback, part.reconstruction);
  Matrix estimates(n, recon.patches.cols());
  std::vector<char> fell_back(static_cast<std::size_t>(recon.patches.cols()), 0);
  const BlockDictionary& dict = out.state.dict;
  detail::parallel_for(recon.patches.cols(), config.threads, [&](Index j) {
    const auto& obs = recon.observed[static_cast<std::size_t>(j)];
    if (!obs.empty()) {
      const SensingMatrix sensor = make_pixel_mask(n, obs);
      const Vector y = sensor.apply(Vector(recon.patches.col(j)));
      try {
        const BlockFit fit = bomp_assign_one(y, sensor, dict, nullptr, lc.max_condition);
        estimates.col(j) = dict.block_matrix(fit.block) * fit.coefficients;
        return;
      } catch (const NoFeasibleBlock&) {
      }
    }
    estimates.col(j) = fallback_patches.patches.col(j);
    fell_back[static_cast<std::size_t>(j)] = 1;
  });
  out.fallback_patches = std::count(fell_back.begin(), fell_back.end(), 1);
  if (out.fallback_patches > 0)
    out.warnings.push_back(std::to_string(out.fallback_patches) +
                           " patch(es) had no feasible block and used the tile-mean estimate");
  out.image = reconstruct_image(estimates, part.reconstruction);
  const bool complete = !observed.has_mask() || observed.mask.all();
  if (complete) {
    out.image.pixels = observed.pixels;
  } else if (config.keep_observed) {
    for (Index c = 0; c < observed.width(); ++c)
      for (Index r = 0; r < observed.height(); ++r)
        if (observed.mask(r, c)) out.image.pixels(r, c) = observed.pixels(r, c);
  }
  return out;
}

PlantedModel truncated_image_model(const GrayImage& img, Index k, const LearnerConfig& learner, Index patch) {
  BCS_REQUIRE(k >= 1 && k <= patch * patch, "truncated_image_model: k must lie in [1, patch^2]");
  BCS_REQUIRE(patch >= 1 && patch <= std::min(img.height(), img.width()),
              "truncated_image_model: patch larger than the image");
  const Index n = patch * patch;
  const SensingPartition part = sensing_partition(img.height(), img.width(), patch);
  GrayImage full;
  full.pixels = img.pixels;
  const PatchSet tiles = extract_patches(reflect_pad(full, part.padded_height, part.padded_width), part.tiles);
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<Measurement> items;
  for (Index j = 0; j < tiles.patches.cols(); ++j)
    items.push_back({make_pixel_mask(n, all), Vector(tiles.patches.col(j))});
  const LearnerState state = learn(MeasurementSet(n, std::move(items)), learner);

  std::vector<Matrix> bases;
  std::vector<Matrix> clusters;
  for (const auto& ids : state.assignment.members(state.dict.num_blocks())) {
    if (static_cast<Index>(ids.size()) <= k) continue;
    Matrix x(n, static_cast<Index>(ids.size()));
    for (std::size_t c = 0; c < ids.size(); ++c) x.col(static_cast<Index>(c)) = tiles.patches.col(ids[c]);
    Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU);
    if (svd.rank() < k) continue;
    bases.push_back(svd.matrixU().leftCols(k));
    clusters.push_back(std::move(x));
  }
  BCS_REQUIRE(!bases.empty(), "truncated_image_model: no cluster has more than k members");

  const auto L = static_cast<Index>(bases.size());
  PlantedModel model;
  Matrix atoms(n, k * L);
  Index total = 0;
  for (Index l = 0; l < L; ++l) {
    atoms.middleCols(k * l, k) = bases[static_cast<std::size_t>(l)];
    model.counts.push_back(clusters[static_cast<std::size_t>(l)].cols());
    total += model.counts.back();
  }
  model.dict = BlockDictionary::contiguous(std::move(atoms), std::vector<Index>(bases.size(), k), k);
  model.seed = learner.seed;
  model.signals.resize(n, total);
  Index col = 0;
  for (Index l = 0; l < L; ++l) {
    const Matrix& u = bases[static_cast<std::size_t>(l)];
    const Matrix& x = clusters[static_cast<std::size_t>(l)];
    for (Index c = 0; c < x.cols(); ++c, ++col) {
      const Vector s = u.transpose() * x.col(c);
      model.codes.push_back(BlockSparseCode::on_block(model.dict, l, s));
      model.signals.col(col) = u * s;
      model.labels.push_back(l);
    }
  }
  return model;
}

InpaintMetrics inpaint_metrics(const GrayImage& original, const GrayImage& observed, const InpaintResult& result,
                               const InpaintConfig& config) {
  InpaintMetrics m;
  m.psnr_db = psnr(original, result.image);
  const Mask observed_mask = observed.has_mask() ? observed.mask : Mask::Constant(original.height(), original.width(), true);
  m.psnr_missing_db = psnr_over(original, result.image, !observed_mask);
  m.zero_fill_psnr_db = psnr(original, zero_fill(observed));
  m.tile_mean_psnr_db = psnr(original, tile_mean_fill(observed, config.patch));
  m.observed_fraction = static_cast<double>(observed_mask.count()) / static_cast<double>(observed_mask.size());
  m.k_max = config.learner.k_max;
  m.r = result.state.dict.r();
  const auto members = result.state.assignment.members(result.state.dict.num_blocks());
  m.L = std::count_if(members.begin(), members.end(), [](const auto& v) { return !v.empty(); });
  m.iterations = static_cast<Index>(result.state.iterations.size());
  return m;
}

std::string metrics_json(const InpaintMetrics& m, int indent) {
  nlohmann::ordered_json j;
  j["psnr_db"] = finite_or_string(m.psnr_db);
  j["observed_fraction"] = m.observed_fraction;
  j["k_max"] = m.k_max;
  j["r"] = m.r;
  j["L"] = m.L;
  j["iterations"] = m.iterations;
  j["psnr_missing_db"] = finite_or_string(m.psnr_missing_db);
  j["zero_fill_psnr_db"] = finite_or_string(m.zero_fill_psnr_db);
  j["tile_mean_psnr_db"] = finite_or_string(m.tile_mean_psnr_db);
  return j.dump(indent);
}

}  // namespace bcs
