#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bcs/completion.hpp"
#include "bcs/learner.hpp"
#include "bcs/synth.hpp"

namespace bcs {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Intensities in [0, 255] stored as H x W reals, with an optional
/// observation mask (empty means fully observed).
struct GrayImage {
  Matrix pixels;
  Mask mask;

  Index height() const { return pixels.rows(); }
  Index width() const { return pixels.cols(); }
  bool has_mask() const { return mask.size() != 0; }
  bool observed(Index r, Index c) const { return !has_mask() || mask(r, c); }
};

/// Patch origins of a p x p sliding window. The last row and column of origins
/// always touch the image border, so every pixel is covered.
struct PatchGrid {
  Index height = 0;
  Index width = 0;
  Index patch = 8;
  Index stride = 1;
  std::vector<std::pair<Index, Index>> origins;  // (row, col) of the top-left pixel
  Matrix counts;                                 // patches covering each pixel

  Index n() const { return patch * patch; }
  Index size() const { return static_cast<Index>(origins.size()); }
};

PatchGrid make_patch_grid(Index height, Index width, Index patch = 8, Index stride = 1);

struct PatchSet {
  Matrix patches;  // n x P, column-major vectorization of each window
  std::vector<std::vector<Index>> observed;
};

PatchSet extract_patches(const GrayImage& img, const PatchGrid& grid);

/// Disjoint sensing tiles over the reflect-padded image and stride-1
/// reconstruction patches over the original image.
struct SensingPartition {
  Index padded_height = 0;
  Index padded_width = 0;
  PatchGrid tiles;
  PatchGrid reconstruction;
};

SensingPartition sensing_partition(Index height, Index width, Index patch = 8);

/// Mirror padding (edge pixel not repeated) up to the requested size; the mask is padded alike.
GrayImage reflect_pad(const GrayImage& img, Index height, Index width);

/// Per-pixel mean of the covering patch estimates, clamped to [0, 255] unless `clamp` is false.
GrayImage reconstruct_image(const Matrix& patches, const PatchGrid& grid, bool clamp = true);

/// 10 log10(peak^2 / MSE) over all pixels; +inf when MSE = 0.
double psnr(const GrayImage& reference, const GrayImage& estimate, double peak = 255.0);

/// PSNR restricted to pixels where `select` is true; NaN when none are selected.
double psnr_over(const GrayImage& reference, const GrayImage& estimate, const Mask& select, double peak = 255.0);

/// Exactly round(fraction H W) observed pixels, uniform without replacement.
Mask make_random_mask(Index height, Index width, double fraction, std::uint64_t seed);

GrayImage apply_mask(const GrayImage& img, const Mask& mask);

/// Missing pixels set to 0.
GrayImage zero_fill(const GrayImage& observed);
/// Missing pixels set to the mean of the observed pixels of their p x p tile
/// (the global observed mean for tiles with no observations).
GrayImage tile_mean_fill(const GrayImage& observed, Index patch = 8);

enum class InpaintMethod { kAls, kSvt };
const char* to_string(InpaintMethod method);
InpaintMethod parse_inpaint_method(const std::string& text);

struct InpaintConfig {
  Index patch = 8;
  LearnerConfig learner;
  InpaintMethod method = InpaintMethod::kAls;
  /// SVT knobs; tau and delta follow SvtConfig::standard when left at 0.
  double svt_tau = 0.0;
  double svt_delta = 0.0;
  int svt_max_iters = 500;
  double svt_tol = 1e-4;
  /// Copy observed pixels into the output after patch averaging. A fully
  /// observed image is always returned unchanged.
  bool keep_observed = false;
  int threads = 1;
};

struct InpaintResult {
  GrayImage image;
  LearnerState state;
  Index tiles_used = 0;
  Index fallback_patches = 0;
  std::vector<std::string> warnings;
};

/// Learns a block dictionary from the observed pixels of the disjoint tiles,
/// then estimates every stride-1 patch by BOMP on its observed pixels and
/// averages the overlapping estimates.
InpaintResult inpaint(const GrayImage& observed, const InpaintConfig& config,
                      const IterationCallback& on_iteration = {});

/// Ground truth built from a real image: the disjoint tiles of the fully
/// observed image are clustered by the learner, each cluster is replaced by
/// its best rank-k approximation, and clusters with at most k members are
/// dropped. Signals are ordered by block.
PlantedModel truncated_image_model(const GrayImage& img, Index k, const LearnerConfig& learner, Index patch = 8);

struct InpaintMetrics {
  double psnr_db = 0.0;
  double psnr_missing_db = 0.0;
  double zero_fill_psnr_db = 0.0;
  double tile_mean_psnr_db = 0.0;
  double observed_fraction = 0.0;
  Index k_max = 0;
  Index r = 0;
  Index L = 0;
  Index iterations = 0;
};

InpaintMetrics inpaint_metrics(const GrayImage& original, const GrayImage& observed, const InpaintResult& result,
                               const InpaintConfig& config);
std::string metrics_json(const InpaintMetrics& metrics, int indent = 2);

// Image files. Masks in PBM use 1 bits for observed pixels.
GrayImage read_image(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);
void write_png(const GrayImage& img, const std::string& path);
/// Picks PNG or PGM from the file extension.
void write_image(const GrayImage& img, const std::string& path);
Mask read_pbm(const std::string& path);
void write_pbm(const Mask& mask, const std::string& path);

}  // namespace bcs
