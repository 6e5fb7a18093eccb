#pragma once

#include <cstdint>
#include <vector>

#include "matchsum/io.hpp"

namespace matchsum {

/// Synthetic two-view scene generator: random poses with rotation up to 30
/// degrees, 3D points uniform in the image-1 viewing frustum, Gaussian pixel
/// noise on both projections, and a fixed share of matches turned into
/// outliers by replacing their image-2 point with a uniform random one.
struct SynthConfig {
  int n_pairs = 1;
  int n_matches = 1000;
  double noise_px = 0.0;
  double outlier_frac = 0.0;
  double focal_px = 1000.0;
  double image_size = 1000.0;
  double depth_min = 4.0;
  double depth_max = 12.0;
  double baseline_min = 0.5;
  double baseline_max = 2.0;
  uint64_t seed = 0;

  bool valid() const {
    return n_pairs >= 0 && n_matches >= 0 && noise_px >= 0.0 && outlier_frac >= 0.0 &&
           outlier_frac < 1.0 && focal_px > 0.0 && image_size > 0.0 && depth_min > 0.0 &&
           depth_max >= depth_min && baseline_min >= 0.0 && baseline_max >= baseline_min;
  }
};

/// Deterministic in cfg.seed. The outlier count is exactly
/// round(outlier_frac * n_matches). With include_gt_matches, up to 200
/// noise-free inlier correspondences are stored as verification matches.
std::vector<PairRecord> synth_pairs(const SynthConfig& cfg, bool include_gt_matches = false);

}  // namespace matchsum
