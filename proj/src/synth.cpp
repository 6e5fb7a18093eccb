#include "matchsum/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "matchsum/random.hpp"
#include "matchsum/types.hpp"

namespace matchsum {

namespace {

constexpr uint64_t kPairStream = 0x73796e74;

Eigen::Vector3d random_unit(Rng& rng) {
  for (;;) {
    const Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-9) return v / n;
  }
}

Eigen::Matrix3d random_rotation_upto(Rng& rng, double max_angle_rad) {
  const Eigen::Vector3d axis = random_unit(rng);
  const double angle = rng.uniform(0.0, max_angle_rad);
  const Eigen::Matrix3d k = skew(axis);
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

}  // namespace

std::vector<PairRecord> synth_pairs(const SynthConfig& cfg, bool include_gt_matches) {
  if (!cfg.valid()) throw std::invalid_argument("synth_pairs: invalid configuration");

  CameraIntrinsics k;
  k.fx = k.fy = cfg.focal_px;
  k.cx = k.cy = 0.5 * cfg.image_size;

  std::vector<PairRecord> records;
  records.reserve(cfg.n_pairs);
  for (int pair = 0; pair < cfg.n_pairs; ++pair) {
    Rng rng(mix_seed(cfg.seed, kPairStream, static_cast<uint64_t>(pair)));

    const Eigen::Matrix3d r = random_rotation_upto(rng, 30.0 * M_PI / 180.0);
    const Eigen::Vector3d t = random_unit(rng) * rng.uniform(cfg.baseline_min, cfg.baseline_max);

    PairRecord record;
    record.pair_id = "synth_" + std::to_string(cfg.seed) + "_" + std::to_string(pair);
    record.k1 = k;
    record.k2 = k;
    record.gt = GroundTruthPose{r, t};
    record.matches.reserve(cfg.n_matches);

    std::vector<Eigen::Vector4d> clean;
    clean.reserve(cfg.n_matches);
    for (int i = 0; i < cfg.n_matches; ++i) {
      // Sample a pixel in image 1 and a depth; reject points too close to
      // camera 2 (rare with the default geometry).
      Eigen::Vector4d tuple;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        const double u = rng.uniform(0.0, cfg.image_size);
        const double v = rng.uniform(0.0, cfg.image_size);
        const double z = rng.uniform(cfg.depth_min, cfg.depth_max);
        const Eigen::Vector3d x1((u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z);
        const Eigen::Vector3d x2 = r * x1 + t;
        if (x2.z() < 0.25 * cfg.depth_min && attempt + 1 < 1000) continue;
        tuple << u, v, k.fx * x2.x() / x2.z() + k.cx, k.fy * x2.y() / x2.z() + k.cy;
        break;
      }
      clean.push_back(tuple);
      if (cfg.noise_px > 0.0) {
        tuple(0) += rng.normal() * cfg.noise_px;
        tuple(1) += rng.normal() * cfg.noise_px;
        tuple(2) += rng.normal() * cfg.noise_px;
        tuple(3) += rng.normal() * cfg.noise_px;
      }
      record.matches.push_back(tuple);
    }

    // Exact outlier count; chosen by partial Fisher-Yates over the indices.
    const int n_out = static_cast<int>(std::llround(cfg.outlier_frac * cfg.n_matches));
    std::vector<int> order(cfg.n_matches);
    for (int i = 0; i < cfg.n_matches; ++i) order[i] = i;
    std::vector<char> is_outlier(cfg.n_matches, 0);
    for (int i = 0; i < n_out; ++i) {
      const int j = i + static_cast<int>(rng.next_below(cfg.n_matches - i));
      std::swap(order[i], order[j]);
      is_outlier[order[i]] = 1;
      record.matches[order[i]](2) = rng.uniform(0.0, cfg.image_size);
      record.matches[order[i]](3) = rng.uniform(0.0, cfg.image_size);
    }

    if (include_gt_matches) {
      const int inlier_count = cfg.n_matches - n_out;
      const int stride = std::max(1, (inlier_count + 199) / 200);
      int seen = 0;
      for (int i = 0; i < cfg.n_matches; ++i) {
        if (is_outlier[i]) continue;
        if (seen % stride == 0) record.gt_matches.push_back(clean[i]);
        ++seen;
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace matchsum
