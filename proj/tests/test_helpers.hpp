#pragma once

// Test-only oracles and synthetic-scene helpers. Everything here is kept
// independent of the library code paths it is used to check.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "matchsum/types.hpp"

namespace testutil {

using matchsum::CameraIntrinsics;
using matchsum::Match;
using matchsum::RelativePose;

inline Eigen::Matrix3d rotation_about(const Eigen::Vector3d& axis_in, double angle_rad) {
  const Eigen::Vector3d axis = axis_in.normalized();
  return Eigen::AngleAxisd(angle_rad, axis).toRotationMatrix();
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  for (;;) {
    Eigen::Vector3d v(g(rng), g(rng), g(rng));
    if (v.norm() > 1e-9) return v.normalized();
  }
}

inline RelativePose random_pose(std::mt19937_64& rng, double max_angle_deg = 30.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RelativePose pose;
  pose.R = rotation_about(random_unit(rng), u(rng) * max_angle_deg * M_PI / 180.0);
  pose.t = random_unit(rng);
  return pose;
}

struct Scene {
  RelativePose pose;            // x2 = R x1 + t, unit baseline
  CameraIntrinsics k;
  std::vector<Match> matches;   // n fields are calibrated coordinates
  std::vector<char> is_outlier;
};

// Noiseless-by-default synthetic scene: points in front of both cameras,
// projected exactly; optional pixel noise and uniform image-2 outliers.
// patch_radius > 0 confines the image-1 keypoints to a disc around the
// image center.
inline Scene make_scene(uint64_t seed, int n, double noise_px = 0.0, double outlier_frac = 0.0,
                        double focal = 1000.0, double image_size = 1000.0,
                        double patch_radius = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;

  Scene scene;
  scene.pose = random_pose(rng);
  scene.k = CameraIntrinsics{focal, focal, image_size / 2, image_size / 2, 0.0};

  auto to_norm = [&](const Eigen::Vector2d& p) {
    return Eigen::Vector2d((p.x() - scene.k.cx) / scene.k.fx, (p.y() - scene.k.cy) / scene.k.fy);
  };

  for (int i = 0; i < n; ++i) {
    Eigen::Vector2d p1, p2;
    for (;;) {
      if (patch_radius > 0.0) {
        p1 = {image_size / 2 + patch_radius * (2.0 * u(rng) - 1.0),
              image_size / 2 + patch_radius * (2.0 * u(rng) - 1.0)};
      } else {
        p1 = {u(rng) * image_size, u(rng) * image_size};
      }
      const double z = 4.0 + 8.0 * u(rng);
      const Eigen::Vector3d x1(to_norm(p1).x() * z, to_norm(p1).y() * z, z);
      const Eigen::Vector3d x2 = scene.pose.R * x1 + scene.pose.t;
      if (x2.z() < 1.0) continue;
      p2 = {focal * x2.x() / x2.z() + scene.k.cx, focal * x2.y() / x2.z() + scene.k.cy};
      break;
    }
    if (noise_px > 0.0) {
      p1 += noise_px * Eigen::Vector2d(g(rng), g(rng));
      p2 += noise_px * Eigen::Vector2d(g(rng), g(rng));
    }
    bool outlier = u(rng) < outlier_frac;
    if (outlier) p2 = {u(rng) * image_size, u(rng) * image_size};
    Match m;
    m.p1 = p1;
    m.p2 = p2;
    m.n1 = to_norm(p1);
    m.n2 = to_norm(p2);
    scene.matches.push_back(m);
    scene.is_outlier.push_back(outlier ? 1 : 0);
  }
  return scene;
}

// Rotation angle between two rotations via quaternions. The atan2 form stays
// accurate for tiny angles where acos saturates.
inline double quat_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Quaterniond qa(a), qb(b);
  const Eigen::Quaterniond rel = qa.conjugate() * qb;
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w())) * 180.0 / M_PI;
}

// Squared distance from a homogeneous 2D point (z = 1) to a line.
inline double point_line_dist2(const Eigen::Vector3d& line, const Eigen::Vector3d& point) {
  const double num = line.dot(point);
  return num * num / (line(0) * line(0) + line(1) * line(1));
}

// Exhaustive optimal 2-means cost over <= 20 points.
inline double best_two_means_cost(const std::vector<Eigen::VectorXd>& pts) {
  const int n = static_cast<int>(pts.size());
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << n) - 1; ++mask) {
    Eigen::VectorXd m0 = Eigen::VectorXd::Zero(pts[0].size());
    Eigen::VectorXd m1 = m0;
    int c0 = 0, c1 = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) {
        m0 += pts[i];
        ++c0;
      } else {
        m1 += pts[i];
        ++c1;
      }
    }
    m0 /= c0;
    m1 /= c1;
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      cost += (mask & (1 << i)) ? (pts[i] - m0).squaredNorm() : (pts[i] - m1).squaredNorm();
    }
    best = std::min(best, cost);
  }
  return best;
}

}  // namespace testutil
