#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace matchsum {

using Vector9d = Eigen::Matrix<double, 9, 1>;
using Matrix9d = Eigen::Matrix<double, 9, 9>;

/// Pixel coordinates of a keypoint.
struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
};

/// Calibrated image point in homogeneous coordinates with z fixed to 1.
/// Only (x, y) are stored; hom() materializes the 3-vector.
struct NormalizedPoint {
  double x = 0.0;
  double y = 0.0;
  Eigen::Vector3d hom() const { return {x, y, 1.0}; }
};

/// A correspondence between the two views. p1/p2 are pixel coordinates,
/// n1/n2 the matching points in the coordinates estimation runs in
/// (K^-1 * hom(p) for the calibrated case, hom(p) itself for the
/// uncalibrated one). The homogeneous z component is 1 by construction.
struct Match {
  Eigen::Vector2d p1{0, 0};
  Eigen::Vector2d p2{0, 0};
  Eigen::Vector2d n1{0, 0};
  Eigen::Vector2d n2{0, 0};
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  bool valid() const {
    return fx > 0.0 && fy > 0.0 && std::isfinite(fx) && std::isfinite(fy) &&
           std::isfinite(cx) && std::isfinite(cy) && std::isfinite(skew);
  }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  static CameraIntrinsics from_matrix(const Eigen::Matrix3d& k) {
    return {k(0, 0), k(1, 1), k(0, 2), k(1, 2), k(0, 1)};
  }

  double mean_focal() const { return 0.5 * (fx + fy); }
};

enum class ModelKind { kEssential, kFundamental };

/// 3x3 epipolar model (essential or fundamental matrix), rank <= 2.
struct EpipolarModel {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  ModelKind kind = ModelKind::kEssential;
};

/// Relative pose with the convention x2 = R * x1 + t, ||t|| = 1.
struct RelativePose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::UnitX();
};

struct PoseError {
  double rot_deg = 0.0;
  double trans_deg = 0.0;
  double max_deg = 0.0;
};

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

}  // namespace matchsum
