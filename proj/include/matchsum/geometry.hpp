#pragma once

#include <array>
#include <span>

#include "matchsum/types.hpp"

namespace matchsum {

/// Builds a match from pixel observations, filling the calibrated
/// coordinates n = K^-1 * hom(p). Throws std::invalid_argument on non-finite
/// input or invalid intrinsics.
Match normalize_match(const ImagePoint& p1, const ImagePoint& p2,
                      const CameraIntrinsics& k1, const CameraIntrinsics& k2);

// Low-level residual kernels on explicit coordinates (z = 1 implied).
// These are the hot path for scoring; the EpipolarModel overloads below
// select pixel or calibrated coordinates based on the model kind.

inline double epipolar_residual_xy(const Eigen::Matrix3d& e, const Eigen::Vector2d& x,
                                   const Eigen::Vector2d& xb) {
  const double ex0 = e(0, 0) * x.x() + e(0, 1) * x.y() + e(0, 2);
  const double ex1 = e(1, 0) * x.x() + e(1, 1) * x.y() + e(1, 2);
  const double ex2 = e(2, 0) * x.x() + e(2, 1) * x.y() + e(2, 2);
  return xb.x() * ex0 + xb.y() * ex1 + ex2;
}

inline double sampson_denominator_xy(const Eigen::Matrix3d& e, const Eigen::Vector2d& x,
                                     const Eigen::Vector2d& xb) {
  const double ex0 = e(0, 0) * x.x() + e(0, 1) * x.y() + e(0, 2);
  const double ex1 = e(1, 0) * x.x() + e(1, 1) * x.y() + e(1, 2);
  const double et0 = e(0, 0) * xb.x() + e(1, 0) * xb.y() + e(2, 0);
  const double et1 = e(0, 1) * xb.x() + e(1, 1) * xb.y() + e(2, 1);
  return ex0 * ex0 + ex1 * ex1 + et0 * et0 + et1 * et1;
}

inline double sampson_error_xy(const Eigen::Matrix3d& e, const Eigen::Vector2d& x,
                               const Eigen::Vector2d& xb) {
  const double ex0 = e(0, 0) * x.x() + e(0, 1) * x.y() + e(0, 2);
  const double ex1 = e(1, 0) * x.x() + e(1, 1) * x.y() + e(1, 2);
  const double ex2 = e(2, 0) * x.x() + e(2, 1) * x.y() + e(2, 2);
  const double et0 = e(0, 0) * xb.x() + e(1, 0) * xb.y() + e(2, 0);
  const double et1 = e(0, 1) * xb.x() + e(1, 1) * xb.y() + e(2, 1);
  const double c = xb.x() * ex0 + xb.y() * ex1 + ex2;
  const double d = ex0 * ex0 + ex1 * ex1 + et0 * et0 + et1 * et1;
  if (d <= 0.0) return std::numeric_limits<double>::infinity();
  return c * c / d;
}

/// Points a model evaluates on: calibrated for essential, pixel for
/// fundamental.
inline const Eigen::Vector2d& eval_point1(const EpipolarModel& model, const Match& m) {
  return model.kind == ModelKind::kEssential ? m.n1 : m.p1;
}
inline const Eigen::Vector2d& eval_point2(const EpipolarModel& model, const Match& m) {
  return model.kind == ModelKind::kEssential ? m.n2 : m.p2;
}

/// Signed algebraic residual xb^T E x.
double epipolar_residual(const EpipolarModel& model, const Match& m);

/// Squared Sampson error. Infinite when both points sit at the epipoles.
double sampson_error(const EpipolarModel& model, const Match& m);

/// Sum of the two squared point-to-epipolar-line distances.
double symmetric_epipolar_distance(const EpipolarModel& model, const Match& m);

/// E = [t]x * R.
EpipolarModel essential_from_pose(const RelativePose& pose);

/// The four (R, +-t) candidates of an essential matrix. Throws
/// std::invalid_argument when the model is not rank 2.
std::array<RelativePose, 4> decompose_essential(const EpipolarModel& model);

struct CheiralityResult {
  RelativePose pose;
  int support = 0;             // matches with positive depth in both views
  bool low_confidence = false; // no candidate had any point in front
};

/// Picks the candidate maximizing the number of matches that triangulate
/// (midpoint method) in front of both cameras.
CheiralityResult select_pose_cheirality(std::span<const RelativePose> candidates,
                                        std::span<const Match> matches);

/// Rotation/translation angular errors in degrees. A ground-truth baseline
/// below 1e-9 makes the translation direction unobservable; its error is
/// defined as 0 in that case.
PoseError pose_error(const RelativePose& est, const RelativePose& gt);

}  // namespace matchsum
