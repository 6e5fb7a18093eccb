#include "matchsum/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace matchsum {

namespace {
constexpr double kRadToDeg = 57.295779513082320877;

double clamped_acos_deg(double c) { return std::acos(std::clamp(c, -1.0, 1.0)) * kRadToDeg; }
}  // namespace

Match normalize_match(const ImagePoint& p1, const ImagePoint& p2,
                      const CameraIntrinsics& k1, const CameraIntrinsics& k2) {
  if (!std::isfinite(p1.u) || !std::isfinite(p1.v) || !std::isfinite(p2.u) ||
      !std::isfinite(p2.v)) {
    throw std::invalid_argument("normalize_match: non-finite point coordinates");
  }
  if (!k1.valid() || !k2.valid()) {
    throw std::invalid_argument("normalize_match: invalid intrinsics");
  }
  Match m;
  m.p1 = {p1.u, p1.v};
  m.p2 = {p2.u, p2.v};
  const double y1 = (p1.v - k1.cy) / k1.fy;
  m.n1 = {(p1.u - k1.cx - k1.skew * y1) / k1.fx, y1};
  const double y2 = (p2.v - k2.cy) / k2.fy;
  m.n2 = {(p2.u - k2.cx - k2.skew * y2) / k2.fx, y2};
  return m;
}

double epipolar_residual(const EpipolarModel& model, const Match& m) {
  return epipolar_residual_xy(model.m, eval_point1(model, m), eval_point2(model, m));
}

double sampson_error(const EpipolarModel& model, const Match& m) {
  return sampson_error_xy(model.m, eval_point1(model, m), eval_point2(model, m));
}

double symmetric_epipolar_distance(const EpipolarModel& model, const Match& m) {
  const Eigen::Vector2d& x = eval_point1(model, m);
  const Eigen::Vector2d& xb = eval_point2(model, m);
  const Eigen::Matrix3d& e = model.m;
  const double ex0 = e(0, 0) * x.x() + e(0, 1) * x.y() + e(0, 2);
  const double ex1 = e(1, 0) * x.x() + e(1, 1) * x.y() + e(1, 2);
  const double ex2 = e(2, 0) * x.x() + e(2, 1) * x.y() + e(2, 2);
  const double et0 = e(0, 0) * xb.x() + e(1, 0) * xb.y() + e(2, 0);
  const double et1 = e(0, 1) * xb.x() + e(1, 1) * xb.y() + e(2, 1);
  const double c = xb.x() * ex0 + xb.y() * ex1 + ex2;
  const double d2 = ex0 * ex0 + ex1 * ex1;
  const double d1 = et0 * et0 + et1 * et1;
  if (d1 <= 0.0 || d2 <= 0.0) return std::numeric_limits<double>::infinity();
  return c * c / d2 + c * c / d1;
}

EpipolarModel essential_from_pose(const RelativePose& pose) {
  return {skew(pose.t) * pose.R, ModelKind::kEssential};
}

std::array<RelativePose, 4> decompose_essential(const EpipolarModel& model) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(model.m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(1) > 1e-12 * sv(0))) {
    throw std::invalid_argument("decompose_essential: model has rank < 2");
  }
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Eigen::Matrix3d w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Eigen::Matrix3d r1 = u * w * v.transpose();
  const Eigen::Matrix3d r2 = u * w.transpose() * v.transpose();
  const Eigen::Vector3d t = u.col(2);
  return {RelativePose{r1, t}, RelativePose{r1, -t}, RelativePose{r2, t},
          RelativePose{r2, -t}};
}

namespace {

// Midpoint triangulation depth signs for one match under pose (R, t).
// Returns true when the point lies in front of both cameras.
bool positive_depths(const RelativePose& pose, const Match& m) {
  const Eigen::Vector3d a = m.n1.homogeneous();
  const Eigen::Vector3d b = pose.R.transpose() * m.n2.homogeneous();
  const Eigen::Vector3d c2 = -(pose.R.transpose() * pose.t);
  // min over (l, u) of || l*a - (c2 + u*b) ||^2
  const double aa = a.squaredNorm();
  const double bb = b.squaredNorm();
  const double ab = a.dot(b);
  const double det = aa * bb - ab * ab;
  if (det <= 1e-12 * aa * bb) return false;  // near-parallel rays
  const double ac = a.dot(c2);
  const double bc = b.dot(c2);
  const double lambda = (bb * ac - ab * bc) / det;
  const double mu = (ab * ac - aa * bc) / det;
  return lambda > 0.0 && mu > 0.0;
}

}  // namespace

CheiralityResult select_pose_cheirality(std::span<const RelativePose> candidates,
                                        std::span<const Match> matches) {
  CheiralityResult best;
  best.pose = candidates.empty() ? RelativePose{} : candidates[0];
  best.support = -1;
  for (const RelativePose& cand : candidates) {
    int support = 0;
    for (const Match& m : matches) {
      if (positive_depths(cand, m)) ++support;
    }
    if (support > best.support) {
      best.support = support;
      best.pose = cand;
    }
  }
  if (best.support <= 0) {
    best.support = std::max(best.support, 0);
    best.low_confidence = true;
  }
  return best;
}

PoseError pose_error(const RelativePose& est, const RelativePose& gt) {
  PoseError err;
  err.rot_deg = clamped_acos_deg(0.5 * ((est.R.transpose() * gt.R).trace() - 1.0));
  const double gt_norm = gt.t.norm();
  if (gt_norm < 1e-9) {
    err.trans_deg = 0.0;
  } else {
    const double est_norm = est.t.norm();
    if (est_norm < 1e-9) {
      err.trans_deg = 180.0;
    } else {
      err.trans_deg = clamped_acos_deg(est.t.dot(gt.t) / (est_norm * gt_norm));
    }
  }
  err.max_deg = std::max(err.rot_deg, err.trans_deg);
  return err;
}

}  // namespace matchsum
