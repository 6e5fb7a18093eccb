#include "matchsum/summary.hpp"

#include <cmath>
#include <stdexcept>

namespace matchsum {

Vector9d constraint_row(const Match& m) { return constraint_row_xy(m.n1, m.n2); }

namespace {

// Upper-triangular Cholesky M^T M = G for symmetric positive semidefinite G.
// Pivots at roundoff scale are treated as exact zeros and their rows cleared;
// for a Gram matrix of rank r < 9 this reproduces G to machine precision,
// which a jittered factorization would not. Returns false if G is
// meaningfully indefinite.
bool cholesky_upper_psd(Matrix9d g, std::array<double, 45>& packed) {
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() *
                     std::max(g.trace(), std::numeric_limits<double>::min());
  int idx = 0;
  for (int i = 0; i < 9; ++i) {
    const double d = g(i, i);
    if (d < -tol) return false;
    if (d <= tol) {
      for (int j = i; j < 9; ++j) packed[idx++] = 0.0;
      continue;
    }
    const double pivot = std::sqrt(d);
    packed[idx++] = pivot;
    for (int j = i + 1; j < 9; ++j) packed[idx++] = g(i, j) / pivot;
    for (int r = i + 1; r < 9; ++r) {
      const double mir = g(i, r) / pivot;
      for (int c = r; c < 9; ++c) g(r, c) -= mir * (g(i, c) / pivot);
    }
  }
  return true;
}

}  // namespace

ClusterSummary summarize_cluster(std::span<const Match> members, const Match& rep) {
  if (members.empty()) throw std::invalid_argument("summarize_cluster: empty cluster");

  Matrix9d g = Matrix9d::Zero();
  for (const Match& m : members) {
    if (!m.n1.allFinite() || !m.n2.allFinite()) {
      throw std::invalid_argument("summarize_cluster: non-finite coordinates");
    }
    const Vector9d a = constraint_row(m);
    g.selfadjointView<Eigen::Upper>().rankUpdate(a);
  }
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < i; ++j) g(i, j) = g(j, i);

  ClusterSummary s;
  s.c = rep.n1;
  s.c_bar = rep.n2;
  s.size = static_cast<int>(members.size());
  if (!cholesky_upper_psd(g, s.m_packed)) {
    // Only reachable through severe cancellation; fall back to jitter.
    double eps = 1e-12 * g.trace();
    for (int attempt = 0; attempt < 3; ++attempt, eps *= 10.0) {
      Matrix9d gj = g + eps * Matrix9d::Identity();
      if (cholesky_upper_psd(gj, s.m_packed)) return s;
    }
    throw std::runtime_error("summarize_cluster: Gram matrix factorization failed");
  }
  return s;
}

std::vector<ClusterSummary> summarize_clusters(std::span<const Match> matches,
                                               const Clustering& clustering) {
  if (clustering.representatives.size() != static_cast<size_t>(clustering.num_clusters())) {
    throw std::invalid_argument("summarize_clusters: representatives not selected");
  }
  const auto members = cluster_members(clustering);
  std::vector<ClusterSummary> summaries;
  summaries.reserve(members.size());
  std::vector<Match> bucket;
  for (size_t j = 0; j < members.size(); ++j) {
    bucket.clear();
    for (int i : members[j]) bucket.push_back(matches[i]);
    summaries.push_back(summarize_cluster(bucket, matches[clustering.representatives[j]]));
  }
  return summaries;
}

double approx_cluster_residual(const EpipolarModel& model, const ClusterSummary& s) {
  const double alpha = summary_alpha(model.m, s);
  if (alpha <= 0.0) return std::numeric_limits<double>::infinity();
  return s.quadratic_form(model_vector(model)) / alpha;
}

double approx_symmetric_epipolar(const EpipolarModel& model, const ClusterSummary& s) {
  const Eigen::Matrix3d& e = model.m;
  const double ex0 = e(0, 0) * s.c.x() + e(0, 1) * s.c.y() + e(0, 2);
  const double ex1 = e(1, 0) * s.c.x() + e(1, 1) * s.c.y() + e(1, 2);
  const double et0 = e(0, 0) * s.c_bar.x() + e(1, 0) * s.c_bar.y() + e(2, 0);
  const double et1 = e(0, 1) * s.c_bar.x() + e(1, 1) * s.c_bar.y() + e(2, 1);
  const double d2 = ex0 * ex0 + ex1 * ex1;
  const double d1 = et0 * et0 + et1 * et1;
  if (d1 <= 0.0 || d2 <= 0.0) return std::numeric_limits<double>::infinity();
  const double num = s.quadratic_form(model_vector(model));
  return num / d2 + num / d1;
}

CostResult cost_dense(const EpipolarModel& model, std::span<const Match> matches, double tau) {
  const double tau2 = tau * tau;
  const Eigen::Matrix3d e = model.m;
  CostResult r;
  if (model.kind == ModelKind::kEssential) {
    for (const Match& m : matches) {
      const double s = sampson_error_xy(e, m.n1, m.n2);
      if (s < tau2) {
        r.score += s;
        ++r.inliers;
      } else {
        r.score += tau2;
      }
    }
  } else {
    for (const Match& m : matches) {
      const double s = sampson_error_xy(e, m.p1, m.p2);
      if (s < tau2) {
        r.score += s;
        ++r.inliers;
      } else {
        r.score += tau2;
      }
    }
  }
  return r;
}

CostResult cost_center(const EpipolarModel& model, std::span<const ClusterSummary> summaries,
                       double tau) {
  const double tau2 = tau * tau;
  const Eigen::Matrix3d e = model.m;
  CostResult r;
  for (const ClusterSummary& s : summaries) {
    const double err = sampson_error_xy(e, s.c, s.c_bar);
    if (err < tau2) {
      r.score += err;
      ++r.inliers;
    } else {
      r.score += tau2;
    }
  }
  return r;
}

SummaryBlocks::SummaryBlocks(std::span<const ClusterSummary> summaries) {
  n_ = static_cast<int>(summaries.size());
  if (summaries.empty()) return;
  blocks_.resize((summaries.size() + 3) / 4);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    Block& block = blocks_[b];
    for (int lane = 0; lane < 4; ++lane) {
      // duplicate the last cluster into the tail lanes with zero budget and
      // zero factor so they contribute nothing
      const size_t idx = std::min(4 * b + lane, summaries.size() - 1);
      const bool real = 4 * b + lane < summaries.size();
      const ClusterSummary& s = summaries[idx];
      for (int i = 0; i < 45; ++i) block.m[i](lane) = real ? s.m_packed[i] : 0.0;
      block.cx(lane) = s.c.x();
      block.cy(lane) = s.c.y();
      block.cbx(lane) = s.c_bar.x();
      block.cby(lane) = s.c_bar.y();
      block.budget_units(lane) = real ? static_cast<double>(s.size) : 0.0;
    }
  }
}

CostResult SummaryBlocks::cost(const EpipolarModel& model, double tau) const {
  const double tau2 = tau * tau;
  const Eigen::Matrix3d& em = model.m;
  const Vector9d e = model_vector(model);
  Eigen::Array4d score4 = Eigen::Array4d::Zero();
  int inliers = 0;
  for (const Block& block : blocks_) {
    // ||M e||^2 across four packed upper-triangular factors
    Eigen::Array4d acc = Eigen::Array4d::Zero();
    int idx = 0;
    for (int i = 0; i < 9; ++i) {
      Eigen::Array4d row = block.m[idx++] * e(i);
      for (int j = i + 1; j < 9; ++j) row += block.m[idx++] * e(j);
      acc += row * row;
    }
    const Eigen::Array4d ex0 = em(0, 0) * block.cx + em(0, 1) * block.cy + em(0, 2);
    const Eigen::Array4d ex1 = em(1, 0) * block.cx + em(1, 1) * block.cy + em(1, 2);
    const Eigen::Array4d et0 = em(0, 0) * block.cbx + em(1, 0) * block.cby + em(2, 0);
    const Eigen::Array4d et1 = em(0, 1) * block.cbx + em(1, 1) * block.cby + em(2, 1);
    const Eigen::Array4d alpha = ex0 * ex0 + ex1 * ex1 + et0 * et0 + et1 * et1;
    const Eigen::Array4d budget = block.budget_units * tau2;
    const auto inlier = alpha > 0.0 && acc < budget * alpha;
    score4 += inlier.select(acc / alpha, budget);
    inliers += static_cast<int>(inlier.count());
  }
  return {score4.sum(), inliers};
}

CostResult cost_approx(const EpipolarModel& model, std::span<const ClusterSummary> summaries,
                       double tau) {
  const double tau2 = tau * tau;
  const Vector9d e = model_vector(model);
  const Eigen::Matrix3d& em = model.m;
  CostResult r;
  for (const ClusterSummary& s : summaries) {
    const double budget = s.size * tau2;
    const double alpha = sampson_denominator_xy(em, s.c, s.c_bar);
    const double num = s.quadratic_form(e);
    if (alpha > 0.0 && num < budget * alpha) {
      r.score += num / alpha;
      ++r.inliers;
    } else {
      r.score += budget;
    }
  }
  return r;
}

}  // namespace matchsum
