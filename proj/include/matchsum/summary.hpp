#pragma once

#include <array>
#include <span>
#include <vector>

#include "matchsum/clustering.hpp"
#include "matchsum/geometry.hpp"
#include "matchsum/types.hpp"

namespace matchsum {

/// Epipolar constraint row a = x (kron) xb on the estimation coordinates,
/// laid out so that a . vec(E) = xb^T E x with column-major vec(E).
Vector9d constraint_row(const Match& m);

inline Vector9d constraint_row_xy(const Eigen::Vector2d& x, const Eigen::Vector2d& xb) {
  Vector9d a;
  a << x.x() * xb.x(), x.x() * xb.y(), x.x(),
       x.y() * xb.x(), x.y() * xb.y(), x.y(),
       xb.x(), xb.y(), 1.0;
  return a;
}

/// Column-major vectorization of the model matrix, consistent with
/// constraint_row: constraint_row(m) . model_vector(E) = xb^T E x.
inline Vector9d model_vector(const EpipolarModel& model) {
  return Eigen::Map<const Vector9d>(model.m.data());
}

/// One cluster compressed to its representative match, its size, and the
/// 9x9 upper-triangular reduced measurement matrix M with M^T M = A^T A,
/// where the rows of A are the members' constraint rows. M is stored packed
/// (row-wise upper triangle) to keep scoring cache-resident.
struct ClusterSummary {
  Eigen::Vector2d c{0, 0};      // representative, image 1 (estimation coords)
  Eigen::Vector2d c_bar{0, 0};  // representative, image 2
  int size = 0;
  std::array<double, 45> m_packed{};

  Matrix9d M() const {
    Matrix9d m = Matrix9d::Zero();
    int idx = 0;
    for (int i = 0; i < 9; ++i)
      for (int j = i; j < 9; ++j) m(i, j) = m_packed[idx++];
    return m;
  }

  /// || M e ||^2 = e^T (A^T A) e.
  double quadratic_form(const Vector9d& e) const {
    const double* p = m_packed.data();
    double acc = 0.0;
    for (int i = 0; i < 9; ++i) {
      double row = 0.0;
      for (int j = i; j < 9; ++j) row += *p++ * e(j);
      acc += row * row;
    }
    return acc;
  }
};

/// Builds the summary of one cluster. members must be non-empty and contain
/// rep. Throws std::invalid_argument on non-finite coordinates.
ClusterSummary summarize_cluster(std::span<const Match> members, const Match& rep);

/// Summaries of every cluster, in cluster order. Requires representatives to
/// be selected.
std::vector<ClusterSummary> summarize_clusters(std::span<const Match> matches,
                                               const Clustering& clustering);

/// alpha(E; C) = ||E12 c||^2 + ||(E^T)12 c_bar||^2, the shared Sampson
/// denominator of the cluster.
inline double summary_alpha(const Eigen::Matrix3d& e, const ClusterSummary& s) {
  return sampson_denominator_xy(e, s.c, s.c_bar);
}

/// Approximated sum of Sampson errors over the cluster: ||M e||^2 / alpha.
/// Infinite when alpha is zero (cluster treated as outlier).
double approx_cluster_residual(const EpipolarModel& model, const ClusterSummary& s);

/// Approximated sum of symmetric epipolar distances:
/// ||M e||^2 / ||E12 c||^2 + ||M e||^2 / ||(E^T)12 c_bar||^2.
double approx_symmetric_epipolar(const EpipolarModel& model, const ClusterSummary& s);

struct CostResult {
  double score = 0.0;
  int inliers = 0;
};

/// MSAC cost over all matches: sum of min(sampson, tau^2); a match is an
/// inlier iff sampson < tau^2. tau is in estimation units (normalized for
/// essential, pixels for fundamental).
CostResult cost_dense(const EpipolarModel& model, std::span<const Match> matches, double tau);

/// MSAC cost over the representative matches only (one term per cluster).
CostResult cost_center(const EpipolarModel& model, std::span<const ClusterSummary> summaries,
                       double tau);

/// Cluster-budget cost: sum over clusters of min(||M e||^2 / alpha, |C| tau^2).
/// A cluster counts as inlier iff its approximated sum is below its budget.
CostResult cost_approx(const EpipolarModel& model, std::span<const ClusterSummary> summaries,
                       double tau);

/// Scoring-oriented view of a summary list: the packed factors are
/// interleaved four clusters per SIMD lane so model scoring streams at full
/// width. Built once per clustering, reused for every evaluated hypothesis.
class SummaryBlocks {
 public:
  SummaryBlocks() = default;
  explicit SummaryBlocks(std::span<const ClusterSummary> summaries);

  int size() const { return n_; }
  bool empty() const { return n_ == 0; }

  /// Same result as the span overload of cost_approx.
  CostResult cost(const EpipolarModel& model, double tau) const;

 private:
  struct Block {
    // coefficient-major: m[i][lane] is packed entry i of cluster lane
    std::array<Eigen::Array4d, 45> m;
    Eigen::Array4d cx, cy, cbx, cby, budget_units;  // budget = size * tau^2
  };
  std::vector<Block> blocks_;
  int n_ = 0;
};

inline CostResult cost_approx(const EpipolarModel& model, const SummaryBlocks& blocks,
                              double tau) {
  return blocks.cost(model, tau);
}

}  // namespace matchsum
