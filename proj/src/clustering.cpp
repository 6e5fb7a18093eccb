#include "matchsum/clustering.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "matchsum/random.hpp"
#include "matchsum/summary.hpp"

namespace matchsum {

Eigen::MatrixXd embed(std::span<const Match> matches, ClusterSpace space) {
  if (matches.empty()) throw std::invalid_argument("embed: empty match list");
  const int n = static_cast<int>(matches.size());
  switch (space) {
    case ClusterSpace::kKeypoints2D: {
      Eigen::MatrixXd f(n, 2);
      for (int i = 0; i < n; ++i) f.row(i) = matches[i].p1;
      return f;
    }
    case ClusterSpace::kMatches4D: {
      Eigen::MatrixXd f(n, 4);
      for (int i = 0; i < n; ++i) f.row(i) << matches[i].p1.transpose(), matches[i].p2.transpose();
      return f;
    }
    case ClusterSpace::kConstraints9D: {
      Eigen::MatrixXd f(n, 9);
      for (int i = 0; i < n; ++i) f.row(i) = constraint_row(matches[i]).transpose();
      return f;
    }
    case ClusterSpace::kGrid:
      break;
  }
  throw std::invalid_argument("embed: grid clustering has no feature embedding");
}

namespace {

// Drops empty clusters, relabeling assignments in first-appearance-preserving
// cluster order.
void compact_clusters(Clustering& c, const Eigen::MatrixXd& centroids,
                      const std::vector<int>& counts) {
  const int k = static_cast<int>(counts.size());
  std::vector<int> remap(k, -1);
  int kept = 0;
  for (int j = 0; j < k; ++j) {
    if (counts[j] > 0) remap[j] = kept++;
  }
  c.centroids.resize(kept, centroids.cols());
  for (int j = 0; j < k; ++j) {
    if (remap[j] >= 0) c.centroids.row(remap[j]) = centroids.row(j);
  }
  for (int& a : c.assignment) a = remap[a];
}

}  // namespace

Clustering kmeans(const Eigen::MatrixXd& features, int k, int max_iter, uint64_t seed) {
  const int n = static_cast<int>(features.rows());
  const int dim = static_cast<int>(features.cols());
  if (n == 0) throw std::invalid_argument("kmeans: no features");
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  k = std::min(k, n);

  Rng rng(seed);
  Eigen::MatrixXd centroids(k, dim);

  // k-means++ seeding.
  std::vector<double> d2(n);
  centroids.row(0) = features.row(static_cast<int>(rng.next_below(n)));
  for (int i = 0; i < n; ++i) d2[i] = (features.row(i) - centroids.row(0)).squaredNorm();
  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (double d : d2) total += d;
    int pick;
    if (total > 0.0) {
      double u = rng.next_double() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.next_below(n));
    }
    centroids.row(j) = features.row(pick);
    for (int i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (features.row(i) - centroids.row(j)).squaredNorm());
    }
  }

  std::vector<int> assignment(n, 0);
  std::vector<int> counts(k, 0);

  // Assignment via ||f - c||^2 = ||f||^2 - 2 f.c + ||c||^2; the ||f||^2 term
  // is constant per point. Row blocks keep the score buffer cache resident.
  constexpr int kBlock = 256;
  Eigen::MatrixXd scores(kBlock, k);
  Eigen::VectorXd cnorm(k);
  auto assign = [&]() -> bool {
    for (int j = 0; j < k; ++j) cnorm(j) = centroids.row(j).squaredNorm();
    bool changed = false;
    for (int start = 0; start < n; start += kBlock) {
      const int len = std::min(kBlock, n - start);
      scores.topRows(len).noalias() = features.middleRows(start, len) * centroids.transpose();
      for (int i = 0; i < len; ++i) {
        int best = 0;
        double best_score = cnorm(0) - 2.0 * scores(i, 0);
        for (int j = 1; j < k; ++j) {
          const double s = cnorm(j) - 2.0 * scores(i, j);
          if (s < best_score) {
            best_score = s;
            best = j;
          }
        }
        if (assignment[start + i] != best) {
          assignment[start + i] = best;
          changed = true;
        }
      }
    }
    return changed;
  };

  assign();
  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, dim);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assignment[i]) += features.row(i);
      ++counts[assignment[i]];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) centroids.row(j) = sums.row(j) / counts[j];
    }
    if (!assign()) break;
  }

  std::fill(counts.begin(), counts.end(), 0);
  for (int a : assignment) ++counts[a];

  Clustering result;
  result.space = dim == 2   ? ClusterSpace::kKeypoints2D
                 : dim == 4 ? ClusterSpace::kMatches4D
                            : ClusterSpace::kConstraints9D;
  result.assignment = std::move(assignment);
  compact_clusters(result, centroids, counts);
  return result;
}

Clustering grid_cluster(std::span<const Match> matches, int k) {
  const int n = static_cast<int>(matches.size());
  if (n == 0) throw std::invalid_argument("grid_cluster: no matches");
  if (k < 1) throw std::invalid_argument("grid_cluster: k must be >= 1");
  const int m = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));

  double umin = matches[0].p1.x(), umax = umin;
  double vmin = matches[0].p1.y(), vmax = vmin;
  for (const Match& match : matches) {
    umin = std::min(umin, match.p1.x());
    umax = std::max(umax, match.p1.x());
    vmin = std::min(vmin, match.p1.y());
    vmax = std::max(vmax, match.p1.y());
  }
  const double uext = umax - umin;
  const double vext = vmax - vmin;

  auto cell_index = [&](double value, double lo, double ext) {
    if (ext <= 0.0) return 0;
    int c = static_cast<int>((value - lo) / ext * m);
    return std::clamp(c, 0, m - 1);
  };

  Clustering result;
  result.space = ClusterSpace::kGrid;
  result.assignment.resize(n);
  std::vector<int> counts(m * m, 0);
  for (int i = 0; i < n; ++i) {
    const int row = cell_index(matches[i].p1.y(), vmin, vext);
    const int col = cell_index(matches[i].p1.x(), umin, uext);
    result.assignment[i] = row * m + col;
    ++counts[result.assignment[i]];
  }

  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(m * m, 4);
  for (int i = 0; i < n; ++i) {
    centroids.row(result.assignment[i]) +=
        (Eigen::Vector4d() << matches[i].p1, matches[i].p2).finished().transpose();
  }
  for (int j = 0; j < m * m; ++j) {
    if (counts[j] > 0) centroids.row(j) /= counts[j];
  }
  compact_clusters(result, centroids, counts);
  return result;
}

void select_representatives(std::span<const Match> matches, Clustering& clustering,
                            RepresentativeSpace rep_space) {
  const int k = clustering.num_clusters();
  const bool use_4d = rep_space == RepresentativeSpace::kMatch4D ||
                      clustering.space == ClusterSpace::kGrid;

  Eigen::MatrixXd features;
  Eigen::MatrixXd centroids;
  if (use_4d) {
    features = embed(matches, ClusterSpace::kMatches4D);
    if (clustering.space == ClusterSpace::kGrid) {
      centroids = clustering.centroids;  // already the 4D member means
    } else {
      centroids = Eigen::MatrixXd::Zero(k, 4);
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
      for (size_t i = 0; i < matches.size(); ++i) {
        centroids.row(clustering.assignment[i]) += features.row(static_cast<int>(i));
        counts(clustering.assignment[i]) += 1.0;
      }
      for (int j = 0; j < k; ++j) centroids.row(j) /= counts(j);
    }
  } else {
    features = embed(matches, clustering.space);
    centroids = clustering.centroids;
  }

  clustering.representatives.assign(k, -1);
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  for (size_t i = 0; i < matches.size(); ++i) {
    const int j = clustering.assignment[i];
    const double d = (features.row(static_cast<int>(i)) - centroids.row(j)).squaredNorm();
    if (d < best[j]) {
      best[j] = d;
      clustering.representatives[j] = static_cast<int>(i);
    }
  }
}

Clustering cluster_matches(std::span<const Match> matches, ClusterSpace space, int k,
                           int max_iter, uint64_t seed, RepresentativeSpace rep_space) {
  Clustering clustering;
  if (space == ClusterSpace::kGrid) {
    clustering = grid_cluster(matches, k);
  } else {
    clustering = kmeans(embed(matches, space), k, max_iter, seed);
    clustering.space = space;
  }
  select_representatives(matches, clustering, rep_space);
  return clustering;
}

std::vector<std::vector<int>> cluster_members(const Clustering& clustering) {
  std::vector<std::vector<int>> members(clustering.num_clusters());
  for (size_t i = 0; i < clustering.assignment.size(); ++i) {
    members[clustering.assignment[i]].push_back(static_cast<int>(i));
  }
  return members;
}

}  // namespace matchsum
