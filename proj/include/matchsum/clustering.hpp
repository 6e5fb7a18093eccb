#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "matchsum/types.hpp"

namespace matchsum {

/// Embedding used to group matches. 2D/4D work on pixel coordinates, 9D on
/// the epipolar constraint vectors of the calibrated points, Grid partitions
/// image 1 spatially.
enum class ClusterSpace { kKeypoints2D, kMatches4D, kConstraints9D, kGrid };

/// Space the per-cluster representative is selected in: the clustering's own
/// embedding, or always the 4D match space.
enum class RepresentativeSpace { kClusterSpace, kMatch4D };

struct Clustering {
  ClusterSpace space = ClusterSpace::kMatches4D;
  std::vector<int> assignment;         // per match, in [0, num_clusters)
  Eigen::MatrixXd centroids;           // num_clusters x dim
  std::vector<int> representatives;    // per cluster, a member match index

  int num_clusters() const { return static_cast<int>(centroids.rows()); }
};

/// Feature matrix (one row per match) for a clustering space. Throws
/// std::invalid_argument for Grid, whose embedding is undefined.
Eigen::MatrixXd embed(std::span<const Match> matches, ClusterSpace space);

/// Lloyd's algorithm from k-means++ seeding; at most max_iter update rounds.
/// k is clamped to the number of points; empty clusters are dropped, so the
/// result may have fewer than k clusters. Deterministic in seed.
Clustering kmeans(const Eigen::MatrixXd& features, int k, int max_iter, uint64_t seed);

/// Partitions the bounding box of the image-1 keypoints into ceil(sqrt(k))^2
/// equal rectangles, indexed row-major. Empty cells are dropped; centroids
/// are the 4D means of the members.
Clustering grid_cluster(std::span<const Match> matches, int k);

/// Fills clustering.representatives with the member closest to each cluster
/// centroid, ties broken by lowest match index. For kMatch4D (and Grid) the
/// distance is measured to the 4D mean of the cluster members.
void select_representatives(std::span<const Match> matches, Clustering& clustering,
                            RepresentativeSpace rep_space = RepresentativeSpace::kClusterSpace);

/// embed + kmeans/grid + select_representatives in one call.
Clustering cluster_matches(std::span<const Match> matches, ClusterSpace space, int k,
                           int max_iter, uint64_t seed,
                           RepresentativeSpace rep_space = RepresentativeSpace::kClusterSpace);

/// Member indices per cluster, in ascending match order.
std::vector<std::vector<int>> cluster_members(const Clustering& clustering);

}  // namespace matchsum
