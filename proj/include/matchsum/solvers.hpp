#pragma once

#include <array>
#include <span>
#include <vector>

#include "matchsum/summary.hpp"
#include "matchsum/types.hpp"

namespace matchsum {

/// Indices of the matches in a minimal sample (5 essential, 7 fundamental),
/// pairwise distinct.
struct MinimalSample {
  std::array<int, 7> indices{};
  int size = 0;
};

/// Essential matrices fitting 5 calibrated matches (up to 10). Degenerate
/// samples yield an empty list; every returned model satisfies the epipolar
/// constraints of the sample, det(E) = 0 and the essential matrix internal
/// constraint within 1e-8 at unit Frobenius norm.
std::vector<EpipolarModel> essential_5pt(std::span<const Match> sample);

/// Fundamental matrices fitting 7 pixel-space matches (up to 3). Points are
/// Hartley-normalized internally; returned models are rank 2 and unit norm.
std::vector<EpipolarModel> fundamental_7pt(std::span<const Match> sample);

/// Orthonormal basis of the 4 right singular directions of M with smallest
/// singular values.
struct NullspaceBasis {
  Eigen::Matrix<double, 4, 9> b = Eigen::Matrix<double, 4, 9>::Zero();
};

NullspaceBasis nullspace_from_summary(const ClusterSummary& s);

/// Runs the 5-point polynomial back-end on the summary's approximate
/// nullspace. Returned models satisfy the essential internal constraints;
/// the cluster's data constraints hold only approximately by construction.
std::vector<EpipolarModel> essential_from_summary(const ClusterSummary& s);

/// Shared polynomial back-end: essential matrices inside the span of the 4
/// given 9-vectors (column-major unvec).
std::vector<EpipolarModel> essential_from_nullspace(const Eigen::Matrix<double, 4, 9>& basis);

}  // namespace matchsum
