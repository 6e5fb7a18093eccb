#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matchsum/clustering.hpp"
#include "matchsum/random.hpp"
#include "matchsum/geometry.hpp"
#include "matchsum/solvers.hpp"
#include "matchsum/summary.hpp"

namespace matchsum {

/// Data used per estimation stage: the dense matches (D), the cluster
/// representatives (C), or the cluster summaries (A). ApproxExhaustive
/// replaces random sampling by iterating the summaries' nullspaces.
enum class Sampling { kDense, kCenter, kApproxExhaustive };
enum class Scoring { kDense, kCenter, kApprox };
enum class Refinement { kDense, kCenter, kApprox };

struct MethodSpec {
  Sampling sampling = Sampling::kCenter;
  Scoring scoring = Scoring::kCenter;
  Refinement refinement = Refinement::kApprox;

  /// Combinations ruled out: Approx scoring followed by Center refinement
  /// (refinement would use less information than scoring), and
  /// ApproxExhaustive sampling without Approx scoring.
  bool valid() const {
    if (scoring == Scoring::kApprox && refinement == Refinement::kCenter) return false;
    if (sampling == Sampling::kApproxExhaustive && scoring != Scoring::kApprox) return false;
    return true;
  }

  /// Three-letter code, e.g. "CCA" = Center sampling, Center scoring,
  /// Approx refinement. 'A' in first position means exhaustive sampling
  /// from the summaries.
  std::string code() const;
  static std::optional<MethodSpec> parse(std::string_view code);

  bool uses_clusters() const {
    return sampling != Sampling::kDense || scoring != Scoring::kDense ||
           refinement != Refinement::kDense;
  }
  bool uses_summaries() const {
    return sampling == Sampling::kApproxExhaustive || scoring == Scoring::kApprox ||
           refinement == Refinement::kApprox;
  }
};

struct RansacConfig {
  MethodSpec method{};
  double tau_px = 1.0;
  int max_iterations = 10000;
  int min_iterations = 100;
  double confidence = 0.999;
  uint64_t seed = 0;
  int lo_max_steps = 25;       // refinement steps on each new best model
  int final_refine_steps = 100;
  int k = 128;
  ClusterSpace cluster_space = ClusterSpace::kMatches4D;
  int cluster_iters = 5;
  RepresentativeSpace rep_space = RepresentativeSpace::kClusterSpace;
  bool expand_inlier_flags = false;  // also emit per-match flags for C/A scoring

  bool valid_parameters() const {
    return method.valid() && tau_px > 0.0 && confidence > 0.0 && confidence < 1.0 &&
           min_iterations <= max_iterations && min_iterations >= 0 && k >= 1;
  }
};

enum class InlierGranularity { kMatch, kRepresentative, kCluster };

struct StageTimings {
  int64_t cluster_us = 0;
  int64_t summarize_us = 0;
  int64_t ransac_us = 0;
  int64_t refine_us = 0;
  /// Estimation cost excluding clustering (the preprocessing shared by all
  /// cluster-based methods).
  int64_t estimation_us() const { return summarize_us + ransac_us + refine_us; }
  int64_t total_us() const { return cluster_us + estimation_us(); }
};

struct RansacResult {
  EpipolarModel model{};
  RelativePose pose{};       // essential models only
  bool pose_valid = false;
  bool pose_low_confidence = false;
  double score = std::numeric_limits<double>::infinity();
  std::vector<uint8_t> inliers;  // at the scoring granularity
  InlierGranularity granularity = InlierGranularity::kMatch;
  std::vector<uint8_t> dense_inliers;  // only with expand_inlier_flags
  int inlier_count = 0;
  double inlier_ratio = 0.0;
  int iterations = 0;
  StageTimings timings{};
  bool converged = false;
  bool fallback_dense = false;
};

/// Views over the prepared estimation data. For essential models the match
/// n-coordinates are calibrated; for fundamental they equal the pixel
/// coordinates.
struct EstimationData {
  ModelKind kind = ModelKind::kEssential;
  std::span<const Match> matches;
  std::span<const Match> representatives;
  std::span<const ClusterSummary> summaries;
};

/// LO-RANSAC over the configured method matrix. Presence of intrinsics
/// selects the essential (calibrated) path, absence the fundamental one.
/// Throws std::invalid_argument on bad config or too few matches.
RansacResult estimate(std::span<const Match> matches,
                      const std::optional<std::pair<CameraIntrinsics, CameraIntrinsics>>& intrinsics,
                      const RansacConfig& config);

/// Adaptive RANSAC termination: ceil(log(1-confidence)/log(1-ratio^s)),
/// clamped to [min_iterations, max_iterations].
int stopping_iterations(double inlier_ratio, int sample_size, double confidence,
                        int min_iterations, int max_iterations);

/// Truncated-cost Levenberg-Marquardt refinement of a model. Essential
/// models move on the 5-dof pose manifold, fundamental ones by local
/// 9-parameter perturbation with rank-2 projection. The inlier mask is
/// re-evaluated after each accepted step; the returned model never has a
/// higher truncated cost than the input.
EpipolarModel refine(const EpipolarModel& model, const EstimationData& data,
                     Refinement method, double tau, int max_steps);

/// Inlier flags at the granularity of the scoring method: per match (Dense),
/// per representative (Center), per cluster (Approx).
std::vector<uint8_t> classify_inliers(const EpipolarModel& model, const EstimationData& data,
                                      Scoring method, double tau);

/// Draws `size` distinct indices in [0, n).
MinimalSample draw_minimal_sample(Rng& rng, int n, int size);

}  // namespace matchsum
