#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "matchsum/io.hpp"
#include "matchsum/ransac.hpp"

namespace matchsum {

/// One (pair, method, seed) estimation outcome. Failed runs carry an error
/// message and the worst-case pose error so AUC stays comparable.
struct BenchRecord {
  std::string pair_id;
  std::string method;
  uint64_t seed = 0;
  double pose_err_deg = std::numeric_limits<double>::quiet_NaN();
  double recall = std::numeric_limits<double>::quiet_NaN();
  double score = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  int inlier_count = 0;
  StageTimings timings{};
  std::string error;
};

struct BenchOptions {
  RansacConfig base{};
  std::vector<MethodSpec> methods;
  int repeats = 1;
  ModelKind model = ModelKind::kEssential;
  double recall_threshold_px = 10.0;  // fundamental-consistency threshold
  int workers = 0;                    // 0 = hardware concurrency
};

/// Runs every method on every pair, repeats times with seeds base.seed + r.
/// Pairs are processed by a worker pool; records come back in (pair, method,
/// repeat) order regardless of scheduling. Per-pair failures become records
/// with an error marker instead of aborting the run.
std::vector<BenchRecord> run_benchmark(std::span<const PairRecord> pairs,
                                       const BenchOptions& options);

/// Area under the cumulative recall curve up to each threshold (degrees),
/// via exact integration of the recall step function. Non-finite errors
/// count as 180 degrees.
std::vector<double> auc(std::vector<double> errors_deg, std::span<const double> thresholds_deg);

/// Fraction of verification matches whose symmetric epipolar distance
/// (pixel-space point-to-line, sqrt of the summed squares) is strictly below
/// the threshold.
double wxbs_recall(const EpipolarModel& f, std::span<const Eigen::Vector4d> gt_matches,
                   double threshold_px);

// ---------------------------------------------------------------------------
// Approximation-error evaluation at the ground-truth model.
// ---------------------------------------------------------------------------

struct ApproxEvalOptions {
  std::vector<int> k_values{64, 128, 256, 512, 1024};
  int histogram_k = 128;        // cluster count the histogram is collected at
  int histogram_bins = 101;
  double tau_px = 2.5;
  ClusterSpace space = ClusterSpace::kMatches4D;
  int cluster_iters = 5;
  RepresentativeSpace rep_space = RepresentativeSpace::kClusterSpace;
  uint64_t seed = 0;
  int timing_reps = 32;         // scoring-cost timing repetitions per pair
};

struct ApproxEvalRow {
  int k = 0;
  double median_inlier_ratio = 0.0;   // per-cluster, approximate residual
  double avg_inlier_ratio = 0.0;
  double scoring_us = 0.0;            // average cost over the pairs
  double speedup = 1.0;               // vs. the exact dense scoring
};

struct ApproxEvalResult {
  // Distribution of eps_exact - eps_approx per cluster, focal-scaled pixels,
  // clipped to the [1st, 99th] percentile.
  double clip_lo = 0.0;
  double clip_hi = 0.0;
  std::vector<int> histogram;
  double bin_width = 0.0;
  int64_t n_clusters = 0;
  double frac_within_tenth_px = 0.0;  // |eps_S - eps_a| < 0.1 px
  double exact_median_inlier_ratio = 0.0;
  double exact_avg_inlier_ratio = 0.0;
  double exact_scoring_us = 0.0;
  std::vector<ApproxEvalRow> rows;
  int pairs_used = 0;
  int pairs_skipped = 0;  // missing ground truth or intrinsics
};

/// Per-cluster exact and approximate average Sampson residuals at the
/// ground-truth model, plus the exact-vs-approximate inlier-ratio table over
/// the configured cluster counts. Pairs without ground truth are skipped.
ApproxEvalResult approx_error_eval(std::span<const PairRecord> pairs,
                                   const ApproxEvalOptions& options);

// ---------------------------------------------------------------------------
// Report emission.
// ---------------------------------------------------------------------------

enum class ReportFormat { kCsv, kJson };

struct MethodAggregate {
  std::string method;
  int count = 0;
  int failures = 0;
  double auc5 = 0.0, auc10 = 0.0, auc20 = 0.0;
  double mean_recall = std::numeric_limits<double>::quiet_NaN();
  double median_est_ms = 0.0;  // summarize + ransac + refine
  double mean_est_ms = 0.0;
  double median_cluster_ms = 0.0;
  double speedup_vs_dense = std::numeric_limits<double>::quiet_NaN();
};

std::vector<MethodAggregate> aggregate_records(std::span<const BenchRecord> records);

/// Stable column order, floats at 6 significant digits, aggregate block
/// appended. Throws DataError on I/O failure.
void emit_report(std::span<const BenchRecord> records, ReportFormat format,
                 const std::filesystem::path& path);

}  // namespace matchsum
