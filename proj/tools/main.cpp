#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "matchsum/bench.hpp"
#include "matchsum/clustering.hpp"
#include "matchsum/io.hpp"
#include "matchsum/ransac.hpp"
#include "matchsum/synth.hpp"

namespace {

using namespace matchsum;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct SharedFlags {
  std::string input;
  std::string output;
  std::string format = "csv";
  std::string methods = "CCA";
  int k = 128;
  std::string cluster_space = "4d";
  double tau_px = 1.0;
  uint64_t seed = 0;
  int repeats = 1;
  std::string model = "essential";
  int max_iters = 10000;
  int min_iters = 100;
  double confidence = 0.999;
};

void add_shared(CLI::App* cmd, SharedFlags& flags) {
  cmd->add_option("--output", flags.output, "Output file path");
  cmd->add_option("--format", flags.format, "Report format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--methods", flags.methods,
                  "Comma-separated method codes, e.g. DDD,CAD,CCD,CAA,CCA,CCC");
  cmd->add_option("--k", flags.k, "Number of clusters");
  cmd->add_option("--cluster-space", flags.cluster_space, "Clustering space: 2d, 4d, 9d, grid")
      ->check(CLI::IsMember({"2d", "4d", "9d", "grid"}));
  cmd->add_option("--tau-px", flags.tau_px, "Inlier threshold in pixels");
  cmd->add_option("--seed", flags.seed, "Base random seed");
  cmd->add_option("--repeats", flags.repeats, "Repeats per pair with seeds seed..seed+r-1");
  cmd->add_option("--model", flags.model, "Model type: essential or fundamental")
      ->check(CLI::IsMember({"essential", "fundamental"}));
  cmd->add_option("--max-iters", flags.max_iters, "Maximum RANSAC iterations");
  cmd->add_option("--min-iters", flags.min_iters, "Minimum RANSAC iterations");
  cmd->add_option("--confidence", flags.confidence, "RANSAC confidence");
}

ClusterSpace parse_space(const std::string& name) {
  if (name == "2d") return ClusterSpace::kKeypoints2D;
  if (name == "4d") return ClusterSpace::kMatches4D;
  if (name == "9d") return ClusterSpace::kConstraints9D;
  return ClusterSpace::kGrid;
}

std::vector<MethodSpec> parse_methods(const std::string& codes) {
  std::vector<MethodSpec> methods;
  std::stringstream ss(codes);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    const auto spec = MethodSpec::parse(token);
    if (!spec) throw CLI::ValidationError("--methods", "unknown method code '" + token + "'");
    methods.push_back(*spec);
  }
  if (methods.empty()) throw CLI::ValidationError("--methods", "no methods given");
  return methods;
}

RansacConfig config_from(const SharedFlags& flags) {
  RansacConfig config;
  config.tau_px = flags.tau_px;
  config.k = flags.k;
  config.cluster_space = parse_space(flags.cluster_space);
  config.seed = flags.seed;
  config.max_iterations = flags.max_iters;
  config.min_iterations = flags.min_iters;
  config.confidence = flags.confidence;
  return config;
}

ReportFormat parse_format(const std::string& name) {
  return name == "json" ? ReportFormat::kJson : ReportFormat::kCsv;
}

int run_synth(const SharedFlags& flags, const SynthConfig& cfg, bool gt_matches) {
  if (flags.output.empty()) {
    std::cerr << "synth: --output is required\n";
    return kExitUsage;
  }
  const auto records = synth_pairs(cfg, gt_matches);
  emit_pairs(records, flags.output);
  std::cout << "wrote " << records.size() << " pairs to " << flags.output << "\n";
  return 0;
}

int run_estimate(const SharedFlags& flags, const std::string& pair_id) {
  const auto pairs = load_pairs(flags.input);
  if (pairs.empty()) {
    std::cerr << "estimate: no pairs in " << flags.input << "\n";
    return kExitData;
  }
  const PairRecord* record = &pairs.front();
  if (!pair_id.empty()) {
    record = nullptr;
    for (const PairRecord& p : pairs) {
      if (p.pair_id == pair_id) record = &p;
    }
    if (!record) {
      std::cerr << "estimate: pair '" << pair_id << "' not found\n";
      return kExitData;
    }
  }

  const bool calibrated = flags.model == "essential";
  const auto matches = matches_from_record(*record, calibrated);
  RansacConfig config = config_from(flags);
  config.method = parse_methods(flags.methods).front();

  std::optional<std::pair<CameraIntrinsics, CameraIntrinsics>> intrinsics;
  if (calibrated) intrinsics = std::make_pair(*record->k1, *record->k2);
  const RansacResult result = estimate(matches, intrinsics, config);

  std::printf("pair %s method %s\n", record->pair_id.c_str(), config.method.code().c_str());
  std::printf("converged %d iterations %d score %.6g inliers %d ratio %.4f\n",
              result.converged ? 1 : 0, result.iterations, result.score, result.inlier_count,
              result.inlier_ratio);
  std::printf("timing (us): cluster %lld summarize %lld ransac %lld refine %lld\n",
              static_cast<long long>(result.timings.cluster_us),
              static_cast<long long>(result.timings.summarize_us),
              static_cast<long long>(result.timings.ransac_us),
              static_cast<long long>(result.timings.refine_us));
  std::cout << "model:\n" << result.model.m << "\n";
  if (result.pose_valid) {
    std::cout << "R:\n" << result.pose.R << "\nt: " << result.pose.t.transpose() << "\n";
    if (record->gt) {
      const PoseError err = pose_error(result.pose, record->gt->pose());
      std::printf("pose error: rot %.5f deg trans %.5f deg max %.5f deg\n", err.rot_deg,
                  err.trans_deg, err.max_deg);
    }
  }
  if (!record->gt_matches.empty() && !calibrated) {
    std::printf("recall@10px: %.4f\n", wxbs_recall(result.model, record->gt_matches, 10.0));
  }
  return result.converged ? 0 : kExitNumerical;
}

int run_bench(const SharedFlags& flags, int workers) {
  if (flags.output.empty()) {
    std::cerr << "bench: --output is required\n";
    return kExitUsage;
  }
  const auto pairs = load_pairs(flags.input);
  BenchOptions options;
  options.base = config_from(flags);
  options.methods = parse_methods(flags.methods);
  options.repeats = flags.repeats;
  options.model = flags.model == "essential" ? ModelKind::kEssential : ModelKind::kFundamental;
  options.workers = workers;
  const auto records = run_benchmark(pairs, options);
  emit_report(records, parse_format(flags.format), flags.output);

  for (const MethodAggregate& agg : aggregate_records(records)) {
    std::printf("%s: auc5 %.4f auc10 %.4f auc20 %.4f median %.3f ms speedup %.1fx\n",
                agg.method.c_str(), agg.auc5, agg.auc10, agg.auc20, agg.median_est_ms,
                agg.speedup_vs_dense);
  }
  std::cout << "wrote " << records.size() << " records to " << flags.output << "\n";
  return 0;
}

int run_approx_eval(const SharedFlags& flags, const std::vector<int>& k_values, int hist_k) {
  if (flags.output.empty()) {
    std::cerr << "approx-eval: --output is required\n";
    return kExitUsage;
  }
  const auto pairs = load_pairs(flags.input);
  ApproxEvalOptions options;
  if (!k_values.empty()) options.k_values = k_values;
  if (hist_k > 0) options.histogram_k = hist_k;
  options.tau_px = flags.tau_px;
  options.space = parse_space(flags.cluster_space);
  options.seed = flags.seed;
  const ApproxEvalResult result = approx_error_eval(pairs, options);

  nlohmann::json j;
  j["pairs_used"] = result.pairs_used;
  j["pairs_skipped"] = result.pairs_skipped;
  j["n_clusters"] = result.n_clusters;
  j["frac_within_0.1px"] = result.frac_within_tenth_px;
  j["histogram"] = {{"clip_lo_px", result.clip_lo},
                    {"clip_hi_px", result.clip_hi},
                    {"bin_width_px", result.bin_width},
                    {"counts", result.histogram}};
  j["exact"] = {{"median_inlier_ratio", result.exact_median_inlier_ratio},
                {"avg_inlier_ratio", result.exact_avg_inlier_ratio},
                {"scoring_us", result.exact_scoring_us}};
  j["approx"] = nlohmann::json::array();
  for (const ApproxEvalRow& row : result.rows) {
    j["approx"].push_back({{"k", row.k},
                           {"median_inlier_ratio", row.median_inlier_ratio},
                           {"avg_inlier_ratio", row.avg_inlier_ratio},
                           {"scoring_us", row.scoring_us},
                           {"speedup", row.speedup}});
  }
  std::ofstream out(flags.output);
  if (!out.is_open()) throw DataError("cannot write " + flags.output);
  out << j.dump(2) << "\n";

  std::printf("clusters %lld, |eps_S - eps_a| < 0.1px for %.2f%%\n",
              static_cast<long long>(result.n_clusters), 100.0 * result.frac_within_tenth_px);
  std::printf("exact inlier ratio med %.3f avg %.3f (%.1f us)\n",
              result.exact_median_inlier_ratio, result.exact_avg_inlier_ratio,
              result.exact_scoring_us);
  for (const ApproxEvalRow& row : result.rows) {
    std::printf("approx K=%-5d med %.3f avg %.3f (%.2f us, %.1fx)\n", row.k,
                row.median_inlier_ratio, row.avg_inlier_ratio, row.scoring_us, row.speedup);
  }
  return 0;
}

int run_cluster_ablate(const SharedFlags& flags, const std::vector<int>& k_values, int workers) {
  if (flags.output.empty()) {
    std::cerr << "cluster-ablate: --output is required\n";
    return kExitUsage;
  }
  const auto pairs = load_pairs(flags.input);
  const std::vector<int> ks = k_values.empty() ? std::vector<int>{64, 128, 256} : k_values;
  const std::vector<std::string> spaces{"2d", "4d", "9d", "grid"};

  nlohmann::json rows = nlohmann::json::array();
  for (const std::string& space : spaces) {
    for (int k : ks) {
      SharedFlags sub = flags;
      sub.cluster_space = space;
      sub.k = k;
      BenchOptions options;
      options.base = config_from(sub);
      options.methods = parse_methods(flags.methods);
      options.repeats = flags.repeats;
      options.model =
          flags.model == "essential" ? ModelKind::kEssential : ModelKind::kFundamental;
      options.workers = workers;
      const auto records = run_benchmark(pairs, options);
      const auto aggregates = aggregate_records(records);
      std::vector<double> cluster_ms;
      for (const BenchRecord& r : records) {
        if (r.error.empty()) cluster_ms.push_back(r.timings.cluster_us / 1000.0);
      }
      const double mean_cluster =
          cluster_ms.empty()
              ? 0.0
              : std::accumulate(cluster_ms.begin(), cluster_ms.end(), 0.0) / cluster_ms.size();
      for (const MethodAggregate& agg : aggregates) {
        rows.push_back({{"space", space},
                        {"k", k},
                        {"method", agg.method},
                        {"auc5", agg.auc5},
                        {"auc10", agg.auc10},
                        {"auc20", agg.auc20},
                        {"mean_cluster_ms", mean_cluster},
                        {"median_est_ms", agg.median_est_ms},
                        {"failures", agg.failures}});
        std::printf("%-4s K=%-5d %s: auc5 %.4f cluster %.2f ms est %.2f ms\n", space.c_str(), k,
                    agg.method.c_str(), agg.auc5, mean_cluster, agg.median_est_ms);
      }
    }
  }
  std::ofstream out(flags.output);
  if (!out.is_open()) throw DataError("cannot write " + flags.output);
  out << rows.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-view relative pose estimation with cluster-summarized dense matches"};
  app.require_subcommand(1);

  SharedFlags flags;
  SynthConfig synth_cfg;
  bool synth_gt_matches = false;
  std::string pair_id;
  std::vector<int> k_values;
  int hist_k = 0;
  int workers = 0;

  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic pair files");
  synth->add_option("--pairs", synth_cfg.n_pairs, "Number of pairs");
  synth->add_option("--matches", synth_cfg.n_matches, "Matches per pair");
  synth->add_option("--noise-px", synth_cfg.noise_px, "Gaussian pixel noise sigma");
  synth->add_option("--outlier-frac", synth_cfg.outlier_frac, "Outlier fraction");
  synth->add_option("--focal-px", synth_cfg.focal_px, "Focal length in pixels");
  synth->add_option("--image-size", synth_cfg.image_size, "Square image size in pixels");
  synth->add_option("--depth-min", synth_cfg.depth_min, "Scene depth range minimum");
  synth->add_option("--depth-max", synth_cfg.depth_max, "Scene depth range maximum");
  synth->add_option("--baseline-min", synth_cfg.baseline_min, "Baseline range minimum");
  synth->add_option("--baseline-max", synth_cfg.baseline_max, "Baseline range maximum");
  synth->add_flag("--gt-matches", synth_gt_matches,
                  "Store noise-free verification correspondences");
  add_shared(synth, flags);

  CLI::App* est = app.add_subcommand("estimate", "Estimate the pose of a single pair");
  est->add_option("--input", flags.input, "Pair file (JSON lines)")->required();
  est->add_option("--pair-id", pair_id, "Pair to estimate (default: first)");
  add_shared(est, flags);

  CLI::App* bench = app.add_subcommand("bench", "Run the method matrix over a pair file");
  bench->add_option("--input", flags.input, "Pair file (JSON lines)")->required();
  bench->add_option("--workers", workers, "Worker threads (0 = hardware)");
  add_shared(bench, flags);

  CLI::App* approx = app.add_subcommand(
      "approx-eval", "Exact-vs-approximate residual evaluation at the ground-truth model");
  approx->add_option("--input", flags.input, "Pair file (JSON lines)")->required();
  approx->add_option("--k-values", k_values, "Cluster counts for the inlier-ratio table");
  approx->add_option("--hist-k", hist_k, "Cluster count for the residual histogram");
  add_shared(approx, flags);

  CLI::App* ablate =
      app.add_subcommand("cluster-ablate", "Sweep clustering spaces and cluster counts");
  ablate->add_option("--input", flags.input, "Pair file (JSON lines)")->required();
  ablate->add_option("--k-values", k_values, "Cluster counts to sweep");
  ablate->add_option("--workers", workers, "Worker threads (0 = hardware)");
  add_shared(ablate, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      synth_cfg.seed = flags.seed;
      return run_synth(flags, synth_cfg, synth_gt_matches);
    }
    if (est->parsed()) return run_estimate(flags, pair_id);
    if (bench->parsed()) return run_bench(flags, workers);
    if (approx->parsed()) return run_approx_eval(flags, k_values, hist_k);
    if (ablate->parsed()) return run_cluster_ablate(flags, k_values, workers);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
