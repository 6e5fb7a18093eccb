#include "matchsum/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "matchsum/clustering.hpp"
#include "matchsum/geometry.hpp"
#include "matchsum/random.hpp"
#include "matchsum/summary.hpp"
#include "matchsum/synth.hpp"

namespace matchsum {

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double hi = values[mid];
  if (values.size() % 2 == 0) {
    const double lo = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lo + hi);
  }
  return hi;
}

}  // namespace

std::vector<BenchRecord> run_benchmark(std::span<const PairRecord> pairs,
                                       const BenchOptions& options) {
  if (options.methods.empty()) throw std::invalid_argument("run_benchmark: no methods");
  const int repeats = std::max(1, options.repeats);
  const int per_pair = static_cast<int>(options.methods.size()) * repeats;
  std::vector<BenchRecord> records(pairs.size() * per_pair);

  auto run_pair = [&](size_t pair_idx) {
    const PairRecord& pair = pairs[pair_idx];
    std::vector<Match> matches;
    std::string prep_error;
    const bool calibrated = options.model == ModelKind::kEssential;
    try {
      matches = matches_from_record(pair, calibrated);
    } catch (const std::exception& e) {
      prep_error = e.what();
    }

    for (size_t m = 0; m < options.methods.size(); ++m) {
      for (int rep = 0; rep < repeats; ++rep) {
        BenchRecord& record =
            records[pair_idx * per_pair + m * repeats + rep];
        record.pair_id = pair.pair_id;
        record.method = options.methods[m].code();
        record.seed = options.base.seed + static_cast<uint64_t>(rep);
        if (!prep_error.empty()) {
          record.error = prep_error;
          record.pose_err_deg = 180.0;
          continue;
        }
        RansacConfig config = options.base;
        config.method = options.methods[m];
        config.seed = record.seed;
        try {
          std::optional<std::pair<CameraIntrinsics, CameraIntrinsics>> intrinsics;
          if (calibrated) intrinsics = std::make_pair(*pair.k1, *pair.k2);
          const RansacResult result = estimate(matches, intrinsics, config);
          record.score = result.score;
          record.iterations = result.iterations;
          record.inlier_count = result.inlier_count;
          record.timings = result.timings;
          if (!result.converged) {
            record.error = "no model found";
            record.pose_err_deg = 180.0;
            continue;
          }
          if (calibrated) {
            if (pair.gt && result.pose_valid) {
              record.pose_err_deg = pose_error(result.pose, pair.gt->pose()).max_deg;
            } else if (pair.gt) {
              record.pose_err_deg = 180.0;
            }
          } else if (!pair.gt_matches.empty()) {
            record.recall =
                wxbs_recall(result.model, pair.gt_matches, options.recall_threshold_px);
          }
        } catch (const std::exception& e) {
          record.error = e.what();
          record.pose_err_deg = 180.0;
        }
      }
    }
  };

  int workers = options.workers > 0
                    ? options.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, static_cast<int>(std::max<size_t>(pairs.size(), 1)));
  if (workers == 1) {
    for (size_t i = 0; i < pairs.size(); ++i) run_pair(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const size_t i = next.fetch_add(1);
          if (i >= pairs.size()) return;
          run_pair(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }
  return records;
}

std::vector<double> auc(std::vector<double> errors_deg, std::span<const double> thresholds_deg) {
  if (errors_deg.empty()) return {};
  for (double& e : errors_deg) {
    if (!std::isfinite(e)) e = 180.0;
  }
  std::sort(errors_deg.begin(), errors_deg.end());
  const double n = static_cast<double>(errors_deg.size());
  std::vector<double> result;
  result.reserve(thresholds_deg.size());
  for (double t : thresholds_deg) {
    double integral = 0.0;
    for (double e : errors_deg) {
      if (e >= t) break;
      integral += t - e;
    }
    result.push_back(t > 0.0 ? integral / (n * t) : 0.0);
  }
  return result;
}

double wxbs_recall(const EpipolarModel& f, std::span<const Eigen::Vector4d> gt_matches,
                   double threshold_px) {
  if (gt_matches.empty()) throw std::invalid_argument("wxbs_recall: no verification matches");
  int hits = 0;
  for (const Eigen::Vector4d& t : gt_matches) {
    const Eigen::Vector3d x1(t(0), t(1), 1.0);
    const Eigen::Vector3d x2(t(2), t(3), 1.0);
    const Eigen::Vector3d l2 = f.m * x1;            // epipolar line in image 2
    const Eigen::Vector3d l1 = f.m.transpose() * x2;  // and in image 1
    const double c = x2.dot(l2);
    const double d2 = l2(0) * l2(0) + l2(1) * l2(1);
    const double d1 = l1(0) * l1(0) + l1(1) * l1(1);
    if (d1 <= 0.0 || d2 <= 0.0) continue;
    const double dist = std::sqrt(c * c / d2 + c * c / d1);
    if (dist < threshold_px) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gt_matches.size());
}

ApproxEvalResult approx_error_eval(std::span<const PairRecord> pairs,
                                   const ApproxEvalOptions& options) {
  ApproxEvalResult result;
  std::vector<double> diffs_px;           // eps_S - eps_a, focal-scaled
  std::vector<double> exact_ratios;
  std::vector<std::vector<double>> approx_ratios(options.k_values.size());
  std::vector<double> exact_times;
  std::vector<std::vector<double>> approx_times(options.k_values.size());

  for (size_t pair_idx = 0; pair_idx < pairs.size(); ++pair_idx) {
    const PairRecord& pair = pairs[pair_idx];
    if (!pair.gt || !pair.calibrated()) {
      std::fprintf(stderr, "approx-eval: skipping pair '%s' (missing gt or intrinsics)\n",
                   pair.pair_id.c_str());
      ++result.pairs_skipped;
      continue;
    }
    const std::vector<Match> matches = matches_from_record(pair, true);
    if (matches.empty()) {
      ++result.pairs_skipped;
      continue;
    }
    const double focal = 0.5 * (pair.k1->mean_focal() + pair.k2->mean_focal());
    const double tau = options.tau_px / focal;
    const double tau2 = tau * tau;
    const EpipolarModel gt_model = essential_from_pose(pair.gt->pose());

    // Exact per-match residuals and inlier ratio.
    std::vector<double> sampson(matches.size());
    int exact_inliers = 0;
    for (size_t i = 0; i < matches.size(); ++i) {
      sampson[i] = sampson_error(gt_model, matches[i]);
      if (sampson[i] < tau2) ++exact_inliers;
    }
    exact_ratios.push_back(static_cast<double>(exact_inliers) /
                           static_cast<double>(matches.size()));
    {
      const auto start = Clock::now();
      CostResult acc{};
      for (int repeat = 0; repeat < options.timing_reps; ++repeat) {
        acc = cost_dense(gt_model, matches, tau);
      }
      exact_times.push_back(
          std::chrono::duration<double, std::micro>(Clock::now() - start).count() /
          options.timing_reps);
      (void)acc;
    }

    for (size_t kv = 0; kv < options.k_values.size(); ++kv) {
      const int k = options.k_values[kv];
      if (static_cast<int>(matches.size()) < k) continue;
      const Clustering clustering =
          cluster_matches(matches, options.space, k, options.cluster_iters,
                          mix_seed(options.seed, pair_idx, static_cast<uint64_t>(k)),
                          options.rep_space);
      const std::vector<ClusterSummary> summaries = summarize_clusters(matches, clustering);

      int cluster_inliers = 0;
      for (const ClusterSummary& s : summaries) {
        const double approx_sum = approx_cluster_residual(gt_model, s);
        if (approx_sum < s.size * tau2) ++cluster_inliers;
      }
      approx_ratios[kv].push_back(static_cast<double>(cluster_inliers) /
                                  static_cast<double>(summaries.size()));
      {
        const auto start = Clock::now();
        CostResult acc{};
        for (int repeat = 0; repeat < options.timing_reps; ++repeat) {
          acc = cost_approx(gt_model, summaries, tau);
        }
        approx_times[kv].push_back(
            std::chrono::duration<double, std::micro>(Clock::now() - start).count() /
            options.timing_reps);
        (void)acc;
      }

      if (k == options.histogram_k) {
        const auto members = cluster_members(clustering);
        for (size_t j = 0; j < summaries.size(); ++j) {
          double exact_sum = 0.0;
          for (int idx : members[j]) exact_sum += sampson[idx];
          const double n_members = static_cast<double>(members[j].size());
          const double eps_exact = std::sqrt(exact_sum / n_members);
          const double approx_sum = approx_cluster_residual(gt_model, summaries[j]);
          const double eps_approx = std::sqrt(approx_sum / n_members);
          diffs_px.push_back((eps_exact - eps_approx) * focal);
        }
      }
    }
    ++result.pairs_used;
  }

  result.n_clusters = static_cast<int64_t>(diffs_px.size());
  if (!diffs_px.empty()) {
    int64_t within = 0;
    for (double d : diffs_px) {
      if (std::abs(d) < 0.1) ++within;
    }
    result.frac_within_tenth_px = static_cast<double>(within) / diffs_px.size();

    std::vector<double> sorted = diffs_px;
    std::sort(sorted.begin(), sorted.end());
    auto percentile = [&](double p) {
      const double pos = p * (sorted.size() - 1);
      const size_t lo = static_cast<size_t>(pos);
      const size_t hi = std::min(lo + 1, sorted.size() - 1);
      return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
    };
    result.clip_lo = percentile(0.01);
    result.clip_hi = percentile(0.99);
    const int bins = std::max(1, options.histogram_bins);
    result.histogram.assign(bins, 0);
    const double width = (result.clip_hi - result.clip_lo) / bins;
    result.bin_width = width;
    for (double d : diffs_px) {
      if (d < result.clip_lo || d > result.clip_hi) continue;
      int bin = width > 0.0 ? static_cast<int>((d - result.clip_lo) / width) : 0;
      result.histogram[std::clamp(bin, 0, bins - 1)] += 1;
    }
  }

  result.exact_median_inlier_ratio = median(exact_ratios);
  result.exact_avg_inlier_ratio =
      exact_ratios.empty()
          ? std::numeric_limits<double>::quiet_NaN()
          : std::accumulate(exact_ratios.begin(), exact_ratios.end(), 0.0) / exact_ratios.size();
  result.exact_scoring_us =
      exact_times.empty()
          ? std::numeric_limits<double>::quiet_NaN()
          : std::accumulate(exact_times.begin(), exact_times.end(), 0.0) / exact_times.size();
  for (size_t kv = 0; kv < options.k_values.size(); ++kv) {
    ApproxEvalRow row;
    row.k = options.k_values[kv];
    row.median_inlier_ratio = median(approx_ratios[kv]);
    row.avg_inlier_ratio = approx_ratios[kv].empty()
                               ? std::numeric_limits<double>::quiet_NaN()
                               : std::accumulate(approx_ratios[kv].begin(),
                                                 approx_ratios[kv].end(), 0.0) /
                                     approx_ratios[kv].size();
    row.scoring_us = approx_times[kv].empty()
                         ? std::numeric_limits<double>::quiet_NaN()
                         : std::accumulate(approx_times[kv].begin(), approx_times[kv].end(),
                                           0.0) /
                               approx_times[kv].size();
    row.speedup = result.exact_scoring_us / row.scoring_us;
    result.rows.push_back(row);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

std::vector<MethodAggregate> aggregate_records(std::span<const BenchRecord> records) {
  std::vector<std::string> order;
  for (const BenchRecord& r : records) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
  }

  std::vector<MethodAggregate> aggregates;
  double dense_median_ms = std::numeric_limits<double>::quiet_NaN();
  for (const std::string& method : order) {
    MethodAggregate agg;
    agg.method = method;
    std::vector<double> errors, est_ms, cluster_ms, recalls;
    for (const BenchRecord& r : records) {
      if (r.method != method) continue;
      ++agg.count;
      if (!r.error.empty()) ++agg.failures;
      if (!std::isnan(r.pose_err_deg)) errors.push_back(r.pose_err_deg);
      if (!std::isnan(r.recall)) recalls.push_back(r.recall);
      if (r.error.empty()) {
        est_ms.push_back(r.timings.estimation_us() / 1000.0);
        cluster_ms.push_back(r.timings.cluster_us / 1000.0);
      }
    }
    if (!errors.empty()) {
      const double thresholds[] = {5.0, 10.0, 20.0};
      const std::vector<double> areas = auc(errors, thresholds);
      agg.auc5 = areas[0];
      agg.auc10 = areas[1];
      agg.auc20 = areas[2];
    }
    if (!recalls.empty()) {
      agg.mean_recall = std::accumulate(recalls.begin(), recalls.end(), 0.0) / recalls.size();
    }
    agg.median_est_ms = median(est_ms);
    agg.mean_est_ms = est_ms.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : std::accumulate(est_ms.begin(), est_ms.end(), 0.0) /
                                           est_ms.size();
    agg.median_cluster_ms = median(cluster_ms);
    if (method == "DDD") dense_median_ms = agg.median_est_ms;
    aggregates.push_back(std::move(agg));
  }
  for (MethodAggregate& agg : aggregates) {
    if (!std::isnan(dense_median_ms) && agg.median_est_ms > 0.0) {
      agg.speedup_vs_dense = dense_median_ms / agg.median_est_ms;
    }
  }
  return aggregates;
}

namespace {

std::string fmt6(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return s;
}

nlohmann::json record_json(const BenchRecord& r) {
  nlohmann::json j;
  j["pair_id"] = r.pair_id;
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["pose_err_deg"] = std::isnan(r.pose_err_deg) ? nlohmann::json() : nlohmann::json(r.pose_err_deg);
  j["recall"] = std::isnan(r.recall) ? nlohmann::json() : nlohmann::json(r.recall);
  j["score"] = std::isnan(r.score) ? nlohmann::json() : nlohmann::json(r.score);
  j["iterations"] = r.iterations;
  j["inlier_count"] = r.inlier_count;
  j["cluster_us"] = r.timings.cluster_us;
  j["summarize_us"] = r.timings.summarize_us;
  j["ransac_us"] = r.timings.ransac_us;
  j["refine_us"] = r.timings.refine_us;
  j["total_us"] = r.timings.total_us();
  j["error"] = r.error;
  return j;
}

}  // namespace

void emit_report(std::span<const BenchRecord> records, ReportFormat format,
                 const std::filesystem::path& path) {
  const std::vector<MethodAggregate> aggregates = aggregate_records(records);
  std::ofstream out(path);
  if (!out.is_open()) throw DataError("cannot write report: " + path.string());

  if (format == ReportFormat::kCsv) {
    out << "pair_id,method,seed,pose_err_deg,recall,score,iterations,inlier_count,"
           "cluster_us,summarize_us,ransac_us,refine_us,total_us,error\n";
    for (const BenchRecord& r : records) {
      out << sanitize(r.pair_id) << ',' << r.method << ',' << r.seed << ','
          << fmt6(r.pose_err_deg) << ',' << fmt6(r.recall) << ',' << fmt6(r.score) << ','
          << r.iterations << ',' << r.inlier_count << ',' << r.timings.cluster_us << ','
          << r.timings.summarize_us << ',' << r.timings.ransac_us << ','
          << r.timings.refine_us << ',' << r.timings.total_us() << ',' << sanitize(r.error)
          << '\n';
    }
    out << "\n# aggregate\n";
    out << "method,count,failures,auc5,auc10,auc20,mean_recall,median_est_ms,mean_est_ms,"
           "median_cluster_ms,speedup_vs_dense\n";
    for (const MethodAggregate& a : aggregates) {
      out << a.method << ',' << a.count << ',' << a.failures << ',' << fmt6(a.auc5) << ','
          << fmt6(a.auc10) << ',' << fmt6(a.auc20) << ',' << fmt6(a.mean_recall) << ','
          << fmt6(a.median_est_ms) << ',' << fmt6(a.mean_est_ms) << ','
          << fmt6(a.median_cluster_ms) << ',' << fmt6(a.speedup_vs_dense) << '\n';
    }
  } else {
    nlohmann::json j;
    j["records"] = nlohmann::json::array();
    for (const BenchRecord& r : records) j["records"].push_back(record_json(r));
    j["aggregate"] = nlohmann::json::array();
    for (const MethodAggregate& a : aggregates) {
      nlohmann::json ja;
      ja["method"] = a.method;
      ja["count"] = a.count;
      ja["failures"] = a.failures;
      ja["auc5"] = a.auc5;
      ja["auc10"] = a.auc10;
      ja["auc20"] = a.auc20;
      ja["mean_recall"] = std::isnan(a.mean_recall) ? nlohmann::json() : nlohmann::json(a.mean_recall);
      ja["median_est_ms"] = a.median_est_ms;
      ja["mean_est_ms"] = a.mean_est_ms;
      ja["median_cluster_ms"] = a.median_cluster_ms;
      ja["speedup_vs_dense"] =
          std::isnan(a.speedup_vs_dense) ? nlohmann::json() : nlohmann::json(a.speedup_vs_dense);
      j["aggregate"].push_back(ja);
    }
    out << j.dump(2) << '\n';
  }
  if (!out.good()) throw DataError("write failed: " + path.string());
}

}  // namespace matchsum
