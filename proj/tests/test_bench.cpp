#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "matchsum/bench.hpp"
#include "matchsum/synth.hpp"
#include "test_helpers.hpp"

using namespace matchsum;

namespace {

BenchOptions quick_options(std::initializer_list<const char*> codes) {
  BenchOptions options;
  for (const char* c : codes) options.methods.push_back(*MethodSpec::parse(c));
  options.base.k = 32;
  options.base.tau_px = 2.0;
  options.base.min_iterations = 50;
  options.base.max_iterations = 300;
  options.workers = 2;
  return options;
}

}  // namespace

TEST_CASE("auc closed forms") {
  const double thresholds[] = {5.0, 10.0, 20.0};
  CHECK(auc({}, thresholds).empty());

  const std::vector<double> zeros(10, 0.0);
  for (double a : auc(zeros, thresholds)) CHECK(a == doctest::Approx(1.0));

  const std::vector<double> far(10, 25.0);
  CHECK(auc(far, thresholds)[2] == doctest::Approx(0.0));

  // single error of 2.5 deg -> AUC@5 = (5 - 2.5) / 5 = 0.5
  const std::vector<double> single{2.5};
  CHECK(auc(single, thresholds)[0] == doctest::Approx(0.5));

  // non-finite errors count as 180
  const std::vector<double> with_nan{0.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK(auc(with_nan, thresholds)[0] == doctest::Approx(0.5));
}

TEST_CASE("auc is monotone in the threshold and permutation invariant") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 40.0);
  std::vector<double> errors;
  for (int i = 0; i < 60; ++i) errors.push_back(u(rng));
  std::vector<double> thresholds;
  for (double t = 1.0; t <= 30.0; t += 1.0) thresholds.push_back(t);
  const auto areas = auc(errors, thresholds);
  for (size_t i = 1; i < areas.size(); ++i) CHECK(areas[i] >= areas[i - 1] - 1e-12);

  std::vector<double> shuffled = errors;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const double t5[] = {5.0};
  CHECK(auc(errors, t5)[0] == doctest::Approx(auc(shuffled, t5)[0]).epsilon(1e-12));
}

TEST_CASE("wxbs_recall basics") {
  const testutil::Scene scene = testutil::make_scene(700, 50);
  const Eigen::Matrix3d k = scene.k.matrix();
  const Eigen::Matrix3d f_true =
      k.inverse().transpose() * essential_from_pose(scene.pose).m * k.inverse();
  const EpipolarModel f{f_true / f_true.norm(), ModelKind::kFundamental};
  std::vector<Eigen::Vector4d> gt_matches;
  for (const Match& m : scene.matches) {
    gt_matches.push_back({m.p1.x(), m.p1.y(), m.p2.x(), m.p2.y()});
  }
  CHECK(wxbs_recall(f, gt_matches, 10.0) == doctest::Approx(1.0));
  CHECK(wxbs_recall(f, gt_matches, 0.0) == doctest::Approx(0.0));  // strict inequality

  // an unrelated model scores near chance level
  const testutil::Scene other = testutil::make_scene(701, 5);
  const Eigen::Matrix3d f_wrong =
      k.inverse().transpose() * essential_from_pose(other.pose).m * k.inverse();
  const EpipolarModel wrong{f_wrong / f_wrong.norm(), ModelKind::kFundamental};
  CHECK(wxbs_recall(wrong, gt_matches, 10.0) < 0.6);
  CHECK_THROWS_AS(wxbs_recall(f, {}, 10.0), std::invalid_argument);
}

TEST_CASE("run_benchmark produces one record per pair, method, and repeat") {
  SynthConfig cfg;
  cfg.n_pairs = 3;
  cfg.n_matches = 400;
  cfg.noise_px = 0.5;
  cfg.outlier_frac = 0.2;
  cfg.seed = 21;
  const auto pairs = synth_pairs(cfg);
  BenchOptions options = quick_options({"DDD", "CCA"});
  options.repeats = 2;
  const auto records = run_benchmark(pairs, options);
  REQUIRE(records.size() == 3 * 2 * 2);
  // order: pair-major, then method, then repeat
  CHECK(records[0].pair_id == pairs[0].pair_id);
  CHECK(records[0].method == "DDD");
  CHECK(records[0].seed == options.base.seed);
  CHECK(records[1].seed == options.base.seed + 1);
  CHECK(records[2].method == "CCA");
  for (const BenchRecord& r : records) {
    CHECK(r.error.empty());
    CHECK(r.pose_err_deg < 0.5);
    CHECK(r.timings.ransac_us >= 0);
  }
}

TEST_CASE("run_benchmark records failures instead of aborting") {
  PairRecord broken;
  broken.pair_id = "broken";
  broken.matches = {{1, 2, 3, 4}, {5, 6, 7, 8}};  // too few, no intrinsics
  const auto records = run_benchmark(std::span<const PairRecord>(&broken, 1),
                                     quick_options({"DDD"}));
  REQUIRE(records.size() == 1);
  CHECK_FALSE(records[0].error.empty());
  CHECK(records[0].pose_err_deg == doctest::Approx(180.0));
}

TEST_CASE("benchmark records are schedule independent") {
  SynthConfig cfg;
  cfg.n_pairs = 4;
  cfg.n_matches = 300;
  cfg.noise_px = 1.0;
  cfg.outlier_frac = 0.2;
  cfg.seed = 31;
  const auto pairs = synth_pairs(cfg);
  BenchOptions serial = quick_options({"CCA", "CCC"});
  serial.workers = 1;
  BenchOptions parallel = quick_options({"CCA", "CCC"});
  parallel.workers = 2;
  const auto a = run_benchmark(pairs, serial);
  const auto b = run_benchmark(pairs, parallel);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pair_id == b[i].pair_id);
    CHECK(a[i].method == b[i].method);
    CHECK(a[i].pose_err_deg == b[i].pose_err_deg);
    CHECK(a[i].score == b[i].score);
    CHECK(a[i].iterations == b[i].iterations);
  }
}

TEST_CASE("fundamental benchmark reports recall against verification matches") {
  SynthConfig cfg;
  cfg.n_pairs = 2;
  cfg.n_matches = 400;
  cfg.noise_px = 0.5;
  cfg.outlier_frac = 0.2;
  cfg.seed = 41;
  const auto pairs = synth_pairs(cfg, true);
  BenchOptions options = quick_options({"CCA"});
  options.model = ModelKind::kFundamental;
  const auto records = run_benchmark(pairs, options);
  for (const BenchRecord& r : records) {
    CHECK(r.error.empty());
    CHECK(r.recall > 0.9);
    CHECK(std::isnan(r.pose_err_deg));
  }
}

TEST_CASE("approx_error_eval on noiseless pairs reports zero residual gap") {
  SynthConfig cfg;
  cfg.n_pairs = 2;
  cfg.n_matches = 800;
  cfg.seed = 51;
  const auto pairs = synth_pairs(cfg);
  ApproxEvalOptions options;
  options.k_values = {16, 64};
  options.histogram_k = 64;
  options.timing_reps = 4;
  const ApproxEvalResult result = approx_error_eval(pairs, options);
  CHECK(result.pairs_used == 2);
  CHECK(result.frac_within_tenth_px == doctest::Approx(1.0));
  CHECK(result.exact_median_inlier_ratio == doctest::Approx(1.0));
  REQUIRE(result.rows.size() == 2);
  CHECK(result.rows[0].k == 16);
  for (const ApproxEvalRow& row : result.rows) {
    CHECK(row.median_inlier_ratio == doctest::Approx(1.0));
  }
  // skipped pairs are counted
  std::vector<PairRecord> no_gt = pairs;
  for (auto& r : no_gt) r.gt.reset();
  const ApproxEvalResult skipped = approx_error_eval(no_gt, options);
  CHECK(skipped.pairs_used == 0);
  CHECK(skipped.pairs_skipped == 2);
}

TEST_CASE("aggregate_records computes AUC and speedup against the dense baseline") {
  std::vector<BenchRecord> records;
  auto add = [&](const char* method, double err, int64_t est_us) {
    BenchRecord r;
    r.pair_id = "p";
    r.method = method;
    r.pose_err_deg = err;
    r.timings.ransac_us = est_us;
    records.push_back(r);
  };
  add("DDD", 0.0, 1000);
  add("DDD", 2.5, 3000);
  add("CCA", 0.0, 100);
  add("CCA", 5.0, 300);
  const auto aggregates = aggregate_records(records);
  REQUIRE(aggregates.size() == 2);
  CHECK(aggregates[0].method == "DDD");
  CHECK(aggregates[0].auc5 == doctest::Approx((1.0 + 0.5) / 2));
  CHECK(aggregates[0].speedup_vs_dense == doctest::Approx(1.0));
  CHECK(aggregates[1].speedup_vs_dense == doctest::Approx(2000.0 / 200.0));
}

TEST_CASE("emit_report writes csv and json with stable layout") {
  SynthConfig cfg;
  cfg.n_pairs = 2;
  cfg.n_matches = 300;
  cfg.noise_px = 0.5;
  cfg.outlier_frac = 0.1;
  cfg.seed = 61;
  const auto pairs = synth_pairs(cfg);
  const auto records = run_benchmark(pairs, quick_options({"DDD", "CCC"}));

  const auto csv_path = std::filesystem::temp_directory_path() / "matchsum_report.csv";
  emit_report(records, ReportFormat::kCsv, csv_path);
  std::ifstream in(csv_path);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "pair_id,method,seed,pose_err_deg,recall,score,iterations,inlier_count,"
        "cluster_us,summarize_us,ransac_us,refine_us,total_us,error");
  int lines = 0;
  std::string line;
  bool has_aggregate = false;
  while (std::getline(in, line)) {
    ++lines;
    if (line == "# aggregate") has_aggregate = true;
  }
  CHECK(lines >= static_cast<int>(records.size()) + 3);
  CHECK(has_aggregate);
  std::filesystem::remove(csv_path);

  const auto json_path = std::filesystem::temp_directory_path() / "matchsum_report.json";
  emit_report(records, ReportFormat::kJson, json_path);
  std::ifstream jin(json_path);
  std::string all((std::istreambuf_iterator<char>(jin)), std::istreambuf_iterator<char>());
  CHECK(all.find("\"records\"") != std::string::npos);
  CHECK(all.find("\"aggregate\"") != std::string::npos);
  std::filesystem::remove(json_path);

  // empty records -> header-only file
  emit_report({}, ReportFormat::kCsv, csv_path);
  std::ifstream ein(csv_path);
  std::getline(ein, header);
  CHECK(header.rfind("pair_id,", 0) == 0);
  std::filesystem::remove(csv_path);
}
