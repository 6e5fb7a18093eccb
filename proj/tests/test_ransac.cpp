#include <doctest.h>

#include "matchsum/ransac.hpp"
#include "test_helpers.hpp"

using namespace matchsum;

namespace {

std::optional<std::pair<CameraIntrinsics, CameraIntrinsics>> intrinsics_of(
    const testutil::Scene& scene) {
  return std::make_pair(scene.k, scene.k);
}

RansacConfig small_config(const char* code, uint64_t seed = 1) {
  RansacConfig config;
  config.method = *MethodSpec::parse(code);
  config.tau_px = 2.0;
  config.k = 32;
  config.min_iterations = 50;
  config.max_iterations = 400;
  config.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("MethodSpec codes parse and validate") {
  for (const char* code : {"DDD", "CAD", "CCD", "CAA", "CCA", "CCC", "AAD", "AAA"}) {
    auto spec = MethodSpec::parse(code);
    REQUIRE(spec.has_value());
    CHECK(spec->code() == code);
    CHECK(spec->valid());
  }
  CHECK_FALSE(MethodSpec::parse("CAC").has_value());  // approx scoring + center refinement
  CHECK_FALSE(MethodSpec::parse("ACD").has_value());  // exhaustive needs approx scoring
  CHECK_FALSE(MethodSpec::parse("XYZ").has_value());
  CHECK_FALSE(MethodSpec::parse("CC").has_value());
}

TEST_CASE("stopping_iterations closed forms") {
  CHECK(stopping_iterations(1.0, 5, 0.999, 7, 10000) == 7);
  CHECK(stopping_iterations(0.0, 5, 0.999, 7, 10000) == 10000);
  // ceil(log(1e-3) / log(1 - 0.5^5)) = ceil(217.58) = 218
  CHECK(stopping_iterations(0.5, 5, 0.999, 0, 10000) == 218);
  CHECK(stopping_iterations(0.5, 5, 0.999, 500, 10000) == 500);
  CHECK(stopping_iterations(1e-3, 7, 0.999, 0, 10000) == 10000);
}

TEST_CASE("draw_minimal_sample yields distinct indices deterministically") {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const MinimalSample s = draw_minimal_sample(rng, 9, 7);
    for (int i = 0; i < s.size; ++i) {
      CHECK(s.indices[i] >= 0);
      CHECK(s.indices[i] < 9);
      for (int j = i + 1; j < s.size; ++j) CHECK(s.indices[i] != s.indices[j]);
    }
  }
  Rng a(7), b(7);
  const MinimalSample sa = draw_minimal_sample(a, 1000, 5);
  const MinimalSample sb = draw_minimal_sample(b, 1000, 5);
  CHECK(sa.indices == sb.indices);
}

TEST_CASE("estimate recovers the pose on noiseless scenes for every method") {
  // With outliers present the truncated score floor is the saturation term;
  // a tight threshold keeps the MSAC optimum at the ground truth.
  const testutil::Scene scene = testutil::make_scene(600, 600, 0.0, 0.2);
  for (const char* code : {"DDD", "CAD", "CCD", "CAA", "CCA", "CCC"}) {
    RansacConfig config = small_config(code);
    config.tau_px = 0.1;  // noiseless data: a tight threshold keeps random
                          // outliers out of the inlier band entirely
    const RansacResult result = estimate(scene.matches, intrinsics_of(scene), config);
    REQUIRE(result.converged);
    REQUIRE(result.pose_valid);
    const PoseError err = pose_error(result.pose, scene.pose);
    CAPTURE(code);
    CHECK(err.max_deg < 1e-4);
  }
  // and with no outliers at all, the score is exactly zero
  const testutil::Scene clean = testutil::make_scene(618, 400);
  const RansacResult result = estimate(clean.matches, intrinsics_of(clean), small_config("CCA"));
  CHECK(result.score < 1e-12);
  CHECK(pose_error(result.pose, clean.pose).max_deg < 1e-4);
}

TEST_CASE("estimate is deterministic for a fixed seed") {
  const testutil::Scene scene = testutil::make_scene(601, 500, 1.0, 0.3);
  const RansacConfig config = small_config("CCA", 99);
  const RansacResult a = estimate(scene.matches, intrinsics_of(scene), config);
  const RansacResult b = estimate(scene.matches, intrinsics_of(scene), config);
  CHECK((a.model.m - b.model.m).norm() == 0.0);
  CHECK(a.score == b.score);
  CHECK(a.iterations == b.iterations);
  CHECK(a.inliers == b.inliers);
  CHECK(a.inlier_count == b.inlier_count);
  CHECK((a.pose.R - b.pose.R).norm() == 0.0);
}

TEST_CASE("estimate input validation") {
  const testutil::Scene scene = testutil::make_scene(602, 4);
  CHECK_THROWS_AS(estimate(scene.matches, intrinsics_of(scene), small_config("DDD")),
                  std::invalid_argument);
  RansacConfig bad = small_config("DDD");
  bad.tau_px = -1.0;
  const testutil::Scene ok = testutil::make_scene(603, 50);
  CHECK_THROWS_AS(estimate(ok.matches, intrinsics_of(ok), bad), std::invalid_argument);
  // exhaustive sampling needs calibration
  CHECK_THROWS_AS(estimate(ok.matches, std::nullopt, small_config("AAA")),
                  std::invalid_argument);
}

TEST_CASE("estimate falls back to dense when there are fewer matches than clusters") {
  const testutil::Scene scene = testutil::make_scene(604, 60);
  RansacConfig config = small_config("CCA");
  config.k = 128;  // more clusters than matches
  const RansacResult result = estimate(scene.matches, intrinsics_of(scene), config);
  CHECK(result.fallback_dense);
  CHECK(result.converged);
  CHECK(result.granularity == InlierGranularity::kMatch);
  CHECK(pose_error(result.pose, scene.pose).max_deg < 1e-4);
}

TEST_CASE("estimate fundamental matrix from pixel matches") {
  const testutil::Scene scene = testutil::make_scene(605, 500, 0.0, 0.2);
  const RansacResult result = estimate(scene.matches, std::nullopt, small_config("CCA"));
  REQUIRE(result.converged);
  CHECK(result.model.kind == ModelKind::kFundamental);
  CHECK_FALSE(result.pose_valid);
  // the true fundamental matrix fits all inlier matches
  const Eigen::Matrix3d k = scene.k.matrix();
  const Eigen::Matrix3d f_true =
      k.inverse().transpose() * essential_from_pose(scene.pose).m * k.inverse();
  const double d = std::min((result.model.m - f_true / f_true.norm()).norm(),
                            (result.model.m + f_true / f_true.norm()).norm());
  CHECK(d < 1e-4);
}

TEST_CASE("exhaustive summary sampling estimates the pose") {
  const testutil::Scene scene = testutil::make_scene(606, 800, 0.0, 0.1);
  RansacConfig config = small_config("AAA");
  config.k = 48;
  const RansacResult result = estimate(scene.matches, intrinsics_of(scene), config);
  REQUIRE(result.converged);
  CHECK(result.iterations <= 48);
  CHECK(pose_error(result.pose, scene.pose).max_deg < 0.2);
}

TEST_CASE("noisy benchmark-style estimation stays accurate") {
  const testutil::Scene scene = testutil::make_scene(607, 2000, 1.0, 0.3);
  RansacConfig config = small_config("CCA", 3);
  config.k = 64;
  config.tau_px = 2.5;
  const RansacResult result = estimate(scene.matches, intrinsics_of(scene), config);
  REQUIRE(result.converged);
  CHECK(pose_error(result.pose, scene.pose).max_deg < 1.5);

  const RansacResult dense = estimate(scene.matches, intrinsics_of(scene),
                                      small_config("DDD", 3));
  CHECK(pose_error(dense.pose, scene.pose).max_deg < 0.8);
}

TEST_CASE("classify_inliers granularities and boundary rule") {
  const testutil::Scene scene = testutil::make_scene(608, 300, 1.0, 0.25);
  const std::vector<Match>& matches = scene.matches;
  const Clustering clustering = cluster_matches(matches, ClusterSpace::kMatches4D, 16, 5, 2);
  const auto summaries = summarize_clusters(matches, clustering);
  std::vector<Match> reps;
  for (int idx : clustering.representatives) reps.push_back(matches[idx]);
  const EstimationData data{ModelKind::kEssential, matches, reps, summaries};
  const EpipolarModel gt = essential_from_pose(scene.pose);
  const double tau = 2.5e-3;

  const auto dense_flags = classify_inliers(gt, data, Scoring::kDense, tau);
  CHECK(dense_flags.size() == matches.size());
  for (size_t i = 0; i < matches.size(); ++i) {
    CHECK(static_cast<bool>(dense_flags[i]) == (sampson_error(gt, matches[i]) < tau * tau));
  }

  const auto center_flags = classify_inliers(gt, data, Scoring::kCenter, tau);
  CHECK(center_flags.size() == reps.size());

  const auto cluster_flags = classify_inliers(gt, data, Scoring::kApprox, tau);
  CHECK(cluster_flags.size() == summaries.size());
  const auto members = cluster_members(clustering);
  for (size_t j = 0; j < summaries.size(); ++j) {
    const double approx = approx_cluster_residual(gt, summaries[j]);
    CHECK(static_cast<bool>(cluster_flags[j]) ==
          (approx < summaries[j].size * tau * tau));
  }

  // boundary: residual exactly at tau^2 is an outlier
  Match boundary;
  boundary.n1 = {0.0, 1.0};
  boundary.n2 = {0.0, 0.0};
  Eigen::Matrix3d e;
  e << 0, 0, 0, 0, 0, -1, 0, 1, 0;  // sampson = 0.5
  const EpipolarModel model{e, ModelKind::kEssential};
  const std::vector<Match> one{boundary};
  const EstimationData d2{ModelKind::kEssential, one, {}, {}};
  const double tau_exact = std::sqrt(0.5);
  if (tau_exact * tau_exact == 0.5) {
    CHECK(classify_inliers(model, d2, Scoring::kDense, tau_exact)[0] == 0);
  }
}

TEST_CASE("refine is stationary at the ground truth on noiseless data") {
  const testutil::Scene scene = testutil::make_scene(609, 400);
  const EstimationData data{ModelKind::kEssential, scene.matches, {}, {}};
  const EpipolarModel gt = essential_from_pose(scene.pose);
  const EpipolarModel refined = refine(gt, data, Refinement::kDense, 2e-3, 25);
  CHECK((refined.m / refined.m.norm() - gt.m / gt.m.norm()).norm() < 1e-12);
}

TEST_CASE("refine pulls a perturbed pose back to the optimum") {
  const testutil::Scene scene = testutil::make_scene(610, 500);
  RelativePose perturbed = scene.pose;
  perturbed.R = testutil::rotation_about({1, 0.2, -0.4}, 1.0 * M_PI / 180.0) * perturbed.R;
  const EpipolarModel start = essential_from_pose(perturbed);
  CHECK(pose_error(perturbed, scene.pose).max_deg > 0.9);

  // tau must cover the perturbed model's residuals; truncated-loss
  // refinement cannot move when every match is masked out.
  const EstimationData data{ModelKind::kEssential, scene.matches, {}, {}};
  const EpipolarModel refined = refine(start, data, Refinement::kDense, 0.03, 100);
  const auto candidates = decompose_essential(refined);
  const CheiralityResult pick =
      select_pose_cheirality(std::span<const RelativePose>(candidates), scene.matches);
  CHECK(pose_error(pick.pose, scene.pose).max_deg < 1e-3);
}

TEST_CASE("approx refinement on singleton clusters matches dense refinement") {
  const testutil::Scene scene = testutil::make_scene(611, 120, 0.8, 0.1);
  std::vector<ClusterSummary> singletons;
  for (const Match& m : scene.matches) {
    singletons.push_back(summarize_cluster(std::span<const Match>(&m, 1), m));
  }
  const EstimationData dense_data{ModelKind::kEssential, scene.matches, {}, {}};
  const EstimationData approx_data{ModelKind::kEssential, scene.matches, scene.matches,
                                   singletons};
  RelativePose perturbed = scene.pose;
  perturbed.R = testutil::rotation_about({0, 1, 0}, 0.3 * M_PI / 180.0) * perturbed.R;
  const EpipolarModel start = essential_from_pose(perturbed);
  const double tau = 2.5e-3;
  const EpipolarModel a = refine(start, dense_data, Refinement::kDense, tau, 25);
  const EpipolarModel b = refine(start, approx_data, Refinement::kApprox, tau, 25);
  CHECK((a.m / a.m.norm() - b.m / b.m.norm()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("refine never increases the truncated cost") {
  const testutil::Scene scene = testutil::make_scene(612, 300, 2.0, 0.4);
  const EstimationData data{ModelKind::kEssential, scene.matches, {}, {}};
  RelativePose perturbed = scene.pose;
  perturbed.R = testutil::rotation_about({0.2, 0.5, 1}, 2.0 * M_PI / 180.0) * perturbed.R;
  const EpipolarModel start = essential_from_pose(perturbed);
  const double tau = 2.5e-3;
  const double before = cost_dense(start, scene.matches, tau).score;
  const EpipolarModel refined = refine(start, data, Refinement::kDense, tau, 50);
  CHECK(cost_dense(refined, scene.matches, tau).score <= before);
}

TEST_CASE("singleton clustering makes all scoring variants coincide") {
  const testutil::Scene scene = testutil::make_scene(613, 150, 1.0, 0.2);
  std::vector<ClusterSummary> singletons;
  for (const Match& m : scene.matches) {
    singletons.push_back(summarize_cluster(std::span<const Match>(&m, 1), m));
  }
  const double tau = 1.5e-3;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const RelativePose pose = testutil::random_pose(rng);
    const EpipolarModel model = essential_from_pose(pose);
    const CostResult dense = cost_dense(model, scene.matches, tau);
    const CostResult center = cost_center(model, singletons, tau);
    const CostResult approx = cost_approx(model, singletons, tau);
    CHECK(dense.score == doctest::Approx(center.score).epsilon(1e-12));
    CHECK(dense.score == doctest::Approx(approx.score).epsilon(1e-12));
    CHECK(dense.inliers == approx.inliers);
  }
}

TEST_CASE("best score is reflected by re-evaluating the scoring cost") {
  const testutil::Scene scene = testutil::make_scene(614, 400, 1.0, 0.3);
  RansacConfig config = small_config("CCC", 17);
  const RansacResult result = estimate(scene.matches, intrinsics_of(scene), config);
  REQUIRE(result.converged);
  const Clustering clustering =
      cluster_matches(scene.matches, config.cluster_space, config.k, config.cluster_iters,
                      mix_seed(config.seed, 0x636c7573), config.rep_space);
  // rebuild the internal representative scoring set
  std::vector<Match> work(scene.matches.begin(), scene.matches.end());
  for (Match& m : work) {
    m.n1 = {(m.p1.x() - scene.k.cx) / scene.k.fx, (m.p1.y() - scene.k.cy) / scene.k.fy};
    m.n2 = {(m.p2.x() - scene.k.cx) / scene.k.fx, (m.p2.y() - scene.k.cy) / scene.k.fy};
  }
  std::vector<Match> reps;
  for (int idx : clustering.representatives) reps.push_back(work[idx]);
  const double tau = config.tau_px / scene.k.mean_focal();
  const CostResult rescored = cost_dense(result.model, reps, tau);
  CHECK(result.score == doctest::Approx(rescored.score).epsilon(1e-12));
  CHECK(result.inlier_count == rescored.inliers);
}

TEST_CASE("expand_inlier_flags produces per-match flags for cluster methods") {
  const testutil::Scene scene = testutil::make_scene(615, 500, 1.0, 0.2);
  RansacConfig config = small_config("CCA", 4);
  config.expand_inlier_flags = true;
  const RansacResult result = estimate(scene.matches, intrinsics_of(scene), config);
  REQUIRE(result.converged);
  CHECK(result.granularity == InlierGranularity::kRepresentative);
  CHECK(result.dense_inliers.size() == scene.matches.size());
  int count = 0;
  for (uint8_t f : result.dense_inliers) count += f;
  CHECK(count > static_cast<int>(0.5 * scene.matches.size()));
}
