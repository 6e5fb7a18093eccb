#include "matchsum/ransac.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "matchsum/random.hpp"

namespace matchsum {

namespace {

using Clock = std::chrono::steady_clock;

int64_t elapsed_us(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start).count();
}

constexpr uint64_t kClusterStream = 0x636c7573;
constexpr uint64_t kIterStream = 0x69746572;

char sampling_letter(Sampling s) {
  switch (s) {
    case Sampling::kDense: return 'D';
    case Sampling::kCenter: return 'C';
    case Sampling::kApproxExhaustive: return 'A';
  }
  return '?';
}

char data_letter(int v) { return v == 0 ? 'D' : (v == 1 ? 'C' : 'A'); }

}  // namespace

std::string MethodSpec::code() const {
  return {sampling_letter(sampling), data_letter(static_cast<int>(scoring)),
          data_letter(static_cast<int>(refinement))};
}

std::optional<MethodSpec> MethodSpec::parse(std::string_view code) {
  if (code.size() != 3) return std::nullopt;
  MethodSpec spec;
  switch (code[0]) {
    case 'D': spec.sampling = Sampling::kDense; break;
    case 'C': spec.sampling = Sampling::kCenter; break;
    case 'A': spec.sampling = Sampling::kApproxExhaustive; break;
    default: return std::nullopt;
  }
  auto parse_data = [](char c, int* out) {
    switch (c) {
      case 'D': *out = 0; return true;
      case 'C': *out = 1; return true;
      case 'A': *out = 2; return true;
      default: return false;
    }
  };
  int scoring = 0, refinement = 0;
  if (!parse_data(code[1], &scoring) || !parse_data(code[2], &refinement)) return std::nullopt;
  spec.scoring = static_cast<Scoring>(scoring);
  spec.refinement = static_cast<Refinement>(refinement);
  if (!spec.valid()) return std::nullopt;
  return spec;
}

int stopping_iterations(double inlier_ratio, int sample_size, double confidence,
                        int min_iterations, int max_iterations) {
  if (!(inlier_ratio > 0.0)) return max_iterations;
  if (inlier_ratio >= 1.0) return min_iterations;
  const double p_sample = std::pow(inlier_ratio, sample_size);
  if (p_sample <= 0.0) return max_iterations;
  const double denom = std::log1p(-p_sample);
  if (!(denom < 0.0)) return min_iterations;
  const double needed = std::ceil(std::log(1.0 - confidence) / denom);
  if (!(needed < static_cast<double>(max_iterations))) return max_iterations;
  return std::max(min_iterations, static_cast<int>(needed));
}

MinimalSample draw_minimal_sample(Rng& rng, int n, int size) {
  MinimalSample sample;
  sample.size = size;
  int count = 0;
  while (count < size) {
    const int idx = static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
    bool duplicate = false;
    for (int j = 0; j < count; ++j) {
      if (sample.indices[j] == idx) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) sample.indices[count++] = idx;
  }
  return sample;
}

namespace {

// Hypothesis validation: oriented epipolar constraint over the minimal
// sample. All correspondences of a physically realizable configuration give
// the same sign of <e' x xb, E x>; mixed signs mean points behind a camera.
bool oriented_constraint_ok(const Eigen::Matrix3d& e, std::span<const Match> sample) {
  Eigen::Vector3d epipole = e.col(0).cross(e.col(1));
  const Eigen::Vector3d alt = e.col(0).cross(e.col(2));
  const Eigen::Vector3d alt2 = e.col(1).cross(e.col(2));
  if (alt.squaredNorm() > epipole.squaredNorm()) epipole = alt;
  if (alt2.squaredNorm() > epipole.squaredNorm()) epipole = alt2;

  int sign = 0;
  for (const Match& m : sample) {
    const Eigen::Vector3d ex = e * m.n1.homogeneous();
    const double s = epipole.cross(m.n2.homogeneous()).dot(ex);
    if (std::abs(s) < 1e-14) continue;
    const int si = s > 0.0 ? 1 : -1;
    if (sign == 0) {
      sign = si;
    } else if (si != sign) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt refinement of the truncated cost.
// ---------------------------------------------------------------------------

struct TangentBasis {
  int dof = 0;
  std::array<Eigen::Matrix3d, 9> d{};
};

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle < 1e-12) return Eigen::Matrix3d::Identity() + skew(w);
  const Eigen::Vector3d axis = w / angle;
  const Eigen::Matrix3d k = skew(axis);
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

// Essential models move on the pose manifold: 3 rotation tangent directions
// plus 2 on the unit translation sphere.
struct EssentialState {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::UnitX();
  Eigen::Vector3d u = Eigen::Vector3d::UnitY();
  Eigen::Vector3d v = Eigen::Vector3d::UnitZ();

  EpipolarModel model() const { return {skew(t) * r, ModelKind::kEssential}; }

  void prepare(TangentBasis& basis) {
    basis.dof = 5;
    const Eigen::Matrix3d tx = skew(t);
    basis.d[0] = tx * skew(Eigen::Vector3d::UnitX()) * r;
    basis.d[1] = tx * skew(Eigen::Vector3d::UnitY()) * r;
    basis.d[2] = tx * skew(Eigen::Vector3d::UnitZ()) * r;
    const Eigen::Vector3d h =
        std::abs(t.x()) < 0.6 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    u = t.cross(h).normalized();
    v = t.cross(u);
    basis.d[3] = skew(u) * r;
    basis.d[4] = skew(v) * r;
  }

  EssentialState retracted(const Eigen::Matrix<double, 9, 1>& delta) const {
    EssentialState next = *this;
    next.r = exp_so3(delta.head<3>()) * r;
    next.t = (t + delta(3) * u + delta(4) * v).normalized();
    return next;
  }
};

// Fundamental models perturb all nine entries and project back to rank 2.
struct FundamentalState {
  Eigen::Matrix3d f = Eigen::Matrix3d::Zero();

  EpipolarModel model() const { return {f, ModelKind::kFundamental}; }

  void prepare(TangentBasis& basis) {
    basis.dof = 9;
    for (int j = 0; j < 9; ++j) {
      basis.d[j].setZero();
      basis.d[j](j % 3, j / 3) = 1.0;  // column-major unit directions
    }
  }

  FundamentalState retracted(const Eigen::Matrix<double, 9, 1>& delta) const {
    Eigen::Matrix3d next = f;
    Eigen::Map<Vector9d>(next.data()) += delta;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(next, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d s = svd.singularValues();
    s(2) = 0.0;
    next = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    const double norm = next.norm();
    FundamentalState out;
    out.f = norm > 0.0 ? Eigen::Matrix3d(next / norm) : f;
    return out;
  }
};

// Gauss-Newton normal equations of the masked residuals r_i = C_i / sqrt(D_i).
void accumulate_matches(const EpipolarModel& model, const TangentBasis& basis,
                        std::span<const Match> matches, std::span<const uint8_t> mask,
                        Eigen::Matrix<double, 9, 9>& jtj, Eigen::Matrix<double, 9, 1>& jtr) {
  const Eigen::Matrix3d& e = model.m;
  const bool pixel = model.kind == ModelKind::kFundamental;
  const int dof = basis.dof;
  for (size_t i = 0; i < matches.size(); ++i) {
    if (!mask[i]) continue;
    const Match& m = matches[i];
    const Eigen::Vector3d xh = (pixel ? m.p1 : m.n1).homogeneous();
    const Eigen::Vector3d xbh = (pixel ? m.p2 : m.n2).homogeneous();
    const Eigen::Vector3d ex = e * xh;
    const Eigen::Vector3d etx = e.transpose() * xbh;
    const double c = xbh.dot(ex);
    const double d = ex(0) * ex(0) + ex(1) * ex(1) + etx(0) * etx(0) + etx(1) * etx(1);
    if (d <= 0.0) continue;
    const double w = 1.0 / std::sqrt(d);
    const double w3 = w / d;
    const double res = c * w;
    Eigen::Matrix<double, 9, 1> g;
    for (int j = 0; j < dof; ++j) {
      const Eigen::Matrix3d& de = basis.d[j];
      const Eigen::Vector3d dex = de * xh;
      const Eigen::Vector3d detx = de.transpose() * xbh;
      const double dc = xbh.dot(dex);
      const double dd =
          2.0 * (ex(0) * dex(0) + ex(1) * dex(1) + etx(0) * detx(0) + etx(1) * detx(1));
      g(j) = dc * w - 0.5 * c * dd * w3;
    }
    jtj.topLeftCorner(dof, dof)
        .template selfadjointView<Eigen::Lower>()
        .rankUpdate(g.head(dof), 1.0);
    jtr.head(dof).noalias() += g.head(dof) * res;
  }
}

// Residual block of one cluster: r = M e / sqrt(alpha), nine rows per cluster.
void accumulate_summaries(const EpipolarModel& model, const TangentBasis& basis,
                          std::span<const ClusterSummary> summaries,
                          std::span<const uint8_t> mask, Eigen::Matrix<double, 9, 9>& jtj,
                          Eigen::Matrix<double, 9, 1>& jtr) {
  const Eigen::Matrix3d& e = model.m;
  const Vector9d evec = Eigen::Map<const Vector9d>(e.data());
  const int dof = basis.dof;
  Eigen::Matrix<double, 9, 9> devec;  // column j = vec(dE_j)
  for (int j = 0; j < dof; ++j) devec.col(j) = Eigen::Map<const Vector9d>(basis.d[j].data());

  for (size_t k = 0; k < summaries.size(); ++k) {
    if (!mask[k]) continue;
    const ClusterSummary& s = summaries[k];
    const double alpha = sampson_denominator_xy(e, s.c, s.c_bar);
    if (alpha <= 0.0) continue;
    const double w = 1.0 / std::sqrt(alpha);
    const double w3 = w / alpha;

    // mu = M e and mudir = M [vec(dE_1) ... vec(dE_dof)] on the packed factor.
    Eigen::Matrix<double, 9, 1> mu;
    Eigen::Matrix<double, 9, 9> mudir;
    const double* p = s.m_packed.data();
    for (int i = 0; i < 9; ++i) {
      double acc = 0.0;
      Eigen::Matrix<double, 1, 9> accdir = Eigen::Matrix<double, 1, 9>::Zero();
      for (int j2 = i; j2 < 9; ++j2) {
        const double mij = *p++;
        acc += mij * evec(j2);
        accdir.head(dof) += mij * devec.row(j2).head(dof);
      }
      mu(i) = acc;
      mudir.row(i) = accdir;
    }

    Eigen::Matrix<double, 9, 1> dalpha = Eigen::Matrix<double, 9, 1>::Zero();
    {
      const Eigen::Vector3d ch = s.c.homogeneous();
      const Eigen::Vector3d cbh = s.c_bar.homogeneous();
      const Eigen::Vector3d ec = e * ch;
      const Eigen::Vector3d etc = e.transpose() * cbh;
      for (int j = 0; j < dof; ++j) {
        const Eigen::Vector3d dec = basis.d[j] * ch;
        const Eigen::Vector3d detc = basis.d[j].transpose() * cbh;
        dalpha(j) =
            2.0 * (ec(0) * dec(0) + ec(1) * dec(1) + etc(0) * detc(0) + etc(1) * detc(1));
      }
    }

    // G = mudir w - mu (dalpha^T) (w^3 / 2); JtJ += G^T G, Jtr += G^T (mu w).
    Eigen::Matrix<double, 9, 9> g;
    g.leftCols(dof) = mudir.leftCols(dof) * w - mu * (0.5 * w3 * dalpha.head(dof).transpose());
    jtj.topLeftCorner(dof, dof).noalias() += g.leftCols(dof).transpose() * g.leftCols(dof);
    jtr.head(dof).noalias() += g.leftCols(dof).transpose() * (mu * w);
  }
}

struct RefineProblem {
  const EstimationData& data;
  Refinement method;
  double tau;

  double truncated_cost(const EpipolarModel& m) const {
    switch (method) {
      case Refinement::kDense: return cost_dense(m, data.matches, tau).score;
      case Refinement::kCenter: return cost_dense(m, data.representatives, tau).score;
      case Refinement::kApprox: return cost_approx(m, data.summaries, tau).score;
    }
    return 0.0;
  }

  std::vector<uint8_t> classify(const EpipolarModel& m) const {
    return classify_inliers(m, data, static_cast<Scoring>(method), tau);
  }

  void accumulate(const EpipolarModel& m, const TangentBasis& basis,
                  std::span<const uint8_t> mask, Eigen::Matrix<double, 9, 9>& jtj,
                  Eigen::Matrix<double, 9, 1>& jtr) const {
    jtj.setZero();
    jtr.setZero();
    switch (method) {
      case Refinement::kDense:
        accumulate_matches(m, basis, data.matches, mask, jtj, jtr);
        break;
      case Refinement::kCenter:
        accumulate_matches(m, basis, data.representatives, mask, jtj, jtr);
        break;
      case Refinement::kApprox:
        accumulate_summaries(m, basis, data.summaries, mask, jtj, jtr);
        break;
    }
    jtj.topLeftCorner(basis.dof, basis.dof) =
        jtj.topLeftCorner(basis.dof, basis.dof).template selfadjointView<Eigen::Lower>();
  }
};

template <typename State>
EpipolarModel lm_refine(State state, const RefineProblem& problem, int max_steps) {
  const EpipolarModel initial = state.model();
  double cost = problem.truncated_cost(initial);
  if (!std::isfinite(cost) || cost == 0.0 || max_steps <= 0) return initial;
  std::vector<uint8_t> mask = problem.classify(initial);

  TangentBasis basis;
  Eigen::Matrix<double, 9, 9> jtj;
  Eigen::Matrix<double, 9, 1> jtr;
  double lambda = 1e-4;
  int steps = 0;
  bool any_improvement = false;

  while (steps < max_steps) {
    state.prepare(basis);
    problem.accumulate(state.model(), basis, mask, jtj, jtr);
    const int dof = basis.dof;
    if (jtr.head(dof).template lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + cost)) break;

    bool accepted = false;
    while (steps < max_steps) {
      Eigen::Matrix<double, 9, 9> damped = jtj;
      for (int j = 0; j < dof; ++j) damped(j, j) += lambda * std::max(jtj(j, j), 1e-12);
      Eigen::Matrix<double, 9, 1> delta = Eigen::Matrix<double, 9, 1>::Zero();
      delta.head(dof) = damped.topLeftCorner(dof, dof).ldlt().solve(-jtr.head(dof));
      ++steps;
      if (!delta.head(dof).allFinite()) {
        lambda *= 10.0;
        if (lambda > 1e10) return any_improvement ? state.model() : initial;
        continue;
      }
      State candidate = state.retracted(delta);
      const double candidate_cost = problem.truncated_cost(candidate.model());
      if (candidate_cost < cost) {
        const double decrease = cost - candidate_cost;
        state = candidate;
        cost = candidate_cost;
        mask = problem.classify(state.model());
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        any_improvement = true;
        if (cost == 0.0 || decrease <= 1e-12 * std::max(cost, 1e-300) ||
            delta.head(dof).norm() <= 1e-12) {
          return state.model();
        }
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e10) break;
    }
    if (!accepted) break;
  }
  return any_improvement ? state.model() : initial;
}

}  // namespace

std::vector<uint8_t> classify_inliers(const EpipolarModel& model, const EstimationData& data,
                                      Scoring method, double tau) {
  const double tau2 = tau * tau;
  std::vector<uint8_t> flags;
  const bool pixel = model.kind == ModelKind::kFundamental;
  auto per_match = [&](std::span<const Match> matches) {
    flags.resize(matches.size());
    for (size_t i = 0; i < matches.size(); ++i) {
      const Match& m = matches[i];
      const double s = pixel ? sampson_error_xy(model.m, m.p1, m.p2)
                             : sampson_error_xy(model.m, m.n1, m.n2);
      flags[i] = s < tau2 ? 1 : 0;
    }
  };
  switch (method) {
    case Scoring::kDense:
      per_match(data.matches);
      break;
    case Scoring::kCenter:
      per_match(data.representatives);
      break;
    case Scoring::kApprox: {
      flags.resize(data.summaries.size());
      const Vector9d e = model_vector(model);
      for (size_t k = 0; k < data.summaries.size(); ++k) {
        const ClusterSummary& s = data.summaries[k];
        const double alpha = sampson_denominator_xy(model.m, s.c, s.c_bar);
        const double num = s.quadratic_form(e);
        flags[k] = (alpha > 0.0 && num < s.size * tau2 * alpha) ? 1 : 0;
      }
      break;
    }
  }
  return flags;
}

EpipolarModel refine(const EpipolarModel& model, const EstimationData& data,
                     Refinement method, double tau, int max_steps) {
  RefineProblem problem{data, method, tau};
  if (model.kind == ModelKind::kEssential) {
    std::array<RelativePose, 4> candidates;
    try {
      candidates = decompose_essential(model);
    } catch (const std::invalid_argument&) {
      return model;
    }
    const std::span<const Match> anchor =
        data.representatives.empty() ? data.matches : data.representatives;
    const CheiralityResult pick =
        select_pose_cheirality(std::span<const RelativePose>(candidates), anchor);
    EssentialState state;
    state.r = pick.pose.R;
    state.t = pick.pose.t;
    return lm_refine(state, problem, max_steps);
  }
  FundamentalState state;
  const double norm = model.m.norm();
  state.f = norm > 0.0 ? Eigen::Matrix3d(model.m / norm) : model.m;
  return lm_refine(state, problem, max_steps);
}

namespace {

struct ScoreContext {
  const EstimationData& data;
  const SummaryBlocks& blocks;
  Scoring scoring;
  double tau;

  CostResult operator()(const EpipolarModel& m) const {
    switch (scoring) {
      case Scoring::kDense: return cost_dense(m, data.matches, tau);
      case Scoring::kCenter: return cost_dense(m, data.representatives, tau);
      case Scoring::kApprox: return blocks.cost(m, tau);
    }
    return {};
  }
};

// Truncated-loss refinement cannot move a model whose residuals all sit
// beyond the threshold (the masked gradient vanishes). Standard iterative
// local optimization handles this with a shrinking threshold schedule.
EpipolarModel refine_scheduled(const EpipolarModel& model, const EstimationData& data,
                               Refinement method, double tau, int max_steps) {
  EpipolarModel current = model;
  const int coarse = std::max(1, max_steps / 4);
  current = refine(current, data, method, 4.0 * tau, coarse);
  current = refine(current, data, method, 2.0 * tau, coarse);
  current = refine(current, data, method, tau, std::max(1, max_steps - 2 * coarse));
  return current;
}

}  // namespace

RansacResult estimate(std::span<const Match> matches,
                      const std::optional<std::pair<CameraIntrinsics, CameraIntrinsics>>& intrinsics,
                      const RansacConfig& config) {
  if (!config.valid_parameters()) {
    throw std::invalid_argument("estimate: invalid configuration");
  }
  const ModelKind kind = intrinsics ? ModelKind::kEssential : ModelKind::kFundamental;
  const int sample_size = kind == ModelKind::kEssential ? 5 : 7;
  const int n = static_cast<int>(matches.size());
  if (n < sample_size) throw std::invalid_argument("estimate: too few matches");
  if (config.method.sampling == Sampling::kApproxExhaustive && kind == ModelKind::kFundamental) {
    throw std::invalid_argument("estimate: exhaustive summary sampling requires intrinsics");
  }

  RansacResult result;

  // Estimation coordinates: calibrated for essential, pixels for fundamental.
  std::vector<Match> work(matches.begin(), matches.end());
  double tau = config.tau_px;
  if (kind == ModelKind::kEssential) {
    const CameraIntrinsics& k1 = intrinsics->first;
    const CameraIntrinsics& k2 = intrinsics->second;
    if (!k1.valid() || !k2.valid()) throw std::invalid_argument("estimate: invalid intrinsics");
    for (Match& m : work) {
      const double y1 = (m.p1.y() - k1.cy) / k1.fy;
      m.n1 = {(m.p1.x() - k1.cx - k1.skew * y1) / k1.fx, y1};
      const double y2 = (m.p2.y() - k2.cy) / k2.fy;
      m.n2 = {(m.p2.x() - k2.cx - k2.skew * y2) / k2.fx, y2};
    }
    tau /= 0.5 * (k1.mean_focal() + k2.mean_focal());
  } else {
    for (Match& m : work) {
      m.n1 = m.p1;
      m.n2 = m.p2;
    }
  }

  MethodSpec method = config.method;
  if (method.uses_clusters() && n < config.k) {
    method = MethodSpec{Sampling::kDense, Scoring::kDense, Refinement::kDense};
    result.fallback_dense = true;
  }

  Clustering clustering;
  std::vector<Match> reps;
  {
    const auto start = Clock::now();
    if (method.uses_clusters()) {
      clustering = cluster_matches(work, config.cluster_space, config.k, config.cluster_iters,
                                   mix_seed(config.seed, kClusterStream), config.rep_space);
      reps.reserve(clustering.representatives.size());
      for (int idx : clustering.representatives) reps.push_back(work[idx]);
      if (static_cast<int>(reps.size()) < sample_size) {
        method = MethodSpec{Sampling::kDense, Scoring::kDense, Refinement::kDense};
        result.fallback_dense = true;
        reps.clear();
      }
    }
    result.timings.cluster_us = elapsed_us(start);
  }

  std::vector<ClusterSummary> summaries;
  {
    const auto start = Clock::now();
    if (method.uses_summaries()) summaries = summarize_clusters(work, clustering);
    result.timings.summarize_us = elapsed_us(start);
  }

  const EstimationData data{kind, work, reps, summaries};
  const SummaryBlocks blocks(summaries.empty() ? std::span<const ClusterSummary>()
                                               : std::span<const ClusterSummary>(summaries));
  const ScoreContext score{data, blocks, method.scoring, tau};
  const int denom = method.scoring == Scoring::kDense      ? n
                    : method.scoring == Scoring::kCenter ? static_cast<int>(reps.size())
                                                         : static_cast<int>(summaries.size());

  EpipolarModel best{};
  best.kind = kind;
  double best_score = std::numeric_limits<double>::infinity();
  int best_inliers = 0;
  bool found = false;

  const bool exhaustive = method.sampling == Sampling::kApproxExhaustive;
  const int hard_cap =
      exhaustive ? std::min<int>(static_cast<int>(summaries.size()), config.max_iterations)
                 : config.max_iterations;
  int dynamic_stop = config.max_iterations;
  int iterations = 0;

  {
    const auto start = Clock::now();
    std::array<Match, 7> sample_buf;
    for (int it = 0; it < hard_cap; ++it) {
      if (!exhaustive && it >= config.min_iterations && it >= dynamic_stop) break;
      iterations = it + 1;

      std::vector<EpipolarModel> models;
      std::span<const Match> sample_view;
      if (exhaustive) {
        models = essential_from_summary(summaries[it]);
        sample_buf[0] = reps[it];
        sample_view = std::span<const Match>(sample_buf.data(), 1);
      } else {
        Rng rng(mix_seed(config.seed, kIterStream, static_cast<uint64_t>(it) + 1));
        const std::span<const Match> pool =
            method.sampling == Sampling::kDense ? data.matches : data.representatives;
        const MinimalSample sample =
            draw_minimal_sample(rng, static_cast<int>(pool.size()), sample_size);
        for (int j = 0; j < sample.size; ++j) sample_buf[j] = pool[sample.indices[j]];
        sample_view = std::span<const Match>(sample_buf.data(), sample.size);
        models = kind == ModelKind::kEssential ? essential_5pt(sample_view)
                                               : fundamental_7pt(sample_view);
      }

      for (const EpipolarModel& m : models) {
        if (kind == ModelKind::kEssential && !oriented_constraint_ok(m.m, sample_view)) continue;
        const CostResult sc = score(m);
        if (sc.score < best_score) {
          best = m;
          best_score = sc.score;
          best_inliers = sc.inliers;
          found = true;
          // Local optimization pass on the new best. The loop refines with
          // the scoring data (the cost that drives hypothesis selection);
          // the configured refinement method governs the final pass.
          const EpipolarModel refined = refine_scheduled(
              m, data, static_cast<Refinement>(method.scoring), tau, config.lo_max_steps);
          const CostResult rsc = score(refined);
          if (rsc.score < best_score) {
            best = refined;
            best_score = rsc.score;
            best_inliers = rsc.inliers;
          }
          const double ratio = denom > 0 ? static_cast<double>(best_inliers) / denom : 0.0;
          dynamic_stop = stopping_iterations(ratio, sample_size, config.confidence,
                                             config.min_iterations, config.max_iterations);
        }
      }
    }
    result.timings.ransac_us = elapsed_us(start);
  }

  {
    const auto start = Clock::now();
    if (found) {
      // Adopt the refined model unless it degrades both the scoring cost and
      // the support (refinement on richer data may trade a little scoring
      // cost for accuracy; losing both means it collapsed onto a few
      // saturated terms).
      const EpipolarModel refined =
          refine_scheduled(best, data, method.refinement, tau, config.final_refine_steps);
      const CostResult sc = score(refined);
      if (sc.score <= best_score || sc.inliers >= best_inliers) {
        best = refined;
        best_score = sc.score;
        best_inliers = sc.inliers;
      }
    }
    result.timings.refine_us = elapsed_us(start);
  }

  result.model = best;
  result.score = found ? best_score : std::numeric_limits<double>::infinity();
  result.iterations = iterations;
  result.converged = found;
  if (found) {
    result.inliers = classify_inliers(best, data, method.scoring, tau);
    result.granularity = method.scoring == Scoring::kDense ? InlierGranularity::kMatch
                         : method.scoring == Scoring::kCenter
                             ? InlierGranularity::kRepresentative
                             : InlierGranularity::kCluster;
    result.inlier_count = best_inliers;
    result.inlier_ratio = denom > 0 ? static_cast<double>(best_inliers) / denom : 0.0;
    if (config.expand_inlier_flags && method.scoring != Scoring::kDense) {
      result.dense_inliers = classify_inliers(best, data, Scoring::kDense, tau);
    }
    if (kind == ModelKind::kEssential) {
      try {
        const auto candidates = decompose_essential(best);
        const std::span<const Match> anchor = reps.empty() ? data.matches : data.representatives;
        const CheiralityResult pick =
            select_pose_cheirality(std::span<const RelativePose>(candidates.data(), 4), anchor);
        result.pose = pick.pose;
        result.pose_valid = true;
        result.pose_low_confidence = pick.low_confidence;
      } catch (const std::invalid_argument&) {
        result.pose_valid = false;
      }
    }
  }
  return result;
}

}  // namespace matchsum
