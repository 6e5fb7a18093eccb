#include "matchsum/solvers.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "matchsum/polyroots.hpp"

namespace matchsum {

namespace {

// Polynomials in (x, y, z) up to degree 3, dense coefficient arrays.
// Degree-1 monomial order: x, y, z, 1.
// Degree-2 order: x2, xy, xz, y2, yz, z2, x, y, z, 1.
// Degree-3 order (matches the elimination layout below):
//   x3, y3, x2y, xy2, x2z, x2, y2z, y2, xyz, xy | xz2, xz, x, yz2, yz, y, z3, z2, z, 1
using Poly1 = std::array<double, 4>;
using Poly2 = std::array<double, 10>;
using Poly3 = std::array<double, 20>;

// Target degree-3 index for (degree-2 monomial) * (degree-1 monomial).
constexpr int kP2TimesP1[10][4] = {
    {0, 2, 4, 5},    // x2 * {x,y,z,1}
    {2, 3, 8, 9},    // xy
    {4, 8, 10, 11},  // xz
    {3, 1, 6, 7},    // y2
    {8, 6, 13, 14},  // yz
    {10, 13, 16, 17},// z2
    {5, 9, 11, 12},  // x
    {9, 7, 14, 15},  // y
    {11, 14, 17, 18},// z
    {12, 15, 18, 19} // 1
};

Poly2 mul11(const Poly1& a, const Poly1& b) {
  Poly2 r{};
  r[0] = a[0] * b[0];
  r[1] = a[0] * b[1] + a[1] * b[0];
  r[2] = a[0] * b[2] + a[2] * b[0];
  r[3] = a[1] * b[1];
  r[4] = a[1] * b[2] + a[2] * b[1];
  r[5] = a[2] * b[2];
  r[6] = a[0] * b[3] + a[3] * b[0];
  r[7] = a[1] * b[3] + a[3] * b[1];
  r[8] = a[2] * b[3] + a[3] * b[2];
  r[9] = a[3] * b[3];
  return r;
}

void add_mul21(Poly3& acc, const Poly2& a, const Poly1& b, double sign = 1.0) {
  for (int i = 0; i < 10; ++i) {
    if (a[i] == 0.0) continue;
    for (int j = 0; j < 4; ++j) acc[kP2TimesP1[i][j]] += sign * a[i] * b[j];
  }
}

Poly2 sub2(const Poly2& a, const Poly2& b) {
  Poly2 r;
  for (int i = 0; i < 10; ++i) r[i] = a[i] - b[i];
  return r;
}

std::vector<double> conv(std::span<const double> a, std::span<const double> b) {
  std::vector<double> r(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

void axpy(std::vector<double>& acc, std::span<const double> v, double s) {
  if (acc.size() < v.size()) acc.resize(v.size(), 0.0);
  for (size_t i = 0; i < v.size(); ++i) acc[i] += s * v[i];
}

double max_abs_constraint(const Eigen::Matrix3d& e, std::span<const Match> sample,
                          bool calibrated) {
  double worst = 0.0;
  for (const Match& m : sample) {
    const Eigen::Vector2d& x = calibrated ? m.n1 : m.p1;
    const Eigen::Vector2d& xb = calibrated ? m.n2 : m.p2;
    worst = std::max(worst, std::abs(epipolar_residual_xy(e, x, xb)));
  }
  return worst;
}

bool essential_constraints_ok(const Eigen::Matrix3d& e) {
  const Eigen::Matrix3d eet = e * e.transpose();
  const Eigen::Matrix3d residual = 2.0 * eet * e - eet.trace() * e;
  return std::abs(e.determinant()) <= 1e-8 && residual.norm() <= 1e-8;
}

}  // namespace

std::vector<EpipolarModel> essential_from_nullspace(const Eigen::Matrix<double, 4, 9>& basis) {
  // E(x, y, z) = x E1 + y E2 + z E3 + E4, column-major unvec of the basis rows.
  Poly1 o[3][3];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < 4; ++i) o[r][c][i] = basis(i, 3 * c + r);
    }
  }

  double sys[10][20] = {};
  auto set_row = [&](int row, const Poly3& p) {
    for (int i = 0; i < 20; ++i) sys[row][i] = p[i];
  };

  // det(E) = 0.
  {
    Poly3 det{};
    add_mul21(det, sub2(mul11(o[1][1], o[2][2]), mul11(o[1][2], o[2][1])), o[0][0]);
    add_mul21(det, sub2(mul11(o[1][2], o[2][0]), mul11(o[1][0], o[2][2])), o[0][1]);
    add_mul21(det, sub2(mul11(o[1][0], o[2][1]), mul11(o[1][1], o[2][0])), o[0][2]);
    set_row(0, det);
  }

  // 2 E E^T E - tr(E E^T) E = 0 (nine entries).
  Poly2 t[3][3];
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      Poly2 acc{};
      for (int k = 0; k < 3; ++k) {
        const Poly2 p = mul11(o[i][k], o[j][k]);
        for (int q = 0; q < 10; ++q) acc[q] += p[q];
      }
      t[i][j] = acc;
      t[j][i] = acc;
    }
  }
  Poly2 trace{};
  for (int q = 0; q < 10; ++q) trace[q] = t[0][0][q] + t[1][1][q] + t[2][2][q];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Poly3 row{};
      for (int k = 0; k < 3; ++k) {
        Poly2 l;
        for (int q = 0; q < 10; ++q) l[q] = 2.0 * t[i][k][q] - (i == k ? trace[q] : 0.0);
        add_mul21(row, l, o[k][j]);
      }
      set_row(1 + 3 * i + j, row);
    }
  }

  // Gauss-Jordan to [I | B] over the first 10 monomials.
  double scale = 0.0;
  for (const auto& row : sys)
    for (double v : row) scale = std::max(scale, std::abs(v));
  if (scale <= 0.0) return {};
  for (int col = 0; col < 10; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 10; ++r) {
      if (std::abs(sys[r][col]) > std::abs(sys[pivot][col])) pivot = r;
    }
    if (std::abs(sys[pivot][col]) < 1e-12 * scale) return {};
    if (pivot != col) {
      for (int i = col; i < 20; ++i) std::swap(sys[pivot][i], sys[col][i]);
    }
    const double inv = 1.0 / sys[col][col];
    for (int i = col; i < 20; ++i) sys[col][i] *= inv;
    for (int r = 0; r < 10; ++r) {
      const double f = sys[r][col];
      if (r == col || f == 0.0) continue;
      for (int i = col; i < 20; ++i) sys[r][i] -= f * sys[col][i];
    }
  }
  const auto b = [&](int r, int c) { return sys[r][10 + c]; };
  // B columns: xz2, xz, x, yz2, yz, y, z3, z2, z, 1.

  // Rows 4..9 lead with x2z, x2, y2z, y2, xyz, xy. Pairwise elimination
  // <upper> - z * <lower> leaves three equations linear in (x, y, 1) with
  // polynomial-in-z coefficients (degree 3, 3, 4).
  auto x_poly = [&](int hi, int lo) {
    return std::array<double, 4>{b(hi, 2), b(hi, 1) - b(lo, 2), b(hi, 0) - b(lo, 1), -b(lo, 0)};
  };
  auto y_poly = [&](int hi, int lo) {
    return std::array<double, 4>{b(hi, 5), b(hi, 4) - b(lo, 5), b(hi, 3) - b(lo, 4), -b(lo, 3)};
  };
  auto one_poly = [&](int hi, int lo) {
    return std::array<double, 5>{b(hi, 9), b(hi, 8) - b(lo, 9), b(hi, 7) - b(lo, 8),
                                 b(hi, 6) - b(lo, 7), -b(lo, 6)};
  };
  const std::array<double, 4> kx = x_poly(4, 5), ky = y_poly(4, 5);
  const std::array<double, 5> k1 = one_poly(4, 5);
  const std::array<double, 4> lx = x_poly(6, 7), ly = y_poly(6, 7);
  const std::array<double, 5> l1 = one_poly(6, 7);
  const std::array<double, 4> mx = x_poly(8, 9), my = y_poly(8, 9);
  const std::array<double, 5> m1 = one_poly(8, 9);

  // Degree-10 determinant of [[kx ky k1]; [lx ly l1]; [mx my m1]].
  std::vector<double> n;
  {
    std::vector<double> t1 = conv(ly, m1);
    axpy(t1, conv(l1, my), -1.0);
    n = conv(kx, t1);
    std::vector<double> t2 = conv(lx, m1);
    axpy(t2, conv(l1, mx), -1.0);
    axpy(n, conv(ky, t2), -1.0);
    std::vector<double> t3 = conv(lx, my);
    axpy(t3, conv(ly, mx), -1.0);
    axpy(n, conv(k1, t3), 1.0);
  }

  std::vector<EpipolarModel> models;
  for (double z : real_roots(n)) {
    auto ev = [&](std::span<const double> p) {
      double acc = 0.0;
      for (size_t i = p.size(); i-- > 0;) acc = acc * z + p[i];
      return acc;
    };
    Eigen::Vector3d r0(ev(kx), ev(ky), ev(k1));
    Eigen::Vector3d r1(ev(lx), ev(ly), ev(l1));
    Eigen::Vector3d r2(ev(mx), ev(my), ev(m1));
    Eigen::Vector3d v = r0.cross(r1);
    const Eigen::Vector3d v02 = r0.cross(r2);
    const Eigen::Vector3d v12 = r1.cross(r2);
    if (v02.squaredNorm() > v.squaredNorm()) v = v02;
    if (v12.squaredNorm() > v.squaredNorm()) v = v12;
    const double vn = v.norm();
    if (vn <= 0.0 || std::abs(v.z()) < 1e-12 * vn) continue;
    const double x = v.x() / v.z();
    const double y = v.y() / v.z();

    Vector9d e_vec = x * basis.row(0) + y * basis.row(1) + z * basis.row(2) + basis.row(3);
    Eigen::Matrix3d e = Eigen::Map<const Eigen::Matrix3d>(e_vec.data());
    e /= e.norm();
    if (essential_constraints_ok(e)) {
      models.push_back({e, ModelKind::kEssential});
    }
  }
  return models;
}

std::vector<EpipolarModel> essential_5pt(std::span<const Match> sample) {
  if (sample.size() != 5) throw std::invalid_argument("essential_5pt: needs 5 matches");
  Eigen::Matrix<double, 9, 5> at;
  for (int i = 0; i < 5; ++i) at.col(i) = constraint_row(sample[i]);
  const Eigen::HouseholderQR<Eigen::Matrix<double, 9, 5>> qr(at);
  const Matrix9d q = qr.householderQ();
  const Eigen::Matrix<double, 4, 9> basis = q.rightCols<4>().transpose();

  std::vector<EpipolarModel> models = essential_from_nullspace(basis);
  std::erase_if(models, [&](const EpipolarModel& m) {
    return max_abs_constraint(m.m, sample, true) > 1e-8;
  });
  return models;
}

std::vector<EpipolarModel> fundamental_7pt(std::span<const Match> sample) {
  if (sample.size() != 7) throw std::invalid_argument("fundamental_7pt: needs 7 matches");

  // Hartley normalization per image.
  auto conditioner = [&](bool second) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const Match& m : sample) mean += second ? m.p2 : m.p1;
    mean /= static_cast<double>(sample.size());
    double dist = 0.0;
    for (const Match& m : sample) dist += ((second ? m.p2 : m.p1) - mean).norm();
    dist /= static_cast<double>(sample.size());
    const double s = dist > 1e-12 ? std::sqrt(2.0) / dist : 1.0;
    return std::pair<double, Eigen::Vector2d>(s, mean);
  };
  const auto [s1, c1] = conditioner(false);
  const auto [s2, c2] = conditioner(true);

  Eigen::Matrix<double, 9, 7> at;
  for (int i = 0; i < 7; ++i) {
    const Eigen::Vector2d x1 = s1 * (sample[i].p1 - c1);
    const Eigen::Vector2d x2 = s2 * (sample[i].p2 - c2);
    at.col(i) = constraint_row_xy(x1, x2);
  }
  const Eigen::HouseholderQR<Eigen::Matrix<double, 9, 7>> qr(at);
  const Matrix9d q = qr.householderQ();
  const Eigen::Matrix3d f1 = Eigen::Map<const Eigen::Matrix3d>(Vector9d(q.col(7)).data());
  const Eigen::Matrix3d f2 = Eigen::Map<const Eigen::Matrix3d>(Vector9d(q.col(8)).data());

  // det(lambda F1 + F2) as a cubic in lambda.
  const double c3 = f1.determinant();
  const double c0 = f2.determinant();
  const double d1 = (f1 + f2).determinant();
  const double dm1 = (f2 - f1).determinant();
  const double c2c = 0.5 * (d1 + dm1) - c0;
  const double c1c = 0.5 * (d1 - dm1) - c3;
  const std::array<double, 4> cubic{c0, c1c, c2c, c3};

  std::vector<Eigen::Matrix3d> candidates;
  for (double lambda : real_roots(cubic)) candidates.push_back(lambda * f1 + f2);
  double cmax = 0.0;
  for (double c : cubic) cmax = std::max(cmax, std::abs(c));
  if (cmax > 0.0 && std::abs(c3) < 1e-13 * cmax) candidates.push_back(f1);  // root at infinity

  Eigen::Matrix3d t1, t2;
  t1 << s1, 0.0, -s1 * c1.x(), 0.0, s1, -s1 * c1.y(), 0.0, 0.0, 1.0;
  t2 << s2, 0.0, -s2 * c2.x(), 0.0, s2, -s2 * c2.y(), 0.0, 0.0, 1.0;

  std::vector<EpipolarModel> models;
  for (const Eigen::Matrix3d& fn : candidates) {
    Eigen::Matrix3d f = t2.transpose() * fn * t1;
    const double norm = f.norm();
    if (norm <= 0.0) continue;
    f /= norm;
    EpipolarModel model{f, ModelKind::kFundamental};
    if (std::abs(f.determinant()) > 1e-10) continue;
    if (max_abs_constraint(f, sample, false) > 1e-8) continue;
    models.push_back(model);
  }
  return models;
}

NullspaceBasis nullspace_from_summary(const ClusterSummary& s) {
  Eigen::JacobiSVD<Matrix9d> svd(s.M(), Eigen::ComputeFullV);
  NullspaceBasis basis;
  basis.b = svd.matrixV().rightCols<4>().transpose();
  return basis;
}

std::vector<EpipolarModel> essential_from_summary(const ClusterSummary& s) {
  return essential_from_nullspace(nullspace_from_summary(s).b);
}

}  // namespace matchsum
