#include "matchsum/polyroots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace matchsum {

namespace {

// Real-root isolation by recursion on derivatives: between consecutive
// critical points a polynomial is monotone, so every root is found by
// bracketed root finding there. Only exactly known polynomials (the
// derivatives) are ever evaluated, which keeps sign decisions reliable for
// badly scaled coefficients. The degree is a template parameter so the whole
// cascade inlines into straight-line code.

constexpr int kMaxDegree = 20;

template <int D>
inline double eval_poly(const double* c, double x) {
  // Even/odd split Horner: two independent chains halve the latency path.
  const double x2 = x * x;
  double hi = c[D];
  for (int i = D - 2; i >= 0; i -= 2) hi = hi * x2 + c[i];
  double lo = D >= 1 ? c[D - 1] : 0.0;
  for (int i = D - 3; i >= 0; i -= 2) lo = lo * x2 + c[i];
  return D % 2 == 0 ? hi + lo * x : lo + hi * x;
}

// Brent's zeroin on a sign-changing bracket.
template <int D>
double brent_root(const double* c, double a, double b, double fa, double fb, double tol_rel) {
  double cc = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < 80; ++iter) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = cc;
      cc = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) +
                        0.5 * tol_rel * (1.0 + std::abs(b));
    const double xm = 0.5 * (cc - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double pp, q;
      const double s = fb / fa;
      if (a == cc) {
        pp = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        pp = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (pp > 0.0) q = -q;
      pp = std::abs(pp);
      if (2.0 * pp < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = pp / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = eval_poly<D>(c, b);
    if ((fb > 0.0) == (fc > 0.0)) {
      cc = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  return b;
}

inline int quadratic_roots(const double* c, double* out) {
  const double a = c[2], b = c[1], cc = c[0];
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return 0;
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
  int n = 0;
  out[n++] = q / a;
  if (q != 0.0 && cc / q != out[0]) out[n++] = cc / q;
  if (n == 2 && out[0] > out[1]) std::swap(out[0], out[1]);
  return n;
}

// Cardano with a Newton tightening pass.
inline int cubic_roots(const double* c, double* out) {
  const double a = c[3];
  const double shift = -c[2] / (3.0 * a);
  const double b3a = c[2] / (3.0 * a);
  const double pp = c[1] / a - 3.0 * b3a * b3a;
  const double qq = 2.0 * b3a * b3a * b3a - b3a * c[1] / a + c[0] / a;
  const double disc = 0.25 * qq * qq + pp * pp * pp / 27.0;
  int n = 0;
  if (disc > 0.0) {
    const double sq = std::sqrt(disc);
    out[n++] = std::cbrt(-0.5 * qq + sq) + std::cbrt(-0.5 * qq - sq) + shift;
  } else if (pp == 0.0) {
    out[n++] = shift;
  } else {
    const double r = std::sqrt(-pp / 3.0);
    const double theta = std::acos(std::clamp(-0.5 * qq / (r * r * r), -1.0, 1.0)) / 3.0;
    constexpr double k2pi3 = 2.0943951023931954923;
    out[n++] = 2.0 * r * std::cos(theta - 2.0 * k2pi3) + shift;
    out[n++] = 2.0 * r * std::cos(theta - k2pi3) + shift;
    out[n++] = 2.0 * r * std::cos(theta) + shift;
    if (out[0] > out[1]) std::swap(out[0], out[1]);
    if (out[1] > out[2]) std::swap(out[1], out[2]);
    if (out[0] > out[1]) std::swap(out[0], out[1]);
  }
  for (int i = 0; i < n; ++i) {
    const double x = out[i];
    const double fx = ((a * x + c[2]) * x + c[1]) * x + c[0];
    const double dfx = (3.0 * a * x + 2.0 * c[2]) * x + c[1];
    if (dfx != 0.0) {
      const double next = x - fx / dfx;
      if (std::abs(next - x) < 0.1 * (1.0 + std::abs(x))) out[i] = next;
    }
  }
  return n;
}

template <int D>
int roots_fixed(const double* c, double* out, double tol_rel) {
  if constexpr (D == 1) {
    out[0] = -c[0] / c[1];
    return 1;
  } else if constexpr (D == 2) {
    return quadratic_roots(c, out);
  } else if constexpr (D == 3) {
    return cubic_roots(c, out);
  } else {
    double d[D];
    for (int i = 1; i <= D; ++i) d[i - 1] = c[i] * static_cast<double>(i);
    double crit[D > 1 ? D - 1 : 1];
    const int n_crit = roots_fixed<D - 1>(d, crit, std::max(tol_rel, 1e-4));

    double fcrit[D > 1 ? D - 1 : 1];
    for (int i = 0; i < n_crit; ++i) fcrit[i] = eval_poly<D>(c, crit[i]);

    int n = 0;
    auto push = [&](double r) {
      if (n == 0 || r > out[n - 1] + 1e-13 * (1.0 + std::abs(r))) out[n++] = r;
    };

    // Signs of p toward -inf / +inf; p is monotone beyond the outermost
    // critical points, so a sign mismatch there brackets exactly one root
    // reachable by geometric expansion (no a-priori root bound needed).
    const int lead_sign = c[D] > 0.0 ? 1 : -1;
    const int sign_pos_inf = lead_sign;
    const int sign_neg_inf = D % 2 == 0 ? lead_sign : -lead_sign;
    const double anchor_left = n_crit > 0 ? crit[0] : 0.0;
    const double anchor_right = n_crit > 0 ? crit[n_crit - 1] : 0.0;
    const double f_left = n_crit > 0 ? fcrit[0] : eval_poly<D>(c, 0.0);
    const double f_right = n_crit > 0 ? fcrit[n_crit - 1] : f_left;

    if (f_left != 0.0 && (f_left > 0.0 ? 1 : -1) != sign_neg_inf) {
      double step = 1.0 + std::abs(anchor_left);
      double x = anchor_left - step;
      double fx = eval_poly<D>(c, x);
      for (int guard = 0; guard < 200 && (fx > 0.0) == (f_left > 0.0) && fx != 0.0; ++guard) {
        step *= 4.0;
        x = anchor_left - step;
        fx = eval_poly<D>(c, x);
      }
      push(fx == 0.0 ? x : brent_root<D>(c, x, anchor_left, fx, f_left, tol_rel));
    }

    if (n_crit == 0 && f_left == 0.0) push(0.0);

    for (int i = 0; i < n_crit; ++i) {
      if (fcrit[i] == 0.0) {
        push(crit[i]);
        continue;
      }
      if (i > 0 && fcrit[i - 1] != 0.0 && (fcrit[i - 1] > 0.0) != (fcrit[i] > 0.0)) {
        push(brent_root<D>(c, crit[i - 1], crit[i], fcrit[i - 1], fcrit[i], tol_rel));
      } else {
        // Extremum touching zero: even-multiplicity root. Compared against
        // the magnitude of the evaluation at that point.
        double mag = std::abs(c[D]);
        const double ax = std::abs(crit[i]);
        for (int j = D - 1; j >= 0; --j) mag = mag * ax + std::abs(c[j]);
        if (std::abs(fcrit[i]) < 1e-10 * mag) push(crit[i]);
      }
    }

    if (f_right != 0.0 && (f_right > 0.0 ? 1 : -1) != sign_pos_inf) {
      double step = 1.0 + std::abs(anchor_right);
      double x = anchor_right + step;
      double fx = eval_poly<D>(c, x);
      for (int guard = 0; guard < 200 && (fx > 0.0) == (f_right > 0.0) && fx != 0.0; ++guard) {
        step *= 4.0;
        x = anchor_right + step;
        fx = eval_poly<D>(c, x);
      }
      push(fx == 0.0 ? x : brent_root<D>(c, anchor_right, x, f_right, fx, tol_rel));
    }
    return n;
  }
}

template <int D>
int roots_dispatch(const double* c, int degree, double* out, double tol_rel) {
  if (degree == D) return roots_fixed<D>(c, out, tol_rel);
  if constexpr (D > 1) {
    return roots_dispatch<D - 1>(c, degree, out, tol_rel);
  } else {
    return 0;
  }
}

}  // namespace

std::vector<double> real_roots(std::span<const double> coeffs) {
  double maxc = 0.0;
  for (double c : coeffs) maxc = std::max(maxc, std::abs(c));
  if (maxc == 0.0 || coeffs.empty()) return {};
  int degree = static_cast<int>(coeffs.size()) - 1;
  while (degree > 0 && std::abs(coeffs[degree]) < 1e-13 * maxc) --degree;
  if (degree == 0 || degree > kMaxDegree) return {};

  double c[kMaxDegree + 1];
  const double inv = 1.0 / maxc;
  for (int i = 0; i <= degree; ++i) c[i] = coeffs[i] * inv;

  double out[kMaxDegree];
  const int n = roots_dispatch<kMaxDegree>(c, degree, out, 1e-7);
  // Newton polish back to machine precision.
  for (int i = 0; i < n; ++i) {
    for (int step = 0; step < 2; ++step) {
      const double x = out[i];
      double fx = 0.0, dfx = 0.0;
      for (int j = degree; j >= 1; --j) {
        fx = fx * x + c[j];
        dfx = dfx * x + c[j] * static_cast<double>(j);
      }
      fx = fx * x + c[0];
      if (fx == 0.0 || dfx == 0.0) break;
      const double next = x - fx / dfx;
      if (!(std::abs(next - x) < 1e-5 * (1.0 + std::abs(x)))) break;
      out[i] = next;
    }
  }
  return std::vector<double>(out, out + n);
}

}  // namespace matchsum
