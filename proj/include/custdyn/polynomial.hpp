#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "errors.hpp"

namespace custdyn {

namespace poly {

inline double eval_cubic(double a, double b, double c, double d, double x) {
  return ((a * x + b) * x + c) * x + d;
}

inline double eval_cubic_deriv(double a, double b, double c, double x) {
  return (3.0 * a * x + 2.0 * b) * x + c;
}

// Magnitude yardstick for residual checks: the largest term of the cubic over
// an interval of half-width x_scale.
inline double cubic_scale(double a, double b, double c, double d, double x_scale) {
  const double xs = std::max(x_scale, 1.0);
  return std::max({std::abs(a) * xs * xs * xs, std::abs(b) * xs * xs, std::abs(c) * xs,
                   std::abs(d)});
}

inline void polish_real_root(double a, double b, double c, double d, double& x,
                             double target_residual) {
  // Newton refinement, accepting only steps that shrink the residual: the
  // seeds come from closed forms, so a non-improving step means the iterate
  // already sits at evaluation noise (or at a repeated root, where f' ~ 0
  // turns the quotient into a wild jump) and must not wander off.
  for (int i = 0; i < 6; ++i) {
    const double fx = eval_cubic(a, b, c, d, x);
    if (i >= 2 && std::abs(fx) <= target_residual) break;
    const double dfx = eval_cubic_deriv(a, b, c, x);
    if (dfx == 0.0) break;
    const double step = fx / dfx;
    if (!std::isfinite(step)) break;
    const double next = x - step;
    if (std::abs(eval_cubic(a, b, c, d, next)) >= std::abs(fx)) break;
    x = next;
  }
}

}  // namespace poly

// All real roots of a x^3 + b x^2 + c x + d, ascending, near-multiple roots
// collapsed to one representative. x_scale sets the magnitude yardstick used
// for the degenerate-degree decision and for collapsing. Closed forms
// (trigonometric for three real roots, Cardano otherwise) plus Newton polish.
inline std::vector<double> real_cubic_roots(double a, double b, double c, double d,
                                            double x_scale = 1.0) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || !std::isfinite(d) ||
      !std::isfinite(x_scale))
    throw InvalidInputError("real_cubic_roots: non-finite coefficient");

  const double xs = std::max(std::abs(x_scale), 1.0);
  const double mag = poly::cubic_scale(a, b, c, d, xs);
  if (mag == 0.0) return {};  // identically zero polynomial: no isolated roots

  std::vector<double> roots;
  const double lead_floor = 1e-18 * mag;

  if (std::abs(a) * xs * xs * xs <= lead_floor) {
    // effectively quadratic (or lower)
    if (std::abs(b) * xs * xs <= lead_floor) {
      if (std::abs(c) * xs <= lead_floor) return {};  // nonzero constant: no roots
      roots.push_back(-d / c);
    } else {
      const double disc = c * c - 4.0 * b * d;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        // classic cancellation-free quadratic formula
        const double q = -0.5 * (c + std::copysign(sq, c));
        const double r1 = q / b;
        roots.push_back(r1);
        if (q != 0.0) roots.push_back(d / q);
        else roots.push_back(-c / b - r1);
      }
    }
  } else {
    // depressed form: x = y - b/(3a), y^3 + py + q
    const double B = b / a, C = c / a, D = d / a;
    const double shift = B / 3.0;
    const double p = C - B * B / 3.0;
    const double q = 2.0 * B * B * B / 27.0 - B * C / 3.0 + D;
    const double discq = 0.25 * q * q + p * p * p / 27.0;
    // The discriminant is a difference of two like-sized terms, so near zero
    // its sign is rounding noise; inside that band classify as repeated-real
    // (the acos argument clamp below keeps the branch well defined).
    const double disc_noise = 1e-14 * (0.25 * q * q + std::abs(p * p * p) / 27.0);
    if (discq <= disc_noise && p < 0.0) {
      // three real roots
      const double mroot = 2.0 * std::sqrt(-p / 3.0);
      const double arg = std::clamp(3.0 * q / (p * mroot), -1.0, 1.0);
      const double phi = std::acos(arg);
      for (int k = 0; k < 3; ++k)
        roots.push_back(mroot * std::cos((phi - 2.0 * M_PI * k) / 3.0) - shift);
    } else if (p == 0.0 && q == 0.0) {
      roots.push_back(-shift);  // triple root
    } else {
      // one real root; pick the large cube root first to dodge cancellation
      const double s = std::sqrt(std::max(discq, 0.0));
      const double w = (q <= 0.0) ? -0.5 * q + s : -0.5 * q - s;
      const double big = std::cbrt(w);
      const double other = (big == 0.0) ? 0.0 : -p / (3.0 * big);
      roots.push_back(big + other - shift);
    }
  }

  const double target = 1e-12 * mag;
  for (double& r : roots) poly::polish_real_root(a, b, c, d, r, target);
  std::sort(roots.begin(), roots.end());

  // collapse clusters left over from multiple roots: for a repeated root the
  // closed forms give each sheet separately, scattered by at most a few times
  // 1e-7 of the bracket scale (sqrt of the discriminant noise band), so
  // anything closer is one root seen twice, while genuinely distinct roots at
  // wider spacing must survive
  std::vector<double> out;
  const double merge_tol = 5e-7 * xs;
  std::size_t i = 0;
  while (i < roots.size()) {
    std::size_t j = i + 1;
    double sum = roots[i];
    while (j < roots.size() && roots[j] - roots[j - 1] <= merge_tol) {
      sum += roots[j];
      ++j;
    }
    double rep = sum / static_cast<double>(j - i);
    if (j - i > 1) {
      // Newton from the midpoint of a tight pair can jump clear across to
      // another root (f' ~ 0 there); keep the refinement only if it stays
      // inside the cluster's own neighbourhood.
      double polished = rep;
      poly::polish_real_root(a, b, c, d, polished, target);
      if (std::abs(polished - rep) <= merge_tol) rep = polished;
    }
    out.push_back(rep);
    i = j;
  }
  return out;
}

namespace poly {

inline std::complex<double> eval_quartic(double a3, double a2, double a1, double a0,
                                         std::complex<double> z) {
  return (((z + a3) * z + a2) * z + a1) * z + a0;
}

inline std::complex<double> eval_quartic_deriv(double a3, double a2, double a1,
                                               std::complex<double> z) {
  return ((4.0 * z + 3.0 * a3) * z + 2.0 * a2) * z + a1;
}

// roots of z^2 + b z + c over the complex numbers, cancellation-free
inline std::array<std::complex<double>, 2> quadratic_complex(std::complex<double> b,
                                                             std::complex<double> c) {
  const std::complex<double> sq = std::sqrt(b * b - 4.0 * c);
  std::complex<double> big = (std::real(std::conj(b) * sq) >= 0.0) ? -b - sq : -b + sq;
  big *= 0.5;
  if (big == std::complex<double>(0.0, 0.0)) return {big, big};
  return {big, c / big};
}

}  // namespace poly

// All four complex roots of the monic quartic x^4 + a3 x^3 + a2 x^2 + a1 x + a0
// by resolvent-cubic factorization into two quadratics, Newton polish, exact
// conjugate pairing, sorted by (real, imag).
inline std::array<std::complex<double>, 4> quartic_roots_monic(double a3, double a2, double a1,
                                                               double a0) {
  if (!std::isfinite(a3) || !std::isfinite(a2) || !std::isfinite(a1) || !std::isfinite(a0))
    throw InvalidInputError("quartic_roots_monic: non-finite coefficient");

  // depressed form x = y - a3/4: y^4 + p y^2 + q y + r
  const double sh = a3 / 4.0;
  const double p = a2 - 3.0 * a3 * a3 / 8.0;
  const double q = a1 - a3 * a2 / 2.0 + a3 * a3 * a3 / 8.0;
  const double r = a0 - a3 * a1 / 4.0 + a3 * a3 * a2 / 16.0 - 3.0 * a3 * a3 * a3 * a3 / 256.0;

  const double coeff_scale = std::max({1.0, std::abs(p), std::abs(q), std::abs(r)});
  std::array<std::complex<double>, 4> y{};

  if (std::abs(q) <= 1e-14 * coeff_scale) {
    // biquadratic: y^2 solves z^2 + p z + r
    const auto zz = poly::quadratic_complex({p, 0.0}, {r, 0.0});
    y[0] = std::sqrt(zz[0]);
    y[1] = -y[0];
    y[2] = std::sqrt(zz[1]);
    y[3] = -y[2];
  } else {
    // resolvent cubic z^3 - p z^2 - 4 r z + (4 p r - q^2); any real root with
    // z >= p splits the quartic into two real quadratics
    const auto zs = real_cubic_roots(1.0, -p, -4.0 * r, 4.0 * p * r - q * q,
                                     std::sqrt(coeff_scale));
    if (zs.empty())
      throw InternalInconsistencyError("quartic_roots_monic: resolvent cubic lost its roots");
    const double z = *std::max_element(zs.begin(), zs.end());
    const double alpha = std::sqrt(std::max(z - p, 0.0));
    if (alpha == 0.0) {
      // only happens when q ~ 0, already handled; fall back defensively
      const auto zz = poly::quadratic_complex({p, 0.0}, {r, 0.0});
      y[0] = std::sqrt(zz[0]);
      y[1] = -y[0];
      y[2] = std::sqrt(zz[1]);
      y[3] = -y[2];
    } else {
      const double beta = 0.5 * (z - q / alpha);
      const double delta = 0.5 * (z + q / alpha);
      const auto r1 = poly::quadratic_complex({alpha, 0.0}, {beta, 0.0});
      const auto r2 = poly::quadratic_complex({-alpha, 0.0}, {delta, 0.0});
      y = {r1[0], r1[1], r2[0], r2[1]};
    }
  }

  std::array<std::complex<double>, 4> roots;
  for (int i = 0; i < 4; ++i) roots[i] = y[i] - sh;

  // Newton polish on the original monic quartic, accepting only steps that
  // shrink the residual: at a repeated root f' ~ 0 turns the quotient into a
  // wild jump off a perfectly good seed, and the factorization seeds are
  // already near-roots, so a non-improving step is never the right move
  for (auto& z : roots) {
    for (int it = 0; it < 4; ++it) {
      const auto fz = poly::eval_quartic(a3, a2, a1, a0, z);
      const auto dz = poly::eval_quartic_deriv(a3, a2, a1, z);
      if (std::abs(dz) == 0.0) break;
      const auto step = fz / dz;
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
      const auto next = z - step;
      if (std::abs(poly::eval_quartic(a3, a2, a1, a0, next)) >= std::abs(fz)) break;
      z = next;
      if (std::abs(step) <= 1e-14 * (1.0 + std::abs(z))) break;
    }
  }

  // real coefficients: flatten roundoff-level imaginary parts, then force the
  // remaining roots into exact conjugate pairs
  double root_scale = 1.0;
  for (const auto& z : roots) root_scale = std::max(root_scale, std::abs(z));
  std::vector<int> cplx;
  for (int i = 0; i < 4; ++i) {
    if (std::abs(roots[i].imag()) <= 1e-9 * root_scale)
      roots[i] = {roots[i].real(), 0.0};
    else
      cplx.push_back(i);
  }
  if (cplx.size() % 2 != 0) {
    // odd leftover can only be roundoff: flatten the least-imaginary one
    int k = cplx[0];
    for (int i : cplx)
      if (std::abs(roots[i].imag()) < std::abs(roots[k].imag())) k = i;
    roots[k] = {roots[k].real(), 0.0};
    cplx.erase(std::find(cplx.begin(), cplx.end(), k));
  }
  std::vector<bool> used(4, false);
  for (std::size_t ii = 0; ii < cplx.size(); ++ii) {
    const int i = cplx[ii];
    if (used[i]) continue;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t jj = ii + 1; jj < cplx.size(); ++jj) {
      const int j = cplx[jj];
      if (used[j]) continue;
      const double dd = std::abs(roots[j] - std::conj(roots[i]));
      if (dd < best_d) {
        best_d = dd;
        best = j;
      }
    }
    if (best < 0)
      throw InternalInconsistencyError("quartic_roots_monic: unpaired complex root");
    const double re = 0.5 * (roots[i].real() + roots[best].real());
    const double im = 0.5 * (std::abs(roots[i].imag()) + std::abs(roots[best].imag()));
    roots[i] = {re, roots[i].imag() >= 0.0 ? im : -im};
    roots[best] = std::conj(roots[i]);
    used[i] = used[best] = true;
  }

  std::sort(roots.begin(), roots.end(), [](const auto& x, const auto& w) {
    if (x.real() != w.real()) return x.real() < w.real();
    return x.imag() < w.imag();
  });
  return roots;
}

}  // namespace custdyn
