#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "equilibrium.hpp"
#include "errors.hpp"
#include "integrate.hpp"
#include "model.hpp"
#include "polynomial.hpp"

namespace custdyn {

enum class StabilityClass { stable, unstable, marginal };

inline const char* stability_name(StabilityClass s) {
  switch (s) {
    case StabilityClass::stable: return "stable";
    case StabilityClass::unstable: return "unstable";
    case StabilityClass::marginal: return "marginal";
  }
  return "unknown";
}

// One analytically known eigenvalue of a scenario Jacobian. Entries flagged
// as `variant` are alternative arrangements kept for diagnostics only; they
// are excluded from the aggregate closed-form match.
struct ClosedFormEig {
  std::string label;
  double value = 0.0;
  bool in_spectrum = false;
  bool variant = false;
};

struct StabilityReport {
  std::array<std::complex<double>, 4> eigenvalues{};
  StabilityClass classification = StabilityClass::marginal;
  double spectral_abscissa = 0.0;            // max real part, per year
  std::optional<bool> closed_form_match;     // set when a scenario closed form applies
  std::vector<ClosedFormEig> closed_forms;   // empty on the general route
};

namespace detail {

inline double mat4_norm_inf(const Mat4& a) {
  double best = 0.0;
  for (const auto& row : a) {
    double s = 0.0;
    for (double v : row) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

inline double mat4_trace(const Mat4& a) { return a[0][0] + a[1][1] + a[2][2] + a[3][3]; }

inline Mat4 mat4_mul(const Mat4& a, const Mat4& b) {
  Mat4 out{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a[i][k] * b[k][j];
      out[i][j] = s;
    }
  return out;
}

inline Mat4 mat4_add_diag(Mat4 a, double c) {
  for (int i = 0; i < 4; ++i) a[i][i] += c;
  return a;
}

}  // namespace detail

// Monic characteristic polynomial coefficients {c1, c2, c3, c4} of a 4x4
// matrix: det(lambda I - A) = lambda^4 + c1 lambda^3 + c2 lambda^2 + c3
// lambda + c4, built by trace recursion. c1 = -trace(A), c4 = det(A).
inline std::array<double, 4> characteristic_poly4(const Mat4& a) {
  std::array<double, 4> c{};
  Mat4 m = a;
  c[0] = -detail::mat4_trace(m);
  for (int k = 1; k < 4; ++k) {
    m = detail::mat4_mul(a, detail::mat4_add_diag(m, c[k - 1]));
    c[k] = -detail::mat4_trace(m) / static_cast<double>(k + 1);
  }
  for (double v : c)
    if (!std::isfinite(v))
      throw InvalidInputError("characteristic_poly4: matrix entries must be finite");
  return c;
}

// All four eigenvalues, sorted by (real, imag). Each root is checked against
// the characteristic polynomial; a failed check means the solver produced
// garbage and is reported as an internal error rather than returned.
inline std::array<std::complex<double>, 4> eigenvalues4(const Mat4& a) {
  const std::array<double, 4> c = characteristic_poly4(a);
  const std::array<std::complex<double>, 4> roots =
      quartic_roots_monic(c[0], c[1], c[2], c[3]);
  const double scale = std::max(1.0, detail::mat4_norm_inf(a));
  const double gate = 1e-8 * scale * scale * scale * scale;
  for (const auto& r : roots) {
    const std::complex<double> val = (((r + c[0]) * r + c[1]) * r + c[2]) * r + c[3];
    if (!(std::abs(val) <= gate))
      throw InternalInconsistencyError("eigenvalues4: root failed the residual gate");
  }
  return roots;
}

inline double spectral_abscissa(const std::array<std::complex<double>, 4>& eigs) {
  double best = eigs[0].real();
  for (const auto& e : eigs) best = std::max(best, e.real());
  return best;
}

inline StabilityClass classify(double abscissa) {
  if (abscissa < -1e-9) return StabilityClass::stable;
  if (abscissa > 1e-9) return StabilityClass::unstable;
  return StabilityClass::marginal;
}

namespace detail {

inline bool value_in_spectrum(const std::array<std::complex<double>, 4>& eigs, double v) {
  // unit-scale absolute floor: a repeated root is recovered only to about the
  // square root of machine precision, far coarser than 1e-6 * |v| for small v
  const double tol = 1e-6 * std::max(std::abs(v), 1.0);
  for (const auto& e : eigs)
    if (std::abs(e - std::complex<double>(v, 0.0)) <= tol) return true;
  return false;
}

}  // namespace detail

// The analytically known eigenvalues for the scenario that produced `eq`.
// Every returned value is expected to appear in the numerical spectrum; the
// in_spectrum flag records whether it actually does. The general cubic route
// has no closed forms and is rejected. For the no-referral scenario only the
// two simple modes are listed; the remaining pair solves a quadratic and is
// left to the numerical spectrum.
inline std::vector<ClosedFormEig> closed_form_eigenvalues(const ModelParams& par,
                                                          const Equilibrium& eq) {
  if (eq.route == EquilibriumRoute::general_cubic)
    throw PreconditionError("closed_form_eigenvalues: no closed form on the general route");
  const Mat4 jac = jacobian_full(par, eq.state);
  const auto eigs = eigenvalues4(jac);
  const double w = par.referral_rate();
  std::vector<ClosedFormEig> out;
  auto add = [&](const std::string& label, double value) {
    ClosedFormEig f;
    f.label = label;
    f.value = value;
    f.in_spectrum = detail::value_in_spectrum(eigs, value);
    out.push_back(f);
  };
  add("turnover", -par.epsilon);
  switch (eq.route) {
    case EquilibriumRoute::static_network: {
      const double a_term = par.beta2 - w * eq.state.pr;
      const double b_term = par.promo_rate_r() + w * eq.state.r;
      add("referrer-exchange-mode", -(a_term + b_term + par.epsilon));
      add("customer-conversion-mode",
          -(par.beta1 + par.epsilon + par.promo_rate_c() + par.lambda2 * eq.state.r));
      break;
    }
    case EquilibriumRoute::wom_extinction: {
      add("customer-decay-mode", -(par.beta1 + par.epsilon));
      const double s_r = par.alpha * par.gamma / par.epsilon;
      add("referrer-growth-rate", s_r * w - (par.beta2 + par.epsilon));
      break;
    }
    case EquilibriumRoute::wom_interior: {
      add("customer-mode", -(par.beta1 + par.epsilon + par.lambda2 * eq.state.r));
      add("referrer-mode", -w * eq.state.r);
      break;
    }
    case EquilibriumRoute::no_referral: {
      add("crossover-mode", -(par.epsilon + par.lambda5 + par.lambda7));
      break;
    }
    case EquilibriumRoute::general_cubic:
      break;
  }
  return out;
}

// Full spectral report for an equilibrium: numerical spectrum, stability
// classification, and (where a scenario applies) the closed-form eigenvalues
// with their containment flags. On the static route an alternate arrangement
// of the customer-conversion mode with the referral term's sign flipped is in
// circulation; it is appended as a flagged variant so the disagreement is
// visible, and it does not count toward closed_form_match.
inline StabilityReport stability_report(const ModelParams& par, const Equilibrium& eq) {
  StabilityReport rep;
  const Mat4 jac = jacobian_full(par, eq.state);
  rep.eigenvalues = eigenvalues4(jac);
  rep.spectral_abscissa = spectral_abscissa(rep.eigenvalues);
  rep.classification = classify(rep.spectral_abscissa);
  if (eq.route != EquilibriumRoute::general_cubic) {
    rep.closed_forms = closed_form_eigenvalues(par, eq);
    bool all = true;
    for (const auto& f : rep.closed_forms) all = all && f.in_spectrum;
    rep.closed_form_match = all;
    if (eq.route == EquilibriumRoute::static_network) {
      ClosedFormEig alt;
      alt.label = "customer-conversion-mode-alternate-sign";
      alt.value = -(par.beta1 + par.epsilon + par.promo_rate_c() - par.lambda2 * eq.state.r);
      alt.in_spectrum = detail::value_in_spectrum(rep.eigenvalues, alt.value);
      alt.variant = true;
      rep.closed_forms.push_back(alt);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Dynamical cross-check of local stability.

struct PerturbationRun {
  State direction{};     // unit perturbation direction (sum zero)
  bool skipped = false;  // would have left the nonnegative orthant
  bool converged = false;
  bool returned = false;
  double distance = 0.0;  // |final - eq|_inf
};

struct PerturbationResult {
  bool returns_to_eq = false;              // every applicable run returned
  std::optional<State> escape_direction;   // first direction that settled elsewhere
  bool inconclusive = false;               // some run exhausted its budget or horizon
  std::vector<PerturbationRun> runs;
};

// Perturbs the equilibrium along +/- each coordinate direction, compensating
// in the paired potential/active compartment so the population total is
// unchanged, then integrates each perturbed state to steady. The equilibrium
// counts as dynamically stable when every run returns within 1e-4 * N_inf.
inline PerturbationResult perturbation_test(
    const ModelParams& par, const Equilibrium& eq, double magnitude,
    const IntegratorConfig& cfg_in = IntegratorConfig{}, double horizon = 4000.0) {
  par.validate();
  detail::require_positive_epsilon(par);
  if (!std::isfinite(magnitude) || magnitude < 0.0 || magnitude > 1e-2)
    throw InvalidInputError("perturbation_test: magnitude must lie in [0, 1e-2]");
  if (!eq.feasible)
    throw PreconditionError("perturbation_test: equilibrium must be feasible");

  PerturbationResult res;
  if (magnitude == 0.0) {  // nothing to perturb
    res.returns_to_eq = true;
    return res;
  }

  const double n_inf = par.gamma / par.epsilon;
  const double delta = magnitude * n_inf;
  const double return_tol = 1e-4 * n_inf;
  IntegratorConfig cfg = cfg_in;
  cfg.abs_tol = std::max(cfg.abs_tol, 1e-10 * std::max(1.0, n_inf));
  const auto field = make_full_field(par);
  const Vec4 base = eq.state.to_array();

  static constexpr int kPartner[4] = {2, 3, 0, 1};
  bool all_returned = true;
  for (int i = 0; i < 4; ++i) {
    for (double sign : {+1.0, -1.0}) {
      PerturbationRun run;
      Vec4 dir{};
      dir[static_cast<std::size_t>(i)] = sign;
      dir[static_cast<std::size_t>(kPartner[i])] = -sign;
      run.direction = State::from_array(dir);
      Vec4 x0 = base;
      for (int k = 0; k < 4; ++k) x0[static_cast<std::size_t>(k)] += delta * dir[static_cast<std::size_t>(k)];
      const double floor = *std::min_element(x0.begin(), x0.end());
      if (floor < 0.0) {
        run.skipped = true;
        res.runs.push_back(run);
        continue;
      }
      const SteadyResult<4> sr = integrate_to_steady<4>(field, x0, cfg, horizon);
      run.converged = sr.converged;
      double dist = 0.0;
      for (int k = 0; k < 4; ++k)
        dist = std::max(dist, std::abs(sr.state[static_cast<std::size_t>(k)] - base[static_cast<std::size_t>(k)]));
      run.distance = dist;
      if (!sr.converged) {
        res.inconclusive = true;
        all_returned = false;
      } else if (dist <= return_tol) {
        run.returned = true;
      } else {
        all_returned = false;
        if (!res.escape_direction) res.escape_direction = run.direction;
      }
      res.runs.push_back(run);
    }
  }
  res.returns_to_eq = all_returned;
  return res;
}

}  // namespace custdyn
