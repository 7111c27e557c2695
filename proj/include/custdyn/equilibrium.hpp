#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "polynomial.hpp"

namespace custdyn {

// Which balance-equation route produced an equilibrium.
enum class EquilibriumRoute { general_cubic, static_network, wom_extinction, wom_interior, no_referral };

inline const char* route_name(EquilibriumRoute r) {
  switch (r) {
    case EquilibriumRoute::general_cubic: return "general-cubic";
    case EquilibriumRoute::static_network: return "static";
    case EquilibriumRoute::wom_extinction: return "wom-extinction";
    case EquilibriumRoute::wom_interior: return "wom-interior";
    case EquilibriumRoute::no_referral: return "no-referral";
  }
  return "unknown";
}

struct Equilibrium {
  State state;
  double residual = 0.0;  // |rhs_full|_inf at the state
  EquilibriumRoute route = EquilibriumRoute::general_cubic;
  bool feasible = false;  // nonnegative (up to roundoff) and on the invariant slice N = gamma/eps
};

// Coefficients of the referrer-level polynomial a R^3 + b R^2 + c R + d whose
// roots in [0, p] are the candidate equilibrium R* values. a <= 0 always.
struct CubicCoeffs {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
};

namespace detail {

inline double residual_inf(const ModelParams& par, const State& s) {
  const State d = rhs_full(par, s);
  return std::max({std::abs(d.c), std::abs(d.r), std::abs(d.pc), std::abs(d.pr)});
}

inline bool feasible_state(const State& s, double n_inf) {
  const double slack = 1e-9 * std::max(1.0, n_inf);
  return s.min_component() >= -slack && std::abs(s.total() - n_inf) <= slack;
}

inline Equilibrium make_equilibrium(const ModelParams& par, const State& s,
                                    EquilibriumRoute route) {
  Equilibrium eq;
  eq.state = s;
  eq.route = route;
  eq.residual = residual_inf(par, s);
  eq.feasible = feasible_state(s, par.gamma / par.epsilon);
  return eq;
}

inline void require_exact_zero(double v, const char* name) {
  if (v != 0.0)
    throw PreconditionError(std::string("route requires ") + name + " = 0");
}

}  // namespace detail

inline CubicCoeffs cubic_coeffs(const ModelParams& par) {
  par.validate();
  detail::require_positive_epsilon(par);
  if (!(par.lambda5 > 0.0))
    throw PreconditionError("cubic route requires lambda5 > 0");
  const DerivedConstants k = derive_constants(par);
  const double w = par.referral_rate();
  const double ac = par.promo_rate_c();
  const double ar = par.promo_rate_r();
  CubicCoeffs co;
  co.a = -par.lambda2 * w;
  co.b = par.lambda2 * w * k.p - k.u * w - par.lambda2 * k.v;
  co.c = par.lambda2 * ar * k.p + k.u * w * k.p + (par.lambda7 + par.lambda2 * k.q) * par.lambda5 -
         k.u * k.v;
  co.d = ar * k.p * k.u + ac * k.q * par.lambda5;
  return co;
}

// Real roots of the candidate polynomial restricted to [0, hi], ascending.
inline std::vector<double> solve_cubic(const CubicCoeffs& co, double hi) {
  if (!std::isfinite(hi) || hi < 0.0)
    throw InvalidInputError("solve_cubic: bracket must be finite and nonnegative");
  std::vector<double> all = real_cubic_roots(co.a, co.b, co.c, co.d, std::max(hi, 1.0));
  const double slack = 1e-9 * std::max(1.0, hi);
  std::vector<double> out;
  for (double r : all) {
    if (r < -slack || r > hi + slack) continue;
    out.push_back(std::clamp(r, 0.0, hi));
  }
  const double target = 1e-12 * poly::cubic_scale(co.a, co.b, co.c, co.d, std::max(hi, 1.0));
  for (double r : out)
    if (std::abs(poly::eval_cubic(co.a, co.b, co.c, co.d, r)) > std::max(target, 1e-300))
      throw InternalInconsistencyError("solve_cubic: root failed the residual gate");
  return out;
}

// Candidate equilibria from the cubic route. Roots whose back-substituted
// state leaves the feasible set are returned with feasible = false, never
// silently dropped. At most three candidates.
inline std::vector<Equilibrium> equilibria_general(const ModelParams& par) {
  const CubicCoeffs co = cubic_coeffs(par);
  const DerivedConstants k = derive_constants(par);
  const double w = par.referral_rate();
  const double ar = par.promo_rate_r();
  std::vector<Equilibrium> out;
  for (double rr : solve_cubic(co, k.p)) {
    const double cc = ((par.epsilon + par.beta2 + par.lambda7) * rr -
                       (ar + w * rr) * (k.p - rr)) /
                      par.lambda5;
    const State s{cc, rr, k.q - cc, k.p - rr};
    out.push_back(detail::make_equilibrium(par, s, EquilibriumRoute::general_cubic));
  }
  return out;
}

// Closed-form equilibrium when the crossovers are switched off
// (lambda5 = lambda7 = 0) but referral contact is active.
inline Equilibrium equilibrium_static(const ModelParams& par) {
  par.validate();
  detail::require_positive_epsilon(par);
  if (!(par.lambda2 > 0.0)) throw PreconditionError("static route requires lambda2 > 0");
  detail::require_exact_zero(par.lambda5, "lambda5");
  detail::require_exact_zero(par.lambda7, "lambda7");
  if (par.promo_rate_c() == 0.0 || par.promo_rate_r() == 0.0)
    throw PreconditionError("static route requires nonzero promoted conversion on both sides");

  const double w = par.referral_rate();
  const double s_r = par.alpha * par.gamma / par.epsilon;        // referrer-side column total
  const double s_c = (1.0 - par.alpha) * par.gamma / par.epsilon;
  const double theta = (par.promo_rate_r() + par.beta2 + par.epsilon) / (2.0 * w);
  // larger root of the balance parabola; the discriminant is written in its
  // manifestly nonnegative form
  const double half = 0.5 * s_r - theta;
  const double disc = half * half + par.promo_rate_r() * s_r / w;
  double rr = half + std::sqrt(disc);
  // re-derive R* from its complement so the pair sum R* + P_R* is exactly
  // the referrer-side column total (moves R* by at most one ulp)
  const double prr = s_r - rr;
  rr = s_r - prr;
  const double lam_c = par.promo_rate_c() + par.lambda2 * rr;
  const double cc = s_c * lam_c / (par.epsilon + par.beta1 + lam_c);
  const State st{cc, rr, s_c - cc, prr};

  Equilibrium eq = detail::make_equilibrium(par, st, EquilibriumRoute::static_network);
  if (eq.residual > 1e-8 * std::max(1.0, par.gamma))
    throw InternalInconsistencyError("static equilibrium failed the residual gate");
  return eq;
}

// Pure word-of-mouth scenario (all conversion except referral contact off):
// the extinction state always, plus the interior state once the persistence
// ratio tau exceeds 1.
inline std::vector<Equilibrium> equilibria_wom(const ModelParams& par) {
  par.validate();
  detail::require_positive_epsilon(par);
  if (!(par.lambda2 > 0.0)) throw PreconditionError("word-of-mouth route requires lambda2 > 0");
  detail::require_exact_zero(par.lambda1, "lambda1");
  detail::require_exact_zero(par.lambda3, "lambda3");
  detail::require_exact_zero(par.lambda4, "lambda4");
  detail::require_exact_zero(par.lambda5, "lambda5");
  detail::require_exact_zero(par.lambda7, "lambda7");

  const DerivedConstants k = derive_constants(par);
  const double s_r = par.alpha * par.gamma / par.epsilon;
  const double s_c = (1.0 - par.alpha) * par.gamma / par.epsilon;
  std::vector<Equilibrium> out;
  out.push_back(detail::make_equilibrium(par, State{0.0, 0.0, s_c, s_r},
                                         EquilibriumRoute::wom_extinction));
  const double tau = k.tau.value();  // defined: epsilon > 0 and beta2 >= 0
  if (tau > 1.0) {
    // the closed form for P_R,2 is (epsilon + beta2) / W; computing it as the
    // complement of R,2 instead (one of the two subtractions is exact) makes
    // the pair sum R,2 + P_R,2 exactly the referrer-side column total while
    // agreeing with the closed form to roundoff
    double rr = s_r * (1.0 - 1.0 / tau);
    const double prr = s_r - rr;
    rr = s_r - prr;
    // customer level from its own balance against the column total s_c
    const double cc = par.lambda2 * rr * s_c / (par.epsilon + par.beta1 + par.lambda2 * rr);
    out.push_back(detail::make_equilibrium(par, State{cc, rr, s_c - cc, prr},
                                           EquilibriumRoute::wom_interior));
  }
  for (const Equilibrium& eq : out)
    if (eq.feasible && eq.residual > 1e-8 * std::max(1.0, par.gamma))
      throw InternalInconsistencyError("word-of-mouth equilibrium failed the residual gate");
  return out;
}

// Linear scenario: no referral contact at all (lambda2 = m_r*lambda6 = 0).
// The balance equations are a 2x2 linear system in (C, R).
inline Equilibrium equilibrium_no_referral(const ModelParams& par) {
  par.validate();
  detail::require_positive_epsilon(par);
  if (!(par.lambda5 > 0.0)) throw PreconditionError("no-referral route requires lambda5 > 0");
  detail::require_exact_zero(par.lambda2, "lambda2");
  if (par.referral_rate() != 0.0)
    throw PreconditionError("no-referral route requires m_r * lambda6 = 0");

  const DerivedConstants k = derive_constants(par);
  const double ac = par.promo_rate_c();
  const double ar = par.promo_rate_r();
  // u C - lambda7 R = ac q ;  -lambda5 C + v R = ar p
  const double det = k.u * k.v - par.lambda5 * par.lambda7;
  if (!(det > 0.0))
    throw DegenerateParametersError("no-referral balance system is singular");
  const double cc = (ac * k.q * k.v + par.lambda7 * ar * k.p) / det;
  const double rr = (ar * k.p * k.u + par.lambda5 * ac * k.q) / det;
  const State st{cc, rr, k.q - cc, k.p - rr};

  Equilibrium eq = detail::make_equilibrium(par, st, EquilibriumRoute::no_referral);
  if (eq.residual > 1e-10 * std::max(1.0, par.gamma))
    throw InternalInconsistencyError("no-referral equilibrium failed the residual gate");
  return eq;
}

// Parameter patterns with a dedicated analytic route.
enum class Scenario { word_of_mouth, static_network, no_referral, general };

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::word_of_mouth: return "word-of-mouth";
    case Scenario::static_network: return "static-network";
    case Scenario::no_referral: return "no-referral";
    case Scenario::general: return "general";
  }
  return "unknown";
}

inline std::optional<Scenario> detect_scenario(const ModelParams& par) {
  par.validate();
  if (!(par.epsilon > 0.0)) return std::nullopt;
  const bool wom = par.lambda2 > 0.0 && par.lambda1 == 0.0 && par.lambda3 == 0.0 &&
                   par.lambda4 == 0.0 && par.lambda5 == 0.0 && par.lambda7 == 0.0;
  if (wom) return Scenario::word_of_mouth;
  const bool stat = par.lambda2 > 0.0 && par.lambda5 == 0.0 && par.lambda7 == 0.0 &&
                    par.promo_rate_c() != 0.0 && par.promo_rate_r() != 0.0;
  if (stat) return Scenario::static_network;
  if (par.lambda2 == 0.0 && par.referral_rate() == 0.0 && par.lambda5 > 0.0)
    return Scenario::no_referral;
  if (par.lambda5 > 0.0) return Scenario::general;
  return std::nullopt;
}

// Equilibria by the auto-selected route for this parameter pattern.
inline std::vector<Equilibrium> find_equilibria(const ModelParams& par) {
  const auto sc = detect_scenario(par);
  if (!sc)
    throw DegenerateParametersError(
        "no analytic equilibrium route applies to this parameter pattern");
  switch (*sc) {
    case Scenario::word_of_mouth: return equilibria_wom(par);
    case Scenario::static_network: return {equilibrium_static(par)};
    case Scenario::no_referral: return {equilibrium_no_referral(par)};
    case Scenario::general: return equilibria_general(par);
  }
  throw InternalInconsistencyError("find_equilibria: unhandled scenario");
}

// Agreement between the solved equilibrium and alternative closed-form
// expressions for the same quantities. Some reference variants drop factors
// or flip signs; each check reports whether the variant reproduces the
// solved value, so disagreement is surfaced instead of silently corrected.
struct FormulaCheck {
  std::string label;
  double solved = 0.0;
  double variant = 0.0;
  bool matches = false;
};

inline std::vector<FormulaCheck> closed_form_cross_checks(const ModelParams& par,
                                                          const Equilibrium& eq) {
  std::vector<FormulaCheck> out;
  const double n_inf = par.gamma / par.epsilon;
  auto add = [&](const std::string& label, double solved, double variant) {
    FormulaCheck f;
    f.label = label;
    f.solved = solved;
    f.variant = variant;
    f.matches = std::abs(solved - variant) <= 1e-8 * std::max(1.0, n_inf);
    out.push_back(f);
  };
  const DerivedConstants k = derive_constants(par);

  if (eq.route == EquilibriumRoute::wom_interior && k.tau && *k.tau > 1.0) {
    // variant forms with the pool-size factor dropped from the denominator
    const double tfrac = 1.0 - 1.0 / *k.tau;
    const double den_v = par.epsilon + par.beta1 + par.lambda2 * tfrac;
    add("interior-customers-variant",
        eq.state.c,
        par.alpha * (1.0 - par.alpha) * par.lambda2 * par.gamma * par.gamma * tfrac /
            (par.epsilon * par.epsilon * den_v));
    add("interior-potential-customers-variant",
        eq.state.pc,
        (1.0 - par.alpha) * (par.epsilon + par.beta1) * par.gamma / (par.epsilon * den_v));
    add("interior-referrers",
        eq.state.r, par.alpha * par.gamma * tfrac / par.epsilon);
    add("interior-potential-referrers",
        eq.state.pr, (par.epsilon + par.beta2) / par.referral_rate());
  }

  if (eq.route == EquilibriumRoute::no_referral) {
    // scaled-ratio variant: occupancy fractions kappa applied to the column totals
    const double ac = par.promo_rate_c();
    const double ar = par.promo_rate_r();
    if (k.p > 0.0 && k.q > 0.0) {
      const double kap1 = par.lambda5 * (par.lambda7 * k.p + ac * k.q) /
                          (k.u * k.p * (par.epsilon + par.beta2 + par.lambda7));
      const double kap2 = par.lambda7 * (par.lambda5 * k.q + ar * k.p) /
                          (k.v * k.q * (par.epsilon + par.beta1 + par.lambda5));
      add("no-referral-referrers-scaled-ratio", eq.state.r, kap1 * k.p);
      add("no-referral-customers-scaled-ratio", eq.state.c, kap2 * k.p);
    }
    // direct closed forms from eliminating one unknown agree with the linear solve
    const double det = k.u * k.v - par.lambda5 * par.lambda7;
    add("no-referral-referrers-direct", eq.state.r,
        (ar * k.u * k.p + ac * par.lambda5 * k.q) / det);
    add("no-referral-customers-direct", eq.state.c,
        (ac * k.v * k.q + ar * par.lambda7 * k.p) / det);
  }

  if (eq.route == EquilibriumRoute::static_network && k.theta) {
    // closed form for R* in its textbook arrangement (sqrt written with the
    // column-total cross term); algebraically equal to the solved root
    const double s_r = par.alpha * par.gamma / par.epsilon;
    const double head = 0.5 * s_r - *k.theta;
    const double under = (0.5 * s_r + *k.theta) * (0.5 * s_r + *k.theta) -
                         s_r * (par.epsilon + par.beta2) / par.referral_rate();
    if (under >= 0.0)
      add("static-referrers-closed-form", eq.state.r, head + std::sqrt(under));
  }
  return out;
}

}  // namespace custdyn
