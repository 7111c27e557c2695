#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "errors.hpp"

namespace custdyn {

using Vec2 = std::array<double, 2>;
using Vec4 = std::array<double, 4>;
using Mat2 = std::array<std::array<double, 2>, 2>;
using Mat4 = std::array<std::array<double, 4>, 4>;

// Rates and budgets of the four-compartment customer model. Units: per year,
// except the dimensionless referral share alpha and the budgets m, m_r.
struct ModelParams {
  double lambda1 = 0.0;  // spontaneous conversion, potential customer -> customer
  double lambda2 = 0.0;  // referral contact rate (referrers recruiting potentials)
  double lambda3 = 0.0;  // spontaneous conversion, potential referrer -> referrer
  double lambda4 = 0.0;  // conversion gain per unit of direct-marketing budget
  double lambda5 = 0.0;  // crossover, customer -> referrer
  double lambda6 = 0.0;  // referral-contact gain per unit of referral budget
  double lambda7 = 0.0;  // crossover, referrer -> customer
  double m = 0.0;        // direct-marketing budget
  double m_r = 0.0;      // referral-program budget
  double beta1 = 0.0;    // churn, customer -> potential customer
  double beta2 = 0.0;    // churn, referrer -> potential referrer
  double epsilon = 0.0;  // market renewal rate (exit, balanced by inflow)
  double gamma = 0.0;    // total inflow of new potentials
  double alpha = 0.0;    // share of inflow entering the referrer-side pool

  // Effective bilinear contact rate acting on the referrer pair.
  double referral_rate() const { return lambda2 + m_r * lambda6; }
  // Budget-boosted conversion rate on the customer side.
  double promo_rate_c() const { return lambda1 + m * lambda4; }
  // Budget-boosted conversion rate on the referrer side.
  double promo_rate_r() const { return lambda3 + m * lambda4; }

  void validate() const {
    auto nonneg = [](double v, const char* name) {
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidInputError(std::string("parameter '") + name +
                                "' must be finite and nonnegative");
    };
    nonneg(lambda1, "lambda1");
    nonneg(lambda2, "lambda2");
    nonneg(lambda3, "lambda3");
    nonneg(lambda4, "lambda4");
    nonneg(lambda5, "lambda5");
    nonneg(lambda6, "lambda6");
    nonneg(lambda7, "lambda7");
    nonneg(m, "m");
    nonneg(m_r, "m_r");
    nonneg(beta1, "beta1");
    nonneg(beta2, "beta2");
    nonneg(epsilon, "epsilon");
    nonneg(gamma, "gamma");
    if (!std::isfinite(alpha) || alpha < 0.0 || alpha > 1.0)
      throw InvalidInputError("parameter 'alpha' must lie in [0, 1]");
  }
};

// Compartment occupancies: customers, referrers, and their potential pools.
struct State {
  double c = 0.0;
  double r = 0.0;
  double pc = 0.0;
  double pr = 0.0;

  double total() const { return c + r + pc + pr; }
  bool finite() const {
    return std::isfinite(c) && std::isfinite(r) && std::isfinite(pc) && std::isfinite(pr);
  }
  double min_component() const { return std::min(std::min(c, r), std::min(pc, pr)); }
  Vec4 to_array() const { return {c, r, pc, pr}; }
  static State from_array(const Vec4& a) { return {a[0], a[1], a[2], a[3]}; }
};

// State of the planar system obtained by replacing the pools with their
// asymptotic complements q - C and p - R.
struct ReducedState {
  double ca = 0.0;
  double ra = 0.0;

  bool finite() const { return std::isfinite(ca) && std::isfinite(ra); }
  Vec2 to_array() const { return {ca, ra}; }
  static ReducedState from_array(const Vec2& a) { return {a[0], a[1]}; }
};

// Parameter aggregates the analysis routes work with.
//   p, q     limiting referrer-side / customer-side column totals (R+P_R, C+P_C)
//   u, v     total outflow rates of the two potential pools
//   n_inf    limiting total population gamma / epsilon
//   tau      referral persistence ratio; the referrer pair dies out iff tau <= 1
//   theta    vertex offset of the static-network balance quadratic
struct DerivedConstants {
  double p = 0.0;
  double q = 0.0;
  double u = 0.0;
  double v = 0.0;
  double n_inf = 0.0;
  std::optional<double> tau;
  std::optional<double> theta;
};

// Sufficient condition for the reduced system to attract every trajectory:
// both decay/coupling quotients must exceed 1. `value` is empty when a
// denominator vanishes and the criterion does not apply.
struct ContractionCondition {
  std::optional<double> value;
  bool satisfied = false;
};

namespace detail {
inline void require_finite_state(const State& s) {
  if (!s.finite()) throw InvalidInputError("state has a non-finite component");
}
inline void require_positive_epsilon(const ModelParams& par) {
  if (!(par.epsilon > 0.0))
    throw PreconditionError("operation requires epsilon > 0");
}
}  // namespace detail

// Time derivative of the full four-compartment system.
inline State rhs_full(const ModelParams& par, const State& s) {
  par.validate();
  detail::require_finite_state(s);
  const double w = par.referral_rate();
  const double ac = par.promo_rate_c();
  const double ar = par.promo_rate_r();
  State d;
  d.c = par.lambda7 * s.r - (par.epsilon + par.beta1 + par.lambda5) * s.c + ac * s.pc +
        par.lambda2 * s.r * s.pc;
  d.r = par.lambda5 * s.c - (par.epsilon + par.beta2 + par.lambda7) * s.r + ar * s.pr +
        w * s.r * s.pr;
  d.pc = (1.0 - par.alpha) * par.gamma + par.beta1 * s.c + par.lambda7 * s.pr -
         (par.epsilon + par.lambda5 + ac) * s.pc - par.lambda2 * s.r * s.pc;
  d.pr = par.alpha * par.gamma + par.beta2 * s.r + par.lambda5 * s.pc -
         (par.epsilon + par.lambda7 + ar) * s.pr - w * s.r * s.pr;
  return d;
}

// Jacobian of rhs_full at s, rows and columns ordered (C, R, P_C, P_R).
// Every column sums to -epsilon: the total population obeys N' = gamma - eps N.
inline Mat4 jacobian_full(const ModelParams& par, const State& s) {
  par.validate();
  detail::require_finite_state(s);
  const double w = par.referral_rate();
  const double ac = par.promo_rate_c();
  const double ar = par.promo_rate_r();
  return Mat4{{
      {{-(par.epsilon + par.beta1 + par.lambda5), par.lambda7 + par.lambda2 * s.pc,
        ac + par.lambda2 * s.r, 0.0}},
      {{par.lambda5, -(par.epsilon + par.beta2 + par.lambda7) + w * s.pr, 0.0,
        ar + w * s.r}},
      {{par.beta1, -par.lambda2 * s.pc, -(par.epsilon + par.lambda5 + ac) - par.lambda2 * s.r,
        par.lambda7}},
      {{0.0, par.beta2 - w * s.pr, par.lambda5,
        -(par.epsilon + par.lambda7 + ar) - w * s.r}},
  }};
}

inline DerivedConstants derive_constants(const ModelParams& par) {
  par.validate();
  detail::require_positive_epsilon(par);
  DerivedConstants k;
  const double den = par.epsilon * (par.epsilon + par.lambda5 + par.lambda7);
  k.p = par.gamma * (par.alpha * par.epsilon + par.lambda5) / den;
  k.q = par.gamma * ((1.0 - par.alpha) * par.epsilon + par.lambda7) / den;
  k.u = par.epsilon + par.beta1 + par.lambda5 + par.promo_rate_c();
  k.v = par.epsilon + par.beta2 + par.lambda7 + par.promo_rate_r();
  k.n_inf = par.gamma / par.epsilon;
  if (par.epsilon + par.beta2 > 0.0)
    k.tau = par.alpha * par.gamma * par.referral_rate() /
            (par.epsilon * (par.epsilon + par.beta2));
  if (par.referral_rate() > 0.0)
    k.theta = (par.promo_rate_r() + par.beta2 + par.epsilon) / (2.0 * par.referral_rate());
  return k;
}

// Time derivative of the reduced planar system; the pools enter through
// their complements q - C_a and p - R_a.
inline ReducedState rhs_reduced(const ModelParams& par, const ReducedState& s) {
  if (!s.finite()) throw InvalidInputError("reduced state has a non-finite component");
  const DerivedConstants k = derive_constants(par);
  const double w = par.referral_rate();
  ReducedState d;
  d.ca = par.lambda7 * s.ra - (par.epsilon + par.beta1 + par.lambda5) * s.ca +
         (par.promo_rate_c() + par.lambda2 * s.ra) * (k.q - s.ca);
  d.ra = par.lambda5 * s.ca - (par.epsilon + par.beta2 + par.lambda7) * s.ra +
         (par.promo_rate_r() + w * s.ra) * (k.p - s.ra);
  return d;
}

inline Mat2 jacobian_reduced(const ModelParams& par, const ReducedState& s) {
  if (!s.finite()) throw InvalidInputError("reduced state has a non-finite component");
  const DerivedConstants k = derive_constants(par);
  const double w = par.referral_rate();
  return Mat2{{
      {{-(par.epsilon + par.beta1 + par.lambda5) - (par.promo_rate_c() + par.lambda2 * s.ra),
        par.lambda7 + par.lambda2 * (k.q - s.ca)}},
      {{par.lambda5,
        -(par.epsilon + par.beta2 + par.lambda7) + w * (k.p - s.ra) -
            (par.promo_rate_r() + w * s.ra)}},
  }};
}

inline ContractionCondition check_contraction_condition(const ModelParams& par) {
  const DerivedConstants k = derive_constants(par);
  const double den1 = par.lambda7 + k.q * par.lambda2;
  const double den2 = par.lambda5 + k.q * par.lambda2;
  ContractionCondition out;
  if (den1 <= 0.0 || den2 <= 0.0) return out;  // criterion not applicable
  const double q1 = (2.0 * par.epsilon + 2.0 * par.beta1 + par.lambda5 + 2.0 * par.lambda1 +
                     2.0 * par.m * par.lambda4) /
                    den1;
  const double q2 = (2.0 * par.epsilon + 2.0 * par.beta2 + par.lambda7 + 2.0 * par.lambda3 +
                     2.0 * par.m * par.lambda4 + 2.0 * par.referral_rate() * k.p) /
                    den2;
  out.value = std::min(q1, q2);
  out.satisfied = *out.value > 1.0;
  return out;
}

}  // namespace custdyn
