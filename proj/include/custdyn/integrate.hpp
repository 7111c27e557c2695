#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace custdyn {

// Tolerances and budgets for the adaptive integrator. abs_tol is an absolute
// per-component floor; callers working in head-count units should scale it to
// the population size (see for_population).
struct IntegratorConfig {
  double h_init = 0.01;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double steady_tol = 1e-9;      // derivative threshold for steady-state detection
  double steady_window = 10.0;   // years the threshold must hold continuously
  std::uint64_t max_steps = 10'000'000;

  static IntegratorConfig for_population(double n_scale) {
    IntegratorConfig cfg;
    cfg.abs_tol = 1e-10 * std::max(1.0, n_scale);
    return cfg;
  }

  void validate() const {
    if (!(h_init > 0.0) || !std::isfinite(h_init))
      throw InvalidInputError("integrator: h_init must be positive");
    if (!(rel_tol >= 1e-14) || !std::isfinite(rel_tol))
      throw InvalidInputError("integrator: rel_tol must be >= 1e-14");
    if (!(abs_tol > 0.0) || !std::isfinite(abs_tol))
      throw InvalidInputError("integrator: abs_tol must be positive");
    if (!(steady_tol > 0.0) || !std::isfinite(steady_tol))
      throw InvalidInputError("integrator: steady_tol must be positive");
    if (!(steady_window > 0.0) || !std::isfinite(steady_window))
      throw InvalidInputError("integrator: steady_window must be positive");
    if (max_steps == 0) throw InvalidInputError("integrator: max_steps must be positive");
  }
};

template <std::size_t N>
struct Trajectory {
  std::vector<double> times;
  std::vector<std::array<double, N>> states;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
};

class BudgetExceededBase : public Error {
 public:
  using Error::Error;
};

// Step budget ran out mid-run. Carries everything integrated so far.
template <std::size_t N>
class BudgetExceededError : public BudgetExceededBase {
 public:
  BudgetExceededError(std::string msg, Trajectory<N> partial_trajectory)
      : BudgetExceededBase(std::move(msg)), partial(std::move(partial_trajectory)) {}
  Trajectory<N> partial;
};

template <std::size_t N>
struct SteadyResult {
  std::array<double, N> state{};
  bool converged = false;
  double t_reached = 0.0;
};

namespace detail {

template <std::size_t N>
inline bool all_finite(const std::array<double, N>& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

template <std::size_t N>
inline double max_abs(const std::array<double, N>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace detail

// One classical fourth-order Runge-Kutta step of size h.
template <std::size_t N, class Field>
std::array<double, N> step_rk4(Field&& f, double t, const std::array<double, N>& x, double h) {
  if (!std::isfinite(t) || !std::isfinite(h) || !detail::all_finite<N>(x))
    throw InvalidInputError("step_rk4: non-finite input");
  std::array<double, N> k1 = f(t, x);
  std::array<double, N> xs;
  for (std::size_t i = 0; i < N; ++i) xs[i] = x[i] + 0.5 * h * k1[i];
  std::array<double, N> k2 = f(t + 0.5 * h, xs);
  for (std::size_t i = 0; i < N; ++i) xs[i] = x[i] + 0.5 * h * k2[i];
  std::array<double, N> k3 = f(t + 0.5 * h, xs);
  for (std::size_t i = 0; i < N; ++i) xs[i] = x[i] + h * k3[i];
  std::array<double, N> k4 = f(t + h, xs);
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i)
    out[i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  if (!detail::all_finite<N>(out)) throw StepFailureError("step_rk4: non-finite stage result");
  return out;
}

// Fixed-step composition of step_rk4, mainly for convergence studies. The last
// step is shortened to land exactly on t_end.
template <std::size_t N, class Field>
std::array<double, N> integrate_fixed(Field&& f, std::array<double, N> x, double t0,
                                      double t_end, double h) {
  if (!(h > 0.0) || t_end < t0) throw InvalidInputError("integrate_fixed: bad interval or step");
  double t = t0;
  while (t < t_end) {
    const double step = std::min(h, t_end - t);
    x = step_rk4<N>(f, t, x, step);
    t = (t + step >= t_end) ? t_end : t + step;
  }
  return x;
}

namespace detail {

// Adaptive driver: one step of size h is checked against two of size h/2
// (step doubling); the halved result is kept when the difference passes the
// mixed tolerance. on_accept(t, x) sees the initial point and every accepted
// step; returning false stops the run early. Returns true on reaching t_end,
// false when on_accept stopped the run; throws BudgetExceededError<N> through
// on_budget when max_steps attempts are spent.
template <std::size_t N, class Field, class OnAccept, class OnBudget>
bool adaptive_drive(Field&& f, std::array<double, N> x, double t0, double t_end,
                    const IntegratorConfig& cfg, double h_cap, OnAccept&& on_accept,
                    OnBudget&& on_budget) {
  cfg.validate();
  if (!std::isfinite(t0) || !std::isfinite(t_end) || t_end < t0)
    throw InvalidInputError("integrate: require finite t0 <= t_end");
  if (!all_finite<N>(x)) throw InvalidInputError("integrate: non-finite initial state");

  double t = t0;
  if (!on_accept(t, x)) return false;
  if (t_end == t0) return true;

  double h = std::min({cfg.h_init, h_cap, t_end - t0});
  std::uint64_t attempts = 0;

  while (t < t_end) {
    if (attempts >= cfg.max_steps) {
      on_budget(t, x);
      throw InternalInconsistencyError("integrate: budget handler returned");
    }
    ++attempts;

    const double h_floor = 1e-12 * std::max({1.0, std::abs(t), std::abs(t_end)});
    h = std::min(h, h_cap);
    const bool final_step = h >= t_end - t;
    if (final_step) h = t_end - t;
    if (!(h > 0.0) || t + h == t)
      throw StepFailureError("integrate: step size underflow");

    bool ok = true;
    std::array<double, N> x_full{}, x_half{};
    try {
      x_full = step_rk4<N>(f, t, x, h);
      x_half = step_rk4<N>(f, t, x, 0.5 * h);
      x_half = step_rk4<N>(f, t + 0.5 * h, x_half, 0.5 * h);
    } catch (const StepFailureError&) {
      ok = false;
    }

    double err = 0.0;
    if (ok) {
      for (std::size_t i = 0; i < N; ++i) {
        const double scale =
            cfg.abs_tol + cfg.rel_tol * std::max(std::abs(x[i]), std::abs(x_half[i]));
        // the difference overestimates the halved-step error by ~15x
        err = std::max(err, std::abs(x_half[i] - x_full[i]) / (15.0 * scale));
      }
      if (!std::isfinite(err)) ok = false;
    }

    if (!ok) {
      h *= 0.2;
      if (h < h_floor) throw StepFailureError("integrate: repeated non-finite stages");
      continue;
    }

    if (err <= 1.0) {
      t = final_step ? t_end : t + h;
      x = x_half;
      if (!on_accept(t, x)) return false;
      const double grow = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
      h *= std::clamp(grow, 0.2, 5.0);
    } else {
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 0.9);
      if (h < h_floor) throw StepFailureError("integrate: step size collapsed");
    }
  }
  return true;
}

}  // namespace detail

// Integrate from t0 to t_end, recording every accepted step. Deterministic:
// identical inputs give bitwise-identical trajectories.
template <std::size_t N, class Field>
Trajectory<N> integrate(Field&& f, const std::array<double, N>& x0, double t0, double t_end,
                        const IntegratorConfig& cfg) {
  Trajectory<N> traj;
  detail::adaptive_drive<N>(
      f, x0, t0, t_end, cfg, std::numeric_limits<double>::infinity(),
      [&](double t, const std::array<double, N>& x) {
        traj.times.push_back(t);
        traj.states.push_back(x);
        return true;
      },
      [&](double, const std::array<double, N>&) {
        throw BudgetExceededError<N>("integrate: max_steps exhausted", std::move(traj));
      });
  return traj;
}

// Integrate until the derivative stays below steady_tol * max(1, |x|_inf) for
// steady_window consecutive years, or until `horizon` or the step budget runs
// out (converged = false then; the last state is still returned).
template <std::size_t N, class Field>
SteadyResult<N> integrate_to_steady(Field&& f, const std::array<double, N>& x0,
                                    const IntegratorConfig& cfg, double horizon) {
  SteadyResult<N> out;
  double streak_start = 0.0;
  bool in_streak = false;
  auto on_accept = [&](double t, const std::array<double, N>& x) {
    out.state = x;
    out.t_reached = t;
    const std::array<double, N> dx = f(t, x);
    const double thr = cfg.steady_tol * std::max(1.0, detail::max_abs<N>(x));
    if (detail::max_abs<N>(dx) <= thr) {
      if (!in_streak) {
        in_streak = true;
        streak_start = t;
      }
      if (t - streak_start >= cfg.steady_window) {
        out.converged = true;
        return false;
      }
    } else {
      in_streak = false;
    }
    return true;
  };
  try {
    // cap steps at the detection window so the streak is actually sampled
    detail::adaptive_drive<N>(f, x0, 0.0, horizon, cfg, cfg.steady_window, on_accept,
                              [&](double, const std::array<double, N>&) {
                                throw BudgetExceededError<N>("integrate_to_steady: max_steps",
                                                             Trajectory<N>{});
                              });
  } catch (const BudgetExceededBase&) {
    out.converged = false;
  }
  return out;
}

// Vector-field adapters for the model equations.
inline auto make_full_field(const ModelParams& par) {
  par.validate();
  return [par](double, const Vec4& x) -> Vec4 {
    const double w = par.lambda2 + par.m_r * par.lambda6;
    const double ac = par.lambda1 + par.m * par.lambda4;
    const double ar = par.lambda3 + par.m * par.lambda4;
    return Vec4{
        par.lambda7 * x[1] - (par.epsilon + par.beta1 + par.lambda5) * x[0] + ac * x[2] +
            par.lambda2 * x[1] * x[2],
        par.lambda5 * x[0] - (par.epsilon + par.beta2 + par.lambda7) * x[1] + ar * x[3] +
            w * x[1] * x[3],
        (1.0 - par.alpha) * par.gamma + par.beta1 * x[0] + par.lambda7 * x[3] -
            (par.epsilon + par.lambda5 + ac) * x[2] - par.lambda2 * x[1] * x[2],
        par.alpha * par.gamma + par.beta2 * x[1] + par.lambda5 * x[2] -
            (par.epsilon + par.lambda7 + ar) * x[3] - w * x[1] * x[3],
    };
  };
}

inline auto make_reduced_field(const ModelParams& par) {
  const DerivedConstants k = derive_constants(par);
  return [par, k](double, const Vec2& x) -> Vec2 {
    const double w = par.lambda2 + par.m_r * par.lambda6;
    const double ac = par.lambda1 + par.m * par.lambda4;
    const double ar = par.lambda3 + par.m * par.lambda4;
    return Vec2{
        par.lambda7 * x[1] - (par.epsilon + par.beta1 + par.lambda5) * x[0] +
            (ac + par.lambda2 * x[1]) * (k.q - x[0]),
        par.lambda5 * x[0] - (par.epsilon + par.beta2 + par.lambda7) * x[1] +
            (ar + w * x[1]) * (k.p - x[1]),
    };
  };
}

}  // namespace custdyn
