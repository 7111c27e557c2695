#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "integrate.hpp"
#include "model.hpp"

namespace custdyn {

// Largest relative deviation of the trajectory's population total from the
// closed-form turnover law gamma/eps + (N0 - gamma/eps) e^{-eps (t - t0)}.
inline double verify_population_law(const Trajectory<4>& traj, const ModelParams& par) {
  par.validate();
  if (!(par.epsilon > 0.0))
    throw PreconditionError("verify_population_law requires epsilon > 0");
  if (traj.times.empty())
    throw InvalidInputError("verify_population_law: trajectory has no samples");
  const double n_inf = par.gamma / par.epsilon;
  const double t0 = traj.times.front();
  double n0 = 0.0;
  for (double v : traj.states.front()) n0 += v;
  double worst = 0.0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    double n = 0.0;
    for (double v : traj.states[i]) n += v;
    const double law = n_inf + (n0 - n_inf) * std::exp(-par.epsilon * (traj.times[i] - t0));
    worst = std::max(worst, std::abs(n - law) / std::max(std::abs(law), 1e-300));
  }
  return worst;
}

// Full system and planar approximation integrated side by side on one shared
// adaptive grid. Differences are the four compartment gaps, with the
// approximation's potential compartments taken as the complements q - C_a and
// p - R_a, so diff_series is exactly the tracked sum |C-C_a| + |R-R_a| +
// |P_C-P_{C,a}| + |P_R-P_{R,a}|.
struct ComparisonResult {
  std::vector<double> times;
  std::vector<double> dc, dr, dpc, dpr;  // signed full-minus-approximation gaps
  std::vector<double> diff_series;       // sum of absolute gaps per sample
  double sup_diff_end = 0.0;             // diff_series at the final sample
  double initial_p_offset = 0.0;         // potential-compartment gap at t0
  ContractionCondition condition;        // planar-attraction sufficient condition
};

inline ComparisonResult compare_full_reduced(const ModelParams& par, const State& init,
                                             double t_end,
                                             const IntegratorConfig& cfg_in = IntegratorConfig{}) {
  par.validate();
  detail::require_positive_epsilon(par);
  if (!std::isfinite(t_end) || t_end < 0.0)
    throw InvalidInputError("compare_full_reduced: t_end must be finite and nonnegative");
  if (!init.finite() || init.min_component() < 0.0)
    throw InvalidInputError("compare_full_reduced: initial state must be finite and nonnegative");

  const DerivedConstants k = derive_constants(par);
  ComparisonResult res;
  res.condition = check_contraction_condition(par);
  res.initial_p_offset =
      std::abs(init.pc - (k.q - init.c)) + std::abs(init.pr - (k.p - init.r));

  IntegratorConfig cfg = cfg_in;
  cfg.abs_tol = std::max(cfg.abs_tol, 1e-10 * std::max(1.0, k.n_inf));

  auto record = [&](double t, const std::array<double, 6>& y) {
    const double ca = y[4];
    const double ra = y[5];
    const double gc = y[0] - ca;
    const double gr = y[1] - ra;
    const double gpc = y[2] - (k.q - ca);
    const double gpr = y[3] - (k.p - ra);
    res.times.push_back(t);
    res.dc.push_back(gc);
    res.dr.push_back(gr);
    res.dpc.push_back(gpc);
    res.dpr.push_back(gpr);
    res.diff_series.push_back(std::abs(gc) + std::abs(gr) + std::abs(gpc) + std::abs(gpr));
  };

  const std::array<double, 6> y0 = {init.c, init.r, init.pc, init.pr, init.c, init.r};
  if (t_end == 0.0) {
    record(0.0, y0);
  } else {
    const auto full = make_full_field(par);
    const auto reduced = make_reduced_field(par);
    auto field = [&](double t, const std::array<double, 6>& y) {
      const Vec4 f = full(t, Vec4{y[0], y[1], y[2], y[3]});
      const Vec2 g = reduced(t, Vec2{y[4], y[5]});
      return std::array<double, 6>{f[0], f[1], f[2], f[3], g[0], g[1]};
    };
    const Trajectory<6> traj = integrate<6>(field, y0, 0.0, t_end, cfg);
    for (std::size_t i = 0; i < traj.times.size(); ++i) record(traj.times[i], traj.states[i]);
  }
  res.sup_diff_end = res.diff_series.back();
  return res;
}

// ---------------------------------------------------------------------------
// Marketing-budget split sweep.

struct SweepRow {
  double m_r = 0.0;
  double m = 0.0;
  double c_inf = 0.0;
  double r_inf = 0.0;
  double total = 0.0;  // c_inf + r_inf
  std::optional<double> tau;
  bool converged = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by m_r
  std::size_t argmax = 0;      // index of the best row by total
};

namespace detail {

// Splits the budget so that m + m_r == budget holds exactly in floating
// point: whichever part is at least half the budget makes the subtraction
// exact, and the smaller part is recomputed from it.
inline void exact_budget_split(double budget, double& m_r, double& m) {
  if (m_r >= 0.5 * budget) {
    m = budget - m_r;
  } else {
    m = budget - m_r;
    m_r = budget - m;
  }
}

}  // namespace detail

inline SweepResult budget_sweep(const ModelParams& base, const State& init, double budget,
                                std::size_t steps, double horizon = 2000.0,
                                const IntegratorConfig& cfg_in = IntegratorConfig{}) {
  base.validate();
  detail::require_positive_epsilon(base);
  if (!std::isfinite(budget) || budget < 0.0)
    throw InvalidInputError("budget_sweep: budget must be finite and nonnegative");
  if (steps < 2) throw InvalidInputError("budget_sweep: steps must be at least 2");
  if (!std::isfinite(horizon) || horizon <= 0.0)
    throw InvalidInputError("budget_sweep: horizon must be positive");
  if (!init.finite() || init.min_component() < 0.0)
    throw InvalidInputError("budget_sweep: initial state must be finite and nonnegative");

  IntegratorConfig cfg = cfg_in;
  cfg.abs_tol = std::max(cfg.abs_tol, 1e-10 * std::max(1.0, base.gamma / base.epsilon));

  SweepResult out;
  out.rows.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    double m_r = budget * (static_cast<double>(i) / static_cast<double>(steps - 1));
    double m = 0.0;
    detail::exact_budget_split(budget, m_r, m);

    ModelParams par = base;
    par.m = m;
    par.m_r = m_r;
    par.validate();

    SweepRow row;
    row.m_r = m_r;
    row.m = m;
    row.tau = derive_constants(par).tau;
    const SteadyResult<4> sr =
        integrate_to_steady<4>(make_full_field(par), init.to_array(), cfg, horizon);
    row.converged = sr.converged;
    row.c_inf = sr.state[0];
    row.r_inf = sr.state[1];
    row.total = row.c_inf + row.r_inf;
    out.rows.push_back(row);
  }

  // best row by total customers; converged rows take precedence over flagged ones
  bool have = false;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const SweepRow& r = out.rows[i];
    if (!have) {
      out.argmax = i;
      have = true;
      continue;
    }
    const SweepRow& best = out.rows[out.argmax];
    if ((r.converged && !best.converged) ||
        (r.converged == best.converged && r.total > best.total))
      out.argmax = i;
  }
  return out;
}

inline std::size_t distinct_policy_count(const std::vector<SweepRow>& rows) {
  std::vector<std::pair<double, double>> seen;
  for (const SweepRow& r : rows) {
    const auto key = std::make_pair(r.m_r, r.m);
    if (std::find(seen.begin(), seen.end(), key) == seen.end()) seen.push_back(key);
  }
  return seen.size();
}

}  // namespace custdyn
