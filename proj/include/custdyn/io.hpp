#pragma once

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>

#include "analysis.hpp"
#include "integrate.hpp"
#include "model.hpp"

namespace custdyn {

// Shortest exact textual form we rely on: 17 significant digits round-trip a
// double bit-for-bit.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

namespace detail {

// Integration roundoff can leave a compartment a hair below zero; only such
// sub-noise values are snapped to 0 for display, real negatives pass through.
inline double clamp_display(double v, double slack) {
  return (v < 0.0 && v > -slack) ? 0.0 : v;
}

}  // namespace detail

inline void write_trajectory_csv(std::ostream& out, const Trajectory<4>& traj,
                                 double n_scale) {
  const double slack = 1e-9 * std::max(1.0, n_scale);
  out << "t,C,R,P_C,P_R,N\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const auto& s = traj.states[i];
    const double n = s[0] + s[1] + s[2] + s[3];
    out << format_number(traj.times[i]);
    for (double v : s) out << ',' << format_number(detail::clamp_display(v, slack));
    out << ',' << format_number(n) << '\n';
  }
}

// The planar system's potential columns are the complements against the
// limiting totals q and p.
inline void write_reduced_csv(std::ostream& out, const Trajectory<2>& traj,
                              const DerivedConstants& k) {
  const double slack = 1e-9 * std::max(1.0, k.n_inf);
  out << "t,C_a,R_a,P_C_a,P_R_a\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const auto& s = traj.states[i];
    out << format_number(traj.times[i]) << ','
        << format_number(detail::clamp_display(s[0], slack)) << ','
        << format_number(detail::clamp_display(s[1], slack)) << ','
        << format_number(detail::clamp_display(k.q - s[0], slack)) << ','
        << format_number(detail::clamp_display(k.p - s[1], slack)) << '\n';
  }
}

inline void write_compare_csv(std::ostream& out, const ComparisonResult& res) {
  out << "t,dC,dR,dPC,dPR,sum\n";
  for (std::size_t i = 0; i < res.times.size(); ++i) {
    out << format_number(res.times[i]) << ',' << format_number(res.dc[i]) << ','
        << format_number(res.dr[i]) << ',' << format_number(res.dpc[i]) << ','
        << format_number(res.dpr[i]) << ',' << format_number(res.diff_series[i]) << '\n';
  }
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& res) {
  out << "m_R,m,C_inf,R_inf,total,tau,converged\n";
  for (const SweepRow& r : res.rows) {
    out << format_number(r.m_r) << ',' << format_number(r.m) << ','
        << format_number(r.c_inf) << ',' << format_number(r.r_inf) << ','
        << format_number(r.total) << ',';
    if (r.tau) out << format_number(*r.tau);
    out << ',' << (r.converged ? '1' : '0') << '\n';
  }
  if (!res.rows.empty()) {
    const SweepRow& best = res.rows[res.argmax];
    out << "# argmax m_R=" << format_number(best.m_r) << " m=" << format_number(best.m)
        << " total=" << format_number(best.total) << '\n';
  }
}

}  // namespace custdyn
