#pragma once

#include <custdyn/custdyn.hpp>

// Shared fixtures: the baseline calibration (every rate 2e-4, churn 0.18,
// renewal 0.01, crossover tied to the initial compartment ratio, inflow
// balancing the initial population) and its scenario variants.
namespace fixtures {

inline custdyn::ModelParams baseline_params(double m, double m_r) {
  custdyn::ModelParams par;
  par.lambda1 = 2e-4;
  par.lambda2 = 2e-4;
  par.lambda3 = 2e-4;
  par.lambda4 = 2e-4;
  par.lambda5 = 2e-4 * 20.0 / 2200.0;
  par.lambda6 = 2e-4;
  par.lambda7 = 2e-4;
  par.m = m;
  par.m_r = m_r;
  par.beta1 = 0.18;
  par.beta2 = 0.18;
  par.epsilon = 0.01;
  par.gamma = 0.01 * 24420.0;
  par.alpha = 0.01;
  return par;
}

inline custdyn::State baseline_init() { return custdyn::State{2200.0, 20.0, 22000.0, 200.0}; }

// Referral contact only: all conversion and crossover channels off.
inline custdyn::ModelParams wom_params(double m, double m_r) {
  custdyn::ModelParams par = baseline_params(m, m_r);
  par.lambda1 = par.lambda3 = par.lambda4 = par.lambda5 = par.lambda7 = 0.0;
  par.lambda2 = 1e-5;
  return par;
}

// No referral contact at all; the balance equations are linear.
inline custdyn::ModelParams no_referral_params() {
  custdyn::ModelParams par = baseline_params(40.0, 0.0);
  par.lambda2 = 0.0;
  par.lambda6 = 0.0;
  return par;
}

// Crossovers off, referral contact on.
inline custdyn::ModelParams static_params() {
  custdyn::ModelParams par = baseline_params(40.0, 0.0);
  par.lambda5 = 0.0;
  par.lambda7 = 0.0;
  return par;
}

}  // namespace fixtures
