// custdyn: command-line front end for the customer-dynamics toolkit.
//
// Subcommands: simulate, equilibria, check, compare, sweep, scenario.
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include <custdyn/custdyn.hpp>

namespace {

using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string output;
};

custdyn::RunConfig resolve_config(const CommonArgs& args) {
  const bool have_config = !args.config_path.empty();
  const bool have_preset = !args.preset.empty();
  if (have_config == have_preset)
    throw custdyn::ConfigError("exactly one of --config and --preset is required");
  custdyn::RunConfig cfg = have_preset ? custdyn::preset_config(args.preset)
                                       : custdyn::load_config(args.config_path);
  if (!args.output.empty()) cfg.output = args.output;
  return cfg;
}

void with_output(const custdyn::RunConfig& cfg,
                 const std::function<void(std::ostream&)>& body) {
  if (cfg.output) {
    std::ofstream out(*cfg.output);
    if (!out) throw custdyn::ConfigError("cannot open output file '" + *cfg.output + "'");
    body(out);
    if (!out) throw custdyn::ConfigError("write failed for '" + *cfg.output + "'");
  } else {
    body(std::cout);
  }
}

double population_scale(const custdyn::ModelParams& par, const custdyn::State& init) {
  return par.epsilon > 0.0 ? par.gamma / par.epsilon : init.total();
}

void cmd_simulate(const custdyn::RunConfig& cfg, double t_end, const std::string& which) {
  if (which == "full") {
    const auto traj = custdyn::integrate<4>(custdyn::make_full_field(cfg.params),
                                            cfg.init.to_array(), 0.0, t_end, cfg.integrator);
    with_output(cfg, [&](std::ostream& out) {
      custdyn::write_trajectory_csv(out, traj, population_scale(cfg.params, cfg.init));
    });
  } else if (which == "reduced") {
    const custdyn::DerivedConstants k = custdyn::derive_constants(cfg.params);
    const auto traj = custdyn::integrate<2>(custdyn::make_reduced_field(cfg.params),
                                            custdyn::Vec2{cfg.init.c, cfg.init.r}, 0.0,
                                            t_end, cfg.integrator);
    with_output(cfg, [&](std::ostream& out) { custdyn::write_reduced_csv(out, traj, k); });
  } else {
    throw custdyn::ConfigError("--which must be 'full' or 'reduced'");
  }
}

json state_to_json(const custdyn::State& s) {
  return json{{"C", s.c}, {"R", s.r}, {"P_C", s.pc}, {"P_R", s.pr}};
}

json optional_to_json(const std::optional<double>& v) {
  if (v) return json(*v);
  return json(nullptr);
}

void cmd_equilibria(const custdyn::RunConfig& cfg) {
  const auto scenario = custdyn::detect_scenario(cfg.params);
  const auto eqs = custdyn::find_equilibria(cfg.params);
  const custdyn::DerivedConstants k = custdyn::derive_constants(cfg.params);

  json report;
  report["scenario"] = custdyn::scenario_name(*scenario);
  report["tau"] = optional_to_json(k.tau);
  report["equilibria"] = json::array();
  for (const auto& eq : eqs) {
    json je;
    je["route"] = custdyn::route_name(eq.route);
    je["state"] = state_to_json(eq.state);
    je["residual"] = eq.residual;
    je["feasible"] = eq.feasible;

    const custdyn::StabilityReport rep = custdyn::stability_report(cfg.params, eq);
    json js;
    js["eigenvalues"] = json::array();
    for (const auto& ev : rep.eigenvalues)
      js["eigenvalues"].push_back(json::array({ev.real(), ev.imag()}));
    js["classification"] = custdyn::stability_name(rep.classification);
    js["spectral_abscissa"] = rep.spectral_abscissa;
    js["closed_form_match"] =
        rep.closed_form_match ? json(*rep.closed_form_match) : json(nullptr);
    js["closed_forms"] = json::array();
    for (const auto& f : rep.closed_forms)
      js["closed_forms"].push_back(json{{"label", f.label},
                                        {"value", f.value},
                                        {"in_spectrum", f.in_spectrum},
                                        {"variant", f.variant}});
    je["stability"] = js;

    je["formula_checks"] = json::array();
    for (const auto& f : custdyn::closed_form_cross_checks(cfg.params, eq))
      je["formula_checks"].push_back(json{{"label", f.label},
                                          {"solved", f.solved},
                                          {"variant_value", f.variant},
                                          {"matches", f.matches}});
    report["equilibria"].push_back(je);
  }
  with_output(cfg, [&](std::ostream& out) { out << report.dump(2) << '\n'; });
}

void cmd_check(const custdyn::RunConfig& cfg) {
  const custdyn::DerivedConstants k = custdyn::derive_constants(cfg.params);
  const custdyn::ContractionCondition cond =
      custdyn::check_contraction_condition(cfg.params);
  json report;
  report["p"] = k.p;
  report["q"] = k.q;
  report["u"] = k.u;
  report["v"] = k.v;
  report["n_inf"] = k.n_inf;
  report["tau"] = optional_to_json(k.tau);
  report["theta"] = optional_to_json(k.theta);
  report["contraction_value"] = optional_to_json(cond.value);
  report["contraction_satisfied"] = cond.satisfied;
  with_output(cfg, [&](std::ostream& out) { out << report.dump(2) << '\n'; });
}

void cmd_compare(const custdyn::RunConfig& cfg, double t_end) {
  const custdyn::ComparisonResult res =
      custdyn::compare_full_reduced(cfg.params, cfg.init, t_end, cfg.integrator);
  with_output(cfg, [&](std::ostream& out) {
    custdyn::write_compare_csv(out, res);
    out << "# sup_diff_end=" << custdyn::format_number(res.sup_diff_end)
        << " initial_p_offset=" << custdyn::format_number(res.initial_p_offset)
        << " contraction_value=";
    if (res.condition.value)
      out << custdyn::format_number(*res.condition.value);
    else
      out << "n/a";
    out << " satisfied=" << (res.condition.satisfied ? '1' : '0') << '\n';
  });
}

void cmd_sweep(const custdyn::RunConfig& cfg, std::optional<double> budget,
               std::size_t steps, double horizon) {
  const double b = budget ? *budget : cfg.params.m + cfg.params.m_r;
  const custdyn::SweepResult res =
      custdyn::budget_sweep(cfg.params, cfg.init, b, steps, horizon, cfg.integrator);
  with_output(cfg, [&](std::ostream& out) { custdyn::write_sweep_csv(out, res); });
}

void cmd_scenario(const CommonArgs& args) {
  if (args.preset.empty())
    throw custdyn::ConfigError("scenario requires --preset (one of the bundled names)");
  custdyn::RunConfig cfg = custdyn::preset_config(args.preset);
  if (!args.output.empty()) cfg.output = args.output;
  const json j = custdyn::config_to_json(cfg);
  with_output(cfg, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "Path to a JSON run configuration");
  sub->add_option("--preset", args.preset,
                  "Bundled scenario preset (fig1-left, fig1-right, fig2-left, fig2-right, "
                  "fig3, fig4, fig5, fig6)");
  sub->add_option("--output", args.output, "Output file (default: config's output, else stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"customer-dynamics simulation and analysis toolkit"};
  app.require_subcommand(1);

  CommonArgs sim_args;
  double sim_t_end = 500.0;
  std::string sim_which = "full";
  CLI::App* sim = app.add_subcommand("simulate", "Integrate the model and write a CSV trajectory");
  add_common(sim, sim_args);
  sim->add_option("--t-end", sim_t_end, "End time in years (default 500)");
  sim->add_option("--which", sim_which, "Which system to integrate: full | reduced");

  CommonArgs eq_args;
  CLI::App* eq = app.add_subcommand("equilibria", "Report all equilibria with stability as JSON");
  add_common(eq, eq_args);

  CommonArgs check_args;
  CLI::App* chk = app.add_subcommand("check", "Report derived constants and the contraction condition as JSON");
  add_common(chk, check_args);

  CommonArgs cmp_args;
  double cmp_t_end = 500.0;
  CLI::App* cmp = app.add_subcommand("compare", "Write the full-vs-reduced difference series as CSV");
  add_common(cmp, cmp_args);
  cmp->add_option("--t-end", cmp_t_end, "End time in years (default 500)");

  CommonArgs sweep_args;
  double sweep_budget = -1.0;
  bool sweep_budget_set = false;
  std::size_t sweep_steps = 41;
  double sweep_horizon = 2000.0;
  CLI::App* swp = app.add_subcommand("sweep", "Sweep marketing-budget splits and write a CSV");
  add_common(swp, sweep_args);
  swp->add_option("--budget", sweep_budget, "Total budget to split (default: configured m + m_r)")
      ->each([&](const std::string&) { sweep_budget_set = true; });
  swp->add_option("--steps", sweep_steps, "Number of grid points (default 41)");
  swp->add_option("--horizon", sweep_horizon, "Per-run settling horizon in years (default 2000)");

  CommonArgs scen_args;
  CLI::App* scen = app.add_subcommand("scenario", "Emit a bundled preset as a JSON config");
  add_common(scen, scen_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      cmd_simulate(resolve_config(sim_args), sim_t_end, sim_which);
    } else if (eq->parsed()) {
      cmd_equilibria(resolve_config(eq_args));
    } else if (chk->parsed()) {
      cmd_check(resolve_config(check_args));
    } else if (cmp->parsed()) {
      cmd_compare(resolve_config(cmp_args), cmp_t_end);
    } else if (swp->parsed()) {
      cmd_sweep(resolve_config(sweep_args),
                sweep_budget_set ? std::optional<double>(sweep_budget) : std::nullopt,
                sweep_steps, sweep_horizon);
    } else if (scen->parsed()) {
      cmd_scenario(scen_args);
    }
  } catch (const custdyn::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const custdyn::DegenerateParametersError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
