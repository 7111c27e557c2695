#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include <custdyn/config.hpp>

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_file(const std::string& stem) {
  static int counter = 0;
  return fs::temp_directory_path() /
         ("custdyn_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) +
          "_" + stem);
}

CliResult run_cli(const std::string& args) {
  const fs::path out_path = scratch_file("stdout");
  const fs::path err_path = scratch_file("stderr");
  const std::string cmd = std::string(CUSTDYN_BIN) + " " + args + " > " +
                          out_path.string() + " 2> " + err_path.string();
  const int raw = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  fs::remove(out_path);
  fs::remove(err_path);
  return res;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

std::vector<double> fields_of(const std::string& line) {
  std::vector<double> vals;
  std::istringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ','))
    vals.push_back(cell.empty() ? std::numeric_limits<double>::quiet_NaN()
                                : std::strtod(cell.c_str(), nullptr));
  return vals;
}

// Parses "key=value" tokens out of a trailer comment line.
double trailer_value(const std::string& line, const std::string& key) {
  const auto pos = line.find(key + "=");
  REQUIRE(pos != std::string::npos);
  return std::strtod(line.c_str() + pos + key.size() + 1, nullptr);
}

}  // namespace

TEST_CASE("check reports derived constants", "[cli]") {
  const CliResult sat = run_cli("check --preset fig6");
  REQUIRE(sat.exit_code == 0);
  const json j = json::parse(sat.out);
  CHECK_THAT(j.at("contraction_value").get<double>(),
             WithinRel(1.6217444939681072, 1e-12));
  CHECK(j.at("contraction_satisfied").get<bool>());
  CHECK_THAT(j.at("p").get<double>() + j.at("q").get<double>(),
             WithinRel(j.at("n_inf").get<double>(), 1e-12));
  CHECK(j.at("tau").is_number());

  const CliResult unsat = run_cli("check --preset fig3");
  REQUIRE(unsat.exit_code == 0);
  const json k = json::parse(unsat.out);
  CHECK_THAT(k.at("contraction_value").get<double>(),
             WithinRel(0.08197817100805938, 1e-12));
  CHECK_FALSE(k.at("contraction_satisfied").get<bool>());
}

TEST_CASE("simulate writes a conservative trajectory", "[cli]") {
  const CliResult res = run_cli("simulate --preset fig3 --t-end 500");
  REQUIRE(res.exit_code == 0);

  const auto lines = lines_of(res.out);
  REQUIRE(lines.size() > 10);
  CHECK(lines[0] == "t,C,R,P_C,P_R,N");

  const auto first = fields_of(lines[1]);
  REQUIRE(first.size() == 6);
  CHECK(first[0] == 0.0);
  CHECK(first[1] == 2200.0);
  CHECK(first[2] == 20.0);

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto row = fields_of(lines[i]);
    REQUIRE(row.size() == 6);
    CHECK_THAT(row[5], WithinRel(24420.0, 1e-6));
    for (int c = 1; c <= 4; ++c) CHECK(row[c] >= 0.0);
  }
  CHECK(fields_of(lines.back())[0] == 500.0);
}

TEST_CASE("simulate can emit the planar approximation", "[cli]") {
  const CliResult res = run_cli("simulate --preset fig6 --which reduced --t-end 100");
  REQUIRE(res.exit_code == 0);

  const auto lines = lines_of(res.out);
  REQUIRE(lines.size() > 5);
  CHECK(lines[0] == "t,C_a,R_a,P_C_a,P_R_a");
  const auto first = fields_of(lines[1]);
  REQUIRE(first.size() == 5);
  CHECK(first[0] == 0.0);
  CHECK(first[1] == 2200.0);
  CHECK(first[2] == 20.0);
  CHECK(fields_of(lines.back())[0] == 100.0);
}

TEST_CASE("simulate captures the early dip before recovery", "[cli]") {
  const CliResult res = run_cli("simulate --preset fig5 --t-end 7");
  REQUIRE(res.exit_code == 0);

  const auto lines = lines_of(res.out);
  double min_c = 1e30;
  for (std::size_t i = 1; i < lines.size(); ++i)
    min_c = std::min(min_c, fields_of(lines[i])[1]);
  CHECK(min_c > 1880.0);
  CHECK(min_c < 1900.0);

  const auto last = fields_of(lines.back());
  CHECK(last[0] == 7.0);
  CHECK(last[1] > 2000.0);
  CHECK_THAT(last[1], WithinRel(2118.88677706623, 1e-6));
}

TEST_CASE("equilibria reports the word-of-mouth pair", "[cli]") {
  const CliResult res = run_cli("equilibria --preset fig1-right");
  REQUIRE(res.exit_code == 0);
  const json j = json::parse(res.out);

  CHECK(j.at("scenario") == "word-of-mouth");
  CHECK_THAT(j.at("tau").get<double>(), WithinRel(2.583378947368421, 1e-10));

  const auto& eqs = j.at("equilibria");
  REQUIRE(eqs.size() == 2);

  const json* extinction = nullptr;
  const json* interior = nullptr;
  for (const auto& e : eqs) {
    if (e.at("route") == "wom-extinction") extinction = &e;
    if (e.at("route") == "wom-interior") interior = &e;
  }
  REQUIRE(extinction != nullptr);
  REQUIRE(interior != nullptr);

  CHECK((*extinction).at("stability").at("classification") == "unstable");
  CHECK((*interior).at("stability").at("classification") == "stable");
  CHECK_THAT((*interior).at("state").at("C").get<double>(),
             WithinRel(188.9565321434122, 1e-6));

  int mismatched = 0;
  for (const auto& f : (*interior).at("formula_checks"))
    if (!f.at("matches").get<bool>()) ++mismatched;
  CHECK(mismatched >= 2);
}

TEST_CASE("equilibria handles the no-referral scenario", "[cli]") {
  const CliResult res = run_cli("equilibria --preset fig2-left");
  REQUIRE(res.exit_code == 0);
  const json j = json::parse(res.out);

  CHECK(j.at("scenario") == "no-referral");
  const auto& eqs = j.at("equilibria");
  REQUIRE(eqs.size() == 1);
  CHECK(eqs[0].at("route") == "no-referral");
  CHECK(eqs[0].at("feasible").get<bool>());
  CHECK(eqs[0].at("stability").at("classification") == "stable");
  CHECK_THAT(eqs[0].at("state").at("C").get<double>(),
             WithinRel(1010.125571549598, 1e-8));
}

TEST_CASE("compare emits the difference series with a summary trailer", "[cli]") {
  const CliResult res = run_cli("compare --preset fig6 --t-end 500");
  REQUIRE(res.exit_code == 0);

  const auto lines = lines_of(res.out);
  REQUIRE(lines.size() > 5);
  CHECK(lines[0] == "t,dC,dR,dPC,dPR,sum");
  REQUIRE(lines.back().rfind("# ", 0) == 0);

  const auto last_row = fields_of(lines[lines.size() - 2]);
  REQUIRE(last_row.size() == 6);
  CHECK(last_row[0] == 500.0);
  CHECK(last_row[5] <= 1e-3 * 24420.0);

  const std::string& trailer = lines.back();
  CHECK_THAT(trailer_value(trailer, "sup_diff_end"), WithinRel(0.6491178460760665, 1e-3));
  CHECK_THAT(trailer_value(trailer, "initial_p_offset"),
             WithinRel(47.442523614325296, 1e-10));
  CHECK_THAT(trailer_value(trailer, "contraction_value"),
             WithinRel(1.6217444939681072, 1e-10));
  CHECK_THAT(trailer, ContainsSubstring("satisfied=1"));
}

TEST_CASE("sweep writes one row per split plus the best row", "[cli]") {
  const CliResult res = run_cli("sweep --preset fig3 --budget 40 --steps 5");
  REQUIRE(res.exit_code == 0);

  const auto lines = lines_of(res.out);
  REQUIRE(lines.size() == 7);  // header + 5 rows + argmax trailer
  CHECK(lines[0] == "m_R,m,C_inf,R_inf,total,tau,converged");
  REQUIRE(lines.back().rfind("# argmax", 0) == 0);

  double prev_tau = -1.0;
  for (int i = 1; i <= 5; ++i) {
    const auto row = fields_of(lines[i]);
    REQUIRE(row.size() == 7);
    CHECK(row[0] == 10.0 * (i - 1));
    CHECK(row[0] + row[1] == 40.0);
    CHECK(row[4] == row[2] + row[3]);
    CHECK(row[5] > prev_tau);
    prev_tau = row[5];
    CHECK(row[6] == 1.0);
  }

  const double best = trailer_value(lines.back(), "total");
  for (int i = 1; i <= 5; ++i) CHECK(fields_of(lines[i])[4] <= best);
}

TEST_CASE("scenario emits a config the other commands accept", "[cli]") {
  const CliResult emitted = run_cli("scenario --preset fig6");
  REQUIRE(emitted.exit_code == 0);
  CHECK_NOTHROW(json::parse(emitted.out));

  const fs::path cfg_path = scratch_file("fig6.json");
  {
    std::ofstream out(cfg_path);
    out << emitted.out;
  }

  const CliResult from_config = run_cli("check --config " + cfg_path.string());
  const CliResult from_preset = run_cli("check --preset fig6");
  REQUIRE(from_config.exit_code == 0);
  REQUIRE(from_preset.exit_code == 0);
  CHECK(from_config.out == from_preset.out);
  fs::remove(cfg_path);
}

TEST_CASE("configuration mistakes exit with code 2", "[cli]") {
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("simulate").exit_code == 2);
  CHECK(run_cli("simulate --preset fig3 --config x.json").exit_code == 2);
  CHECK(run_cli("check --config /no/such/custdyn_config.json").exit_code == 2);
  CHECK(run_cli("check --preset fig99").exit_code == 2);
  CHECK(run_cli("scenario").exit_code == 2);

  const fs::path bad_path = scratch_file("bad.json");
  {
    json j = custdyn::config_to_json(custdyn::preset_config("fig3"));
    j["zeta"] = 1.0;
    std::ofstream out(bad_path);
    out << j.dump(2) << '\n';
  }
  const CliResult res = run_cli("check --config " + bad_path.string());
  CHECK(res.exit_code == 2);
  CHECK_THAT(res.err, ContainsSubstring("zeta"));
  fs::remove(bad_path);

  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("numeric failures exit with code 3", "[cli]") {
  const fs::path cfg_path = scratch_file("tiny_budget.json");
  {
    json j = custdyn::config_to_json(custdyn::preset_config("fig3"));
    j["max_steps"] = 10.0;
    std::ofstream out(cfg_path);
    out << j.dump(2) << '\n';
  }
  const CliResult res = run_cli("simulate --config " + cfg_path.string() + " --t-end 500");
  CHECK(res.exit_code == 3);
  CHECK_THAT(res.err, ContainsSubstring("error"));
  fs::remove(cfg_path);
}
