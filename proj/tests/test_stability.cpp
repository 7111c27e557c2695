#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <custdyn/custdyn.hpp>

#include "support.hpp"

using namespace custdyn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Mat4 random_mat4(std::mt19937& rng) {
  std::uniform_real_distribution<double> entry(-3.0, 3.0);
  Mat4 a;
  for (auto& row : a)
    for (double& v : row) v = entry(rng);
  return a;
}

// Determinant by Gaussian elimination with partial pivoting; independent of
// the trace-recursion coefficients under test.
double det4(Mat4 a) {
  double det = 1.0;
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) return 0.0;
    if (piv != col) {
      std::swap(a[piv], a[col]);
      det = -det;
    }
    det *= a[col][col];
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return det;
}

const ClosedFormEig& find_eig(const std::vector<ClosedFormEig>& eigs,
                              const std::string& label) {
  for (const auto& e : eigs)
    if (e.label == label) return e;
  FAIL("missing closed-form entry: " << label);
  static ClosedFormEig dummy;
  return dummy;
}

void check_spectrum(const std::array<std::complex<double>, 4>& eigs,
                    const std::array<double, 4>& expected, double rel) {
  for (int i = 0; i < 4; ++i) {
    // absolute floor: repeated eigenvalues are only recoverable to about the
    // square root of machine precision
    CHECK_THAT(eigs[i].real(), WithinRel(expected[i], rel) || WithinAbs(expected[i], 5e-7));
    CHECK(std::abs(eigs[i].imag()) <= 1e-6);
  }
}

}  // namespace

TEST_CASE("characteristic coefficients of a diagonal matrix", "[stability]") {
  Mat4 a{};
  a[0][0] = 1.0;
  a[1][1] = 2.0;
  a[2][2] = 3.0;
  a[3][3] = 4.0;
  const auto c = characteristic_poly4(a);
  CHECK_THAT(c[0], WithinRel(-10.0, 1e-12));
  CHECK_THAT(c[1], WithinRel(35.0, 1e-12));
  CHECK_THAT(c[2], WithinRel(-50.0, 1e-12));
  CHECK_THAT(c[3], WithinRel(24.0, 1e-12));
  const auto eigs = eigenvalues4(a);
  for (int i = 0; i < 4; ++i) {
    CHECK_THAT(eigs[i].real(), WithinRel(static_cast<double>(i + 1), 1e-8));
    CHECK(eigs[i].imag() == 0.0);
  }
}

TEST_CASE("a rotation block yields an exact conjugate pair", "[stability]") {
  Mat4 a{};
  a[0][1] = -1.0;
  a[1][0] = 1.0;
  a[2][2] = -2.0;
  a[3][3] = -3.0;
  const auto eigs = eigenvalues4(a);
  CHECK_THAT(eigs[0].real(), WithinRel(-3.0, 1e-8));
  CHECK_THAT(eigs[1].real(), WithinRel(-2.0, 1e-8));
  CHECK_THAT(eigs[2].real(), WithinAbs(0.0, 1e-8));
  CHECK_THAT(eigs[2].imag(), WithinRel(-1.0, 1e-8));
  CHECK(eigs[3] == std::conj(eigs[2]));
}

TEST_CASE("eigenvalue sums and products reproduce trace and determinant",
          "[stability]") {
  std::mt19937 rng(24681);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat4 a = random_mat4(rng);
    const auto eigs = eigenvalues4(a);
    std::complex<double> sum{0.0, 0.0}, prod{1.0, 0.0};
    for (const auto& e : eigs) {
      sum += e;
      prod *= e;
    }
    const double tr = a[0][0] + a[1][1] + a[2][2] + a[3][3];
    const double dt = det4(a);
    const double scale = std::max({1.0, std::abs(tr), std::abs(dt)});
    REQUIRE_THAT(sum.real(), WithinAbs(tr, 1e-8 * scale));
    REQUIRE(std::abs(sum.imag()) <= 1e-8 * scale);
    REQUIRE_THAT(prod.real(), WithinAbs(dt, 1e-6 * scale));
    REQUIRE(std::abs(prod.imag()) <= 1e-6 * scale);
  }
}

TEST_CASE("non-finite matrices are rejected", "[stability]") {
  Mat4 a{};
  a[2][1] = std::nan("");
  CHECK_THROWS_AS(characteristic_poly4(a), InvalidInputError);
}

TEST_CASE("spectrum at the baseline balance state", "[stability]") {
  const ModelParams par = fixtures::baseline_params(40.0, 0.0);
  const auto eqs = equilibria_general(par);
  REQUIRE_FALSE(eqs.empty());
  const auto rep = stability_report(par, eqs.front());
  check_spectrum(rep.eigenvalues,
                 {-0.2010100914, -0.1547309937, -0.0102018182, -0.01}, 1e-6);
  CHECK(rep.classification == StabilityClass::stable);
  CHECK(rep.spectral_abscissa < 0.0);
  CHECK_FALSE(rep.closed_form_match.has_value());
  CHECK(rep.closed_forms.empty());
}

TEST_CASE("spectra at the mixed-budget balance states", "[stability]") {
  {
    const ModelParams par = fixtures::baseline_params(30.0, 10.0);
    const auto eqs = equilibria_general(par);
    REQUIRE_FALSE(eqs.empty());
    const auto rep = stability_report(par, eqs.front());
    check_spectrum(rep.eigenvalues,
                   {-0.3589666465, -0.2279048601, -0.0102018182, -0.01}, 1e-6);
    CHECK(rep.classification == StabilityClass::stable);
  }
  {
    ModelParams par = fixtures::baseline_params(30.0, 10.0);
    par.lambda2 = 1e-5;
    const auto eqs = equilibria_general(par);
    REQUIRE_FALSE(eqs.empty());
    const auto rep = stability_report(par, eqs.front());
    check_spectrum(rep.eigenvalues,
                   {-0.3135210457, -0.1977081106, -0.0102018182, -0.01}, 1e-6);
    CHECK(rep.classification == StabilityClass::stable);
  }
}

TEST_CASE("the general route carries no closed-form eigenvalues", "[stability]") {
  const ModelParams par = fixtures::baseline_params(40.0, 0.0);
  const auto eqs = equilibria_general(par);
  REQUIRE_FALSE(eqs.empty());
  CHECK_THROWS_AS(closed_form_eigenvalues(par, eqs.front()), PreconditionError);
}

TEST_CASE("linear-route spectrum splits into known modes and a quadratic pair",
          "[stability]") {
  const ModelParams par = fixtures::no_referral_params();
  const Equilibrium eq = equilibrium_no_referral(par);
  const auto rep = stability_report(par, eq);
  check_spectrum(rep.eigenvalues,
                 {-0.19840181818181818, -0.1982, -0.010201818181818185, -0.01}, 1e-8);
  CHECK(rep.classification == StabilityClass::stable);
  REQUIRE(rep.closed_form_match.has_value());
  CHECK(*rep.closed_form_match);
  CHECK(find_eig(rep.closed_forms, "turnover").in_spectrum);
  const ClosedFormEig& cross = find_eig(rep.closed_forms, "crossover-mode");
  CHECK(cross.in_spectrum);
  CHECK_THAT(cross.value, WithinRel(-0.010201818181818182, 1e-12));
}

TEST_CASE("static-route spectrum matches its closed forms and flags the sign variant",
          "[stability]") {
  const ModelParams par = fixtures::static_params();
  const Equilibrium eq = equilibrium_static(par);
  const auto rep = stability_report(par, eq);
  check_spectrum(rep.eigenvalues,
                 {-0.2008348782576808, -0.15462975651536157, -0.01, -0.01}, 1e-8);
  CHECK(rep.classification == StabilityClass::stable);
  REQUIRE(rep.closed_form_match.has_value());
  CHECK(*rep.closed_form_match);
  CHECK(find_eig(rep.closed_forms, "turnover").in_spectrum);
  const ClosedFormEig& exch = find_eig(rep.closed_forms, "referrer-exchange-mode");
  CHECK(exch.in_spectrum);
  CHECK_THAT(exch.value, WithinRel(-0.15462975651536157, 1e-12));
  const ClosedFormEig& conv = find_eig(rep.closed_forms, "customer-conversion-mode");
  CHECK(conv.in_spectrum);
  CHECK_THAT(conv.value, WithinRel(-0.2008348782576808, 1e-12));
  // the sign-flipped arrangement is reported but absent from the spectrum
  const ClosedFormEig& alt = find_eig(rep.closed_forms, "customer-conversion-mode-alternate-sign");
  CHECK(alt.variant);
  CHECK_FALSE(alt.in_spectrum);
  CHECK_THAT(alt.value, WithinRel(-0.19556512174231924, 1e-12));
}

TEST_CASE("extinction flips from stable to unstable across the persistence threshold",
          "[stability]") {
  {
    const ModelParams par = fixtures::wom_params(40.0, 0.0);
    const auto eqs = equilibria_wom(par);
    REQUIRE(eqs.size() == 1);
    const auto rep = stability_report(par, eqs[0]);
    check_spectrum(rep.eigenvalues, {-0.19, -0.187558, -0.01, -0.01}, 1e-8);
    CHECK(rep.classification == StabilityClass::stable);
    REQUIRE(rep.closed_form_match.has_value());
    CHECK(*rep.closed_form_match);
    const ClosedFormEig& growth = find_eig(rep.closed_forms, "referrer-growth-rate");
    CHECK_THAT(growth.value, WithinRel(-0.187558, 1e-10));
  }
  {
    const ModelParams par = fixtures::wom_params(30.0, 10.0);
    const auto eqs = equilibria_wom(par);
    REQUIRE(eqs.size() == 2);
    const auto rep = stability_report(par, eqs[0]);
    check_spectrum(rep.eigenvalues, {-0.19, -0.01, -0.01, 0.3008420000000001}, 1e-8);
    CHECK(rep.classification == StabilityClass::unstable);
    CHECK(rep.spectral_abscissa > 0.0);
    REQUIRE(rep.closed_form_match.has_value());
    CHECK(*rep.closed_form_match);

    const auto rep_in = stability_report(par, eqs[1]);
    check_spectrum(rep_in.eigenvalues,
                   {-0.30084199999999996, -0.1914967264, -0.01, -0.01}, 1e-6);
    CHECK(rep_in.classification == StabilityClass::stable);
    REQUIRE(rep_in.closed_form_match.has_value());
    CHECK(*rep_in.closed_form_match);
    const ClosedFormEig& rmode = find_eig(rep_in.closed_forms, "referrer-mode");
    CHECK_THAT(rmode.value, WithinRel(-0.30084199999999996, 1e-10));
  }
}

TEST_CASE("perturbations around a globally attracting state return", "[stability]") {
  const ModelParams par = fixtures::no_referral_params();
  const Equilibrium eq = equilibrium_no_referral(par);
  const auto res = perturbation_test(par, eq, 1e-4);
  CHECK(res.returns_to_eq);
  CHECK_FALSE(res.escape_direction.has_value());
  CHECK_FALSE(res.inconclusive);
  REQUIRE(res.runs.size() == 8);
  for (const auto& run : res.runs) {
    REQUIRE_FALSE(run.skipped);
    REQUIRE(run.converged);
    REQUIRE(run.returned);
  }
}

TEST_CASE("perturbations that would leave the orthant are skipped, not forced",
          "[stability]") {
  const ModelParams par = fixtures::no_referral_params();
  const Equilibrium eq = equilibrium_no_referral(par);
  // delta = 24.42 exceeds the referrer level 10.08
  const auto res = perturbation_test(par, eq, 1e-3);
  CHECK(res.returns_to_eq);
  REQUIRE(res.runs.size() == 8);
  int skipped = 0, ran = 0;
  for (const auto& run : res.runs) {
    if (run.skipped) {
      ++skipped;
      REQUIRE_FALSE(run.returned);
    } else {
      ++ran;
      REQUIRE(run.returned);
    }
  }
  CHECK(skipped == 2);
  CHECK(ran == 6);
}

TEST_CASE("an unstable state is escaped along the referrer direction", "[stability]") {
  const ModelParams par = fixtures::wom_params(30.0, 10.0);
  const auto eqs = equilibria_wom(par);
  REQUIRE(eqs.size() == 2);
  const auto res = perturbation_test(par, eqs[0], 1e-3);
  CHECK_FALSE(res.returns_to_eq);
  REQUIRE(res.escape_direction.has_value());
  CHECK(res.escape_direction->r == 1.0);
  CHECK(res.escape_direction->pr == -1.0);
  CHECK(res.escape_direction->c == 0.0);
  bool saw_escape = false;
  for (const auto& run : res.runs)
    if (!run.skipped && run.converged && !run.returned) {
      saw_escape = true;
      REQUIRE(run.distance > 100.0);  // landed on the interior state
    }
  REQUIRE(saw_escape);
}

TEST_CASE("dynamics agree with the spectral classification across scenarios",
          "[stability]") {
  struct Case {
    ModelParams par;
    Equilibrium eq;
  };
  std::vector<Case> cases;
  {
    const ModelParams par = fixtures::wom_params(40.0, 0.0);
    cases.push_back({par, equilibria_wom(par).front()});
  }
  {
    const ModelParams par = fixtures::wom_params(30.0, 10.0);
    cases.push_back({par, equilibria_wom(par).back()});
  }
  {
    const ModelParams par = fixtures::static_params();
    cases.push_back({par, equilibrium_static(par)});
  }
  for (const auto& c : cases) {
    const auto rep = stability_report(c.par, c.eq);
    REQUIRE(rep.classification == StabilityClass::stable);
    const auto res = perturbation_test(c.par, c.eq, 1e-4);
    REQUIRE(res.returns_to_eq);
    REQUIRE_FALSE(res.inconclusive);
  }
}

TEST_CASE("perturbation magnitude is validated and zero is trivial", "[stability]") {
  const ModelParams par = fixtures::no_referral_params();
  const Equilibrium eq = equilibrium_no_referral(par);
  CHECK_THROWS_AS(perturbation_test(par, eq, -1e-3), InvalidInputError);
  CHECK_THROWS_AS(perturbation_test(par, eq, 2e-2), InvalidInputError);
  CHECK_THROWS_AS(perturbation_test(par, eq, std::nan("")), InvalidInputError);
  const auto res = perturbation_test(par, eq, 0.0);
  CHECK(res.returns_to_eq);
  CHECK(res.runs.empty());

  Equilibrium infeasible = eq;
  infeasible.feasible = false;
  CHECK_THROWS_AS(perturbation_test(par, infeasible, 1e-4), PreconditionError);
}

TEST_CASE("stability labels are stable identifiers", "[stability]") {
  CHECK(std::string(stability_name(StabilityClass::stable)) == "stable");
  CHECK(std::string(stability_name(StabilityClass::unstable)) == "unstable");
  CHECK(std::string(stability_name(StabilityClass::marginal)) == "marginal");
}
