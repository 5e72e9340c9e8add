#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "infosamp/design.hpp"
#include "infosamp/rng.hpp"
#include "infosamp/scorefit.hpp"
#include "infosamp/synthpop.hpp"

using namespace infosamp;

namespace {

// spec with hand-checkable numbers: basis [1, y], y = (2, 4), pi = (0.5, 0.25)
ScoreSystem toy_system() {
  ScoreSystem sys;
  sys.basis.resize(2, 2);
  sys.basis << 1, 2, 1, 4;
  sys.pi.resize(2);
  sys.pi << 0.5, 0.25;
  sys.weights.resize(2);
  sys.weights << 2.0, 4.0;
  sys.response = sys.pi;
  return sys;
}

ScoreSystem wls_system() {
  ScoreSystem sys;
  sys.basis.resize(5, 2);
  sys.basis << 1, 0.2, 1, 1.1, 1, -0.4, 1, 2.3, 1, 0.9;
  sys.pi.resize(5);
  sys.pi << 0.3, 0.5, 0.2, 0.7, 0.4;
  sys.weights = sys.pi.cwiseInverse();
  sys.response.resize(5);
  sys.response << 0.31, 0.52, 0.18, 0.74, 0.38;
  return sys;
}

PopulationModelSpec paper_population() {
  PopulationModelSpec spec;
  spec.beta = Vec(3);
  spec.beta << 3.5, 0.8, -0.1;
  spec.sigma2 = 1.5;
  spec.covariate_specs = {{"gamma", {1.0, 1.0}, "x"}, {"poisson", {3.0}, "v"}};
  return spec;
}

DesignVariableSpec paper_design() {
  DesignVariableSpec d;
  d.intercept = 4.0;
  d.v = 2.5;
  d.y2 = 0.15;
  d.noise_variance = 2.5;
  return d;
}

SampleData paper_sample(std::uint64_t seed, int n_units = 200, int n = 25) {
  const PopulationFrame f =
      generate_population(paper_population(), paper_design(), n_units, seed);
  return draw_pps_sample(f, n, Rng::derive_seed(seed, 1));
}

}  // namespace

TEST_CASE("selection model term names, dimension, validation") {
  SelectionModelSpec full;
  full.v_terms = {0, 1};
  full.y_powers = {1, 2};
  CHECK(full.dim() == 4);
  const auto names = full.term_names();
  REQUIRE(names.size() == 4);
  CHECK(names[0] == "1");
  CHECK(names[1] == "v1");
  CHECK(names[2] == "y");
  CHECK(names[3] == "y2");

  SelectionModelSpec with_x;
  with_x.v_terms = {0, 1};
  with_x.x_terms = {1};
  const auto nx = with_x.term_names();
  CHECK(nx[1] == "v1");
  CHECK(nx[2] == "x1");

  SelectionModelSpec dup;
  dup.v_terms = {0};
  dup.y_powers = {1, 1};
  CHECK_THROWS_AS(dup.validate(), ConfigError);
  SelectionModelSpec empty;
  CHECK_THROWS_AS(empty.validate(), ConfigError);
  SelectionModelSpec bad_x;
  bad_x.v_terms = {0};
  bad_x.x_terms = {0};
  CHECK_THROWS_AS(bad_x.validate(), ConfigError);
  SelectionModelSpec bad_p;
  bad_p.v_terms = {0};
  bad_p.y_powers = {0};
  CHECK_THROWS_AS(bad_p.validate(), ConfigError);
}

TEST_CASE("selection_system builds the documented basis ordering") {
  const SampleData s = paper_sample(21);
  SelectionModelSpec spec;
  spec.v_terms = {0, 1};
  spec.x_terms = {1};
  spec.y_powers = {1, 2};
  const ScoreSystem sys = selection_system(s, spec);
  REQUIRE(sys.d() == 5);
  for (int i = 0; i < s.n; ++i) {
    CHECK(sys.basis(i, 0) == 1.0);
    CHECK(sys.basis(i, 1) == s.v(i, 0));
    CHECK(sys.basis(i, 2) == s.x(i, 0));
    CHECK(sys.basis(i, 3) == s.y[i]);
    CHECK(sys.basis(i, 4) == s.y[i] * s.y[i]);
    CHECK(sys.response[i] == s.pi[i]);
    CHECK(sys.weights[i] == s.w[i]);
  }
  // term not present in the data
  SelectionModelSpec missing;
  missing.v_terms = {0, 2};
  CHECK_THROWS_AS(selection_system(s, missing), ConfigError);

  // population system: [1, x, v] against y
  const ScoreSystem pop = population_system(s);
  REQUIRE(pop.d() == 3);
  for (int i = 0; i < s.n; ++i) {
    CHECK(pop.basis(i, 0) == 1.0);
    CHECK(pop.basis(i, 1) == s.x(i, 0));
    CHECK(pop.basis(i, 2) == s.v(i, 0));
    CHECK(pop.response[i] == s.y[i]);
  }
}

TEST_CASE("ht_objective and ht_score: hand values") {
  const ScoreSystem sys = toy_system();
  const Vec zero = Vec::Zero(2);
  // residuals = pi, so obj = 0.5^2*2 + 0.25^2*4 = 0.75
  CHECK(ht_objective(sys, zero) == doctest::Approx(0.75).epsilon(1e-14));
  // score = B'(e .* w) = B'(1, 1) = (2, 6)
  const Vec sc = ht_score(sys, zero);
  CHECK(sc[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(sc[1] == doctest::Approx(6.0).epsilon(1e-14));

  // one-column exact fit: response = 0.25 * basis
  ScoreSystem fit;
  fit.basis.resize(2, 1);
  fit.basis << 2, 1;
  fit.pi.resize(2);
  fit.pi << 0.5, 0.25;
  fit.weights = fit.pi.cwiseInverse();
  fit.response.resize(2);
  fit.response << 0.5, 0.25;
  Vec quarter(1);
  quarter << 0.25;
  CHECK(ht_objective(fit, quarter) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(ht_score(fit, quarter).cwiseAbs().maxCoeff() < 1e-15);

  Vec wrong(3);
  CHECK_THROWS_AS(ht_objective(sys, wrong), ConfigError);
}

TEST_CASE("ht_fit solves the weighted normal equations (frozen oracle)") {
  const ScoreSystem sys = wls_system();
  const Vec gamma = ht_fit(sys);
  CHECK(gamma[0] == doctest::Approx(0.25813780229808764).epsilon(1e-12));
  CHECK(gamma[1] == doctest::Approx(0.20288380968183523).epsilon(1e-12));
  CHECK(ht_objective(sys, gamma) ==
        doctest::Approx(0.013016493134774132).epsilon(1e-10));
  CHECK(ht_score(sys, gamma).cwiseAbs().maxCoeff() < 1e-10);

  // local grid around the optimum: no probe direction improves the objective
  const double base = ht_objective(sys, gamma);
  for (int k = 0; k < 2; ++k) {
    for (double d : {-1e-3, 1e-3}) {
      Vec g = gamma;
      g[k] += d;
      CHECK(ht_objective(sys, g) > base);
    }
  }
}

TEST_CASE("ht_score equals -(1/2) numerical gradient of ht_objective") {
  Rng rng(4242);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 5 + rng.uniform_int(20);
    const int d = 1 + rng.uniform_int(3);
    ScoreSystem sys;
    sys.basis.resize(n, d);
    for (int i = 0; i < n; ++i) {
      sys.basis(i, 0) = 1.0;
      for (int j = 1; j < d; ++j) sys.basis(i, j) = rng.normal(0.0, 1.0);
    }
    sys.pi.resize(n);
    for (int i = 0; i < n; ++i) sys.pi[i] = 0.05 + 0.9 * rng.uniform();
    sys.weights = sys.pi.cwiseInverse();
    sys.response.resize(n);
    for (int i = 0; i < n; ++i) sys.response[i] = rng.normal(0.0, 1.0);
    Vec gamma(d);
    for (int j = 0; j < d; ++j) gamma[j] = rng.normal(0.0, 0.5);

    const Vec sc = ht_score(sys, gamma);
    const double h = 1e-6;
    for (int j = 0; j < d; ++j) {
      Vec gp = gamma, gm = gamma;
      gp[j] += h;
      gm[j] -= h;
      const double fd = (ht_objective(sys, gp) - ht_objective(sys, gm)) / (2 * h);
      const double expect = -0.5 * fd;
      const double scale = std::max(1.0, std::abs(sc[j]));
      CHECK(std::abs(sc[j] - expect) / scale < 1e-6);
    }
  }
}

TEST_CASE("constant weights reduce ht_fit to ordinary least squares") {
  Rng rng(99);
  const int n = 40;
  ScoreSystem sys;
  sys.basis.resize(n, 3);
  sys.response.resize(n);
  for (int i = 0; i < n; ++i) {
    sys.basis(i, 0) = 1.0;
    sys.basis(i, 1) = rng.normal(0.0, 1.0);
    sys.basis(i, 2) = rng.gamma(2.0, 1.0);
    sys.response[i] = rng.normal(0.0, 1.0);
  }
  sys.weights = Vec::Constant(n, 3.7);
  sys.pi = Vec::Constant(n, 1.0 / 3.7);
  const Vec gamma = ht_fit(sys);
  const Vec ols = sys.basis.colPivHouseholderQr().solve(sys.response);
  CHECK((gamma - ols).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exact linear response is recovered to machine precision") {
  Rng rng(123);
  const int n = 30;
  ScoreSystem sys;
  sys.basis.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    sys.basis(i, 0) = 1.0;
    sys.basis(i, 1) = rng.uniform() * 4.0;
  }
  sys.pi.resize(n);
  for (int i = 0; i < n; ++i) sys.pi[i] = 0.1 + 0.8 * rng.uniform();
  sys.weights = sys.pi.cwiseInverse();
  Vec truth(2);
  truth << -0.4, 1.9;
  sys.response = sys.basis * truth;
  const Vec gamma = ht_fit(sys);
  CHECK((gamma - truth).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank-deficient basis raises NumericError") {
  ScoreSystem sys;
  sys.basis.resize(4, 2);
  sys.basis << 1, 2, 1, 2, 1, 2, 1, 2;  // second column = 2 * first
  sys.response.resize(4);
  sys.response << 1, 2, 3, 4;
  sys.weights = Vec::Constant(4, 2.0);
  sys.pi = Vec::Constant(4, 0.5);
  CHECK_THROWS_AS(ht_fit(sys), NumericError);
}

TEST_CASE("census fit recovers the selection surface") {
  // population_score_zero_check regresses pi on the model terms over the full
  // frame; scaled by sum(z)/n it recovers the z-model coefficients exactly when
  // the design variable carries no noise
  const int n_units = 500, n = 50;
  DesignVariableSpec exact = paper_design();
  exact.noise_variance = 0.0;
  const PopulationFrame g =
      generate_population(paper_population(), exact, n_units, 31);
  SelectionModelSpec spec;
  spec.v_terms = {0, 1};
  spec.y_powers = {2};
  const Vec gamma_star = population_score_zero_check(g, spec, n);
  const double scale = g.z.sum() / n;
  CHECK(std::abs(gamma_star[0] * scale - 4.0) < 1e-8);
  CHECK(std::abs(gamma_star[1] * scale - 2.5) < 1e-8);
  CHECK(std::abs(gamma_star[2] * scale - 0.15) < 1e-8);

  // with design noise the recovery is loose but in the right neighbourhood
  const PopulationFrame f =
      generate_population(paper_population(), paper_design(), n_units, 31);
  const Vec gn = population_score_zero_check(f, spec, n);
  const double fscale = f.z.sum() / n;
  CHECK(std::abs(gn[0] * fscale - 4.0) < 1.5);
  CHECK(std::abs(gn[1] * fscale - 2.5) < 0.8);
  CHECK(std::abs(gn[2] * fscale - 0.15) < 0.15);
}

TEST_CASE("design expectation of the sample score vanishes at the census fit") {
  // tiny frame, full enumeration: sum_s P(s) J~_s(gamma*) = 0
  PopulationModelSpec pop = paper_population();
  DesignVariableSpec des = paper_design();
  const PopulationFrame f = generate_population(pop, des, 6, 101);
  SelectionModelSpec spec;
  spec.v_terms = {0};
  spec.y_powers = {1};
  const int n = 2;
  const Vec gamma_star = population_score_zero_check(f, spec, n);
  const auto samples = enumerate_pps(f, n);
  Vec expect = Vec::Zero(spec.dim());
  for (const auto& smp : samples) {
    const SampleData s = subsample(f, smp.units, n);
    const ScoreSystem sys = selection_system(s, spec);
    expect += smp.prob * ht_score(sys, gamma_star);
  }
  CHECK(expect.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ht_covariance: two-unit hand computation") {
  // e = (0.05, -0.02), B = [[1,2],[1,3]], pi = (0.4, 0.6), pi12 = 0.2
  ScoreSystem sys;
  sys.basis.resize(2, 2);
  sys.basis << 1, 2, 1, 3;
  sys.pi.resize(2);
  sys.pi << 0.4, 0.6;
  sys.weights = sys.pi.cwiseInverse();
  sys.response.resize(2);
  sys.response << 0.05, -0.02;  // residuals at gamma = 0
  const Vec gamma = Vec::Zero(2);
  Mat pairwise(2, 2);
  pairwise << 0.4, 0.2, 0.2, 0.6;

  const CovarianceEstimate cov = ht_covariance(sys, gamma, &pairwise);
  CHECK(cov.matrix(0, 0) == doctest::Approx(0.011486111111111112).epsilon(1e-12));
  CHECK(cov.matrix(0, 1) == doctest::Approx(0.024249999999999997).epsilon(1e-12));
  CHECK(cov.matrix(1, 0) == cov.matrix(0, 1));
  CHECK(cov.matrix(1, 1) == doctest::Approx(0.0515).epsilon(1e-12));
  CHECK(cov.mode == CovMode::exact_pairwise);

  // brute-force double sum must agree to 1e-12
  Mat brute = Mat::Zero(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double pij = i == j ? sys.pi[i] : pairwise(i, j);
      const double fij = 1.0 / (sys.pi[i] * sys.pi[j]) - 1.0 / pij;
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          brute(k, l) += sys.response[i] * sys.response[j] * sys.basis(i, k) *
                         sys.basis(j, l) * fij;
    }
  brute = 0.5 * (brute + brute.transpose().eval());
  CHECK((cov.matrix - brute).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ht_covariance: symmetry, zero residuals, mode selection") {
  const SampleData s = paper_sample(55);
  SelectionModelSpec spec;
  spec.v_terms = {0, 1};
  spec.y_powers = {1};
  ScoreSystem sys = selection_system(s, spec);
  const Vec gamma = ht_fit(sys);

  const CovarianceEstimate remark = ht_covariance(sys, gamma, nullptr);
  CHECK(remark.mode == CovMode::remark2);
  CHECK((remark.matrix - remark.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  const Mat pw = hajek_pairwise(sys.pi);
  const CovarianceEstimate exact = ht_covariance(sys, gamma, &pw);
  CHECK(exact.mode == CovMode::exact_pairwise);
  CHECK((exact.matrix - exact.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  // the two pair-factor choices are genuinely different estimators
  CHECK((exact.matrix - remark.matrix).cwiseAbs().maxCoeff() > 1e-12);

  // zero residuals -> zero covariance
  ScoreSystem flat = sys;
  flat.response = flat.basis * gamma;
  const CovarianceEstimate zero = ht_covariance(flat, gamma, &pw);
  CHECK(zero.matrix.cwiseAbs().maxCoeff() < 1e-14);

  // a system carrying its own pairwise matrix uses it when none is passed
  ScoreSystem carrying = sys;
  carrying.pairwise = pw;
  const CovarianceEstimate via_member = ht_covariance(carrying, gamma, nullptr);
  CHECK(via_member.mode == CovMode::exact_pairwise);
  CHECK((via_member.matrix - exact.matrix).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("response scaling equivariance of fit and covariance") {
  const ScoreSystem sys = wls_system();
  const Vec gamma = ht_fit(sys);
  ScoreSystem scaled = sys;
  const double c = 2.0;  // power of two keeps the arithmetic exact
  scaled.response *= c;
  const Vec gamma_c = ht_fit(scaled);
  CHECK((gamma_c - c * gamma).cwiseAbs().maxCoeff() < 1e-12);

  const CovarianceEstimate cov = ht_covariance(sys, gamma, nullptr);
  const CovarianceEstimate cov_c = ht_covariance(scaled, gamma_c, nullptr);
  CHECK((cov_c.matrix - c * c * cov.matrix).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("subsystem extracts columns and carries the pairwise matrix") {
  const SampleData s = paper_sample(66);
  SelectionModelSpec spec;
  spec.v_terms = {0, 1};
  spec.y_powers = {1, 2};
  ScoreSystem sys = selection_system(s, spec);
  sys.pairwise = hajek_pairwise(sys.pi);

  const ScoreSystem sub = subsystem(sys, {0, 1});
  REQUIRE(sub.d() == 2);
  CHECK((sub.basis.col(1) - sys.basis.col(1)).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(sub.pairwise.has_value());
  CHECK((*sub.pairwise - *sys.pairwise).cwiseAbs().maxCoeff() == 0.0);
  CHECK_NOTHROW(ht_fit(sub));
  CHECK_THROWS_AS(subsystem(sys, {0, 7}), ConfigError);
}

TEST_CASE("FitReport serializes finite numbers") {
  const ScoreSystem sys = wls_system();
  FitReport rep;
  rep.coefficients = ht_fit(sys);
  rep.objective = ht_objective(sys, rep.coefficients);
  rep.covariance = ht_covariance(sys, rep.coefficients, nullptr).matrix;
  const std::string j = rep.to_json();
  CHECK(j.find("coefficients") != std::string::npos);
  CHECK(j.find("covariance_mode") != std::string::npos);
  CHECK(j.find("nan") == std::string::npos);
  CHECK(j.find("inf") == std::string::npos);
}
