#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "infosamp/design.hpp"
#include "infosamp/rng.hpp"
#include "infosamp/synthpop.hpp"

using namespace infosamp;

namespace {

PopulationFrame frame_from_z(const std::vector<double>& z) {
  PopulationFrame f;
  f.n_units = static_cast<int>(z.size());
  f.y = Vec::LinSpaced(f.n_units, 1.0, static_cast<double>(f.n_units));
  f.x = Mat::Zero(f.n_units, 0);
  f.v = Mat::Ones(f.n_units, 1);
  f.z = Eigen::Map<const Vec>(z.data(), f.n_units);
  return f;
}

PopulationFrame paper_frame(int n_units, std::uint64_t seed) {
  PopulationModelSpec spec;
  spec.beta = Vec(3);
  spec.beta << 3.5, 0.8, -0.1;
  spec.sigma2 = 1.5;
  spec.covariate_specs = {{"gamma", {1.0, 1.0}, "x"}, {"poisson", {3.0}, "v"}};
  DesignVariableSpec d;
  d.intercept = 4.0;
  d.v = 2.5;
  d.y2 = 0.15;
  d.noise_variance = 2.5;
  return generate_population(spec, d, n_units, seed);
}

}  // namespace

TEST_CASE("inclusion probabilities: hand cases and the exact-sum identity") {
  const Vec pi_eq = inclusion_probabilities(frame_from_z({1, 1, 1, 1}), 2);
  for (int i = 0; i < 4; ++i) CHECK(pi_eq[i] == doctest::Approx(0.5).epsilon(1e-15));

  const Vec pi = inclusion_probabilities(frame_from_z({1, 2, 3, 4}), 2);
  CHECK(pi[0] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(pi[1] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(pi[2] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(pi[3] == doctest::Approx(0.8).epsilon(1e-14));

  const PopulationFrame big = paper_frame(500, 7);
  CHECK(std::abs(inclusion_probabilities(big, 50).sum() - 50.0) < 1e-9);
}

TEST_CASE("inclusion probabilities are scale invariant in z") {
  PopulationFrame f = frame_from_z({0.7, 1.9, 2.4, 0.2, 1.1});
  const Vec base = inclusion_probabilities(f, 2);
  f.z *= 4.0;  // power of two: products and sums rescale exactly
  const Vec scaled = inclusion_probabilities(f, 2);
  for (int i = 0; i < 5; ++i) CHECK(base[i] == scaled[i]);
}

TEST_CASE("certainty units are rejected with the unit named") {
  CHECK_THROWS_AS(inclusion_probabilities(frame_from_z({10, 1, 1}), 2), DataError);
  try {
    inclusion_probabilities(frame_from_z({10, 1, 1}), 2);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
  CHECK_THROWS_AS(draw_pps_sample(frame_from_z({10, 1, 1}), 2, 1), DataError);
}

TEST_CASE("sampled first-order frequencies match pi (Monte Carlo)") {
  const PopulationFrame f = frame_from_z({1, 2, 3, 4});
  const Vec pi = inclusion_probabilities(f, 2);
  const int m = 100000;
  std::vector<int> hits(4, 0);
  for (int t = 0; t < m; ++t) {
    const SampleData s = draw_pps_sample(f, 2, Rng::derive_seed(555, t));
    REQUIRE(s.n == 2);
    REQUIRE(s.unit_id[0] != s.unit_id[1]);
    for (int id : s.unit_id) ++hits[id - 1];
  }
  for (int i = 0; i < 4; ++i) {
    const double se = std::sqrt(pi[i] * (1 - pi[i]) / m);
    CHECK(std::abs(hits[i] / static_cast<double>(m) - pi[i]) < 3.5 * se);
  }
}

TEST_CASE("uniform design, n=1: every unit equally likely") {
  const PopulationFrame f = frame_from_z({2, 2, 2, 2, 2});
  const int m = 50000;
  std::vector<int> hits(5, 0);
  for (int t = 0; t < m; ++t)
    ++hits[draw_pps_sample(f, 1, Rng::derive_seed(777, t)).unit_id[0] - 1];
  for (int i = 0; i < 5; ++i)
    CHECK(std::abs(hits[i] / static_cast<double>(m) - 0.2) <
          4.0 * std::sqrt(0.2 * 0.8 / m));
}

TEST_CASE("enumeration oracle: probabilities, first-order match, HT identity") {
  const std::vector<std::vector<double>> frames = {
      {1, 2, 3, 4}, {0.5, 1.5, 2.5, 0.7, 1.3}, {1, 1, 2, 2, 3, 3}, {2.2, 0.4, 1.7, 3.1, 0.9, 1.2}};
  for (const auto& zs : frames) {
    for (int n = 1; n <= 2; ++n) {
      const PopulationFrame f = frame_from_z(zs);
      const Vec pi = inclusion_probabilities(f, n);
      const auto samples = enumerate_pps(f, n);
      double total = 0.0;
      Vec first = Vec::Zero(f.n_units);
      double ht_z = 0.0, ht_y = 0.0;
      for (const auto& s : samples) {
        REQUIRE(static_cast<int>(s.units.size()) == n);
        total += s.prob;
        for (int u : s.units) {
          first[u] += s.prob;
          ht_z += s.prob * f.z[u] / pi[u];
          ht_y += s.prob * f.y[u] / pi[u];
        }
      }
      CHECK(std::abs(total - 1.0) < 1e-10);
      for (int i = 0; i < f.n_units; ++i) CHECK(std::abs(first[i] - pi[i]) < 1e-10);
      CHECK(std::abs(ht_z - f.z.sum()) < 1e-9);
      CHECK(std::abs(ht_y - f.y.sum()) < 1e-9);
    }
  }
}

TEST_CASE("joint inclusion factor: hand values and degenerate guard") {
  // pi_i=0.2, pi_j=0.4, S_pi=10, n=5: ((n-1)S/n)(1/(pi_i+pi_j))(pi_i/(S-pi_i)+pi_j/(S-pi_j))
  CHECK(joint_inclusion_factor(0.2, 0.4, 10.0, 5) ==
        doctest::Approx(365.0 / 441.0).epsilon(1e-12));
  // symmetric pair: (n-1)S/(n(S-p))
  CHECK(joint_inclusion_factor(0.3, 0.3, 2.0, 5) ==
        doctest::Approx(4.0 * 2.0 / (5.0 * 1.7)).epsilon(1e-12));
  CHECK_THROWS_AS(joint_inclusion_factor(0.5, 0.4, 0.45, 5), DataError);
}

TEST_CASE("pairwise matrices: hajek and independent") {
  Vec pi(3);
  pi << 0.2, 0.4, 0.3;
  const Mat h = hajek_pairwise(pi);
  const Mat ind = independent_pairwise(pi);
  const double dhat = (1 - 0.2) + (1 - 0.4) + (1 - 0.3);
  for (int i = 0; i < 3; ++i) {
    CHECK(h(i, i) == doctest::Approx(pi[i]).epsilon(1e-15));
    CHECK(ind(i, i) == doctest::Approx(pi[i]).epsilon(1e-15));
    for (int j = 0; j < 3; ++j) {
      CHECK(h(i, j) == h(j, i));
      if (i != j) {
        const double expect = pi[i] * pi[j] * (1 - (1 - pi[i]) * (1 - pi[j]) / dhat);
        CHECK(h(i, j) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(ind(i, j) == doctest::Approx(pi[i] * pi[j]).epsilon(1e-15));
        CHECK(h(i, j) > 0.0);
      }
    }
  }
}

TEST_CASE("sample draw is deterministic and carries aligned unit data") {
  const PopulationFrame f = paper_frame(120, 9);
  const SampleData a = draw_pps_sample(f, 12, 33);
  const SampleData b = draw_pps_sample(f, 12, 33);
  const SampleData c = draw_pps_sample(f, 12, 34);
  REQUIRE(a.n == 12);
  bool same = true, diff = false;
  for (int i = 0; i < a.n; ++i) {
    same = same && a.unit_id[i] == b.unit_id[i] && a.y[i] == b.y[i];
    diff = diff || a.unit_id[i] != c.unit_id[i];
  }
  CHECK(same);
  CHECK(diff);

  const Vec pi = inclusion_probabilities(f, 12);
  for (int i = 0; i < a.n; ++i) {
    const int u = a.unit_id[i] - 1;
    CHECK(a.y[i] == f.y[u]);
    CHECK(a.x(i, 0) == f.x(u, 0));
    CHECK(a.v(i, 0) == f.v(u, 0));
    CHECK(a.z[i] == f.z[u]);
    CHECK(a.pi[i] == doctest::Approx(pi[u]).epsilon(1e-14));
    CHECK(a.w[i] * a.pi[i] == doctest::Approx(1.0).epsilon(1e-14));
    REQUIRE(a.pi[i] > 0.0);
    REQUIRE(a.pi[i] < 1.0);
  }
}

TEST_CASE("sample CSV round trip and weight validation on load") {
  const PopulationFrame f = paper_frame(80, 10);
  const SampleData s = draw_pps_sample(f, 10, 44);
  const std::string path = "/tmp/infosamp_test_sample.csv";
  sample_to_csv(s, path);
  const SampleData back = sample_from_csv(path);
  REQUIRE(back.n == s.n);
  for (int i = 0; i < s.n; ++i) {
    CHECK(back.unit_id[i] == s.unit_id[i]);
    CHECK(back.y[i] == s.y[i]);
    CHECK(back.pi[i] == s.pi[i]);
    CHECK(back.w[i] == s.w[i]);  // both sides define w = 1/pi
  }

  // corrupt the weight column: loader must notice w*pi != 1
  SampleData bad = s;
  bad.w[1] *= 2.0;
  sample_to_csv(bad, path);
  CHECK_THROWS_AS(sample_from_csv(path), DataError);
  std::remove(path.c_str());
}

TEST_CASE("subsample builds the deterministic sample for a given unit set") {
  const PopulationFrame f = paper_frame(50, 11);
  const SampleData s = subsample(f, {3, 17, 41}, 5);
  REQUIRE(s.n == 3);
  CHECK(s.unit_id[0] == 4);  // 1-based ids
  CHECK(s.y[1] == f.y[17]);
  const Vec pi = inclusion_probabilities(f, 5);
  CHECK(s.pi[2] == doctest::Approx(pi[41]).epsilon(1e-14));
}
