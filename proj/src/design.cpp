#include "infosamp/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "infosamp/csv.hpp"
#include "infosamp/rng.hpp"

namespace infosamp {

void SampleData::validate() const {
  if (n < 1) throw DataError("sample: empty");
  if (y.size() != n || pi.size() != n || w.size() != n || x.rows() != n ||
      v.rows() != n || static_cast<int>(unit_id.size()) != n ||
      (has_z && z.size() != n))
    throw DataError("sample: column lengths disagree");
  for (int i = 0; i < n; ++i) {
    if (!(pi[i] > 0 && pi[i] < 1))
      throw DataError("sample: pi out of (0,1) at row " + std::to_string(i + 1));
    if (std::fabs(w[i] * pi[i] - 1.0) > 1e-9)
      throw DataError("sample: w*pi != 1 at row " + std::to_string(i + 1));
  }
}

Vec inclusion_probabilities(const PopulationFrame& frame, int n) {
  frame.validate();
  if (n < 1 || n >= frame.n_units)
    throw ConfigError("inclusion_probabilities: need 1 <= n < N");
  const double total = frame.z.sum();
  Vec pi = frame.z * (static_cast<double>(n) / total);
  for (int i = 0; i < frame.n_units; ++i)
    if (pi[i] >= 1.0)
      throw DataError("inclusion_probabilities: unit " + std::to_string(i + 1) +
                      " is a certainty unit (pi = " + std::to_string(pi[i]) + ")");
  return pi;
}

namespace {

// core of the systematic scheme: walk the permuted cumulative sums and pick
// the units whose interval contains u + m for m = 0..n-1
std::vector<int> systematic_pick(const Vec& pi, const std::vector<int>& order, double u, int n) {
  std::vector<int> picked;
  picked.reserve(n);
  double cum = 0.0;
  int m = 0;
  for (int idx : order) {
    const double next = cum + pi[idx];
    while (m < n && u + m < next) {
      if (u + m >= cum) picked.push_back(idx);
      ++m;
    }
    cum = next;
    if (m >= n) break;
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

SampleData subsample(const PopulationFrame& frame, const std::vector<int>& units, int n) {
  const Vec pi = inclusion_probabilities(frame, n);
  SampleData s;
  s.n = static_cast<int>(units.size());
  s.unit_id.reserve(units.size());
  s.y.resize(s.n);
  s.x.resize(s.n, frame.x.cols());
  s.v.resize(s.n, frame.v.cols());
  s.pi.resize(s.n);
  s.w.resize(s.n);
  s.z.resize(s.n);
  s.has_z = true;
  for (int k = 0; k < s.n; ++k) {
    const int i = units[k];
    s.unit_id.push_back(i + 1);
    s.y[k] = frame.y[i];
    s.x.row(k) = frame.x.row(i);
    s.v.row(k) = frame.v.row(i);
    s.pi[k] = pi[i];
    s.w[k] = 1.0 / pi[i];
    s.z[k] = frame.z[i];
  }
  s.validate();
  return s;
}

SampleData draw_pps_sample(const PopulationFrame& frame, int n, std::uint64_t seed) {
  const Vec pi = inclusion_probabilities(frame, n);
  Rng rng = Rng::stream(seed, 0, Rng::kSampleDraw);
  const std::vector<int> order = rng.permutation(frame.n_units);
  const double u = rng.uniform();
  const std::vector<int> picked = systematic_pick(pi, order, u, n);
  if (static_cast<int>(picked.size()) != n)
    throw NumericError("draw_pps_sample: systematic pass selected " +
                       std::to_string(picked.size()) + " units instead of " +
                       std::to_string(n));
  return subsample(frame, picked, n);
}

double joint_inclusion_factor(double pi_i, double pi_j, double s_pi, int n) {
  if (n < 2) throw ConfigError("joint_inclusion_factor: need n >= 2");
  if (s_pi <= pi_i || s_pi <= pi_j)
    throw DataError("joint_inclusion_factor: degenerate design, S_pi = " +
                    std::to_string(s_pi) + " not above both inclusion probabilities");
  const double lead = (n - 1.0) * s_pi / n;
  return lead / (pi_i + pi_j) * (pi_i / (s_pi - pi_i) + pi_j / (s_pi - pi_j));
}

Mat hajek_pairwise(const Vec& pi) {
  const int n = static_cast<int>(pi.size());
  const double dhat = (1.0 - pi.array()).sum();  // HT estimate of sum_U pi(1-pi)
  if (dhat <= 0) throw NumericError("hajek_pairwise: nonpositive dhat");
  Mat pij(n, n);
  for (int i = 0; i < n; ++i) {
    pij(i, i) = pi[i];
    for (int j = i + 1; j < n; ++j) {
      double p = pi[i] * pi[j] * (1.0 - (1.0 - pi[i]) * (1.0 - pi[j]) / dhat);
      if (p < 1e-12 * pi[i] * pi[j]) p = 1e-12 * pi[i] * pi[j];
      pij(i, j) = pij(j, i) = p;
    }
  }
  return pij;
}

Mat independent_pairwise(const Vec& pi) {
  Mat pij = pi * pi.transpose();
  pij.diagonal() = pi;
  return pij;
}

std::vector<EnumeratedSample> enumerate_pps(const PopulationFrame& frame, int n) {
  const int N = frame.n_units;
  if (N > 8) throw ConfigError("enumerate_pps: frame too large to enumerate (N > 8)");
  const Vec pi = inclusion_probabilities(frame, n);

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::map<std::vector<int>, double> acc;
  double nperm = 0.0;
  do {
    nperm += 1.0;
    // breakpoints of u -> sample: fractional parts of the cumulative sums
    std::vector<double> cuts{0.0, 1.0};
    double cum = 0.0;
    for (int idx : order) {
      cum += pi[idx];
      const double f = cum - std::floor(cum);
      if (f > 0.0 && f < 1.0) cuts.push_back(f);
    }
    std::sort(cuts.begin(), cuts.end());
    for (size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double width = cuts[c + 1] - cuts[c];
      if (width <= 1e-15) continue;
      const double u = 0.5 * (cuts[c] + cuts[c + 1]);
      acc[systematic_pick(pi, order, u, n)] += width;
    }
  } while (std::next_permutation(order.begin(), order.end()));

  std::vector<EnumeratedSample> out;
  out.reserve(acc.size());
  for (const auto& [units, mass] : acc) out.push_back({units, mass / nperm});
  return out;
}

void sample_to_csv(const SampleData& sample, const std::string& path) {
  std::vector<std::string> header{"unit_id", "y"};
  for (int j = 0; j < sample.x.cols(); ++j) header.push_back("x" + std::to_string(j + 1));
  for (int j = 0; j < sample.v.cols(); ++j) header.push_back("v" + std::to_string(j + 1));
  header.push_back("pi");
  header.push_back("w");
  if (sample.has_z) header.push_back("z");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(sample.n);
  for (int i = 0; i < sample.n; ++i) {
    std::vector<std::string> row{std::to_string(sample.unit_id[i]), fmt_full(sample.y[i])};
    for (int j = 0; j < sample.x.cols(); ++j) row.push_back(fmt_full(sample.x(i, j)));
    for (int j = 0; j < sample.v.cols(); ++j) row.push_back(fmt_full(sample.v(i, j)));
    row.push_back(fmt_full(sample.pi[i]));
    row.push_back(fmt_full(sample.w[i]));
    if (sample.has_z) row.push_back(fmt_full(sample.z[i]));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

SampleData sample_from_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int ci = t.column("unit_id"), cy = t.column("y"), cp = t.column("pi"),
            cw = t.column("w"), cz = t.column("z");
  if (ci != 0 || cy != 1 || cp < 0 || cw < 0)
    throw DataError("sample csv: expected header unit_id,y,x..,v..,pi,w[,z] in " + path);
  int px = 0, pv = 0;
  for (const auto& h : t.header) {
    if (h.rfind("x", 0) == 0 && h.size() > 1) ++px;
    if (h.rfind("v", 0) == 0 && h.size() > 1) ++pv;
  }
  const int n = static_cast<int>(t.rows.size());
  SampleData s;
  s.n = n;
  s.y.resize(n);
  s.x.resize(n, px);
  s.v.resize(n, pv);
  s.pi.resize(n);
  s.w.resize(n);
  s.has_z = cz >= 0;
  if (s.has_z) s.z.resize(n);
  for (int i = 0; i < n; ++i) {
    s.unit_id.push_back(static_cast<int>(t.rows[i][ci]));
    s.y[i] = t.rows[i][cy];
    for (int j = 0; j < px; ++j) s.x(i, j) = t.rows[i][2 + j];
    for (int j = 0; j < pv; ++j) s.v(i, j) = t.rows[i][2 + px + j];
    s.pi[i] = t.rows[i][cp];
    const double w_file = t.rows[i][cw];
    if (std::fabs(w_file * s.pi[i] - 1.0) > 1e-9)
      throw DataError("sample csv: w*pi != 1 at line " + std::to_string(i + 2) +
                      " of " + path);
    s.w[i] = 1.0 / s.pi[i];
    if (s.has_z) s.z[i] = t.rows[i][cz];
  }
  s.validate();
  return s;
}

}  // namespace infosamp
