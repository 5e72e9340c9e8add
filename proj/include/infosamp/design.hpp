#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "infosamp/common.hpp"
#include "infosamp/synthpop.hpp"

namespace infosamp {

struct SampleData {
  int n = 0;
  std::vector<int> unit_id;  // 1-based frame indices
  Vec y;
  Mat x;
  Mat v;
  Vec pi;  // all in (0,1)
  Vec w;   // 1/pi
  Vec z;
  bool has_z = false;

  void validate() const;
};

// pi_i = n z_i / sum(z); errors out on certainty units (pi >= 1)
Vec inclusion_probabilities(const PopulationFrame& frame, int n);

// systematic PPS on a uniformly permuted frame: exact first-order probabilities
SampleData draw_pps_sample(const PopulationFrame& frame, int n, std::uint64_t seed);

// per-pair weight of the joint-inclusion approximation used by the remark2
// covariance mode; s_pi = (N/n) * sum of sampled pi
double joint_inclusion_factor(double pi_i, double pi_j, double s_pi, int n);

// pairwise joint-inclusion matrices over the sampled units (diagonal = pi_i):
//   hajek:       pi_ij = pi_i pi_j [1 - (1-pi_i)(1-pi_j)/dhat], dhat = sum(1-pi)
//   independent: pi_ij = pi_i pi_j (Poisson-sampling oracle designs)
Mat hajek_pairwise(const Vec& pi);
Mat independent_pairwise(const Vec& pi);

// Exhaustive enumeration of the systematic-PPS sampling distribution (tiny
// frames only): every distinct sample with its selection probability.
struct EnumeratedSample {
  std::vector<int> units;  // 0-based frame indices, ascending
  double prob;
};
std::vector<EnumeratedSample> enumerate_pps(const PopulationFrame& frame, int n);

// build the SampleData a given unit set would produce (enumeration oracles)
SampleData subsample(const PopulationFrame& frame, const std::vector<int>& units, int n);

void sample_to_csv(const SampleData& sample, const std::string& path);
SampleData sample_from_csv(const std::string& path);

}  // namespace infosamp
