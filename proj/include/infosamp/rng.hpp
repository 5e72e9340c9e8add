#pragma once
#include <cstdint>
#include <vector>

namespace infosamp {

// SplitMix64-based generator with explicitly derived substreams.
//
// Every consumer draws from a stream keyed by (seed, replicate, purpose), so
// replicate-level parallelism cannot change any replicate's numbers and a single
// replicate can be re-run in isolation.  Distributions are implemented here
// (Box-Muller, Marsaglia-Tsang, Knuth) instead of <random> so that the streams
// do not depend on the standard library's unspecified algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  static Rng stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t purpose);
  // collapse (seed, replicate) into a seed for code that takes only a seed
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t replicate);

  std::uint64_t next_u64();
  std::uint64_t uniform_int(std::uint64_t bound);  // [0, bound)
  double uniform();                                // (0, 1)
  double normal(double mean = 0.0, double sd = 1.0);
  double gamma(double shape, double rate);
  long poisson(double mean);
  std::vector<int> permutation(int n);             // Fisher-Yates

  // purpose ids; harness adds per-experiment offsets on top of the mcmc/rho bases
  enum Purpose : std::uint64_t {
    kCovariates = 1,
    kPopulationNoise = 2,
    kDesignNoise = 3,
    kSampleDraw = 4,
    kMcmcBase = 16,
    kRhoBase = 64,
  };

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace infosamp
