#include "infosamp/rng.hpp"

#include <cmath>

#include "infosamp/common.hpp"

namespace infosamp {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// SplitMix64 finalizer
std::uint64_t scramble(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : state_(scramble(seed + kGolden)) {}

Rng Rng::stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t purpose) {
  std::uint64_t s = scramble(seed + kGolden);
  s = scramble(s ^ (kGolden * (replicate + 1)));
  s = scramble(s ^ (0xd1342543de82ef95ull * (purpose + 1)));
  Rng r(0);
  r.state_ = s;
  return r;
}

std::uint64_t Rng::derive_seed(std::uint64_t seed, std::uint64_t replicate) {
  return scramble(scramble(seed + kGolden) ^ (kGolden * (replicate + 1)));
}

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += kGolden);
  return scramble(z);
}

std::uint64_t Rng::uniform_int(std::uint64_t bound) {
  if (bound == 0) throw NumericError("uniform_int: zero bound");
  // rejection keeps the draw exactly uniform
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % bound;
}

double Rng::uniform() {
  // 53-bit mantissa, shifted off zero so log() is always finite
  return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double Rng::normal(double mean, double sd) {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return mean + sd * cached_normal_;
  }
  // Box-Muller
  const double u1 = uniform(), u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925286766559 * u2;
  cached_normal_ = r * std::sin(a);
  has_cached_normal_ = true;
  return mean + sd * r * std::cos(a);
}

double Rng::gamma(double shape, double rate) {
  if (shape <= 0 || rate <= 0) throw NumericError("gamma: shape and rate must be positive");
  // Marsaglia-Tsang squeeze; shape < 1 boosted through the shape+1 draw
  if (shape < 1.0) {
    const double u = uniform();
    return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double xn, vv;
    do {
      xn = normal();
      vv = 1.0 + c * xn;
    } while (vv <= 0.0);
    vv = vv * vv * vv;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * xn * xn * xn * xn) return d * vv / rate;
    if (std::log(u) < 0.5 * xn * xn + d * (1.0 - vv + std::log(vv))) return d * vv / rate;
  }
}

long Rng::poisson(double mean) {
  if (mean < 0) throw NumericError("poisson: negative mean");
  // Knuth's product method; fine for the small means used here
  const double limit = std::exp(-mean);
  long k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform();
  } while (p > limit);
  return k - 1;
}

std::vector<int> Rng::permutation(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = 0; i < n - 1; ++i) {
    const int j = i + static_cast<int>(uniform_int(static_cast<std::uint64_t>(n - i)));
    std::swap(p[i], p[j]);
  }
  return p;
}

}  // namespace infosamp
