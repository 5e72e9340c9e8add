#pragma once
#include <cstdint>

#include "infosamp/common.hpp"
#include "infosamp/scorefit.hpp"

namespace infosamp {

// "normal flat prior": N(0, variance_scale * I), wide enough to be flat on the
// scale of the problem while keeping the normalizing integrals proper
struct PriorSpec {
  enum class Kind { flat_normal };
  Kind kind = Kind::flat_normal;
  double variance_scale = 1e6;

  void validate() const;
};

// full: Sigma_hat re-evaluated at every gamma (the literal posterior);
// plugin: Sigma_hat frozen at the ht_fit estimate (exactly Gaussian posterior)
enum class CovarianceMode { plugin, full };

struct McmcConfig {
  int burn_in = 2000;
  int K = 5000;
  int thin = 1;
  std::uint64_t seed = 0;
  CovarianceMode covariance_mode = CovarianceMode::full;

  void validate() const;
};

struct PosteriorDraws {
  Mat draws;         // K x d
  Vec log_density;   // per kept draw, same additive constant as log_posterior
  double acceptance_rate = 0.0;
  Vec mode;          // best point seen anywhere in the run
  double mode_log_density = 0.0;
  CovarianceMode covariance_mode = CovarianceMode::full;
  Mat plugin_sigma;  // the frozen Sigma (also the proposal seed in full mode)
  Mat proposal_cov;  // frozen post-burn-in proposal covariance

  void validate() const;
};

// symmetrize and clip eigenvalues below 1e-10 * max eigenvalue up to that
// floor; *fired reports whether any clipping happened
Mat psd_repair(const Mat& a, bool* fired = nullptr);

// log phi(J~(gamma); 0, Sigma) + log h(gamma), additive constant fixed per run
double log_posterior(const ScoreSystem& sys, const PriorSpec& prior, const Vec& gamma,
                     CovarianceMode mode, const Mat* plugin_sigma = nullptr);

// closed form of the plugin-mode posterior: with J~(gamma) = c - M gamma,
// precision P = M Sigma^-1 M + I/tau^2 and mean P^-1 M Sigma^-1 c
struct GaussianPosterior {
  Vec mean;
  Mat cov;
};
GaussianPosterior plugin_posterior(const ScoreSystem& sys, const PriorSpec& prior,
                                   const Mat& sigma);

// adaptive random-walk Metropolis started at ht_fit(sys); proposal covariance
// (2.38^2/d) * plugin posterior covariance, Robbins-Monro scale adaptation
// toward 0.3 acceptance during burn-in only
PosteriorDraws run_mcmc(const ScoreSystem& sys, const PriorSpec& prior,
                        const McmcConfig& config);

}  // namespace infosamp
