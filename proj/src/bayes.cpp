#include "infosamp/bayes.hpp"

#include <cmath>
#include <sstream>

#include "infosamp/rng.hpp"

namespace infosamp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
}

Mat psd_repair(const Mat& a, bool* fired) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (a + a.transpose()));
  if (eig.info() != Eigen::Success)
    throw NumericError("psd_repair: eigendecomposition failed");
  Vec lam = eig.eigenvalues();
  const double lmax = lam.maxCoeff();
  if (!(lmax > 0)) throw NumericError("psd_repair: matrix has no positive spectrum");
  const double floor = 1e-10 * lmax;
  bool clipped = false;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam[i] < floor) {
      lam[i] = floor;
      clipped = true;
    }
  if (fired) *fired = clipped;
  if (!clipped) return 0.5 * (a + a.transpose());
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

void PriorSpec::validate() const {
  if (!(variance_scale > 0)) throw ConfigError("prior: variance_scale must be positive");
}

void McmcConfig::validate() const {
  if (burn_in < 0) throw ConfigError("mcmc: negative burn_in");
  if (K < 1000) throw ConfigError("mcmc: need at least 1000 retained draws");
  if (thin < 1) throw ConfigError("mcmc: thin must be >= 1");
}

double log_prior(const PriorSpec& prior, const Vec& gamma) {
  prior.validate();
  const double tau2 = prior.variance_scale;
  const double d = static_cast<double>(gamma.size());
  return -0.5 * d * (kLog2Pi + std::log(tau2)) - 0.5 * gamma.squaredNorm() / tau2;
}

double log_posterior(const ScoreSystem& sys, const PriorSpec& prior, const Vec& gamma,
                     CovarianceMode mode, const Mat* plugin_sigma) {
  const Vec score = ht_score(sys, gamma);
  Mat sigma;
  if (mode == CovarianceMode::plugin) {
    if (!plugin_sigma)
      throw ConfigError("log_posterior: plugin mode needs a frozen covariance");
    sigma = *plugin_sigma;
  } else {
    sigma = psd_repair(ht_covariance(sys, gamma).matrix);
  }
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NumericError("log_posterior: score covariance is not positive definite");
  const Mat l = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
  const Vec half = llt.matrixL().solve(score);
  const double d = static_cast<double>(sys.d());
  const double log_gauss = -0.5 * d * kLog2Pi - 0.5 * logdet - 0.5 * half.squaredNorm();
  return log_gauss + log_prior(prior, gamma);
}

GaussianPosterior plugin_posterior(const ScoreSystem& sys, const PriorSpec& prior,
                                   const Mat& sigma) {
  prior.validate();
  const int d = sys.d();
  const Mat dw = sys.weights.asDiagonal();
  const Mat m = sys.basis.transpose() * dw * sys.basis;
  const Vec c = sys.basis.transpose() * (sys.weights.array() * sys.response.array()).matrix();
  Eigen::LLT<Mat> llt(psd_repair(sigma));
  if (llt.info() != Eigen::Success)
    throw NumericError("plugin_posterior: covariance is not positive definite");
  const Mat sinv_m = llt.solve(m);
  // score is linear in gamma, so the plugin posterior is exactly Gaussian:
  //   precision = M' Sigma^-1 M + I/tau^2,  mean = precision^-1 M' Sigma^-1 c
  Mat precision = m.transpose() * sinv_m;
  precision.diagonal().array() += 1.0 / prior.variance_scale;
  Eigen::LLT<Mat> pll(0.5 * (precision + precision.transpose().eval()));
  if (pll.info() != Eigen::Success)
    throw NumericError("plugin_posterior: degenerate precision");
  GaussianPosterior post;
  post.mean = pll.solve(m.transpose() * llt.solve(c));
  post.cov = pll.solve(Mat::Identity(d, d));
  post.cov = 0.5 * (post.cov + post.cov.transpose().eval());
  return post;
}

void PosteriorDraws::validate() const {
  if (draws.rows() < 1000) throw NumericError("posterior draws: fewer than 1000 draws");
  if (log_density.size() != draws.rows())
    throw NumericError("posterior draws: log_density length mismatch");
  if (!(acceptance_rate > 0.05 && acceptance_rate < 0.7)) {
    std::ostringstream msg;
    msg << "posterior draws: acceptance rate " << acceptance_rate
        << " outside (0.05, 0.7); chain is not mixing";
    throw NumericError(msg.str());
  }
}

PosteriorDraws run_mcmc(const ScoreSystem& sys, const PriorSpec& prior,
                        const McmcConfig& config) {
  config.validate();
  prior.validate();
  const int d = sys.d();
  Rng rng(config.seed);

  // start at the design-weighted solution and freeze its covariance for the proposal
  const Vec gamma_hat = ht_fit(sys);
  bool repaired = false;
  const Mat plugin_sigma = psd_repair(ht_covariance(sys, gamma_hat).matrix, &repaired);
  const GaussianPosterior plug = plugin_posterior(sys, prior, plugin_sigma);

  const double base_scale = 2.38 * 2.38 / static_cast<double>(d);
  Mat proposal_cov = base_scale * plug.cov;
  Eigen::LLT<Mat> pll(psd_repair(proposal_cov));
  if (pll.info() != Eigen::Success)
    throw NumericError("run_mcmc: proposal covariance is not positive definite");
  const Mat chol = pll.matrixL();

  const Mat* frozen =
      config.covariance_mode == CovarianceMode::plugin ? &plugin_sigma : nullptr;
  auto target = [&](const Vec& g) {
    return log_posterior(sys, prior, g, config.covariance_mode, frozen);
  };

  Vec current = gamma_hat;
  double current_lp = target(current);
  if (!std::isfinite(current_lp))
    throw NumericError("run_mcmc: log posterior not finite at the starting point");

  PosteriorDraws out;
  out.draws.resize(config.K, d);
  out.log_density.resize(config.K);
  out.mode = current;
  out.mode_log_density = current_lp;
  out.covariance_mode = config.covariance_mode;
  out.plugin_sigma = plugin_sigma;

  double log_step = 0.0;  // adapted on the log scale during burn-in only
  const double target_acc = 0.3;
  long kept = 0, accepted_kept = 0, proposed_kept = 0;
  const long total = config.burn_in + static_cast<long>(config.K) * config.thin;
  Vec z(d), proposal(d);
  for (long t = 0; t < total; ++t) {
    for (int i = 0; i < d; ++i) z[i] = rng.normal();
    proposal = current + std::exp(log_step) * (chol * z);
    double prop_lp;
    bool ok = true;
    try {
      prop_lp = target(proposal);
      if (!std::isfinite(prop_lp)) ok = false;
    } catch (const NumericError&) {
      ok = false;  // unstable covariance off in the tails: treat as zero density
    }
    const double delta = ok ? prop_lp - current_lp : -1e300;
    const bool accept = std::log(rng.uniform()) < delta;
    if (accept) {
      current = proposal;
      current_lp = prop_lp;
      if (current_lp > out.mode_log_density) {
        out.mode = current;
        out.mode_log_density = current_lp;
      }
    }
    if (t < config.burn_in) {
      const double acc_prob = ok ? std::min(1.0, std::exp(delta)) : 0.0;
      log_step += (acc_prob - target_acc) / std::pow(1.0 + t, 0.6);
    } else {
      ++proposed_kept;
      if (accept) ++accepted_kept;
      if ((t - config.burn_in) % config.thin == config.thin - 1) {
        out.draws.row(kept) = current;
        out.log_density[kept] = current_lp;
        ++kept;
      }
    }
  }
  out.acceptance_rate =
      static_cast<double>(accepted_kept) / static_cast<double>(proposed_kept);
  out.proposal_cov = std::exp(2.0 * log_step) * proposal_cov;
  out.validate();
  return out;
}

}  // namespace infosamp
