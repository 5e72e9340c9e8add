#include "infosamp/infer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "infosamp/rng.hpp"
#include "infosamp/stats.hpp"

namespace infosamp {

std::vector<int> HypothesisSpec::free_indices() const {
  std::vector<int> free;
  for (int i = 0; i < full.dim(); ++i)
    if (std::find(constrained_indices.begin(), constrained_indices.end(), i) ==
        constrained_indices.end())
      free.push_back(i);
  return free;
}

void HypothesisSpec::validate() const {
  full.validate();
  if (null_constrained.dim() > 0) null_constrained.validate();
  std::vector<int> idx(constrained_indices);
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    throw ConfigError("hypothesis: duplicate constrained index");
  for (int i : idx)
    if (i < 0 || i >= full.dim())
      throw ConfigError("hypothesis: constrained index out of range");
  if (null_constrained.dim() + h() != full.dim())
    throw ConfigError("hypothesis: null and constraint dimensions do not add up");
}

HypothesisSpec make_hypothesis(const SelectionModelSpec& full,
                               const SelectionModelSpec& null_constrained) {
  full.validate();
  if (null_constrained.dim() > 0) null_constrained.validate();  // empty = point null
  const auto full_names = full.term_names();
  const auto null_names = null_constrained.term_names();
  for (const auto& name : null_names)
    if (std::find(full_names.begin(), full_names.end(), name) == full_names.end())
      throw ConfigError("hypothesis: null term " + name + " missing from full model");
  HypothesisSpec hyp;
  hyp.full = full;
  hyp.null_constrained = null_constrained;
  for (size_t i = 0; i < full_names.size(); ++i)
    if (std::find(null_names.begin(), null_names.end(), full_names[i]) ==
        null_names.end())
      hyp.constrained_indices.push_back(static_cast<int>(i));
  hyp.validate();
  return hyp;
}

namespace {

Vec embed(const Vec& theta, const std::vector<int>& free, int d) {
  Vec gamma = Vec::Zero(d);
  for (size_t i = 0; i < free.size(); ++i) gamma[free[i]] = theta[i];
  return gamma;
}

// minimize f by BFGS with central-difference gradients; hard iteration cap.
// callers pass coordinates scaled so the Hessian is O(1): the gradient
// tolerances below are then distances to the optimum in those same units
Vec bfgs_minimize(const std::function<double(const Vec&)>& f, Vec theta,
                  const char* who) {
  const int q = static_cast<int>(theta.size());
  if (q == 0) return theta;
  auto safe_f = [&](const Vec& x) {
    try {
      const double v = f(x);
      return std::isfinite(v) ? v : 1e300;
    } catch (const NumericError&) {
      return 1e300;
    }
  };
  auto grad = [&](const Vec& x) {
    Vec g(q), xp, xm;
    for (int i = 0; i < q; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x[i]));
      xp = x;
      xm = x;
      xp[i] += h;
      xm[i] -= h;
      g[i] = (safe_f(xp) - safe_f(xm)) / (2.0 * h);
    }
    return g;
  };

  double fx = safe_f(theta);
  if (fx >= 1e300)
    throw NumericError(std::string(who) + ": objective not finite at start");
  Vec g = grad(theta);
  Mat binv = Mat::Identity(q, q);  // inverse Hessian approximation
  const int max_iter = 100;
  for (int it = 0; it < max_iter; ++it) {
    if (g.cwiseAbs().maxCoeff() < 1e-6) return theta;
    Vec p = -(binv * g);
    if (p.dot(g) >= 0) {  // not a descent direction: reset curvature memory
      binv.setIdentity();
      p = -g;
    }
    double alpha = 1.0;
    const double slope = g.dot(p);
    Vec trial;
    double ftrial = 0;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      trial = theta + alpha * p;
      ftrial = safe_f(trial);
      if (ftrial <= fx + 1e-4 * alpha * slope) {
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {
      // step collapsed: flat to machine precision along every direction we try
      if (g.cwiseAbs().maxCoeff() < 1e-3) return theta;
      throw NumericError(std::string(who) + ": line search failed");
    }
    const Vec s = trial - theta;
    const Vec gnew = grad(trial);
    const Vec y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Vec by = binv * y;
      const double yby = y.dot(by);
      binv += ((sy + yby) / (sy * sy)) * (s * s.transpose()) -
              (by * s.transpose() + s * by.transpose()) / sy;
    }
    theta = trial;
    fx = ftrial;
    g = gnew;
  }
  if (g.cwiseAbs().maxCoeff() < 1e-3) return theta;  // good enough in noisy cases
  std::ostringstream msg;
  msg << who << ": no convergence in " << max_iter
      << " iterations (gradient norm " << g.cwiseAbs().maxCoeff() << ")";
  throw NumericError(msg.str());
}

Mat numerical_hessian(const std::function<double(const Vec&)>& f, const Vec& x) {
  const int q = static_cast<int>(x.size());
  Mat hess(q, q);
  Vec h(q);
  for (int i = 0; i < q; ++i) h[i] = 1e-4 * (1.0 + std::abs(x[i]));
  const double f0 = f(x);
  for (int i = 0; i < q; ++i) {
    Vec xp = x, xm = x;
    xp[i] += h[i];
    xm[i] -= h[i];
    hess(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i]);
    for (int j = i + 1; j < q; ++j) {
      Vec xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[i] += h[i];
      xpp[j] += h[j];
      xpm[i] += h[i];
      xpm[j] -= h[j];
      xmp[i] -= h[i];
      xmp[j] += h[j];
      xmm[i] -= h[i];
      xmm[j] -= h[j];
      hess(i, j) = hess(j, i) =
          (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[i] * h[j]);
    }
  }
  return hess;
}

struct IsEstimate {
  double log_z = 0.0;
  double se = 0.0;
};

// importance-sample log integral of exp(log_kernel) under N(mean, cov)
IsEstimate is_log_normalizer(const std::function<double(const Vec&)>& log_kernel,
                             const Vec& mean, const Mat& cov, long m, Rng& rng) {
  const int q = static_cast<int>(mean.size());
  Eigen::LLT<Mat> llt(psd_repair(cov));
  if (llt.info() != Eigen::Success)
    throw NumericError("importance sampler: proposal covariance not positive definite");
  const Mat chol = llt.matrixL();
  double logdet = 0.0;
  for (int i = 0; i < q; ++i) logdet += 2.0 * std::log(chol(i, i));
  const double log_q_const = -0.5 * q * 1.8378770664093454836 - 0.5 * logdet;

  std::vector<double> lw(m);
  Vec z(q);
  for (long j = 0; j < m; ++j) {
    for (int i = 0; i < q; ++i) z[i] = rng.normal();
    const Vec gamma = mean + chol * z;
    double lk;
    try {
      lk = log_kernel(gamma);
      if (!std::isfinite(lk)) lk = -1e300;
    } catch (const NumericError&) {
      lk = -1e300;
    }
    lw[j] = lk - (log_q_const - 0.5 * z.squaredNorm());
  }
  const double a = *std::max_element(lw.begin(), lw.end());
  if (!(a > -1e299)) throw NumericError("importance sampler: all weights vanished");
  double sum = 0.0, sumsq = 0.0;
  for (double v : lw) {
    const double w = std::exp(v - a);
    sum += w;
    sumsq += w * w;
  }
  const double wbar = sum / m;
  const double var_w = std::max(0.0, sumsq / m - wbar * wbar);
  IsEstimate est;
  est.log_z = a + std::log(wbar);
  est.se = std::sqrt(var_w / m) / wbar;  // delta method on log scale
  return est;
}

}  // namespace

Vec constrained_maximize(const ScoreSystem& sys, const PriorSpec& prior,
                         const HypothesisSpec& hyp, CovarianceMode mode,
                         const Mat* plugin_sigma) {
  hyp.validate();
  if (hyp.full.dim() != sys.d())
    throw ConfigError("constrained_maximize: hypothesis does not match system");
  const std::vector<int> free = hyp.free_indices();
  const int d = sys.d();
  if (free.empty()) return Vec::Zero(d);  // point null: nothing to optimize

  // warm start: design-weighted fit of the free columns
  const Vec theta0 = ht_fit(subsystem(sys, free));

  // Search in coordinates whitened by the plugin curvature of the posterior.
  // Raw coefficients can sit on wildly different scales (weighted second
  // moments of powers of the response push the Hessian past 1e6), so no fixed
  // gradient tolerance works for every system; after whitening the Hessian is
  // near the identity and the stopping rule is in posterior-sd units.
  const int q = static_cast<int>(free.size());
  Mat sigma_scale;
  if (plugin_sigma != nullptr) {
    sigma_scale = psd_repair(*plugin_sigma);
  } else {
    sigma_scale = psd_repair(ht_covariance(sys, ht_fit(sys)).matrix);
  }
  const Mat m = sys.basis.transpose() * sys.weights.asDiagonal() * sys.basis;
  Mat precision = m.transpose() * Eigen::LLT<Mat>(sigma_scale).solve(m);
  precision.diagonal().array() += 1.0 / prior.variance_scale;
  Mat p_free(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) p_free(i, j) = precision(free[i], free[j]);
  Mat white = Mat::Identity(q, q);
  Eigen::LLT<Mat> pll(p_free);
  if (pll.info() == Eigen::Success)
    white = Eigen::LLT<Mat>(psd_repair(pll.solve(Mat::Identity(q, q)))).matrixL();

  auto neg_lp = [&](const Vec& phi) {
    return -log_posterior(sys, prior, embed(theta0 + white * phi, free, d), mode,
                          plugin_sigma);
  };
  const Vec phi_hat =
      bfgs_minimize(neg_lp, Vec::Zero(q), "constrained_maximize");
  return embed(theta0 + white * phi_hat, free, d);
}

double evidence_threshold(int d_full, int h, double alpha) {
  if (d_full < 1) throw ConfigError("evidence_threshold: model dimension must be >= 1");
  if (h < 1 || h > d_full)
    throw ConfigError("evidence_threshold: constraint count must be in [1, d]");
  if (!(alpha > 0 && alpha < 1))
    throw ConfigError("evidence_threshold: alpha must be in (0, 1)");
  return chi2_cdf(chi2_quantile(1.0 - alpha, h), d_full);
}

EvidenceResult fbst_evidence(const PosteriorDraws& draws, const ScoreSystem& sys,
                             const PriorSpec& prior, const HypothesisSpec& hyp,
                             FbstMode mode, double alpha, uint64_t seed) {
  hyp.validate();
  if (hyp.h() < 1) throw ConfigError("fbst_evidence: hypothesis has no constraints");
  if (draws.draws.cols() != sys.d())
    throw ConfigError("fbst_evidence: draws do not match the score system");
  const CovarianceMode cmode = draws.covariance_mode;
  const Mat* plug = cmode == CovarianceMode::plugin ? &draws.plugin_sigma : nullptr;

  EvidenceResult res;
  res.mode = mode;
  res.gamma0_hat = constrained_maximize(sys, prior, hyp, cmode, plug);
  const double lp0 = log_posterior(sys, prior, res.gamma0_hat, cmode, plug);

  double log_rho = 0.0;
  if (mode == FbstMode::paper_rho) {
    // rho corrects for the differing normalizers of the full- and null-model
    // posterior kernels; both integrals are estimated by importance sampling
    // around the respective maximizers with Laplace proposal covariances
    Rng rng(seed);
    HypothesisSpec unconstrained;
    unconstrained.full = hyp.full;
    unconstrained.null_constrained = hyp.full;
    const Vec full_hat = constrained_maximize(sys, prior, unconstrained, cmode, plug);
    auto full_kernel = [&](const Vec& g) {
      return log_posterior(sys, prior, g, cmode, plug);
    };

    const ScoreSystem null_sys = subsystem(sys, hyp.free_indices());
    Mat null_sigma;
    const Mat* null_plug = nullptr;
    if (cmode == CovarianceMode::plugin) {
      null_sigma = psd_repair(ht_covariance(null_sys, ht_fit(null_sys)).matrix);
      null_plug = &null_sigma;
    }
    HypothesisSpec null_unconstrained;
    null_unconstrained.full = hyp.null_constrained;
    null_unconstrained.null_constrained = hyp.null_constrained;
    const Vec null_hat =
        constrained_maximize(null_sys, prior, null_unconstrained, cmode, null_plug);
    auto null_kernel = [&](const Vec& g) {
      return log_posterior(null_sys, prior, g, cmode, null_plug);
    };

    const Mat lap_full = psd_repair(
        numerical_hessian([&](const Vec& g) { return -full_kernel(g); }, full_hat));
    const Mat lap_null = psd_repair(
        numerical_hessian([&](const Vec& g) { return -null_kernel(g); }, null_hat));
    Eigen::LLT<Mat> lf(lap_full), ln(lap_null);
    if (lf.info() != Eigen::Success || ln.info() != Eigen::Success)
      throw NumericError("fbst_evidence: Laplace curvature not positive definite");
    const Mat cov_full = lf.solve(Mat::Identity(sys.d(), sys.d()));
    const Mat cov_null = ln.solve(Mat::Identity(null_sys.d(), null_sys.d()));

    long m = 4096;
    const long m_cap = 131072;
    double se = 1e300;
    while (true) {
      const IsEstimate zf = is_log_normalizer(full_kernel, full_hat, cov_full, m, rng);
      const IsEstimate zn = is_log_normalizer(null_kernel, null_hat, cov_null, m, rng);
      log_rho = zf.log_z - zn.log_z;
      se = std::sqrt(zf.se * zf.se + zn.se * zn.se);
      if (se <= 0.1) break;
      if (m >= m_cap) {
        std::ostringstream msg;
        msg << "fbst_evidence: normalizer ratio too noisy (se(log rho) = " << se
            << " at m = " << m << ")";
        throw NumericError(msg.str());
      }
      m *= 2;
    }
    res.log_rho_se = se;
  }
  res.rho = std::exp(log_rho);

  const double cut = lp0 + log_rho;
  long above = 0;
  for (Eigen::Index k = 0; k < draws.log_density.size(); ++k)
    if (draws.log_density[k] > cut) ++above;
  res.ev_bar = static_cast<double>(above) / static_cast<double>(draws.log_density.size());
  res.ev_support = 1.0 - res.ev_bar;
  res.threshold = evidence_threshold(sys.d(), hyp.h(), alpha);
  res.reject = res.ev_bar > res.threshold;
  return res;
}

LrResult lr_test(const ScoreSystem& sys, const HypothesisSpec& hyp) {
  hyp.validate();
  if (hyp.h() < 1) throw ConfigError("lr_test: hypothesis has no constraints");
  if (hyp.full.dim() != sys.d())
    throw ConfigError("lr_test: hypothesis does not match system");
  const int n = sys.n();
  const int d = sys.d();
  if (n <= d) throw DataError("lr_test: sample too small for dof scaling");

  // covariance frozen at the constrained fit, dof-scaled
  const std::vector<int> free = hyp.free_indices();
  const Vec theta0 = ht_fit(subsystem(sys, free));
  const Vec gamma0 = embed(theta0, free, d);
  Mat sigma = ht_covariance(sys, gamma0).matrix;
  sigma *= static_cast<double>(n) / static_cast<double>(n - d);
  Eigen::LLT<Mat> llt(psd_repair(sigma));
  if (llt.info() != Eigen::Success)
    throw NumericError("lr_test: score covariance not positive definite");

  const Mat dw = sys.weights.asDiagonal();
  const Mat m = sys.basis.transpose() * dw * sys.basis;
  const Vec gamma_hat = ht_fit(sys);  // solves the score equation exactly
  const Mat a = m.transpose() * llt.solve(m);

  // quadratic form in gamma: J~' Sigma^-1 J~ = (gamma - gamma_hat)' A (gamma - gamma_hat);
  // its unconstrained minimum is zero, so the statistic is the constrained minimum
  Mat e = Mat::Zero(d, static_cast<Eigen::Index>(free.size()));
  for (size_t i = 0; i < free.size(); ++i) e(free[i], static_cast<Eigen::Index>(i)) = 1.0;
  const Mat eae = e.transpose() * a * e;
  Eigen::LDLT<Mat> sol(eae);
  if (sol.info() != Eigen::Success)
    throw NumericError("lr_test: reduced normal equations are degenerate");
  const Vec theta_star = sol.solve(e.transpose() * (a * gamma_hat));
  const Vec diff = e * theta_star - gamma_hat;
  double stat = diff.dot(a * diff);
  if (stat < 0) {
    if (stat < -1e-8) {
      std::ostringstream msg;
      msg << "lr_test: negative statistic " << stat;
      throw NumericError(msg.str());
    }
    stat = 0.0;
  }
  LrResult res;
  res.statistic = stat;
  res.p_value = 1.0 - chi2_cdf(stat, hyp.h());
  return res;
}

PsResult ps_test(const SampleData& sample, const Vec& beta_hat, int k, bool partial) {
  if (k < 1) throw ConfigError("ps_test: power must be >= 1");
  const int n = sample.n;
  const int c = static_cast<int>(sample.x.cols() + sample.v.cols());
  if (beta_hat.size() != 1 + c)
    throw ConfigError("ps_test: beta does not match the outcome model");
  Mat g(n, 1 + c);
  g.col(0).setOnes();
  g.middleCols(1, sample.x.cols()) = sample.x;
  g.rightCols(sample.v.cols()) = sample.v;
  const Vec eps = sample.y - g * beta_hat;

  Vec a = eps.array().pow(k);
  Vec b = sample.w;
  int df = n - 2;
  if (partial) {
    // partial out the outcome-model regressors from both sides
    Eigen::ColPivHouseholderQR<Mat> qr(g);
    a -= g * qr.solve(a);
    b -= g * qr.solve(b);
    df = n - 2 - c;
  }
  if (df < 1) throw DataError("ps_test: not enough observations for the dof");

  const Vec ac = a.array() - a.mean();
  const Vec bc = b.array() - b.mean();
  const double sa = ac.norm(), sb = bc.norm();
  PsResult res;
  const double tiny = 1e-12 * std::sqrt(static_cast<double>(n));
  if (sa <= tiny * (1.0 + a.cwiseAbs().maxCoeff()) ||
      sb <= tiny * (1.0 + b.cwiseAbs().maxCoeff())) {
    res.degenerate = true;
    return res;
  }
  double r = ac.dot(bc) / (sa * sb);
  r = std::clamp(r, -1.0, 1.0);
  res.correlation = r;
  const double denom = 1.0 - r * r;
  res.statistic = denom > 0 ? r * std::sqrt(df / denom)
                            : std::copysign(std::numeric_limits<double>::infinity(), r);
  res.p_value = t_two_sided_p(res.statistic, df);
  return res;
}

}  // namespace infosamp
