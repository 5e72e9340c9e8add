#include "infosamp/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

namespace infosamp {

double chi2_cdf(double x, double df) {
  if (df <= 0) throw NumericError("chi2_cdf: df must be positive");
  if (x <= 0) return 0.0;
  return boost::math::cdf(boost::math::chi_squared(df), x);
}

double chi2_quantile(double p, double df) {
  if (df <= 0) throw NumericError("chi2_quantile: df must be positive");
  if (p < 0 || p >= 1) throw NumericError("chi2_quantile: p outside [0,1)");
  if (p == 0) return 0.0;
  return boost::math::quantile(boost::math::chi_squared(df), p);
}

double student_t_cdf(double x, double df) {
  if (df <= 0) throw NumericError("student_t_cdf: df must be positive");
  return boost::math::cdf(boost::math::students_t(df), x);
}

double t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  return 2.0 * boost::math::cdf(boost::math::students_t(df), -std::fabs(t));
}

double batch_means_se(const std::vector<double>& x, int n_batches) {
  const int n = static_cast<int>(x.size());
  if (n_batches < 2 || n < 2 * n_batches)
    throw NumericError("batch_means_se: need at least 2 observations per batch");
  const int len = n / n_batches;  // trailing remainder dropped
  double grand = 0.0;
  std::vector<double> means(n_batches, 0.0);
  for (int b = 0; b < n_batches; ++b) {
    double s = 0.0;
    for (int i = b * len; i < (b + 1) * len; ++i) s += x[i];
    means[b] = s / len;
    grand += means[b];
  }
  grand /= n_batches;
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  const double var_means = ss / (n_batches - 1);
  return std::sqrt(var_means / n_batches);
}

double split_rhat(const Vec& chain) {
  const int n = static_cast<int>(chain.size());
  if (n < 4) throw NumericError("split_rhat: chain too short");
  const int half = n / 2;
  const auto a = chain.head(half), b = chain.tail(half);
  const double ma = a.mean(), mb = b.mean();
  const double va = (a.array() - ma).square().sum() / (half - 1);
  const double vb = (b.array() - mb).square().sum() / (half - 1);
  const double w = 0.5 * (va + vb);
  const double mean = 0.5 * (ma + mb);
  const double bvar = half * ((ma - mean) * (ma - mean) + (mb - mean) * (mb - mean));
  if (w <= 0) return 1.0;  // constant chain
  const double var_plus = (half - 1.0) / half * w + bvar / half;
  return std::sqrt(var_plus / w);
}

}  // namespace infosamp
