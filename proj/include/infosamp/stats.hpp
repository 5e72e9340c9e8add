#pragma once
#include <vector>

#include "infosamp/common.hpp"

namespace infosamp {

double chi2_cdf(double x, double df);
double chi2_quantile(double p, double df);
double student_t_cdf(double x, double df);
// two-sided p for a t statistic; clamps |t|=inf to p=0
double t_two_sided_p(double t, double df);

// Monte Carlo standard error of mean(x) by non-overlapping batch means.
double batch_means_se(const std::vector<double>& x, int n_batches = 50);

// split-chain (two halves) potential scale reduction for one coordinate
double split_rhat(const Vec& chain);

}  // namespace infosamp
