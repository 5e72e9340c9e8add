#pragma once
#include <optional>
#include <string>
#include <vector>

#include "infosamp/common.hpp"
#include "infosamp/design.hpp"

namespace infosamp {

// Regression basis of the selection model E(pi | v, y).  Term order is fixed:
// intercept (v_terms entry 0), then v columns (v_terms entries j>=1 mean v
// column j-1), then x columns (x_terms entries j>=1, for selection models that
// borrow a population covariate), then powers of y.
struct SelectionModelSpec {
  std::vector<int> v_terms;  // 0 = intercept
  std::vector<int> x_terms;
  std::vector<int> y_powers;

  int dim() const;
  std::vector<std::string> term_names() const;
  void validate() const;
};

// The estimating-equation system: basis B, response r (pi for the selection
// model, y for the population model), weights 1/pi.  The optional pairwise
// matrix is the joint-inclusion matrix the covariance estimator should use;
// without it the covariance falls back to the remark2 pair factor.
struct ScoreSystem {
  Mat basis;
  Vec response;
  Vec weights;
  Vec pi;
  std::optional<Mat> pairwise;

  int n() const { return static_cast<int>(basis.rows()); }
  int d() const { return static_cast<int>(basis.cols()); }
  void validate() const;
};

ScoreSystem selection_system(const SampleData& sample, const SelectionModelSpec& spec,
                             const Mat* pairwise = nullptr);
// population model: response y, basis [1, x, v], same weights
ScoreSystem population_system(const SampleData& sample, const Mat* pairwise = nullptr);
// columns of sys.basis restricted to `keep` (nested-model machinery)
ScoreSystem subsystem(const ScoreSystem& sys, const std::vector<int>& keep);

// W~(gamma) = sum e_i^2 / pi_i,  e = response - B gamma
double ht_objective(const ScoreSystem& sys, const Vec& gamma);
// J~_l = sum e_i B_il / pi_i = -1/2 dW~/dgamma_l
Vec ht_score(const ScoreSystem& sys, const Vec& gamma);
// weighted least squares solve of J~(gamma) = 0, rank-revealing
Vec ht_fit(const ScoreSystem& sys);

enum class CovMode { remark2, exact_pairwise };

struct CovarianceEstimate {
  Mat matrix;
  CovMode mode = CovMode::remark2;

  void validate() const;
};

// Sigma_hat(gamma)_{kl} = sum_ij e_i e_j B_ik B_jl (1/(pi_i pi_j) - 1/pi_ij),
// diagonal pairs pi_ii = pi_i.  `pairwise` overrides sys.pairwise when given.
CovarianceEstimate ht_covariance(const ScoreSystem& sys, const Vec& gamma,
                                 const Mat* pairwise = nullptr);

// census normal equations over the whole frame (oracle/test use)
Vec population_score_zero_check(const PopulationFrame& frame,
                                const SelectionModelSpec& spec, int n);

struct FitReport {
  Vec coefficients;
  double objective = 0.0;
  Mat covariance;
  CovMode covariance_mode = CovMode::remark2;
  bool psd_repaired = false;
  double sigma2_hat = 0.0;  // population-model fits only

  std::string to_json() const;
};

}  // namespace infosamp
