#pragma once
#include <string>
#include <vector>

#include "infosamp/bayes.hpp"
#include "infosamp/common.hpp"
#include "infosamp/design.hpp"
#include "infosamp/scorefit.hpp"

namespace infosamp {

// Nested pair of selection models; the constrained coordinates of the full
// model are fixed to zero under H.
struct HypothesisSpec {
  SelectionModelSpec full;
  SelectionModelSpec null_constrained;
  std::vector<int> constrained_indices;

  int h() const { return static_cast<int>(constrained_indices.size()); }
  std::vector<int> free_indices() const;
  void validate() const;
};

// fill constrained_indices by matching term names of full against null
HypothesisSpec make_hypothesis(const SelectionModelSpec& full,
                               const SelectionModelSpec& null_constrained);

enum class FbstMode { standard, paper_rho };

struct EvidenceResult {
  Vec gamma0_hat;
  double ev_bar = 0.0;      // posterior mass of the tangential set (against H)
  double ev_support = 1.0;  // 1 - ev_bar
  double rho = 1.0;
  double log_rho_se = 0.0;  // paper_rho mode only
  double threshold = 0.0;
  bool reject = false;
  FbstMode mode = FbstMode::standard;
};

// argmax of log_posterior over {gamma : constrained coords = 0}; BFGS with
// central-difference gradients on the free coordinates, started from the
// null-model ht_fit.  Accepts an empty constraint set (plain maximizer).
Vec constrained_maximize(const ScoreSystem& sys, const PriorSpec& prior,
                         const HypothesisSpec& hyp, CovarianceMode mode,
                         const Mat* plugin_sigma = nullptr);

// chi-square calibration of the evidence value: c_alpha = F_d(F_h^-1(1-alpha)),
// h = number of constraints; reject H when ev_bar > c_alpha
double evidence_threshold(int d_full, int h, double alpha);

// seed drives the importance sampler in paper_rho mode and is ignored otherwise
EvidenceResult fbst_evidence(const PosteriorDraws& draws, const ScoreSystem& sys,
                             const PriorSpec& prior, const HypothesisSpec& hyp,
                             FbstMode mode, double alpha = 0.05,
                             uint64_t seed = 24601ull);

struct LrResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// likelihood ratio on the Gaussian score model with Sigma_hat frozen at the
// constrained fit (dof-scaled); statistic is the constrained minimum of
// J~' Sigma^-1 J~, referenced against chi-square with h dof
LrResult lr_test(const ScoreSystem& sys, const HypothesisSpec& hyp);

struct PsResult {
  double correlation = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
};

// weight-residual correlation test: eps = y - [1,x,v] beta_hat; partial=true
// partials both eps^k and w on the population design matrix (production
// default), partial=false is the plain Pearson correlation
PsResult ps_test(const SampleData& sample, const Vec& beta_hat, int k,
                 bool partial = true);

}  // namespace infosamp
