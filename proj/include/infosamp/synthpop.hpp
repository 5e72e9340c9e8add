#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "infosamp/common.hpp"

namespace infosamp {

// One covariate generator.  role decides whether the column lands in the
// population-covariate block (x) or the selection-covariate block (v); both
// blocks enter the population regression, in listed order, after the intercept.
struct CovariateSpec {
  std::string dist;            // gamma | poisson | normal | constant
  std::vector<double> params;  // gamma: shape,rate; poisson: mean; normal: mean,variance; constant: value
  std::string role = "x";      // x | v

  void validate() const;
};

struct PopulationModelSpec {
  Vec beta;      // intercept + one slope per covariate, in listed order
  double sigma2 = 0.0;
  std::vector<CovariateSpec> covariate_specs;

  void validate() const;
};

enum class PositivityPolicy { redraw, reject_population };

// E(Z | v, y) = intercept + v*v1 + y*y + y2*y^2, plus N(0, noise_variance) noise
struct DesignVariableSpec {
  double intercept = 0.0, v = 0.0, y = 0.0, y2 = 0.0;
  double noise_variance = 0.0;
  PositivityPolicy policy = PositivityPolicy::redraw;

  void validate() const;
};

struct PopulationFrame {
  int n_units = 0;
  Vec y;
  Mat x;  // population covariates (may have zero columns)
  Mat v;  // selection covariates
  Vec z;  // design variable, all positive

  void validate() const;
};

PopulationFrame generate_population(const PopulationModelSpec& spec,
                                    const DesignVariableSpec& dspec,
                                    int n_units, std::uint64_t seed);

void population_to_csv(const PopulationFrame& frame, const std::string& path);
PopulationFrame population_from_csv(const std::string& path);

}  // namespace infosamp
