#pragma once
#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace infosamp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Every failure surfaces as one of these; what() carries enough context to act on.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// invalid model specs, configs, CLI usage
struct ConfigError : Error { using Error::Error; };
// malformed or inconsistent data files
struct DataError : Error { using Error::Error; };
// singular systems, degenerate designs, failed optimizations
struct NumericError : Error { using Error::Error; };
// population generation failures under the positivity policy
struct GenerationError : Error { using Error::Error; };

}  // namespace infosamp
