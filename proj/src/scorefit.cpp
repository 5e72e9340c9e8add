#include "infosamp/scorefit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "infosamp/csv.hpp"

namespace infosamp {

int SelectionModelSpec::dim() const {
  return static_cast<int>(v_terms.size() + x_terms.size() + y_powers.size());
}

std::vector<std::string> SelectionModelSpec::term_names() const {
  std::vector<std::string> names;
  for (int t : v_terms) names.push_back(t == 0 ? "1" : "v" + std::to_string(t));
  for (int t : x_terms) names.push_back("x" + std::to_string(t));
  for (int p : y_powers) names.push_back(p == 1 ? "y" : "y" + std::to_string(p));
  return names;
}

void SelectionModelSpec::validate() const {
  if (dim() == 0) throw ConfigError("selection model: empty term list");
  auto no_dups = [](const std::vector<int>& ts, const char* what) {
    std::vector<int> s(ts);
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end())
      throw ConfigError(std::string("selection model: duplicate ") + what + " term");
  };
  no_dups(v_terms, "v");
  no_dups(x_terms, "x");
  no_dups(y_powers, "y-power");
  for (int t : v_terms)
    if (t < 0) throw ConfigError("selection model: negative v term index");
  for (int t : x_terms)
    if (t < 1) throw ConfigError("selection model: x term indices start at 1");
  for (int p : y_powers)
    if (p < 1) throw ConfigError("selection model: y powers start at 1");
}

void ScoreSystem::validate() const {
  if (n() < d()) throw ConfigError("score system: fewer rows than terms");
  if (response.size() != n() || weights.size() != n() || pi.size() != n())
    throw ConfigError("score system: column lengths disagree");
  if (pairwise && (pairwise->rows() != n() || pairwise->cols() != n()))
    throw ConfigError("score system: pairwise matrix must be n x n");
}

namespace {

Mat build_basis(const Vec& y, const Mat& x, const Mat& v, const SelectionModelSpec& spec) {
  spec.validate();
  const int n = static_cast<int>(y.size());
  Mat b(n, spec.dim());
  int col = 0;
  for (int t : spec.v_terms) {
    if (t == 0)
      b.col(col).setOnes();
    else if (t <= v.cols())
      b.col(col) = v.col(t - 1);
    else
      throw ConfigError("selection model: v" + std::to_string(t) + " not in data");
    ++col;
  }
  for (int t : spec.x_terms) {
    if (t <= x.cols())
      b.col(col) = x.col(t - 1);
    else
      throw ConfigError("selection model: x" + std::to_string(t) + " not in data");
    ++col;
  }
  for (int p : spec.y_powers) {
    b.col(col) = y.array().pow(p);
    ++col;
  }
  return b;
}

// rank check via singular values, relative threshold 1e-10
void require_full_rank(const Eigen::JacobiSVD<Mat>& svd, const char* who) {
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * sv[0];
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (!(sv[k] > tol)) {
      std::ostringstream msg;
      msg << who << ": weighted basis is rank deficient (singular value " << k + 1
          << " of " << sv.size() << " is " << sv[k] << " against scale " << sv[0] << ")";
      throw NumericError(msg.str());
    }
}

}  // namespace

ScoreSystem selection_system(const SampleData& sample, const SelectionModelSpec& spec,
                             const Mat* pairwise) {
  ScoreSystem sys;
  sys.basis = build_basis(sample.y, sample.x, sample.v, spec);
  sys.response = sample.pi;
  sys.weights = sample.w;
  sys.pi = sample.pi;
  if (pairwise) sys.pairwise = *pairwise;
  sys.validate();
  return sys;
}

ScoreSystem population_system(const SampleData& sample, const Mat* pairwise) {
  const int n = sample.n;
  Mat b(n, 1 + sample.x.cols() + sample.v.cols());
  b.col(0).setOnes();
  b.middleCols(1, sample.x.cols()) = sample.x;
  b.rightCols(sample.v.cols()) = sample.v;
  ScoreSystem sys;
  sys.basis = std::move(b);
  sys.response = sample.y;
  sys.weights = sample.w;
  sys.pi = sample.pi;
  if (pairwise) sys.pairwise = *pairwise;
  sys.validate();
  return sys;
}

ScoreSystem subsystem(const ScoreSystem& sys, const std::vector<int>& keep) {
  ScoreSystem sub;
  sub.basis.resize(sys.n(), static_cast<Eigen::Index>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) {
    if (keep[k] < 0 || keep[k] >= sys.d())
      throw ConfigError("subsystem: column index out of range");
    sub.basis.col(static_cast<Eigen::Index>(k)) = sys.basis.col(keep[k]);
  }
  sub.response = sys.response;
  sub.weights = sys.weights;
  sub.pi = sys.pi;
  sub.pairwise = sys.pairwise;
  sub.validate();
  return sub;
}

double ht_objective(const ScoreSystem& sys, const Vec& gamma) {
  if (gamma.size() != sys.d()) throw ConfigError("ht_objective: gamma has wrong length");
  const Vec e = sys.response - sys.basis * gamma;
  return (e.array().square() * sys.weights.array()).sum();
}

Vec ht_score(const ScoreSystem& sys, const Vec& gamma) {
  if (gamma.size() != sys.d()) throw ConfigError("ht_score: gamma has wrong length");
  const Vec e = sys.response - sys.basis * gamma;
  return sys.basis.transpose() * (e.array() * sys.weights.array()).matrix();
}

Vec ht_fit(const ScoreSystem& sys) {
  // weighted least squares through sqrt(weights); SVD keeps the rank check honest
  const Vec sw = sys.weights.array().sqrt();
  const Mat a = sys.basis.array().colwise() * sw.array();
  const Vec b = sys.response.array() * sw.array();
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  require_full_rank(svd, "ht_fit");
  return svd.solve(b);
}

void CovarianceEstimate::validate() const {
  if (matrix.rows() != matrix.cols()) throw NumericError("covariance: not square");
  if (!matrix.allFinite()) throw NumericError("covariance: non-finite entries");
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * (1.0 + matrix.cwiseAbs().maxCoeff()))
    throw NumericError("covariance: not symmetric");
}

CovarianceEstimate ht_covariance(const ScoreSystem& sys, const Vec& gamma,
                                 const Mat* pairwise) {
  if (gamma.size() != sys.d()) throw ConfigError("ht_covariance: gamma has wrong length");
  const int n = sys.n();
  const Mat* pw = pairwise ? pairwise : (sys.pairwise ? &*sys.pairwise : nullptr);

  const Vec e = sys.response - sys.basis * gamma;
  // Sigma_kl = sum_ij e_i e_j B_ik B_jl f_ij  with  f_ij = 1/(pi_i pi_j) - 1/pi_ij;
  // computed as C' F C with C = diag(e) B
  Mat f(n, n);
  if (pw) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        f(i, j) = 1.0 / (sys.pi[i] * sys.pi[j]) - 1.0 / (*pw)(i, j);
  } else {
    // remark2 pair factor as the joint-inclusion approximation
    const double n_d = static_cast<double>(n);
    const double s_pi = (sys.weights.sum() / n_d) * sys.pi.sum();  // (N^/n) sum pi
    for (int i = 0; i < n; ++i) {
      f(i, i) = (1.0 - sys.pi[i]) / (sys.pi[i] * sys.pi[i]);
      for (int j = i + 1; j < n; ++j) {
        const double g = joint_inclusion_factor(sys.pi[i], sys.pi[j], s_pi, n);
        const double pij = g * sys.pi[i] * sys.pi[j];
        f(i, j) = f(j, i) = 1.0 / (sys.pi[i] * sys.pi[j]) - 1.0 / pij;
      }
    }
  }
  const Mat c = sys.basis.array().colwise() * e.array();
  CovarianceEstimate est;
  est.matrix = c.transpose() * f * c;
  est.matrix = 0.5 * (est.matrix + est.matrix.transpose().eval());  // kill roundoff skew
  est.mode = pw ? CovMode::exact_pairwise : CovMode::remark2;
  est.validate();
  return est;
}

Vec population_score_zero_check(const PopulationFrame& frame,
                                const SelectionModelSpec& spec, int n) {
  const Vec pi = inclusion_probabilities(frame, n);
  ScoreSystem census;
  census.basis = build_basis(frame.y, frame.x, frame.v, spec);
  census.response = pi;
  census.weights = Vec::Ones(frame.n_units);
  census.pi = Vec::Ones(frame.n_units);  // unit weights: census normal equations
  census.validate();
  return ht_fit(census);
}

std::string FitReport::to_json() const {
  std::ostringstream out;
  out << "{\"coefficients\":[";
  for (Eigen::Index i = 0; i < coefficients.size(); ++i)
    out << (i ? "," : "") << fmt_full(coefficients[i]);
  out << "],\"objective\":" << fmt_full(objective) << ",\"covariance\":[";
  for (Eigen::Index i = 0; i < covariance.rows(); ++i) {
    out << (i ? ",[" : "[");
    for (Eigen::Index j = 0; j < covariance.cols(); ++j)
      out << (j ? "," : "") << fmt_full(covariance(i, j));
    out << "]";
  }
  out << "],\"covariance_mode\":\""
      << (covariance_mode == CovMode::remark2 ? "remark2" : "exact_pairwise")
      << "\",\"psd_repaired\":" << (psd_repaired ? "true" : "false");
  if (sigma2_hat > 0) out << ",\"sigma2_hat\":" << fmt_full(sigma2_hat);
  out << "}";
  return out.str();
}

}  // namespace infosamp
