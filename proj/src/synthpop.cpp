#include "infosamp/synthpop.hpp"

#include <cmath>

#include "infosamp/csv.hpp"
#include "infosamp/rng.hpp"

namespace infosamp {

void CovariateSpec::validate() const {
  auto need = [&](size_t k, const char* what) {
    if (params.size() != k)
      throw ConfigError("covariate '" + dist + "' needs " + what);
  };
  if (dist == "gamma") {
    need(2, "params [shape, rate]");
    if (params[0] <= 0 || params[1] <= 0)
      throw ConfigError("gamma covariate: shape and rate must be positive");
  } else if (dist == "poisson") {
    need(1, "params [mean]");
    if (params[0] < 0) throw ConfigError("poisson covariate: negative mean");
  } else if (dist == "normal") {
    need(2, "params [mean, variance]");
    if (params[1] < 0) throw ConfigError("normal covariate: negative variance");
  } else if (dist == "constant") {
    need(1, "params [value]");
  } else {
    throw ConfigError("unknown covariate distribution '" + dist + "'");
  }
  if (role != "x" && role != "v")
    throw ConfigError("covariate role must be 'x' or 'v', got '" + role + "'");
}

void PopulationModelSpec::validate() const {
  if (sigma2 < 0) throw ConfigError("population model: sigma2 must be nonnegative");
  for (const auto& c : covariate_specs) c.validate();
  const auto expected = static_cast<Eigen::Index>(1 + covariate_specs.size());
  if (beta.size() != expected)
    throw ConfigError("population model: beta has " + std::to_string(beta.size()) +
                      " entries, expected " + std::to_string(expected) +
                      " (intercept + one per covariate)");
}

void DesignVariableSpec::validate() const {
  if (noise_variance < 0) throw ConfigError("design variable: negative noise variance");
}

void PopulationFrame::validate() const {
  if (n_units < 2) throw ConfigError("population frame: need at least 2 units");
  if (y.size() != n_units || z.size() != n_units || x.rows() != n_units ||
      v.rows() != n_units)
    throw ConfigError("population frame: column lengths disagree");
  for (int i = 0; i < n_units; ++i)
    if (!(z[i] > 0))
      throw ConfigError("population frame: z must be positive (unit " +
                        std::to_string(i + 1) + ")");
}

namespace {

double draw_covariate(const CovariateSpec& c, Rng& rng) {
  if (c.dist == "gamma") return rng.gamma(c.params[0], c.params[1]);
  if (c.dist == "poisson") return static_cast<double>(rng.poisson(c.params[0]));
  if (c.dist == "normal") return rng.normal(c.params[0], std::sqrt(c.params[1]));
  return c.params[0];  // constant
}

}  // namespace

PopulationFrame generate_population(const PopulationModelSpec& spec,
                                    const DesignVariableSpec& dspec, int n_units,
                                    std::uint64_t seed) {
  if (n_units < 2) throw ConfigError("generate_population: n_units must be >= 2");
  spec.validate();
  dspec.validate();

  const int p = static_cast<int>(spec.covariate_specs.size());
  int px = 0, pv = 0;
  for (const auto& c : spec.covariate_specs) (c.role == "x" ? px : pv)++;

  PopulationFrame f;
  f.n_units = n_units;
  f.y.resize(n_units);
  f.x.resize(n_units, px);
  f.v.resize(n_units, pv);
  f.z.resize(n_units);

  Rng cov_rng = Rng::stream(seed, 0, Rng::kCovariates);
  Rng eps_rng = Rng::stream(seed, 0, Rng::kPopulationNoise);
  Rng nu_rng = Rng::stream(seed, 0, Rng::kDesignNoise);
  const double eps_sd = std::sqrt(spec.sigma2);
  const double nu_sd = std::sqrt(dspec.noise_variance);

  for (int i = 0; i < n_units; ++i) {
    // covariates and the regression mean, in listed order after the intercept
    double mean = spec.beta[0];
    int jx = 0, jv = 0;
    for (int j = 0; j < p; ++j) {
      const double val = draw_covariate(spec.covariate_specs[j], cov_rng);
      if (spec.covariate_specs[j].role == "x")
        f.x(i, jx++) = val;
      else
        f.v(i, jv++) = val;
      mean += spec.beta[j + 1] * val;
    }
    const double yi = mean + (eps_sd > 0 ? eps_rng.normal(0.0, eps_sd) : 0.0);
    f.y[i] = yi;

    const double v0 = pv > 0 ? f.v(i, 0) : 0.0;
    const double zmean = dspec.intercept + dspec.v * v0 + dspec.y * yi + dspec.y2 * yi * yi;
    double zi = zmean + (nu_sd > 0 ? nu_rng.normal(0.0, nu_sd) : 0.0);
    if (zi <= 0 && nu_sd == 0)
      throw GenerationError("generate_population: unit " + std::to_string(i + 1) +
                            " has nonpositive design mean " + std::to_string(zmean) +
                            " and no noise to redraw");
    if (dspec.policy == PositivityPolicy::redraw) {
      long guard = 0;
      while (zi <= 0) {
        zi = zmean + nu_rng.normal(0.0, nu_sd);
        if (++guard > 1000000)
          throw GenerationError("generate_population: unit " + std::to_string(i + 1) +
                                " cannot reach positive z (mean " + std::to_string(zmean) + ")");
      }
    } else {
      int tries = 0;
      while (zi <= 0 && tries < 100) {
        zi = zmean + nu_rng.normal(0.0, nu_sd);
        ++tries;
      }
      if (zi <= 0)
        throw GenerationError("generate_population: unit " + std::to_string(i + 1) +
                              " still nonpositive after 100 redraws");
    }
    f.z[i] = zi;
  }
  f.validate();
  return f;
}

void population_to_csv(const PopulationFrame& frame, const std::string& path) {
  std::vector<std::string> header{"unit_id", "y"};
  for (int j = 0; j < frame.x.cols(); ++j) header.push_back("x" + std::to_string(j + 1));
  for (int j = 0; j < frame.v.cols(); ++j) header.push_back("v" + std::to_string(j + 1));
  header.push_back("z");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(frame.n_units);
  for (int i = 0; i < frame.n_units; ++i) {
    std::vector<std::string> row{std::to_string(i + 1), fmt_full(frame.y[i])};
    for (int j = 0; j < frame.x.cols(); ++j) row.push_back(fmt_full(frame.x(i, j)));
    for (int j = 0; j < frame.v.cols(); ++j) row.push_back(fmt_full(frame.v(i, j)));
    row.push_back(fmt_full(frame.z[i]));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

PopulationFrame population_from_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.column("unit_id") != 0 || t.column("y") != 1 || t.column("z") < 0)
    throw DataError("population csv: expected header unit_id,y,x..,v..,z in " + path);
  int px = 0, pv = 0;
  for (const auto& h : t.header) {
    if (h.rfind("x", 0) == 0 && h.size() > 1) ++px;
    if (h.rfind("v", 0) == 0 && h.size() > 1) ++pv;
  }
  const int n = static_cast<int>(t.rows.size());
  PopulationFrame f;
  f.n_units = n;
  f.y.resize(n);
  f.x.resize(n, px);
  f.v.resize(n, pv);
  f.z.resize(n);
  const int zcol = t.column("z");
  for (int i = 0; i < n; ++i) {
    f.y[i] = t.rows[i][1];
    for (int j = 0; j < px; ++j) f.x(i, j) = t.rows[i][2 + j];
    for (int j = 0; j < pv; ++j) f.v(i, j) = t.rows[i][2 + px + j];
    f.z[i] = t.rows[i][zcol];
  }
  f.validate();
  return f;
}

}  // namespace infosamp
