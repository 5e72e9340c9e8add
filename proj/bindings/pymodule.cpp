// thin string/JSON oriented bindings; the python package wraps these with dicts
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "infosamp/csv.hpp"
#include "infosamp/design.hpp"
#include "infosamp/harness.hpp"
#include "infosamp/rng.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace infosamp;

namespace {

ExperimentConfig load_config(const std::string& config_json) {
  return config_json.empty() ? paper_config() : config_from_json_text(config_json);
}

const ExperimentDef& pick_experiment(const ExperimentConfig& config,
                                     const std::string& name) {
  if (name.empty()) return config.experiments.front();
  for (const auto& e : config.experiments)
    if (e.name == name) return e;
  throw ConfigError("no experiment named " + name + " in the config");
}

Vec ols_outcome_fit(const SampleData& sample) {
  Mat g(sample.n, 1 + sample.x.cols() + sample.v.cols());
  g.col(0).setOnes();
  g.middleCols(1, sample.x.cols()) = sample.x;
  g.rightCols(sample.v.cols()) = sample.v;
  return Eigen::ColPivHouseholderQR<Mat>(g).solve(sample.y);
}

std::string run_suite_json(const std::string& config_json, bool calibration) {
  const ExperimentConfig config = load_config(config_json);
  const ExperimentResult result = run_experiment_suite(config, calibration);
  json rows = json::array();
  for (const auto& row : result.table)
    rows.push_back(json{{"experiment", row.experiment},
                        {"test", row.test},
                        {"level", row.level},
                        {"proportion", row.proportion},
                        {"n_effective", row.n_effective}});
  json out{{"table", rows},
           {"failed_replicates", result.failed_replicates},
           {"wall_seconds", result.wall_seconds}};
  return out.dump();
}

std::string simulate_csv(const std::string& config_json, const std::string& out_dir,
                         int replicate) {
  const ExperimentConfig config = load_config(config_json);
  const std::uint64_t rep_seed =
      Rng::derive_seed(config.seed, static_cast<std::uint64_t>(replicate));
  const PopulationFrame frame =
      generate_population(config.population, config.design, config.N, rep_seed);
  const SampleData sample = draw_pps_sample(frame, config.n, rep_seed);
  const std::string pop_path = out_dir + "/population.csv";
  const std::string samp_path = out_dir + "/sample.csv";
  population_to_csv(frame, pop_path);
  sample_to_csv(sample, samp_path);
  json out{{"population", pop_path}, {"sample", samp_path}};
  return out.dump();
}

std::string fit_json(const std::string& sample_csv, const std::string& config_json,
                     const std::string& experiment) {
  const ExperimentConfig config = load_config(config_json);
  const SampleData sample = sample_from_csv(sample_csv);
  const ExperimentDef& def = pick_experiment(config, experiment);
  const Mat pairwise = hajek_pairwise(sample.pi);

  const ScoreSystem sys = selection_system(sample, def.hyp.full, &pairwise);
  FitReport gamma;
  gamma.coefficients = ht_fit(sys);
  gamma.objective = ht_objective(sys, gamma.coefficients);
  const CovarianceEstimate gcov = ht_covariance(sys, gamma.coefficients);
  gamma.covariance = psd_repair(gcov.matrix, &gamma.psd_repaired);
  gamma.covariance_mode = gcov.mode;

  const ScoreSystem pop = population_system(sample, &pairwise);
  FitReport beta;
  beta.coefficients = ht_fit(pop);
  beta.objective = ht_objective(pop, beta.coefficients);
  const CovarianceEstimate bcov = ht_covariance(pop, beta.coefficients);
  beta.covariance = psd_repair(bcov.matrix, &beta.psd_repaired);
  beta.covariance_mode = bcov.mode;
  const Vec resid = pop.response - pop.basis * beta.coefficients;
  beta.sigma2_hat = (resid.array().square() * sample.w.array()).sum() / sample.w.sum();

  json out{{"experiment", def.name},
           {"gamma", json::parse(gamma.to_json())},
           {"beta", json::parse(beta.to_json())},
           {"gamma_terms", def.hyp.full.term_names()}};
  return out.dump();
}

std::string test_json(const std::string& sample_csv, const std::string& config_json,
                      const std::string& experiment, double alpha) {
  const ExperimentConfig config = load_config(config_json);
  const SampleData sample = sample_from_csv(sample_csv);
  const ExperimentDef& def = pick_experiment(config, experiment);
  const Mat pairwise = hajek_pairwise(sample.pi);
  const ScoreSystem sys = selection_system(sample, def.hyp.full, &pairwise);
  const PriorSpec prior;
  const std::uint64_t rep_seed = Rng::derive_seed(config.seed, 0);

  McmcConfig mc = config.mcmc;
  mc.covariance_mode = config.covariance;
  mc.seed = Rng::derive_seed(rep_seed, Rng::kMcmcBase);
  const PosteriorDraws draws = run_mcmc(sys, prior, mc);
  const EvidenceResult ev = fbst_evidence(draws, sys, prior, def.hyp, config.mode,
                                          alpha, Rng::derive_seed(rep_seed, Rng::kRhoBase));
  const LrResult lr = lr_test(sys, def.hyp);

  json reports = json::array();
  reports.push_back(json{{"test", "fbst"},
                         {"statistic_or_ev", ev.ev_bar},
                         {"threshold_or_p", ev.threshold},
                         {"decision", ev.reject ? "reject" : "retain"},
                         {"diagnostics",
                          {{"rho", ev.rho}, {"acceptance_rate", draws.acceptance_rate}}}});
  reports.push_back(json{{"test", "lr"},
                         {"statistic_or_ev", lr.statistic},
                         {"threshold_or_p", lr.p_value},
                         {"decision", lr.p_value < alpha ? "reject" : "retain"},
                         {"diagnostics", {{"df", def.hyp.h()}}}});
  if (def.run_ps) {
    const Vec beta = ols_outcome_fit(sample);
    for (int k = 1; k <= 2; ++k) {
      const PsResult ps = ps_test(sample, beta, k);
      reports.push_back(
          json{{"test", "ps" + std::to_string(k)},
               {"statistic_or_ev", ps.statistic},
               {"threshold_or_p", ps.p_value},
               {"decision", !ps.degenerate && ps.p_value < alpha ? "reject" : "retain"},
               {"diagnostics",
                {{"correlation", ps.correlation}, {"degenerate", ps.degenerate}}}});
    }
  }
  json out{{"experiment", def.name}, {"alpha", alpha}, {"reports", reports}};
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "design-based tests of sample-selection models under informative sampling";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);
  py::register_exception<GenerationError>(m, "GenerationError", PyExc_RuntimeError);

  m.def("version", [] { return std::string("1.0.0"); });
  m.def("default_config_json", [] { return config_to_json(paper_config()); });
  m.def("run_suite_json", &run_suite_json, py::arg("config_json") = std::string(),
        py::arg("calibration") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("simulate_csv", &simulate_csv, py::arg("config_json"), py::arg("out_dir"),
        py::arg("replicate") = 0);
  m.def("fit_json", &fit_json, py::arg("sample_csv"),
        py::arg("config_json") = std::string(), py::arg("experiment") = std::string());
  m.def("test_json", &test_json, py::arg("sample_csv"),
        py::arg("config_json") = std::string(), py::arg("experiment") = std::string(),
        py::arg("alpha") = 0.05, py::call_guard<py::gil_scoped_release>());
  m.def("evidence_threshold", &evidence_threshold, py::arg("d_full"), py::arg("h"),
        py::arg("alpha"));
}
