// command line front end: simulate | fit | test | experiment | calibrate
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "infosamp/csv.hpp"
#include "infosamp/design.hpp"
#include "infosamp/harness.hpp"
#include "infosamp/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace infosamp;

namespace {

int fail(const std::string& type, const std::string& message, int code) {
  json rec{{"error", {{"type", type}, {"code", code}, {"message", message}}}};
  std::cerr << rec.dump() << "\n";
  return code;
}

json report_json(const FitReport& report, const std::vector<std::string>& terms) {
  json j = json::parse(report.to_json());
  j["terms"] = terms;
  return j;
}

Vec ols_outcome_fit(const SampleData& sample) {
  Mat g(sample.n, 1 + sample.x.cols() + sample.v.cols());
  g.col(0).setOnes();
  g.middleCols(1, sample.x.cols()) = sample.x;
  g.rightCols(sample.v.cols()) = sample.v;
  return Eigen::ColPivHouseholderQR<Mat>(g).solve(sample.y);
}

const ExperimentDef& pick_experiment(const ExperimentConfig& config,
                                     const std::string& name) {
  if (name.empty()) return config.experiments.front();
  for (const auto& e : config.experiments)
    if (e.name == name) return e;
  throw ConfigError("no experiment named " + name + " in the config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"design-based tests of sample-selection models under informative sampling"};
  app.require_subcommand(1);

  std::string config_path, out_dir, sample_path, experiment_name;
  std::string mode_s, cov_s;
  std::int64_t seed_opt = -1;
  int threads_opt = -1, replicate = 0;
  double alpha = 0.05;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (defaults mirror the study)");
    sub->add_option("--seed", seed_opt, "master seed override");
    sub->add_option("--threads", threads_opt, "worker threads, 0 means all cores");
    sub->add_option("--mode", mode_s, "evidence mode: standard|paper_rho")
        ->check(CLI::IsMember({"standard", "paper_rho"}));
    sub->add_option("--covariance", cov_s, "posterior covariance: plugin|full")
        ->check(CLI::IsMember({"plugin", "full"}));
    sub->add_option("--out", out_dir, "output directory");
  };

  CLI::App* cmd_simulate =
      app.add_subcommand("simulate", "generate one population and one PPS sample");
  add_common(cmd_simulate);
  cmd_simulate->add_option("--replicate", replicate, "replicate index for the seed stream");

  CLI::App* cmd_fit =
      app.add_subcommand("fit", "selection (gamma) and outcome (beta) fits from a sample");
  add_common(cmd_fit);
  cmd_fit->add_option("--sample", sample_path, "sample CSV")->required();
  cmd_fit->add_option("--experiment", experiment_name, "experiment whose full model to fit");

  CLI::App* cmd_test = app.add_subcommand("test", "FBST, LR and PS tests on a sample");
  add_common(cmd_test);
  cmd_test->add_option("--sample", sample_path, "sample CSV")->required();
  cmd_test->add_option("--experiment", experiment_name, "experiment (hypothesis) to test");
  cmd_test->add_option("--alpha", alpha, "significance level")
      ->check(CLI::Range(1e-6, 1.0 - 1e-6));

  CLI::App* cmd_experiment =
      app.add_subcommand("experiment", "Monte Carlo rejection-rate study (table 1)");
  add_common(cmd_experiment);

  CLI::App* cmd_calibrate =
      app.add_subcommand("calibrate", "null-model calibration study (table 2)");
  add_common(cmd_calibrate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fail("usage", e.what(), 2);
  }

  try {
    ExperimentConfig config =
        config_path.empty() ? paper_config() : config_from_json_file(config_path);
    if (seed_opt >= 0) config.seed = static_cast<std::uint64_t>(seed_opt);
    if (threads_opt >= 0) config.threads = threads_opt;
    if (!mode_s.empty())
      config.mode = mode_s == "paper_rho" ? FbstMode::paper_rho : FbstMode::standard;
    if (!cov_s.empty())
      config.covariance =
          cov_s == "plugin" ? CovarianceMode::plugin : CovarianceMode::full;
    if (!out_dir.empty()) config.output_dir = out_dir;
    config.validate();

    if (*cmd_simulate) {
      fs::create_directories(config.output_dir);
      const std::uint64_t rep_seed =
          Rng::derive_seed(config.seed, static_cast<std::uint64_t>(replicate));
      const PopulationFrame frame =
          generate_population(config.population, config.design, config.N, rep_seed);
      const SampleData sample = draw_pps_sample(frame, config.n, rep_seed);
      const std::string pop_path = config.output_dir + "/population.csv";
      const std::string samp_path = config.output_dir + "/sample.csv";
      population_to_csv(frame, pop_path);
      sample_to_csv(sample, samp_path);
      json out{{"population", pop_path}, {"sample", samp_path},
               {"seed", config.seed},   {"replicate", replicate},
               {"N", frame.n_units},    {"n", sample.n}};
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*cmd_fit) {
      const SampleData sample = sample_from_csv(sample_path);
      const ExperimentDef& def = pick_experiment(config, experiment_name);
      const Mat pairwise = hajek_pairwise(sample.pi);

      const ScoreSystem sys = selection_system(sample, def.hyp.full, &pairwise);
      FitReport gamma;
      gamma.coefficients = ht_fit(sys);
      gamma.objective = ht_objective(sys, gamma.coefficients);
      CovarianceEstimate gcov = ht_covariance(sys, gamma.coefficients);
      gamma.covariance = psd_repair(gcov.matrix, &gamma.psd_repaired);
      gamma.covariance_mode = gcov.mode;

      const ScoreSystem pop = population_system(sample, &pairwise);
      FitReport beta;
      beta.coefficients = ht_fit(pop);
      beta.objective = ht_objective(pop, beta.coefficients);
      CovarianceEstimate bcov = ht_covariance(pop, beta.coefficients);
      beta.covariance = psd_repair(bcov.matrix, &beta.psd_repaired);
      beta.covariance_mode = bcov.mode;
      const Vec resid = pop.response - pop.basis * beta.coefficients;
      beta.sigma2_hat =
          (resid.array().square() * sample.w.array()).sum() / sample.w.sum();

      std::vector<std::string> beta_terms{"1"};
      for (Eigen::Index i = 0; i < sample.x.cols(); ++i)
        beta_terms.push_back("x" + std::to_string(i + 1));
      for (Eigen::Index i = 0; i < sample.v.cols(); ++i)
        beta_terms.push_back("v" + std::to_string(i + 1));
      json out{{"experiment", def.name},
               {"gamma", report_json(gamma, def.hyp.full.term_names())},
               {"beta", report_json(beta, beta_terms)}};
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*cmd_test) {
      const SampleData sample = sample_from_csv(sample_path);
      const ExperimentDef& def = pick_experiment(config, experiment_name);
      const Mat pairwise = hajek_pairwise(sample.pi);
      const ScoreSystem sys = selection_system(sample, def.hyp.full, &pairwise);
      const PriorSpec prior;
      const std::uint64_t rep_seed = Rng::derive_seed(config.seed, 0);

      json reports = json::array();
      const std::string mode_name =
          (config.mode == FbstMode::paper_rho ? "paper_rho" : "standard") +
          std::string("/") +
          (config.covariance == CovarianceMode::plugin ? "plugin" : "full");

      McmcConfig mc = config.mcmc;
      mc.covariance_mode = config.covariance;
      mc.seed = Rng::derive_seed(rep_seed, Rng::kMcmcBase);
      const PosteriorDraws draws = run_mcmc(sys, prior, mc);
      const EvidenceResult ev =
          fbst_evidence(draws, sys, prior, def.hyp, config.mode, alpha,
                        Rng::derive_seed(rep_seed, Rng::kRhoBase));
      std::vector<double> gamma0(ev.gamma0_hat.data(),
                                 ev.gamma0_hat.data() + ev.gamma0_hat.size());
      reports.push_back(json{{"test", "fbst"},
                             {"statistic_or_ev", ev.ev_bar},
                             {"threshold_or_p", ev.threshold},
                             {"decision", ev.reject ? "reject" : "retain"},
                             {"mode", mode_name},
                             {"diagnostics",
                              {{"ev_support", ev.ev_support},
                               {"rho", ev.rho},
                               {"log_rho_se", ev.log_rho_se},
                               {"gamma0_hat", gamma0},
                               {"acceptance_rate", draws.acceptance_rate},
                               {"mode_log_density", draws.mode_log_density}}}});

      const LrResult lr = lr_test(sys, def.hyp);
      reports.push_back(json{{"test", "lr"},
                             {"statistic_or_ev", lr.statistic},
                             {"threshold_or_p", lr.p_value},
                             {"decision", lr.p_value < alpha ? "reject" : "retain"},
                             {"mode", "chi2"},
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
                   {"mode", "partial-t"},
                   {"diagnostics",
                    {{"correlation", ps.correlation}, {"degenerate", ps.degenerate}}}});
        }
      }
      json out{{"experiment", def.name}, {"alpha", alpha}, {"reports", reports}};
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    const bool calibration = static_cast<bool>(*cmd_calibrate);
    (void)cmd_experiment;
    fs::create_directories(config.output_dir);
    const ExperimentResult result = run_experiment_suite(config, calibration);
    const std::string table_path =
        config.output_dir + (calibration ? "/table2.csv" : "/table1.csv");
    if (calibration)
      write_table2(result, table_path);
    else
      write_table1(result, table_path);
    write_replicates(result, config.output_dir + "/replicates.csv");
    write_manifest(config, result, config.output_dir + "/manifest.json",
                   calibration ? "calibrate" : "experiment");
    json out{{"table", table_path},
             {"replicates", config.output_dir + "/replicates.csv"},
             {"manifest", config.output_dir + "/manifest.json"},
             {"replicates_run", config.M},
             {"failed_replicates", result.failed_replicates},
             {"wall_seconds", result.wall_seconds}};
    std::cout << out.dump(2) << "\n";
    return 0;
  } catch (const ConfigError& e) {
    return fail("config", e.what(), 2);
  } catch (const DataError& e) {
    return fail("data", e.what(), 2);
  } catch (const Error& e) {
    return fail("runtime", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
}
