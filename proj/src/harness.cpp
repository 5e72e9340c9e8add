#include "infosamp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "infosamp/csv.hpp"
#include "infosamp/design.hpp"
#include "infosamp/rng.hpp"

namespace infosamp {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (M < 1) throw ConfigError("config: M must be >= 1");
  if (n < 1 || n >= N) throw ConfigError("config: need 1 <= n < N");
  population.validate();
  design.validate();
  if (experiments.empty()) throw ConfigError("config: no experiments configured");
  for (const auto& e : experiments) {
    if (e.name.empty()) throw ConfigError("config: experiment without a name");
    e.hyp.validate();
  }
  if (levels.empty()) throw ConfigError("config: no significance levels");
  for (double l : levels)
    if (!(l > 0 && l < 1)) throw ConfigError("config: levels must lie in (0,1)");
  for (double l : calibration_levels)
    if (!(l > 0 && l < 1))
      throw ConfigError("config: calibration levels must lie in (0,1)");
  mcmc.validate();
  if (threads < 0) throw ConfigError("config: negative thread count");
}

ExperimentConfig paper_config() {
  ExperimentConfig c;
  c.population.beta = Vec(3);
  c.population.beta << 3.5, 0.8, -0.1;
  c.population.sigma2 = 1.5;
  c.population.covariate_specs = {{"gamma", {1.0, 1.0}, "x"}, {"poisson", {3.0}, "v"}};
  c.design.intercept = 4.0;
  c.design.v = 2.5;
  c.design.y = 0.0;
  c.design.y2 = 0.15;
  c.design.noise_variance = 2.5;
  c.design.policy = PositivityPolicy::redraw;

  SelectionModelSpec e1_full, e1_null;
  e1_full.v_terms = {0, 1};
  e1_full.y_powers = {1};
  e1_null.v_terms = {0, 1};

  SelectionModelSpec e2_full, e2_null;
  e2_full.v_terms = {0};
  e2_full.x_terms = {1};
  e2_full.y_powers = {1, 2};
  e2_null.v_terms = {0};
  e2_null.x_terms = {1};
  e2_null.y_powers = {1};

  SelectionModelSpec e3_full, e3_null;
  e3_full.v_terms = {0, 1};
  e3_full.y_powers = {2};
  e3_null.v_terms = {0, 1};

  SelectionModelSpec e3s_full, e3s_null;
  e3s_full.v_terms = {0, 1};
  e3s_full.y_powers = {1, 2};
  e3s_null.v_terms = {0, 1};
  e3s_null.y_powers = {1};

  c.experiments = {
      {"exp1", make_hypothesis(e1_full, e1_null), true},
      {"exp2", make_hypothesis(e2_full, e2_null), false},
      {"exp3", make_hypothesis(e3_full, e3_null), false},
      {"exp3_superset", make_hypothesis(e3s_full, e3s_null), false},
  };
  return c;
}

namespace {

json spec_to_json(const SelectionModelSpec& s) {
  return json{{"v_terms", s.v_terms}, {"x_terms", s.x_terms}, {"y_powers", s.y_powers}};
}

SelectionModelSpec spec_from_json(const json& j) {
  SelectionModelSpec s;
  s.v_terms = j.value("v_terms", std::vector<int>{});
  s.x_terms = j.value("x_terms", std::vector<int>{});
  s.y_powers = j.value("y_powers", std::vector<int>{});
  return s;
}

std::string policy_name(PositivityPolicy p) {
  return p == PositivityPolicy::redraw ? "redraw" : "reject_population";
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) {
  json j;
  j["M"] = config.M;
  j["N"] = config.N;
  j["n"] = config.n;
  json pop;
  pop["beta"] = std::vector<double>(config.population.beta.data(),
                                    config.population.beta.data() +
                                        config.population.beta.size());
  pop["sigma2"] = config.population.sigma2;
  pop["covariate_specs"] = json::array();
  for (const auto& cs : config.population.covariate_specs)
    pop["covariate_specs"].push_back(
        json{{"dist", cs.dist}, {"params", cs.params}, {"role", cs.role}});
  j["population"] = pop;
  j["design"] = json{{"intercept", config.design.intercept},
                     {"v", config.design.v},
                     {"y", config.design.y},
                     {"y2", config.design.y2},
                     {"noise_variance", config.design.noise_variance},
                     {"policy", policy_name(config.design.policy)}};
  j["experiments"] = json::array();
  for (const auto& e : config.experiments)
    j["experiments"].push_back(json{{"name", e.name},
                                    {"full", spec_to_json(e.hyp.full)},
                                    {"null", spec_to_json(e.hyp.null_constrained)},
                                    {"run_ps", e.run_ps}});
  j["levels"] = config.levels;
  j["calibration_levels"] = config.calibration_levels;
  j["mcmc"] = json{{"burn_in", config.mcmc.burn_in},
                   {"K", config.mcmc.K},
                   {"thin", config.mcmc.thin}};
  j["seed"] = config.seed;
  j["output_dir"] = config.output_dir;
  j["mode"] = config.mode == FbstMode::standard ? "standard" : "paper_rho";
  j["covariance"] = config.covariance == CovarianceMode::plugin ? "plugin" : "full";
  j["threads"] = config.threads;
  return j.dump(2);
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return config_from_json_text(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  // absent keys keep the simulation-study defaults
  ExperimentConfig c = paper_config();
  try {
    c.M = j.value("M", c.M);
    c.N = j.value("N", c.N);
    c.n = j.value("n", c.n);
    if (j.contains("population")) {
      const json& pop = j["population"];
      if (pop.contains("beta")) {
        const auto b = pop["beta"].get<std::vector<double>>();
        c.population.beta = Eigen::Map<const Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
      }
      c.population.sigma2 = pop.value("sigma2", c.population.sigma2);
      if (pop.contains("covariate_specs")) {
        c.population.covariate_specs.clear();
        for (const json& cs : pop["covariate_specs"]) {
          CovariateSpec spec;
          spec.dist = cs.at("dist").get<std::string>();
          spec.params = cs.value("params", std::vector<double>{});
          spec.role = cs.value("role", std::string("x"));
          c.population.covariate_specs.push_back(spec);
        }
      }
    }
    if (j.contains("design")) {
      const json& d = j["design"];
      c.design.intercept = d.value("intercept", c.design.intercept);
      c.design.v = d.value("v", c.design.v);
      c.design.y = d.value("y", c.design.y);
      c.design.y2 = d.value("y2", c.design.y2);
      c.design.noise_variance = d.value("noise_variance", c.design.noise_variance);
      const std::string pol = d.value("policy", policy_name(c.design.policy));
      if (pol == "redraw")
        c.design.policy = PositivityPolicy::redraw;
      else if (pol == "reject_population")
        c.design.policy = PositivityPolicy::reject_population;
      else
        throw ConfigError("config: unknown positivity policy " + pol);
    }
    if (j.contains("experiments")) {
      c.experiments.clear();
      for (const json& e : j["experiments"]) {
        ExperimentDef def;
        def.name = e.at("name").get<std::string>();
        def.hyp = make_hypothesis(spec_from_json(e.at("full")), spec_from_json(e.at("null")));
        def.run_ps = e.value("run_ps", false);
        c.experiments.push_back(def);
      }
    }
    if (j.contains("levels")) c.levels = j["levels"].get<std::vector<double>>();
    if (j.contains("calibration_levels"))
      c.calibration_levels = j["calibration_levels"].get<std::vector<double>>();
    if (j.contains("mcmc")) {
      const json& m = j["mcmc"];
      c.mcmc.burn_in = m.value("burn_in", c.mcmc.burn_in);
      c.mcmc.K = m.value("K", c.mcmc.K);
      c.mcmc.thin = m.value("thin", c.mcmc.thin);
    }
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("mode")) {
      const std::string m = j["mode"].get<std::string>();
      if (m == "standard")
        c.mode = FbstMode::standard;
      else if (m == "paper_rho")
        c.mode = FbstMode::paper_rho;
      else
        throw ConfigError("config: unknown mode " + m);
    }
    if (j.contains("covariance")) {
      const std::string m = j["covariance"].get<std::string>();
      if (m == "plugin")
        c.covariance = CovarianceMode::plugin;
      else if (m == "full")
        c.covariance = CovarianceMode::full;
      else
        throw ConfigError("config: unknown covariance mode " + m);
    }
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

Vec ols_outcome_fit(const SampleData& sample) {
  Mat g(sample.n, 1 + sample.x.cols() + sample.v.cols());
  g.col(0).setOnes();
  g.middleCols(1, sample.x.cols()) = sample.x;
  g.rightCols(sample.v.cols()) = sample.v;
  return Eigen::ColPivHouseholderQR<Mat>(g).solve(sample.y);
}

}  // namespace

std::vector<ReplicateRecord> run_replicate(const ExperimentConfig& config, int replicate,
                                           bool calibration) {
  config.validate();
  const std::vector<double>& levels = calibration ? config.calibration_levels : config.levels;
  std::vector<ReplicateRecord> records;

  DesignVariableSpec dspec = config.design;
  if (calibration) {
    // design variable regenerated under the ignorable model: no outcome terms
    dspec.y = 0.0;
    dspec.y2 = 0.0;
  }

  const std::uint64_t rep_seed = Rng::derive_seed(config.seed, static_cast<std::uint64_t>(replicate));
  PopulationFrame frame;
  SampleData sample;
  try {
    frame = generate_population(config.population, dspec, config.N, rep_seed);
    sample = draw_pps_sample(frame, config.n, rep_seed);
  } catch (const Error& e) {
    ReplicateRecord rec;
    rec.replicate = replicate;
    rec.experiment = "*";
    rec.test = "population";
    rec.ok = false;
    rec.note = e.what();
    records.push_back(rec);
    return records;
  }

  const Mat pairwise = hajek_pairwise(sample.pi);
  const PriorSpec prior;
  const size_t n_exp = calibration ? 1 : config.experiments.size();

  for (size_t e = 0; e < n_exp; ++e) {
    const ExperimentDef& def = config.experiments[e];
    auto flag_all = [&](const std::string& test, const std::string& note) {
      for (double level : levels) {
        ReplicateRecord rec;
        rec.replicate = replicate;
        rec.experiment = def.name;
        rec.test = test;
        rec.level = level;
        rec.ok = false;
        rec.note = note;
        records.push_back(rec);
      }
    };
    auto emit_all = [&](const std::string& test, double stat,
                        const std::function<bool(double)>& rejects) {
      for (double level : levels) {
        ReplicateRecord rec;
        rec.replicate = replicate;
        rec.experiment = def.name;
        rec.test = test;
        rec.level = level;
        rec.ev_or_stat = stat;
        rec.reject = rejects(level);
        records.push_back(rec);
      }
    };

    ScoreSystem sys;
    bool sys_ok = true;
    try {
      sys = selection_system(sample, def.hyp.full, &pairwise);
    } catch (const Error& err) {
      sys_ok = false;
      flag_all("fbst", err.what());
      flag_all("lr", err.what());
    }

    if (sys_ok) {
      try {
        McmcConfig mc = config.mcmc;
        mc.covariance_mode = config.covariance;
        mc.seed = Rng::derive_seed(rep_seed, Rng::kMcmcBase + e);
        const PosteriorDraws draws = run_mcmc(sys, prior, mc);
        const EvidenceResult ev =
            fbst_evidence(draws, sys, prior, def.hyp, config.mode, levels.front(),
                          Rng::derive_seed(rep_seed, Rng::kRhoBase + e));
        const int d = sys.d(), h = def.hyp.h();
        emit_all("fbst", ev.ev_bar, [&](double level) {
          return ev.ev_bar > evidence_threshold(d, h, level);
        });
      } catch (const Error& err) {
        flag_all("fbst", err.what());
      }

      try {
        const LrResult lr = lr_test(sys, def.hyp);
        emit_all("lr", lr.statistic, [&](double level) { return lr.p_value < level; });
      } catch (const Error& err) {
        flag_all("lr", err.what());
      }
    }

    if (def.run_ps) {
      Vec beta;
      bool beta_ok = true;
      try {
        beta = ols_outcome_fit(sample);
      } catch (const Error& err) {
        beta_ok = false;
        flag_all("ps1", err.what());
        flag_all("ps2", err.what());
      }
      for (int k = 1; beta_ok && k <= 2; ++k) {
        const std::string name = "ps" + std::to_string(k);
        try {
          const PsResult ps = ps_test(sample, beta, k);
          if (ps.degenerate) {
            flag_all(name, "degenerate residual or weight vector");
          } else {
            emit_all(name, ps.statistic,
                     [&](double level) { return ps.p_value < level; });
          }
        } catch (const Error& err) {
          flag_all(name, err.what());
        }
      }
    }
  }
  return records;
}

std::vector<AggregateRow> aggregate_records(const std::vector<ReplicateRecord>& records) {
  std::vector<AggregateRow> table;
  std::vector<int> reject_counts;
  auto cell = [&](const ReplicateRecord& rec) -> size_t {
    for (size_t i = 0; i < table.size(); ++i)
      if (table[i].experiment == rec.experiment && table[i].test == rec.test &&
          table[i].level == rec.level)
        return i;
    AggregateRow row;
    row.experiment = rec.experiment;
    row.test = rec.test;
    row.level = rec.level;
    table.push_back(row);
    reject_counts.push_back(0);
    return table.size() - 1;
  };
  for (const auto& rec : records) {
    if (rec.test == "population") continue;
    const size_t i = cell(rec);
    if (!rec.ok) continue;
    ++table[i].n_effective;
    if (rec.reject) ++reject_counts[i];
  }
  for (size_t i = 0; i < table.size(); ++i)
    table[i].proportion =
        table[i].n_effective > 0
            ? static_cast<double>(reject_counts[i]) / table[i].n_effective
            : std::numeric_limits<double>::quiet_NaN();
  return table;
}

ExperimentResult run_experiment_suite(const ExperimentConfig& config, bool calibration) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  int workers = config.threads;
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, config.M);

  std::vector<std::vector<ReplicateRecord>> per_rep(config.M);
  std::atomic<int> next{0};
  auto work = [&]() {
    int i;
    while ((i = next.fetch_add(1)) < config.M) {
      try {
        per_rep[i] = run_replicate(config, i, calibration);
      } catch (const std::exception& e) {
        ReplicateRecord rec;
        rec.replicate = i;
        rec.experiment = "*";
        rec.test = "population";
        rec.ok = false;
        rec.note = e.what();
        per_rep[i] = {rec};
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  // deterministic reduction in replicate order, independent of thread schedule.
  // only replicates whose population could not be generated count as failed;
  // single-test breakdowns stay in the records as flagged entries and shrink
  // the n_effective of their cell instead of discarding the whole replicate
  ExperimentResult result;
  for (int i = 0; i < config.M; ++i) {
    for (const auto& rec : per_rep[i])
      if (!rec.ok && rec.test == "population") {
        ++result.failed_replicates;
        break;
      }
    result.records.insert(result.records.end(), per_rep[i].begin(), per_rep[i].end());
  }
  if (result.failed_replicates > 0.05 * config.M) {
    std::ostringstream msg;
    msg << "experiment suite: " << result.failed_replicates << " of " << config.M
        << " replicates had failures:";
    int shown = 0;
    for (const auto& rec : result.records) {
      if (rec.ok || rec.test != "population" || shown >= 5) continue;
      msg << " [replicate " << rec.replicate << ": " << rec.note << "]";
      ++shown;
    }
    throw NumericError(msg.str());
  }
  result.table = aggregate_records(result.records);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

void write_table1(const ExperimentResult& result, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : result.table)
    rows.push_back({row.experiment, row.test, fmt_short(row.level),
                    fmt_short(row.proportion), std::to_string(row.n_effective)});
  write_csv(path, {"experiment", "test", "level", "proportion", "n_effective"}, rows);
}

void write_table2(const ExperimentResult& result, const std::string& path) {
  // nominal-major layout: one block of all tests per nominal level
  std::vector<double> nominals;
  std::vector<std::string> tests;
  for (const auto& row : result.table) {
    if (std::find(nominals.begin(), nominals.end(), row.level) == nominals.end())
      nominals.push_back(row.level);
    if (std::find(tests.begin(), tests.end(), row.test) == tests.end())
      tests.push_back(row.test);
  }
  std::sort(nominals.begin(), nominals.end());
  std::vector<std::vector<std::string>> rows;
  for (double nominal : nominals)
    for (const auto& test : tests)
      for (const auto& row : result.table)
        if (row.level == nominal && row.test == test)
          rows.push_back({fmt_short(nominal), test, fmt_short(row.proportion)});
  write_csv(path, {"nominal", "test", "empirical"}, rows);
}

void write_replicates(const ExperimentResult& result, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& rec : result.records) {
    std::string note = rec.note;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    rows.push_back({std::to_string(rec.replicate), rec.experiment, rec.test,
                    fmt_short(rec.level), fmt_full(rec.ev_or_stat),
                    rec.reject ? "1" : "0", rec.ok ? "1" : "0", note});
  }
  write_csv(path,
            {"replicate", "experiment", "test", "level", "ev_or_stat", "reject", "ok",
             "note"},
            rows);
}

void write_manifest(const ExperimentConfig& config, const ExperimentResult& result,
                    const std::string& path, const std::string& command) {
  json j;
  j["command"] = command;
  j["config"] = json::parse(config_to_json(config));
  j["seed"] = config.seed;
  j["wall_seconds"] = result.wall_seconds;
  j["failed_replicates"] = result.failed_replicates;
  j["versions"] = json{{"infosamp", "1.0.0"},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                     std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)}};
  j["notes"] = json{{"ps_reference", "asymptotic t distribution"},
                    {"pairwise", "hajek joint-inclusion approximation"}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace infosamp
