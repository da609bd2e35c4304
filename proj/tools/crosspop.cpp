// crosspop: hierarchical GMRF estimation of key-population HIV prevalence
// from sparse country-year panels. One binary, subcommand per pipeline
// stage; every artifact-producing run writes a manifest sufficient to
// reproduce it.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "crosspop/diagnostics.hpp"
#include "crosspop/eval.hpp"
#include "crosspop/impute.hpp"
#include "crosspop/manifest.hpp"
#include "crosspop/panel.hpp"
#include "crosspop/posterior.hpp"
#include "crosspop/simulate.hpp"

namespace fs = std::filesystem;
using namespace crosspop;

namespace {

int exit_code_for(const std::string& code) {
  static const std::map<std::string, int> table = {
      {"IoError", 10},           {"MalformedRow", 11},
      {"UnknownCountry", 12},    {"PrevalenceOutOfRange", 13},
      {"DuplicateConflict", 14}, {"IndexOutOfRange", 15},
      {"NonPositiveDiagonal", 16}, {"NotPositiveDefinite", 17},
      {"SingularObservedBlock", 18}, {"InsufficientDraws", 19},
      {"MismatchedDrawCounts", 20}, {"TooFewObservations", 21},
      {"AllProposalsInvalid", 22}, {"MissingArtifact", 23},
      {"ConfigError", 24},
  };
  const auto it = table.find(code);
  return it == table.end() ? 1 : it->second;
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CommonOpts {
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_out = true) {
  auto* seed = cmd->add_option("--seed", opts.seed, "RNG seed; sampled and recorded if omitted");
  seed->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--threads", opts.threads, "worker threads (0 = all cores)");
  auto* out = cmd->add_option("--out", opts.out, "output directory");
  if (needs_out) out->required();
}

std::uint64_t resolve_seed(CommonOpts& opts) {
  if (!opts.seed_set) {
    std::random_device rd;
    opts.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  return opts.seed;
}

RunManifest start_manifest(const std::string& subcommand, const CommonOpts& opts) {
  RunManifest m;
  m.subcommand = subcommand;
  m.timestamp = utc_timestamp();
  m.seed = opts.seed;
  m.seed_was_sampled = !opts.seed_set;
  m.threads = opts.threads;
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& out_dir) {
  m.outputs.push_back((out_dir / "manifest.json").string());
  m.write(out_dir / "manifest.json");
}

struct PanelArgs {
  std::string panel_path;
  std::string countries_path;
  bool percent = false;
  double dedup_tol = 1e-12;
};

void add_panel_args(CLI::App* cmd, PanelArgs& args) {
  cmd->add_option("--panel", args.panel_path, "observation file")->required();
  cmd->add_option("--countries", args.countries_path, "country,region table")->required();
  cmd->add_flag("--percent", args.percent, "input prevalences are percentages");
  cmd->add_option("--dedup-tol", args.dedup_tol,
                  "max prevalence gap merged by log-scale averaging");
}

PanelData load_panel_args(const PanelArgs& args, RunManifest& manifest) {
  manifest.add_input(args.panel_path);
  manifest.add_input(args.countries_path);
  manifest.config["panel"] = args.panel_path;
  manifest.config["countries"] = args.countries_path;
  manifest.config["percent"] = args.percent ? "1" : "0";
  manifest.config["dedup_tol"] = format_full(args.dedup_tol);
  LoadOptions options;
  options.percent = args.percent;
  options.duplicate_tolerance = args.dedup_tol;
  return load_panel(args.panel_path, fs::path(args.countries_path), options);
}

struct SamplerArgs {
  int chains = 4;
  int draws = 3000; // post-warmup per chain
  int warmup = -1;
  std::string prior = "laplace:0.1";
  std::string model = "full";
  double target_accept = 0.234;
};

void add_sampler_args(CLI::App* cmd, SamplerArgs& args, bool with_model = true) {
  cmd->add_option("--chains", args.chains, "number of chains");
  cmd->add_option("--draws", args.draws, "post-warmup draws per chain");
  cmd->add_option("--warmup", args.warmup, "warmup iterations (-1 = same as draws)");
  cmd->add_option("--prior", args.prior, "prior family:scale, e.g. laplace:0.1");
  if (with_model)
    cmd->add_option("--model", args.model, "full, no_cross_pop, no_country or no_time");
  cmd->add_option("--target-accept", args.target_accept, "adaptation target acceptance rate");
}

SamplerConfig sampler_config(const SamplerArgs& args, const CommonOpts& common,
                             RunManifest& manifest) {
  SamplerConfig config;
  config.chains = args.chains;
  config.draws_per_chain = args.draws;
  config.warmup = args.warmup;
  config.seed = common.seed;
  config.threads = common.threads;
  config.target_accept = args.target_accept;
  config.model = ModelConfig::from_tag(args.model);
  manifest.config["chains"] = std::to_string(args.chains);
  manifest.config["draws_per_chain"] = std::to_string(args.draws);
  manifest.config["warmup"] = std::to_string(config.effective_warmup());
  manifest.config["prior"] = args.prior;
  manifest.config["model"] = args.model;
  manifest.config["target_accept"] = format_full(args.target_accept);
  return config;
}

void write_sparsity(const SparsityProfile& profile, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "population,none,low_1_4,high_5_plus\n";
  for (int k = 0; k < kNumPopulations; ++k)
    out << to_string(static_cast<Population>(k)) << ',' << profile.none[k] << ','
        << profile.low[k] << ',' << profile.high[k] << '\n';
}

void write_truth(const SimulatedPanel& sim, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "country,population,year,log_value,prevalence\n";
  for (Eigen::Index i = 0; i < sim.truth.size(); ++i) {
    const Cell c = sim.panel.cell_at(i);
    out << sim.panel.country_codes[c.country] << ',' << to_string(c.pop) << ',' << c.year << ','
        << format_full(sim.truth[i]) << ',' << format_full(std::exp(sim.truth[i])) << '\n';
  }
}

bool warn_convergence(const DiagnosticsReport& report, RunManifest& manifest) {
  if (report.converged()) return false;
  std::ostringstream os;
  os << "NonConvergence: max R-hat " << report.max_rhat << " exceeds 1.01";
  std::cerr << "warning: " << os.str() << "\n";
  manifest.warnings.push_back(os.str());
  return true;
}

// Joint posterior of Y at every cell: conditional prediction for missing
// cells merged with Gibbs reconstruction of observed ones, paired within
// parameter draws.
CellPosterior full_cell_posterior(const PosteriorDraws& draws, const PanelData& panel,
                                  std::uint64_t seed, int thin, int sweeps, int threads) {
  PredictOptions popts;
  popts.thin = thin;
  popts.threads = threads;
  GibbsOptions gopts;
  gopts.thin = thin;
  gopts.sweeps = sweeps;
  gopts.threads = threads;
  const CellPosterior missing = predict_missing(draws, panel, seed, popts);
  const CellPosterior observed = gibbs_reconstruct(draws, panel, seed, gopts);
  return merge_cell_posteriors(missing, observed);
}

void write_correlations(const PosteriorDraws& draws, int n_years, int thin,
                        const fs::path& path) {
  std::vector<Eigen::Index> kept;
  for (Eigen::Index d = 0; d < draws.n_draws(); d += std::max(1, thin)) kept.push_back(d);
  Eigen::MatrixXd series(static_cast<Eigen::Index>(kept.size()), 6);
  for (std::size_t r = 0; r < kept.size(); ++r) {
    const Eigen::Matrix3d c = implied_correlations(draws.params_at(kept[r]), n_years);
    series(static_cast<Eigen::Index>(r), 0) = c(0, 0);
    series(static_cast<Eigen::Index>(r), 1) = c(1, 1);
    series(static_cast<Eigen::Index>(r), 2) = c(2, 2);
    series(static_cast<Eigen::Index>(r), 3) = c(0, 1);
    series(static_cast<Eigen::Index>(r), 4) = c(0, 2);
    series(static_cast<Eigen::Index>(r), 5) = c(1, 2);
  }
  const std::array<const char*, 6> kind = {"temporal", "temporal", "temporal",
                                           "cross",    "cross",    "cross"};
  const std::array<const char*, 6> pair = {"MSM",     "FSW",      "PWID",
                                           "MSM_FSW", "MSM_PWID", "FSW_PWID"};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "kind,pair,mean,q2.5,q97.5\n";
  for (int j = 0; j < 6; ++j) {
    const ParamSummary s = summarize_column(series.col(j));
    out << kind[static_cast<std::size_t>(j)] << ',' << pair[static_cast<std::size_t>(j)] << ','
        << format_full(s.mean) << ',' << format_full(s.q025) << ',' << format_full(s.q975)
        << '\n';
  }
}

std::vector<PriorSpec> parse_prior_list(const std::string& text) {
  std::vector<PriorSpec> priors;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) priors.push_back(PriorSpec::parse(item));
  return priors;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-population hierarchical GMRF prevalence estimation"};
  app.set_version_flag("--version", std::string("crosspop ") + kToolVersion);
  app.set_config("--config", "", "flat key-value config file; flags override");
  app.require_subcommand(1);

  // ---- ingest ----
  auto* ingest = app.add_subcommand("ingest", "validate and normalize an observation file");
  PanelArgs ingest_panel;
  CommonOpts ingest_opts;
  add_panel_args(ingest, ingest_panel);
  add_common(ingest, ingest_opts);

  // ---- simulate ----
  auto* simulate = app.add_subcommand("simulate", "draw a synthetic panel from a scenario");
  std::string scenario_path;
  CommonOpts sim_opts;
  simulate->add_option("--scenario", scenario_path, "scenario config file")->required();
  add_common(simulate, sim_opts);

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "sample the posterior of the structural parameters");
  PanelArgs fit_panel;
  SamplerArgs fit_sampler;
  CommonOpts fit_opts;
  add_panel_args(fit, fit_panel);
  add_sampler_args(fit, fit_sampler);
  add_common(fit, fit_opts);

  // ---- diagnose ----
  auto* diagnose = app.add_subcommand("diagnose", "convergence diagnostics of a draws file");
  std::string diag_fit_dir;
  CommonOpts diag_opts;
  diagnose->add_option("--fit", diag_fit_dir, "fit output directory")->required();
  add_common(diagnose, diag_opts, /*needs_out=*/false);

  // ---- predict ----
  auto* predict = app.add_subcommand("predict", "posterior prediction of missing cells");
  PanelArgs predict_panel;
  CommonOpts predict_opts;
  std::string predict_fit_dir;
  int predict_thin = 1;
  add_panel_args(predict, predict_panel);
  predict->add_option("--fit", predict_fit_dir, "fit output directory")->required();
  predict->add_option("--thin", predict_thin, "keep every thin-th parameter draw");
  add_common(predict, predict_opts);

  // ---- contrast ----
  auto* contrast = app.add_subcommand("contrast", "change classification between two years");
  PanelArgs contrast_panel;
  CommonOpts contrast_opts;
  std::string contrast_fit_dir;
  int contrast_thin = 1, contrast_sweeps = 10;
  ContrastOptions contrast_rule;
  add_panel_args(contrast, contrast_panel);
  contrast->add_option("--fit", contrast_fit_dir, "fit output directory")->required();
  contrast->add_option("--thin", contrast_thin, "keep every thin-th parameter draw");
  contrast->add_option("--sweeps", contrast_sweeps, "Gibbs sweeps per draw");
  contrast->add_option("--year-a", contrast_rule.year_a, "first contrast year");
  contrast->add_option("--year-b", contrast_rule.year_b, "second contrast year");
  contrast->add_option("--ratio-up", contrast_rule.ratio_up, "increase threshold on the ratio");
  contrast->add_option("--ratio-down", contrast_rule.ratio_down,
                       "decrease threshold on the ratio");
  contrast->add_option("--prob", contrast_rule.prob, "posterior probability cutoff");
  add_common(contrast, contrast_opts);

  // ---- report ----
  auto* report = app.add_subcommand("report", "estimates, changes and correlation summaries");
  PanelArgs report_panel;
  CommonOpts report_opts;
  std::string report_fit_dir;
  int report_thin = 1, report_sweeps = 10;
  ContrastOptions report_rule;
  add_panel_args(report, report_panel);
  report->add_option("--fit", report_fit_dir, "fit output directory")->required();
  report->add_option("--thin", report_thin, "keep every thin-th parameter draw");
  report->add_option("--sweeps", report_sweeps, "Gibbs sweeps per draw");
  report->add_option("--year-a", report_rule.year_a, "first contrast year");
  report->add_option("--year-b", report_rule.year_b, "second contrast year");
  report->add_option("--ratio-up", report_rule.ratio_up, "increase threshold on the ratio");
  report->add_option("--ratio-down", report_rule.ratio_down, "decrease threshold on the ratio");
  report->add_option("--prob", report_rule.prob, "posterior probability cutoff");
  add_common(report, report_opts);

  // ---- cv ----
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation of the full model");
  PanelArgs cv_panel;
  SamplerArgs cv_sampler;
  CommonOpts cv_opts;
  int cv_k = 5, cv_predict_thin = 1;
  bool cv_with_baseline = false;
  add_panel_args(cv, cv_panel);
  add_sampler_args(cv, cv_sampler);
  cv->add_option("--k", cv_k, "number of folds");
  cv->add_option("--predict-thin", cv_predict_thin, "thin predictive draws");
  cv->add_flag("--with-baseline", cv_with_baseline, "also score the regional-median baseline");
  add_common(cv, cv_opts);

  // ---- ablate ----
  auto* ablate = app.add_subcommand("ablate", "cross-validate a component-exclusion variant");
  PanelArgs ablate_panel;
  SamplerArgs ablate_sampler;
  CommonOpts ablate_opts;
  std::string ablate_which;
  int ablate_k = 5, ablate_predict_thin = 1;
  add_panel_args(ablate, ablate_panel);
  add_sampler_args(ablate, ablate_sampler, /*with_model=*/false);
  ablate->add_option("--which", ablate_which, "no_cross_pop, no_country or no_time")
      ->required();
  ablate->add_option("--k", ablate_k, "number of folds");
  ablate->add_option("--predict-thin", ablate_predict_thin, "thin predictive draws");
  add_common(ablate, ablate_opts);

  // ---- sensitivity ----
  auto* sensitivity = app.add_subcommand("sensitivity", "prior sensitivity harness");
  PanelArgs sens_panel;
  SamplerArgs sens_sampler;
  CommonOpts sens_opts;
  std::string sens_priors = "laplace:0.1,laplace:0.5,normal:0.1";
  int sens_k = 5, sens_predict_thin = 1;
  add_panel_args(sensitivity, sens_panel);
  add_sampler_args(sensitivity, sens_sampler, /*with_model=*/false);
  sensitivity->add_option("--priors", sens_priors, "comma-separated prior list");
  sensitivity->add_option("--k", sens_k, "number of folds");
  sensitivity->add_option("--predict-thin", sens_predict_thin, "thin predictive draws");
  add_common(sensitivity, sens_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      resolve_seed(ingest_opts);
      RunManifest manifest = start_manifest("ingest", ingest_opts);
      const PanelData panel = load_panel_args(ingest_panel, manifest);
      const fs::path out_dir(ingest_opts.out);
      fs::create_directories(out_dir);
      export_panel(panel, out_dir / "panel.csv");
      write_sparsity(sparsity_profile(panel), out_dir / "sparsity.csv");
      manifest.outputs.push_back((out_dir / "panel.csv").string());
      manifest.outputs.push_back((out_dir / "sparsity.csv").string());
      finish_manifest(manifest, out_dir);
      std::cout << "ingested " << panel.n_observed() << " observations over "
                << panel.n_countries() << " countries\n";
    } else if (*simulate) {
      resolve_seed(sim_opts);
      RunManifest manifest = start_manifest("simulate", sim_opts);
      manifest.add_input(scenario_path);
      ScenarioSpec spec = load_scenario(scenario_path);
      if (sim_opts.seed_set) spec.seed = sim_opts.seed;
      manifest.seed = spec.seed;
      manifest.config["scenario"] = scenario_path;
      manifest.config["n_countries"] = std::to_string(spec.n_countries);
      const SimulatedPanel sim = simulate_panel(spec);
      const fs::path out_dir(sim_opts.out);
      fs::create_directories(out_dir);
      export_panel(sim.panel, out_dir / "panel.csv");
      write_truth(sim, out_dir / "truth.csv");
      save_country_table(scenario_country_table(spec), out_dir / "countries.csv");
      save_scenario(spec, out_dir / "scenario.cfg");
      for (const char* f : {"panel.csv", "truth.csv", "countries.csv", "scenario.cfg"})
        manifest.outputs.push_back((out_dir / f).string());
      finish_manifest(manifest, out_dir);
      std::cout << "simulated " << sim.panel.n_observed() << " observed of "
                << sim.panel.size() << " cells\n";
    } else if (*fit) {
      resolve_seed(fit_opts);
      RunManifest manifest = start_manifest("fit", fit_opts);
      const PanelData panel = load_panel_args(fit_panel, manifest);
      const SamplerConfig config = sampler_config(fit_sampler, fit_opts, manifest);
      const PriorSpec prior = PriorSpec::parse(fit_sampler.prior);
      const PosteriorDraws draws = sample_posterior(panel, prior, config);
      const DiagnosticsReport diag = diagnostics(draws);
      const fs::path out_dir(fit_opts.out);
      fs::create_directories(out_dir);
      write_draws(draws, out_dir / "draws.csv");
      write_diagnostics(diag, out_dir / "diagnostics.csv");
      warn_convergence(diag, manifest);
      manifest.outputs.push_back((out_dir / "draws.csv").string());
      manifest.outputs.push_back((out_dir / "diagnostics.csv").string());
      finish_manifest(manifest, out_dir);
      std::cout << "fit: " << draws.n_draws() << " draws, max R-hat " << diag.max_rhat
                << ", median ESS " << diag.ess_median << "\n";
    } else if (*diagnose) {
      const fs::path draws_path = fs::path(diag_fit_dir) / "draws.csv";
      if (!fs::exists(draws_path))
        throw MissingArtifact("no draws.csv under " + diag_fit_dir);
      const PosteriorDraws draws = read_draws(draws_path);
      const DiagnosticsReport diag = diagnostics(draws);
      std::cout.precision(17);
      std::cout << "parameter,rhat,ess,zero_variance\n";
      for (const auto& p : diag.params)
        std::cout << p.name << ',' << p.rhat << ',' << p.ess << ',' << p.zero_variance << "\n";
      std::cout << "max_rhat," << diag.max_rhat << "\ness_median," << diag.ess_median
                << "\ness_min," << diag.ess_min << "\ness_max," << diag.ess_max << "\n";
      if (!diag_opts.out.empty()) {
        RunManifest manifest = start_manifest("diagnose", diag_opts);
        manifest.add_input(draws_path);
        const fs::path out_dir(diag_opts.out);
        fs::create_directories(out_dir);
        write_diagnostics(diag, out_dir / "diagnostics.csv");
        warn_convergence(diag, manifest);
        manifest.outputs.push_back((out_dir / "diagnostics.csv").string());
        finish_manifest(manifest, out_dir);
      }
    } else if (*predict) {
      resolve_seed(predict_opts);
      RunManifest manifest = start_manifest("predict", predict_opts);
      const PanelData panel = load_panel_args(predict_panel, manifest);
      const fs::path draws_path = fs::path(predict_fit_dir) / "draws.csv";
      if (!fs::exists(draws_path))
        throw MissingArtifact("no draws.csv under " + predict_fit_dir);
      manifest.add_input(draws_path);
      manifest.config["thin"] = std::to_string(predict_thin);
      const PosteriorDraws draws = read_draws(draws_path);
      PredictOptions popts;
      popts.thin = predict_thin;
      popts.threads = predict_opts.threads;
      const CellPosterior cells = predict_missing(draws, panel, predict_opts.seed, popts);
      const fs::path out_dir(predict_opts.out);
      fs::create_directories(out_dir);
      export_estimates(cells, panel, out_dir / "predictions.csv");
      manifest.outputs.push_back((out_dir / "predictions.csv").string());
      finish_manifest(manifest, out_dir);
      std::cout << "predicted " << cells.cells.size() << " missing cells from "
                << cells.n_draws() << " draws\n";
    } else if (*contrast || *report) {
      const bool full_report = report->parsed();
      CommonOpts& opts = full_report ? report_opts : contrast_opts;
      const PanelArgs& panel_args = full_report ? report_panel : contrast_panel;
      const std::string& fit_dir = full_report ? report_fit_dir : contrast_fit_dir;
      const int thin = full_report ? report_thin : contrast_thin;
      const int sweeps = full_report ? report_sweeps : contrast_sweeps;
      const ContrastOptions& rule = full_report ? report_rule : contrast_rule;

      resolve_seed(opts);
      RunManifest manifest = start_manifest(full_report ? "report" : "contrast", opts);
      const PanelData panel = load_panel_args(panel_args, manifest);
      const fs::path draws_path = fs::path(fit_dir) / "draws.csv";
      if (!fs::exists(draws_path)) throw MissingArtifact("no draws.csv under " + fit_dir);
      manifest.add_input(draws_path);
      manifest.config["thin"] = std::to_string(thin);
      manifest.config["sweeps"] = std::to_string(sweeps);
      manifest.config["year_a"] = std::to_string(rule.year_a);
      manifest.config["year_b"] = std::to_string(rule.year_b);
      manifest.config["ratio_up"] = format_full(rule.ratio_up);
      manifest.config["ratio_down"] = format_full(rule.ratio_down);
      manifest.config["prob"] = format_full(rule.prob);

      const PosteriorDraws draws = read_draws(draws_path);
      const CellPosterior cells =
          full_cell_posterior(draws, panel, opts.seed, thin, sweeps, opts.threads);
      const ChangeSummary changes = change_contrast(cells, panel, rule);
      const fs::path out_dir(opts.out);
      fs::create_directories(out_dir);
      export_changes(changes, panel, out_dir / "changes.csv");
      manifest.outputs.push_back((out_dir / "changes.csv").string());
      if (full_report) {
        export_estimates(cells, panel, out_dir / "estimates.csv");
        write_correlations(draws, panel.years.count(), thin, out_dir / "correlations.csv");
        manifest.outputs.push_back((out_dir / "estimates.csv").string());
        manifest.outputs.push_back((out_dir / "correlations.csv").string());
      }
      finish_manifest(manifest, out_dir);
      std::cout << (full_report ? "report" : "contrast") << ": " << changes.rows.size()
                << " country-population contrasts\n";
    } else if (*cv) {
      resolve_seed(cv_opts);
      RunManifest manifest = start_manifest("cv", cv_opts);
      const PanelData panel = load_panel_args(cv_panel, manifest);
      const SamplerConfig config = sampler_config(cv_sampler, cv_opts, manifest);
      const PriorSpec prior = PriorSpec::parse(cv_sampler.prior);
      manifest.config["k"] = std::to_string(cv_k);
      manifest.config["predict_thin"] = std::to_string(cv_predict_thin);
      const FoldAssignment folds = make_folds(panel, cv_k, cv_opts.seed);
      std::vector<EvalResult> results;
      results.push_back(run_cv(panel, config.model, prior, folds, config, cv_predict_thin));
      if (cv_with_baseline)
        results.push_back(run_cv_with(panel, make_baseline_predictor(), folds, "baseline"));
      const fs::path out_dir(cv_opts.out);
      fs::create_directories(out_dir);
      write_eval_report(results, out_dir / "eval.csv");
      manifest.outputs.push_back((out_dir / "eval.csv").string());
      finish_manifest(manifest, out_dir);
      for (const auto& r : results)
        std::cout << r.tag << ": cv_mse " << r.cv_mse << ", coverage95 " << r.coverage95
                  << (r.failed ? " (failed)" : "") << "\n";
    } else if (*ablate) {
      resolve_seed(ablate_opts);
      RunManifest manifest = start_manifest("ablate", ablate_opts);
      const PanelData panel = load_panel_args(ablate_panel, manifest);
      ablate_sampler.model = ablate_which;
      const SamplerConfig config = sampler_config(ablate_sampler, ablate_opts, manifest);
      const PriorSpec prior = PriorSpec::parse(ablate_sampler.prior);
      manifest.config["k"] = std::to_string(ablate_k);
      const FoldAssignment folds = make_folds(panel, ablate_k, ablate_opts.seed);
      const EvalResult result =
          run_cv(panel, config.model, prior, folds, config, ablate_predict_thin);
      const fs::path out_dir(ablate_opts.out);
      fs::create_directories(out_dir);
      write_eval_report({result}, out_dir / "eval.csv");
      manifest.outputs.push_back((out_dir / "eval.csv").string());
      finish_manifest(manifest, out_dir);
      std::cout << result.tag << ": cv_mse " << result.cv_mse << "\n";
    } else if (*sensitivity) {
      resolve_seed(sens_opts);
      RunManifest manifest = start_manifest("sensitivity", sens_opts);
      const PanelData panel = load_panel_args(sens_panel, manifest);
      const SamplerConfig config = sampler_config(sens_sampler, sens_opts, manifest);
      manifest.config["priors"] = sens_priors;
      manifest.config["k"] = std::to_string(sens_k);
      const std::vector<PriorSpec> priors = parse_prior_list(sens_priors);
      const FoldAssignment folds = make_folds(panel, sens_k, sens_opts.seed);
      const auto rows = prior_sensitivity(panel, priors, folds, config, sens_predict_thin);
      const fs::path out_dir(sens_opts.out);
      fs::create_directories(out_dir);
      std::ofstream out(out_dir / "sensitivity.csv");
      if (!out) throw IoError("cannot write sensitivity.csv");
      out << "prior,cv_mse,coverage95,rho_MSM_FSW,rho_MSM_PWID,rho_FSW_PWID\n";
      for (const auto& row : rows)
        out << row.prior.label() << ',' << format_full(row.cv_mse) << ','
            << format_full(row.coverage95) << ',' << format_full(row.rho_mean[0]) << ','
            << format_full(row.rho_mean[1]) << ',' << format_full(row.rho_mean[2]) << '\n';
      out.close();
      manifest.outputs.push_back((out_dir / "sensitivity.csv").string());
      finish_manifest(manifest, out_dir);
      std::cout << "sensitivity: " << rows.size() << " priors evaluated\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
