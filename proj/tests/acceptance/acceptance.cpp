// Acceptance suite: one numbered criterion per run, each printing a single
// [PASS]/[FAIL] line. Run all with no arguments or one with `acceptance N`.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "crosspop/diagnostics.hpp"
#include "crosspop/eval.hpp"
#include "crosspop/impute.hpp"
#include "crosspop/panel.hpp"
#include "crosspop/posterior.hpp"
#include "crosspop/rng.hpp"
#include "crosspop/simulate.hpp"
#include "support/oracles.hpp"

using namespace crosspop;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

PanelData random_mask_panel(Rng& rng, int n_countries, double obs_fraction) {
  PanelData p;
  for (int i = 0; i < n_countries; ++i) {
    p.country_codes.push_back("C" + std::to_string(i));
    p.region_of.push_back(static_cast<Region>(i % kNumRegions));
  }
  const Eigen::Index total = static_cast<Eigen::Index>(n_countries) * block_size(p.years);
  p.y = Eigen::VectorXd::Zero(total);
  p.mask.assign(static_cast<std::size_t>(total), 0);
  for (Eigen::Index c = 0; c < total; ++c) {
    if (rng.uniform() < obs_fraction) {
      p.mask[static_cast<std::size_t>(c)] = 1;
      p.y[c] = -2.0 + rng.normal();
    }
  }
  return p;
}

// N=50 scenario with moderate sparsity used by the recovery and calibration
// criteria. Means are well below zero so simulated prevalences stay in (0,1).
ScenarioSpec recovery_scenario(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.n_countries = 50;
  spec.seed = seed;
  const double base[kNumRegions] = {-2.6, -2.9, -3.6, -3.3, -3.0, -3.4, -3.1};
  const double off[kNumPopulations] = {0.0, 0.25, -0.2};
  for (int r = 0; r < kNumRegions; ++r)
    for (int k = 0; k < kNumPopulations; ++k) spec.truth.mu(r, k) = base[r] + off[k];
  spec.truth.tau << 0.15, 0.10, 0.20;
  spec.truth.s << 3.0, 3.5, 2.5;
  spec.truth.gamma << -1.05, -1.2, -0.9;
  spec.truth.rho << 0.05, 0.08, 0.10;
  spec.missingness[0] = {0.25, 0.45, 0.30};
  spec.missingness[1] = {0.20, 0.50, 0.30};
  spec.missingness[2] = {0.30, 0.40, 0.30};
  return spec;
}

// Each population carries one ablation axis. MSM has strong oscillatory
// temporal coupling (a country-constant effect cannot substitute for it, so
// dropping the temporal term is catastrophic there); FSW has a large country
// effect with weak temporal structure; PWID is cross-coupled to FSW. The
// cross couplings stay small relative to the temporal precisions.
ScenarioSpec ablation_scenario(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.n_countries = 40;
  spec.seed = seed;
  const double base[kNumRegions] = {-2.8, -3.1, -3.8, -3.4, -3.2, -3.6, -3.3};
  const double off[kNumPopulations] = {0.0, 0.25, -0.2};
  for (int r = 0; r < kNumRegions; ++r)
    for (int k = 0; k < kNumPopulations; ++k) spec.truth.mu(r, k) = base[r] + off[k];
  spec.truth.tau << 0.2, 1.5, 0.5;
  spec.truth.s << 1.0, 1.5, 1.0;
  spec.truth.gamma << 0.516, -0.353, -0.309;
  spec.truth.rho << 0.01, 0.01, 0.40;
  spec.missingness[0] = {0.0, 0.40, 0.60};
  spec.missingness[1] = {0.05, 0.25, 0.70};
  spec.missingness[2] = {0.05, 0.25, 0.70};
  return spec;
}

void criterion_1() {
  const int n_countries = 3;
  Rng rng(11001);
  PanelData panel = random_mask_panel(rng, n_countries, 0.25);
  double max_rel = 0.0;
  for (int rep = 0; rep < 25; ++rep) {
    const StructuralParams p = test::random_valid_params(rng, 11);
    const Eigen::MatrixXd global = test::dense_global_sigma(p, n_countries, 11);
    const CountryCovariance cov = country_covariance(p, 11);
    for (int i = 0; i < n_countries; ++i) {
      const Eigen::MatrixXd block = global.block(33 * i, 33 * i, 33, 33);
      max_rel = std::max(max_rel, (cov.sigma - block).norm() / block.norm());
    }
    const double got = log_likelihood(p, panel);
    const double want = test::dense_observed_loglik(p, panel);
    max_rel = std::max(max_rel, std::abs(got - want) / std::abs(want));
  }
  std::ostringstream os;
  os << "max relative error " << max_rel << " over 25 parameter draws, budget 1e-8";
  report(1, max_rel < 1e-8, "dense-oracle equivalence at N=3", os.str());
}

void criterion_2() {
  Rng rng(11002);
  double max_err = 0.0;
  double min_eig = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int dim = static_cast<int>(rng.uniform_int(4, 12));
    const Eigen::MatrixXd cov = test::random_spd(rng, dim);
    Eigen::VectorXd mean(dim);
    for (int i = 0; i < dim; ++i) mean[i] = rng.normal();
    const int n_obs = static_cast<int>(rng.uniform_int(1, dim - 1));
    std::vector<int> all(static_cast<std::size_t>(dim));
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(all);
    std::vector<int> obs(all.begin(), all.begin() + n_obs);
    std::sort(obs.begin(), obs.end());
    Eigen::VectorXd y(n_obs);
    for (int i = 0; i < n_obs; ++i) y[i] = rng.normal();

    const ConditionalGaussian got = conditional_gaussian(mean, cov, obs, y);
    const test::DenseConditional want = test::dense_conditional(mean, cov, obs, y);
    max_err = std::max(max_err, (got.mean - want.mean).norm() / (1.0 + want.mean.norm()));
    max_err = std::max(max_err, (got.cov - want.cov).norm() / (1.0 + want.cov.norm()));

    std::vector<int> miss;
    for (int i = 0; i < dim; ++i)
      if (std::find(obs.begin(), obs.end(), i) == obs.end()) miss.push_back(i);
    Eigen::MatrixXd s_mm(miss.size(), miss.size());
    for (std::size_t a = 0; a < miss.size(); ++a)
      for (std::size_t b = 0; b < miss.size(); ++b)
        s_mm(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            cov(miss[a], miss[b]);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s_mm - got.cov);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  std::ostringstream os;
  os << "max relative error " << max_err << " (budget 1e-10), min eigenvalue of "
     << "Sigma_mm - cond_cov " << min_eig;
  report(2, max_err < 1e-10 && min_eig > -1e-10,
         "conditional gaussian vs explicit-inverse formula, 100 cases", os.str());
}

void criterion_3() {
  PanelData panel;
  panel.country_codes = {"AAA"};
  panel.region_of = {Region::AsiaPacific};
  panel.y = Eigen::VectorXd::Zero(33);
  panel.mask.assign(33, 0);
  const double y = -1.5;
  const Eigen::Index cell = panel.flat({0, Population::MSM, 2016});
  panel.y[cell] = y;
  panel.mask[static_cast<std::size_t>(cell)] = 1;

  const double prior_sd = 0.5;
  SamplerConfig config;
  config.chains = 4;
  config.draws_per_chain = 2500;
  config.warmup = 1500;
  config.seed = 11003;
  for (int j = 0; j < kNumParams; ++j) config.model.free[j] = false;
  const int mean_idx = StructuralParams::mu_index(Region::AsiaPacific, Population::MSM);
  config.model.free[mean_idx] = true;
  StructuralParams fixed;
  fixed.s.setOnes();
  fixed.tau.setZero();
  config.model.fixed_values = fixed.pack();

  const PosteriorDraws draws =
      sample_posterior(panel, PriorSpec{PriorFamily::Normal, prior_sd}, config);
  const double post_prec = 1.0 + 1.0 / (prior_sd * prior_sd);
  const double post_mean = y / post_prec;
  const double post_var = 1.0 / post_prec;

  const Eigen::VectorXd col = draws.draws.col(mean_idx);
  const double mc_mean = col.mean();
  const double mc_var = (col.array() - mc_mean).square().sum() / (col.size() - 1);
  const double ess = diagnostics(draws).params[static_cast<std::size_t>(mean_idx)].ess;
  const double se_mean = std::sqrt(post_var / ess);
  const double se_var = post_var * std::sqrt(2.0 / ess);

  std::ostringstream os;
  os << "mean " << mc_mean << " vs " << post_mean << " (3se " << 3 * se_mean << "), var "
     << mc_var << " vs " << post_var << " (3se " << 3 * se_var << "), ess " << ess;
  report(3,
         std::abs(mc_mean - post_mean) < 3 * se_mean && std::abs(mc_var - post_var) < 3 * se_var,
         "conjugate normal-normal posterior", os.str());
}

void criterion_4() {
  const ScenarioSpec spec = recovery_scenario(77);
  SamplerConfig config;
  config.chains = 4;
  config.draws_per_chain = 1500;
  config.warmup = 2000;
  config.seed = 11004;
  const RecoveryReport rec =
      recovery_experiment(spec, PriorSpec{PriorFamily::Laplace, 2.0}, config);
  std::ostringstream os;
  os << "coverage " << rec.coverage << " (need >= 0.80), max R-hat " << rec.diag.max_rhat
     << " (need <= 1.01), 4 chains x 1500 draws";
  report(4, rec.coverage >= 0.80 && rec.diag.max_rhat <= 1.01,
         "parameter recovery on an N=50 synthetic scenario", os.str());
}

void criterion_5() {
  ScenarioSpec spec = recovery_scenario(1234);
  const SimulatedPanel sim = simulate_panel(spec);

  // hide 20% of the observed cells
  std::vector<Eigen::Index> observed = sim.panel.observed_cells();
  Rng rng(11005);
  rng.shuffle(observed);
  const std::size_t n_mask = observed.size() / 5;
  const std::vector<Eigen::Index> hidden(observed.begin(),
                                         observed.begin() + static_cast<long>(n_mask));
  const PanelData train = sim.panel.masked(hidden);

  SamplerConfig config;
  config.chains = 4;
  config.draws_per_chain = 1000;
  config.warmup = 1500;
  config.seed = 11055;
  const PosteriorDraws draws =
      sample_posterior(train, PriorSpec{PriorFamily::Laplace, 2.0}, config);
  PredictOptions popts;
  popts.thin = 2;
  const CellPosterior cells = predict_missing(draws, train, 11056, popts);

  int hit = 0;
  for (Eigen::Index cell : hidden) {
    const auto col = cells.column_of(cell);
    if (!col) continue;
    const CellSummary s = summarize_cell(cells, *col);
    const double truth = sim.truth[cell];
    hit += (truth >= s.q025 && truth <= s.q975) ? 1 : 0;
  }
  const double coverage = static_cast<double>(hit) / static_cast<double>(hidden.size());
  std::ostringstream os;
  os << "95% interval coverage " << coverage << " over " << hidden.size()
     << " masked cells, need [0.90, 0.98]";
  report(5, coverage >= 0.90 && coverage <= 0.98, "predictive calibration at 20% masking",
         os.str());
}

void criterion_6() {
  const ScenarioSpec spec = ablation_scenario(88);
  const SimulatedPanel sim = simulate_panel(spec);
  const FoldAssignment folds = make_folds(sim.panel, 5, 11006);

  SamplerConfig sampler;
  sampler.chains = 2;
  sampler.draws_per_chain = 400;
  sampler.warmup = 600;
  sampler.seed = 11007;
  const PriorSpec prior{PriorFamily::Laplace, 0.5};
  const int thin = 2;

  const EvalResult full = run_cv(sim.panel, ModelConfig::full(), prior, folds, sampler, thin);
  const EvalResult no_cross =
      run_ablation(sim.panel, Ablation::no_cross_pop, folds, prior, sampler, thin);
  const EvalResult no_country =
      run_ablation(sim.panel, Ablation::no_country, folds, prior, sampler, thin);
  const EvalResult no_time =
      run_ablation(sim.panel, Ablation::no_time, folds, prior, sampler, thin);
  const EvalResult baseline = run_cv_with(sim.panel, make_baseline_predictor(), folds,
                                          "baseline");

  const bool ok = !full.failed && !no_cross.failed && !no_country.failed && !no_time.failed &&
                  full.cv_mse < no_cross.cv_mse && full.cv_mse < no_country.cv_mse &&
                  no_time.cv_mse > 3.0 * full.cv_mse && full.cv_mse < baseline.cv_mse;
  std::ostringstream os;
  os << "cv_mse full " << full.cv_mse << ", no_cross_pop " << no_cross.cv_mse
     << ", no_country " << no_country.cv_mse << ", no_time " << no_time.cv_mse << ", baseline "
     << baseline.cv_mse;
  report(6, ok, "ablation ordering on a temporally coupled synthetic panel", os.str());
}

void criterion_7() {
  Rng rng(11008);
  Eigen::MatrixXd iid(4, 1000);
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 1000; ++i) iid(c, i) = rng.normal();
  const ParamDiagnostic di = sequence_diagnostic(iid);

  const double phi = 0.9;
  const int n = 4000;
  Eigen::MatrixXd ar(4, n);
  const double stationary_sd = 1.0 / std::sqrt(1.0 - phi * phi);
  for (int c = 0; c < 4; ++c) {
    double x = stationary_sd * rng.normal();
    for (int i = 0; i < n; ++i) {
      x = phi * x + rng.normal();
      ar(c, i) = x;
    }
  }
  const ParamDiagnostic da = sequence_diagnostic(ar);
  const double analytic = 4.0 * n * (1.0 - phi) / (1.0 + phi);

  const bool ok = di.rhat >= 0.999 && di.rhat <= 1.01 && std::abs(di.ess - 4000.0) <= 400.0 &&
                  std::abs(da.ess - analytic) <= 0.25 * analytic;
  std::ostringstream os;
  os << "iid: rhat " << di.rhat << ", ess " << di.ess << " (nominal 4000 +-10%); AR(1): ess "
     << da.ess << " vs analytic " << analytic << " +-25%";
  report(7, ok, "diagnostics sanity on iid and AR(1) sequences", os.str());
}

void criterion_8() {
  ScenarioSpec spec = recovery_scenario(5150);
  spec.n_countries = 15;
  const SimulatedPanel sim = simulate_panel(spec);

  SamplerConfig config;
  config.chains = 2;
  config.draws_per_chain = 150;
  config.warmup = 200;
  config.seed = 11009;
  const PriorSpec prior{PriorFamily::Laplace, 0.5};

  const auto tmp = fs::temp_directory_path();
  config.threads = 2;
  const PosteriorDraws a = sample_posterior(sim.panel, prior, config);
  write_draws(a, tmp / "acc8_a.csv");
  const PosteriorDraws b = sample_posterior(sim.panel, prior, config);
  write_draws(b, tmp / "acc8_b.csv");
  std::ifstream fa(tmp / "acc8_a.csv", std::ios::binary), fb(tmp / "acc8_b.csv",
                                                             std::ios::binary);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  const bool files_identical = sa.str() == sb.str() && !sa.str().empty();

  const FoldAssignment folds = make_folds(sim.panel, 3, 11010);
  SamplerConfig one = config, two = config;
  one.threads = 1;
  two.threads = 2;
  const EvalResult cv1 = run_cv(sim.panel, ModelConfig::full(), prior, folds, one, 2);
  const EvalResult cv2 = run_cv(sim.panel, ModelConfig::full(), prior, folds, two, 2);
  const bool cv_identical = cv1.cv_mse == cv2.cv_mse;

  std::ostringstream os;
  os << "draws files byte-identical: " << (files_identical ? "yes" : "no")
     << "; pooled cv_mse threads=1 " << cv1.cv_mse << " == threads=2 " << cv2.cv_mse << ": "
     << (cv_identical ? "yes" : "no");
  report(8, files_identical && cv_identical, "determinism under reruns and thread counts",
         os.str());
}

void criterion_9() {
  // Conditional hook: the repo ships only synthetic data; the real-data
  // reproduction is a documented non-CI target. Verify the script and its
  // documentation exist and that no proprietary panel is bundled.
  const char* root_env = std::getenv("CROSSPOP_ROOT");
  const fs::path root = root_env ? fs::path(root_env) : fs::current_path();
  const fs::path script = root / "experiments" / "table3.sh";
  const fs::path formats = root / "docs" / "file_formats.md";
  bool ok = fs::exists(script) && fs::exists(formats);
  if (ok) {
    std::ifstream in(script);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string body = ss.str();
    ok = body.find("UNAIDS_PANEL") != std::string::npos &&
         body.find("ablate") != std::string::npos &&
         (fs::status(script).permissions() & fs::perms::owner_exec) != fs::perms::none;
  }
  const bool no_bundled_real_data = !fs::exists(root / "data" / "unaids");
  std::ostringstream os;
  os << "experiments/table3.sh executable with documented schema: " << (ok ? "yes" : "no")
     << "; repo ships synthetic data only: " << (no_bundled_real_data ? "yes" : "no");
  report(9, ok && no_bundled_real_data, "real-data reproduction hook (conditional)", os.str());
}

} // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int a = 1; a < argc; ++a) which.push_back(std::atoi(argv[a]));
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  for (int c : which) {
    switch (c) {
      case 1: criterion_1(); break;
      case 2: criterion_2(); break;
      case 3: criterion_3(); break;
      case 4: criterion_4(); break;
      case 5: criterion_5(); break;
      case 6: criterion_6(); break;
      case 7: criterion_7(); break;
      case 8: criterion_8(); break;
      case 9: criterion_9(); break;
      default:
        std::fprintf(stderr, "unknown criterion %d\n", c);
        return 2;
    }
  }
  return g_failures == 0 ? 0 : 1;
}
