#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "crosspop/posterior.hpp"
#include "crosspop/simulate.hpp"
#include "support/oracles.hpp"

using namespace crosspop;

namespace {

ScenarioSpec base_scenario() {
  ScenarioSpec spec;
  spec.n_countries = 10;
  spec.seed = 42;
  spec.truth.mu.setConstant(-2.0);
  spec.truth.tau.setConstant(0.2);
  spec.truth.s.setOnes();
  spec.truth.gamma.setConstant(-0.3);
  spec.truth.rho.setConstant(0.02);
  for (auto& m : spec.missingness) m = {0.2, 0.5, 0.3};
  return spec;
}

} // namespace

TEST_CASE("simulated panel matches its truth on the observed mask") {
  const ScenarioSpec spec = base_scenario();
  const SimulatedPanel sim = simulate_panel(spec);
  CHECK(sim.truth.size() == 330);
  CHECK(sim.panel.size() == 330);
  for (Eigen::Index i = 0; i < sim.panel.size(); ++i) {
    if (sim.panel.observed(i))
      CHECK(sim.panel.y[i] == sim.truth[i]);
    else
      CHECK(sim.panel.y[i] == 0.0);
  }
}

TEST_CASE("identical scenarios produce bit-identical panels") {
  const ScenarioSpec spec = base_scenario();
  const SimulatedPanel a = simulate_panel(spec);
  const SimulatedPanel b = simulate_panel(spec);
  CHECK(a.truth == b.truth);
  CHECK(a.panel.y == b.panel.y);
  CHECK(a.panel.mask == b.panel.mask);
  ScenarioSpec other = spec;
  other.seed = 43;
  const SimulatedPanel c = simulate_panel(other);
  CHECK(a.truth != c.truth);
}

TEST_CASE("an all-missing profile yields an empty panel but a full truth") {
  ScenarioSpec spec = base_scenario();
  for (auto& m : spec.missingness) m = {1.0, 0.0, 0.0};
  const SimulatedPanel sim = simulate_panel(spec);
  CHECK(sim.panel.n_observed() == 0);
  CHECK(sim.truth.array().abs().sum() > 0.0);
}

TEST_CASE("missingness category counts follow the profile") {
  ScenarioSpec spec = base_scenario();
  spec.n_countries = 20;
  spec.missingness[0] = {0.5, 0.25, 0.25};
  spec.missingness[1] = {0.0, 1.0, 0.0};
  spec.missingness[2] = {0.0, 0.0, 1.0};
  const SimulatedPanel sim = simulate_panel(spec);
  const SparsityProfile p = sparsity_profile(sim.panel);
  CHECK(p.none[0] == 10);
  CHECK(p.low[0] == 5);
  CHECK(p.high[0] == 5);
  CHECK(p.low[1] == 20);
  CHECK(p.high[2] == 20);
  for (int i = 0; i < 20; ++i) {
    const int n = sim.panel.obs_count(i, Population::PWID);
    CHECK(n >= 5);
    CHECK(n <= 11);
  }
  ScenarioSpec bad = spec;
  bad.missingness[0] = {0.5, 0.2, 0.2}; // sums to 0.9
  CHECK_THROWS_AS(simulate_panel(bad), ConfigError);
}

TEST_CASE("per-cell variance of the generator matches the marginal law") {
  // unit precision, no couplings: each cell is N(mu, 1)
  ScenarioSpec spec;
  spec.n_countries = 2;
  spec.truth.mu.setConstant(-2.0);
  spec.truth.tau.setZero();
  spec.truth.s.setOnes();
  for (auto& m : spec.missingness) m = {1.0, 0.0, 0.0};

  const int reps = 10000;
  double sum = 0.0, sum_sq = 0.0;
  const Eigen::Index cell = 16; // some mid-series MSM year of country 0
  for (int r = 0; r < reps; ++r) {
    spec.seed = 1000 + static_cast<std::uint64_t>(r);
    const SimulatedPanel sim = simulate_panel(spec);
    sum += sim.truth[cell];
    sum_sq += sim.truth[cell] * sim.truth[cell];
  }
  const double mean = sum / reps;
  const double var = sum_sq / reps - mean * mean;
  // 3 standard errors: se(var) ~ var * sqrt(2/n), se(mean) = 1/sqrt(n)
  CHECK(std::abs(mean - (-2.0)) < 3.0 / std::sqrt(static_cast<double>(reps)));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / reps));
}

TEST_CASE("simulated lag-1 autocorrelation agrees with implied_correlations") {
  ScenarioSpec spec;
  spec.n_countries = 1;
  spec.truth.mu.setConstant(-2.0);
  spec.truth.tau.setZero();
  spec.truth.s.setOnes();
  spec.truth.gamma << -0.45, 0.0, 0.0;
  for (auto& m : spec.missingness) m = {1.0, 0.0, 0.0};

  const Eigen::Matrix3d implied = implied_correlations(spec.truth, 11);

  const int reps = 20000;
  const int mid = 5;
  double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
  for (int r = 0; r < reps; ++r) {
    spec.seed = 7000 + static_cast<std::uint64_t>(r);
    const SimulatedPanel sim = simulate_panel(spec);
    const double x = sim.truth[mid];
    const double y = sim.truth[mid + 1];
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double n = reps;
  const double corr = (sxy / n - sx / n * sy / n) /
                      std::sqrt((sxx / n - sx / n * sx / n) * (syy / n - sy / n * sy / n));
  CHECK(std::abs(corr - implied(0, 0)) < 0.02);
}

TEST_CASE("generator and likelihood are mutually consistent") {
  // Average log likelihood at the generating parameters beats a perturbed
  // configuration across replicates.
  ScenarioSpec spec = base_scenario();
  spec.n_countries = 8;
  StructuralParams perturbed = spec.truth;
  perturbed.mu.array() += 0.8;
  perturbed.s.array() *= 2.0;

  double margin = 0.0;
  const int reps = 30;
  for (int r = 0; r < reps; ++r) {
    spec.seed = 90 + static_cast<std::uint64_t>(r);
    const SimulatedPanel sim = simulate_panel(spec);
    margin += log_likelihood(spec.truth, sim.panel) - log_likelihood(perturbed, sim.panel);
  }
  CHECK(margin / reps > 0.0);
}

TEST_CASE("scenario files round-trip") {
  ScenarioSpec spec = base_scenario();
  spec.truth.gamma << -0.2, 0.1, -0.4;
  spec.missingness[2] = {0.1, 0.6, 0.3};
  const auto path = std::filesystem::temp_directory_path() / "scenario_rt.cfg";
  save_scenario(spec, path);
  const ScenarioSpec back = load_scenario(path);
  CHECK(back.n_countries == spec.n_countries);
  CHECK(back.seed == spec.seed);
  CHECK(back.truth.pack() == spec.truth.pack());
  CHECK(back.missingness[2].low == doctest::Approx(0.6));
  const SimulatedPanel a = simulate_panel(spec);
  const SimulatedPanel b = simulate_panel(back);
  CHECK(a.panel.y == b.panel.y);
}

TEST_CASE("degenerate one-country recovery runs end to end") {
  ScenarioSpec spec;
  spec.n_countries = 1;
  spec.seed = 12;
  spec.truth.mu.setConstant(-2.0);
  spec.truth.tau.setConstant(0.1);
  spec.truth.s.setOnes();
  for (auto& m : spec.missingness) m = {0.0, 0.0, 1.0};

  SamplerConfig config;
  config.chains = 2;
  config.draws_per_chain = 60;
  config.warmup = 60;
  config.seed = 5;
  const RecoveryReport report =
      recovery_experiment(spec, PriorSpec{PriorFamily::Laplace, 0.5}, config);
  CHECK(report.rows.size() == static_cast<std::size_t>(kNumParams));
  CHECK(report.coverage >= 0.0);
  CHECK(report.coverage <= 1.0);
}
