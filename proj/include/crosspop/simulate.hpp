#ifndef CROSSPOP_SIMULATE_HPP
#define CROSSPOP_SIMULATE_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "crosspop/diagnostics.hpp"
#include "crosspop/gmrf.hpp"
#include "crosspop/panel.hpp"
#include "crosspop/posterior.hpp"

namespace crosspop {

// Fractions of countries with no observations, 1-4 observations, and 5 or
// more, for one population. Must sum to 1.
struct MissingnessProfile {
  double none = 0.3;
  double low = 0.5;
  double high = 0.2;
};

struct ScenarioSpec {
  int n_countries = 20;
  YearRange years{};
  StructuralParams truth;
  std::array<MissingnessProfile, kNumPopulations> missingness{};
  std::uint64_t seed = 1;
  std::string region_rule = "round_robin";
};

struct SimulatedPanel {
  PanelData panel;
  Eigen::VectorXd truth; // full latent Y, length 33N
};

// Country table implied by the scenario: synthetic three-letter codes with
// regions assigned per the region rule.
CountryTable scenario_country_table(const ScenarioSpec& spec);

// Draws the full latent panel from the generative law and masks it per the
// missingness profile. The observed values of the returned panel equal the
// truth restricted to the mask.
SimulatedPanel simulate_panel(const ScenarioSpec& spec);

// Scenario files use the flat key-value config format; see docs.
ScenarioSpec load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path);

struct RecoveryRow {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  bool covered = false;
  bool fixed = false;
  double z = 0.0; // (posterior mean - truth) / posterior sd
};

struct RecoveryReport {
  std::vector<RecoveryRow> rows;
  double coverage = 0.0; // fraction of free parameters covered
  DiagnosticsReport diag;
};

// Simulate, fit, and score credible-interval coverage of the truth.
RecoveryReport recovery_experiment(const ScenarioSpec& spec, const PriorSpec& prior,
                                   const SamplerConfig& config);

} // namespace crosspop

#endif
