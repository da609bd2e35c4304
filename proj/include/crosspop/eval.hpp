#ifndef CROSSPOP_EVAL_HPP
#define CROSSPOP_EVAL_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "crosspop/panel.hpp"
#include "crosspop/posterior.hpp"

namespace crosspop {

// Fold labels over the observed cells, stratified by population so no
// training split loses an entire population.
struct FoldAssignment {
  int k = 5;
  std::uint64_t seed = 0;
  std::string strategy = "stratified_by_population";
  std::vector<Eigen::Index> cells; // observed cells, ascending
  std::vector<int> fold_of;        // parallel to cells, values in [0, k)

  std::vector<Eigen::Index> heldout(int fold) const;
};

FoldAssignment make_folds(const PanelData& panel, int k, std::uint64_t seed);

struct BaselinePrediction {
  Eigen::VectorXd pred; // full panel layout, year-constant per (country, population)
  // true where the (region, population) pool was empty and the global
  // population median was substituted
  std::array<std::array<bool, kNumPopulations>, kNumRegions> fallback{};
};

// Regional-median estimator: each cell gets the median observed log value
// of its (region, population) pool. window_years = 0 uses the full window;
// otherwise only the most recent window_years years enter the pool.
BaselinePrediction baseline_regional_median(const PanelData& panel, int window_years = 0);

struct CellPrediction {
  double mean = 0.0;
  double q025 = std::numeric_limits<double>::quiet_NaN();
  double q975 = std::numeric_limits<double>::quiet_NaN();
};

// A predictor sees the training panel and must score the held-out cells.
using Predictor = std::function<std::vector<CellPrediction>(
    const PanelData& train, const std::vector<Eigen::Index>& heldout, std::uint64_t seed)>;

struct FoldResult {
  int fold = 0;
  int n_cells = 0;
  double mse = 0.0;
  double coverage = 0.0;
  bool failed = false;
  std::string error;
};

struct EvalResult {
  std::string tag;
  double cv_mse = 0.0;     // pooled over held-out cells
  double coverage95 = 0.0; // NaN when the predictor has no intervals
  bool failed = false;
  std::vector<FoldResult> folds;
};

// Generic harness: refits on each training split, scores held-out cells on
// the log scale. A failing fold marks the run failed and stops it; pooled
// metrics then cover the completed folds only.
EvalResult run_cv_with(const PanelData& panel, const Predictor& predictor,
                       const FoldAssignment& folds, const std::string& tag);

Predictor make_gmrf_predictor(const PriorSpec& prior, const SamplerConfig& sampler,
                              int predict_thin = 1);
Predictor make_baseline_predictor(int window_years = 0);

EvalResult run_cv(const PanelData& panel, const ModelConfig& model, const PriorSpec& prior,
                  const FoldAssignment& folds, const SamplerConfig& sampler,
                  int predict_thin = 1);

enum class Ablation { no_cross_pop, no_country, no_time };
ModelConfig ablation_model(Ablation which);

EvalResult run_ablation(const PanelData& panel, Ablation which, const FoldAssignment& folds,
                        const PriorSpec& prior, const SamplerConfig& sampler,
                        int predict_thin = 1);

struct SensitivityRow {
  PriorSpec prior;
  double cv_mse = 0.0;
  double coverage95 = 0.0;
  Eigen::Vector3d rho_mean = Eigen::Vector3d::Zero(); // full-data posterior means
};

// One cross-validation run and one full-data fit per prior.
std::vector<SensitivityRow> prior_sensitivity(const PanelData& panel,
                                              const std::vector<PriorSpec>& priors,
                                              const FoldAssignment& folds,
                                              const SamplerConfig& sampler,
                                              int predict_thin = 1);

void write_eval_report(const std::vector<EvalResult>& results,
                       const std::filesystem::path& path);

} // namespace crosspop

#endif
