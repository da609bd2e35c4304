#ifndef CROSSPOP_IMPUTE_HPP
#define CROSSPOP_IMPUTE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crosspop/panel.hpp"
#include "crosspop/posterior.hpp"

namespace crosspop {

struct ConditionalGaussian {
  Eigen::VectorXd mean; // over the unobserved coordinates, in ascending order
  Eigen::MatrixXd cov;
};

// Distribution of the unobserved coordinates of a Gaussian given the
// observed ones, computed through Cholesky solves of the observed block.
// obs_idx must be a nonempty proper subset of the coordinates.
ConditionalGaussian conditional_gaussian(const Eigen::VectorXd& mean,
                                         const Eigen::MatrixXd& cov,
                                         const std::vector<int>& obs_idx,
                                         const Eigen::VectorXd& y_obs);

// Joint posterior draws of log prevalence at a set of cells: one draw of Y
// per retained parameter draw, columns aligned with `cells`.
struct CellPosterior {
  std::vector<Eigen::Index> cells; // global flat indices, ascending
  Eigen::MatrixXd draws;           // n_draws x n_cells

  Eigen::Index n_draws() const { return draws.rows(); }
  std::optional<int> column_of(Eigen::Index cell) const;
};

struct CellSummary {
  double mean = 0.0;
  double median = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};
CellSummary summarize_cell(const CellPosterior& cells, int column);

struct PredictOptions {
  int thin = 1; // keep every thin-th parameter draw
  int threads = 0;
};

// Conditional-normal prediction of every unobserved cell. For each retained
// parameter draw the country block is conditioned on that country's
// observed cells and the missing coordinates are sampled; countries with no
// observations sample the unconditional block.
CellPosterior predict_missing(const PosteriorDraws& draws, const PanelData& panel,
                              std::uint64_t seed, const PredictOptions& options = {});

struct GibbsOptions {
  int sweeps = 10; // alternating sweeps per parameter draw; last state kept
  int thin = 1;
  int threads = 0;
};

// Model-based reconstruction of the observed cells: per parameter draw,
// alternate conjugate draws of the country-population random effects with
// single-site Gibbs updates of the structured errors, then rebuild
// Y = mu + b + eps at the observed cells.
CellPosterior gibbs_reconstruct(const PosteriorDraws& draws, const PanelData& panel,
                                std::uint64_t seed, const GibbsOptions& options = {});

// Column-wise union of two cell posteriors with identical draw counts.
CellPosterior merge_cell_posteriors(const CellPosterior& a, const CellPosterior& b);

enum class ChangeClass { increase, decrease, no_change };
const char* to_string(ChangeClass c);

struct ContrastOptions {
  int year_a = 2011;
  int year_b = 2021;
  double ratio_up = 1.5;
  double ratio_down = 0.5;
  double prob = 0.95;
};

struct ChangeRow {
  int country = 0;
  Population pop = Population::MSM;
  double ratio_median = 1.0;
  double pr_up = 0.0;   // Pr(ratio > ratio_up)
  double pr_down = 0.0; // Pr(ratio < ratio_down)
  ChangeClass cls = ChangeClass::no_change;
};

struct ChangeSummary {
  ContrastOptions options;
  std::vector<ChangeRow> rows; // one per (country, population)
};

// Posterior of the prevalence ratio exp(Y_b - Y_a) per country and
// population, paired within parameter draws, classified by the posterior
// probability of at least a ratio_up-fold increase or ratio_down-fold
// decrease.
ChangeSummary change_contrast(const CellPosterior& cells, const PanelData& panel,
                              const ContrastOptions& options = {});

// Report files: per-cell summaries on log and natural scales, and the
// change classification table. Natural-scale mean is the mean of the
// exponentiated draws, not the exponential of the log-scale mean.
void export_estimates(const CellPosterior& cells, const PanelData& panel,
                      const std::filesystem::path& path);
void export_changes(const ChangeSummary& changes, const PanelData& panel,
                    const std::filesystem::path& path);

// Parsed-back rows of the estimate report, used for round-trip checks and
// downstream tooling.
struct EstimateRow {
  std::string country;
  std::string population;
  int year = 0;
  double log_mean = 0, log_median = 0, log_q025 = 0, log_q975 = 0;
  double nat_mean = 0, nat_median = 0, nat_q025 = 0, nat_q975 = 0;
};
std::vector<EstimateRow> read_estimates(const std::filesystem::path& path);

} // namespace crosspop

#endif
