#ifndef CROSSPOP_POSTERIOR_HPP
#define CROSSPOP_POSTERIOR_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crosspop/gmrf.hpp"
#include "crosspop/panel.hpp"

namespace crosspop {

enum class PriorFamily { Laplace, Normal };

// Zero-centered prior applied independently to every structural parameter
// on its natural scale. Scale is the Laplace b parameter or the Normal
// standard deviation.
struct PriorSpec {
  PriorFamily family = PriorFamily::Laplace;
  double scale = 0.1;

  std::string label() const;
  static PriorSpec parse(std::string_view text); // "laplace:0.1", "normal:0.1"
};

double log_prior(const StructuralParams::Vector& v, const PriorSpec& prior);
double log_prior(const StructuralParams& params, const PriorSpec& prior);

// Which of the 33 parameters are sampled; the rest stay pinned at
// fixed_values. Component-exclusion variants pin a parameter group at zero.
struct ModelConfig {
  std::array<bool, kNumParams> free;
  StructuralParams::Vector fixed_values = StructuralParams::Vector::Zero();
  std::string tag = "full";

  ModelConfig() { free.fill(true); }

  void apply_fixed(StructuralParams::Vector& v) const {
    for (int j = 0; j < kNumParams; ++j)
      if (!free[j]) v[j] = fixed_values[j];
  }
  int n_free() const {
    int n = 0;
    for (bool f : free) n += f;
    return n;
  }

  static ModelConfig full();
  static ModelConfig no_cross_pop();
  static ModelConfig no_country();
  static ModelConfig no_time();
  static ModelConfig from_tag(const std::string& tag);
};

// Marginal log likelihood of the observed cells: a sum of per-country
// multivariate normal terms under the shared country covariance. Returns
// -inf when the parameter vector does not assemble to a positive-definite
// block.
double log_likelihood(const StructuralParams& params, const PanelData& panel);

// Likelihood evaluator with a small cache keyed on the covariance
// parameters, so single-parameter mean updates reuse the factorizations.
// Not thread safe; each chain owns one.
class LogPosterior {
public:
  LogPosterior(const PanelData& panel, PriorSpec prior);

  double operator()(const StructuralParams::Vector& v);
  double likelihood_only(const StructuralParams::Vector& v);

private:
  struct Pattern {
    std::vector<int> offsets;
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_det = 0.0;
  };
  struct CovCache {
    Eigen::Matrix<double, 12, 1> key;
    std::vector<Pattern> patterns;
    bool valid = false;
    std::uint64_t age = 0;
  };
  struct CountryData {
    int region = 0;
    int pattern = -1; // -1 when the country has no observations
    Eigen::VectorXd y_obs;
    std::vector<int> offsets;
  };

  const CovCache* covariance_for(const StructuralParams& params);

  int n_years_;
  PriorSpec prior_;
  std::vector<CountryData> countries_;
  std::vector<std::vector<int>> pattern_offsets_;
  std::array<CovCache, 2> cache_;
  std::uint64_t clock_ = 0;
};

struct SamplerConfig {
  int chains = 4;
  int draws_per_chain = 3000; // post-warmup; 4 x 3000 = 12,000 total
  int warmup = -1;            // -1: same as draws_per_chain
  std::uint64_t seed = 1;
  double target_accept = 0.234;
  int joint_moves = 8; // correlation-following joint proposals per sweep
  double init_jitter = 0.1;
  int max_init_attempts = 100;
  int threads = 0; // 0: hardware concurrency
  ModelConfig model;

  int effective_warmup() const { return warmup < 0 ? draws_per_chain : warmup; }
  int total_draws() const { return chains * draws_per_chain; }
};

struct PosteriorDraws {
  Eigen::MatrixXd draws;       // total_draws x 33, chain-major
  Eigen::VectorXi chain_id;    // per draw
  Eigen::VectorXd log_density; // per draw
  std::uint64_t seed = 0;
  int chains = 0;
  int warmup = 0;
  int draws_per_chain = 0;
  ModelConfig model;
  PriorSpec prior;
  std::vector<double> acceptance; // mean post-warmup acceptance per chain

  Eigen::Index n_draws() const { return draws.rows(); }
  StructuralParams params_at(Eigen::Index d) const {
    return StructuralParams::unpack(draws.row(d).transpose());
  }
};

// Systematic-scan random-walk Metropolis over the free parameters, one
// Gaussian proposal per parameter per sweep. Proposal scales adapt during
// warmup by Robbins-Monro on the log scale toward the target acceptance
// rate and are frozen afterwards. Positivity of tau and s is kept by
// reflecting proposals at zero; parameter vectors whose precision block is
// not positive definite get log density -inf and are always rejected.
PosteriorDraws sample_posterior(const PanelData& panel, const PriorSpec& prior,
                                const SamplerConfig& config);

// Columnar draws file: chain,iteration,<33 parameter names>,log_density.
void write_draws(const PosteriorDraws& draws, const std::filesystem::path& path);
PosteriorDraws read_draws(const std::filesystem::path& path);

struct ParamSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
};
ParamSummary summarize_column(const Eigen::VectorXd& column);

} // namespace crosspop

#endif
