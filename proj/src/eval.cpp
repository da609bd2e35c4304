#include "crosspop/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "crosspop/impute.hpp"
#include "crosspop/rng.hpp"
#include "crosspop/stats.hpp"

namespace crosspop {

namespace {

constexpr std::uint64_t kFoldStream = 0x666f6c64ULL; // "fold"
constexpr std::uint64_t kCvStream = 0x6376ULL;       // "cv"

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

std::vector<Eigen::Index> FoldAssignment::heldout(int fold) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (fold_of[i] == fold) out.push_back(cells[i]);
  return out;
}

FoldAssignment make_folds(const PanelData& panel, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  FoldAssignment folds;
  folds.k = k;
  folds.seed = seed;
  folds.cells = panel.observed_cells();
  folds.fold_of.assign(folds.cells.size(), -1);

  const int ny = panel.years.count();
  for (int pop = 0; pop < kNumPopulations; ++pop) {
    std::vector<std::size_t> stratum;
    for (std::size_t i = 0; i < folds.cells.size(); ++i) {
      const int within = static_cast<int>(folds.cells[i] % block_size(panel.years));
      if (within / ny == pop) stratum.push_back(i);
    }
    if (stratum.empty()) continue;
    if (static_cast<int>(stratum.size()) < k)
      throw TooFewObservations(std::string(to_string(static_cast<Population>(pop))) + " has " +
                               std::to_string(stratum.size()) + " observed cells, fewer than " +
                               std::to_string(k) + " folds");
    Rng rng(seed, {kFoldStream, static_cast<std::uint64_t>(pop)});
    rng.shuffle(stratum);
    for (std::size_t pos = 0; pos < stratum.size(); ++pos)
      folds.fold_of[stratum[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  }
  return folds;
}

BaselinePrediction baseline_regional_median(const PanelData& panel, int window_years) {
  const int ny = panel.years.count();
  const int first_year =
      window_years > 0 ? std::max(panel.years.first, panel.years.last - window_years + 1)
                       : panel.years.first;

  std::array<std::array<std::vector<double>, kNumPopulations>, kNumRegions> pools;
  std::array<std::vector<double>, kNumPopulations> pop_pools;
  std::vector<double> all_pool;
  for (Eigen::Index idx = 0; idx < panel.size(); ++idx) {
    if (!panel.observed(idx)) continue;
    const Cell c = panel.cell_at(idx);
    if (c.year < first_year) continue;
    const int r = static_cast<int>(panel.region_of[c.country]);
    pools[r][static_cast<int>(c.pop)].push_back(panel.y[idx]);
    pop_pools[static_cast<int>(c.pop)].push_back(panel.y[idx]);
    all_pool.push_back(panel.y[idx]);
  }

  BaselinePrediction out;
  out.pred.resize(panel.size());
  std::array<std::array<double, kNumPopulations>, kNumRegions> value{};
  for (int r = 0; r < kNumRegions; ++r) {
    for (int k = 0; k < kNumPopulations; ++k) {
      if (!pools[r][k].empty()) {
        value[r][k] = median(pools[r][k]);
      } else {
        out.fallback[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] = true;
        if (!pop_pools[k].empty())
          value[r][k] = median(pop_pools[k]);
        else if (!all_pool.empty())
          value[r][k] = median(all_pool);
        else
          value[r][k] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  for (int i = 0; i < panel.n_countries(); ++i) {
    const int r = static_cast<int>(panel.region_of[i]);
    const Eigen::Index base = static_cast<Eigen::Index>(i) * block_size(panel.years);
    for (int k = 0; k < kNumPopulations; ++k)
      out.pred.segment(base + k * ny, ny).setConstant(value[r][k]);
  }
  return out;
}

EvalResult run_cv_with(const PanelData& panel, const Predictor& predictor,
                       const FoldAssignment& folds, const std::string& tag) {
  EvalResult result;
  result.tag = tag;
  double se_sum = 0.0;
  double cover_sum = 0.0;
  int n_total = 0;
  bool has_intervals = true;

  for (int f = 0; f < folds.k; ++f) {
    const auto heldout = folds.heldout(f);
    FoldResult fr;
    fr.fold = f;
    fr.n_cells = static_cast<int>(heldout.size());
    if (heldout.empty()) {
      result.folds.push_back(fr);
      continue;
    }
    const PanelData train = panel.masked(heldout);
    std::vector<CellPrediction> preds;
    try {
      preds = predictor(train, heldout,
                        Rng::splitmix64(folds.seed ^ (kCvStream + static_cast<std::uint64_t>(f))));
    } catch (const Error& e) {
      fr.failed = true;
      fr.error = e.what();
      result.failed = true;
      result.folds.push_back(fr);
      break; // abort with a partial report
    }
    double fold_se = 0.0, fold_cover = 0.0;
    for (std::size_t c = 0; c < heldout.size(); ++c) {
      const double truth = panel.y[heldout[c]];
      const double err = preds[c].mean - truth;
      fold_se += err * err;
      if (std::isnan(preds[c].q025) || std::isnan(preds[c].q975))
        has_intervals = false;
      else
        fold_cover += (truth >= preds[c].q025 && truth <= preds[c].q975) ? 1.0 : 0.0;
    }
    fr.mse = fold_se / fr.n_cells;
    fr.coverage = has_intervals ? fold_cover / fr.n_cells
                                : std::numeric_limits<double>::quiet_NaN();
    se_sum += fold_se;
    cover_sum += fold_cover;
    n_total += fr.n_cells;
    result.folds.push_back(fr);
  }

  result.cv_mse = n_total > 0 ? se_sum / n_total : std::numeric_limits<double>::quiet_NaN();
  result.coverage95 = (n_total > 0 && has_intervals)
                          ? cover_sum / n_total
                          : std::numeric_limits<double>::quiet_NaN();
  return result;
}

Predictor make_gmrf_predictor(const PriorSpec& prior, const SamplerConfig& sampler,
                              int predict_thin) {
  return [prior, sampler, predict_thin](const PanelData& train,
                                        const std::vector<Eigen::Index>& heldout,
                                        std::uint64_t seed) {
    SamplerConfig config = sampler;
    config.seed = seed;
    const PosteriorDraws draws = sample_posterior(train, prior, config);
    PredictOptions popts;
    popts.thin = predict_thin;
    popts.threads = sampler.threads;
    const CellPosterior cells = predict_missing(draws, train, seed, popts);
    std::vector<CellPrediction> preds;
    preds.reserve(heldout.size());
    for (Eigen::Index cell : heldout) {
      const auto col = cells.column_of(cell);
      if (!col) throw MissingArtifact("held-out cell missing from the predictive draws");
      const CellSummary s = summarize_cell(cells, *col);
      preds.push_back({s.mean, s.q025, s.q975});
    }
    return preds;
  };
}

Predictor make_baseline_predictor(int window_years) {
  return [window_years](const PanelData& train, const std::vector<Eigen::Index>& heldout,
                        std::uint64_t) {
    const BaselinePrediction baseline = baseline_regional_median(train, window_years);
    std::vector<CellPrediction> preds;
    preds.reserve(heldout.size());
    for (Eigen::Index cell : heldout) preds.push_back(CellPrediction{baseline.pred[cell]});
    return preds;
  };
}

EvalResult run_cv(const PanelData& panel, const ModelConfig& model, const PriorSpec& prior,
                  const FoldAssignment& folds, const SamplerConfig& sampler,
                  int predict_thin) {
  SamplerConfig config = sampler;
  config.model = model;
  return run_cv_with(panel, make_gmrf_predictor(prior, config, predict_thin), folds, model.tag);
}

ModelConfig ablation_model(Ablation which) {
  switch (which) {
    case Ablation::no_cross_pop: return ModelConfig::no_cross_pop();
    case Ablation::no_country: return ModelConfig::no_country();
    case Ablation::no_time: return ModelConfig::no_time();
  }
  throw ConfigError("unknown ablation");
}

EvalResult run_ablation(const PanelData& panel, Ablation which, const FoldAssignment& folds,
                        const PriorSpec& prior, const SamplerConfig& sampler,
                        int predict_thin) {
  return run_cv(panel, ablation_model(which), prior, folds, sampler, predict_thin);
}

std::vector<SensitivityRow> prior_sensitivity(const PanelData& panel,
                                              const std::vector<PriorSpec>& priors,
                                              const FoldAssignment& folds,
                                              const SamplerConfig& sampler,
                                              int predict_thin) {
  if (priors.empty()) throw ConfigError("prior sensitivity needs at least one prior");
  std::vector<SensitivityRow> rows;
  for (const PriorSpec& prior : priors) {
    SensitivityRow row;
    row.prior = prior;
    const EvalResult cv = run_cv(panel, ModelConfig::full(), prior, folds, sampler, predict_thin);
    row.cv_mse = cv.cv_mse;
    row.coverage95 = cv.coverage95;
    const PosteriorDraws draws = sample_posterior(panel, prior, sampler);
    for (int pair = 0; pair < 3; ++pair)
      row.rho_mean[pair] = draws.draws.col(StructuralParams::rho_index(pair)).mean();
    rows.push_back(row);
  }
  return rows;
}

void write_eval_report(const std::vector<EvalResult>& results,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write evaluation report " + path.string());
  out << "model,fold,n_cells,mse,coverage95,failed\n";
  for (const auto& r : results) {
    int n_total = 0;
    for (const auto& f : r.folds) {
      out << r.tag << ',' << f.fold << ',' << f.n_cells << ',' << format_full(f.mse) << ','
          << format_full(f.coverage) << ',' << (f.failed ? 1 : 0) << '\n';
      n_total += f.n_cells;
    }
    out << r.tag << ",pooled," << n_total << ',' << format_full(r.cv_mse) << ','
        << format_full(r.coverage95) << ',' << (r.failed ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

} // namespace crosspop
