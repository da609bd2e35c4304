#include "crosspop/impute.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "crosspop/rng.hpp"
#include "crosspop/stats.hpp"

namespace crosspop {

namespace {

constexpr std::uint64_t kPredictStream = 0x70726564ULL; // "pred"
constexpr std::uint64_t kGibbsStream = 0x67696273ULL;   // "gibs"

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<Eigen::Index> kept_draw_indices(const PosteriorDraws& draws, int thin) {
  if (thin < 1) thin = 1;
  std::vector<Eigen::Index> kept;
  for (Eigen::Index d = 0; d < draws.n_draws(); d += thin) kept.push_back(d);
  return kept;
}

// Lower Cholesky factor draw: mean + L * z.
Eigen::VectorXd sample_mvn(Rng& rng, const Eigen::VectorXd& mean,
                           const Eigen::LLT<Eigen::MatrixXd>& llt) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + llt.matrixL() * z;
}

void parallel_over(int n_units, int threads, const std::function<void(int)>& work) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  const int t = std::clamp(threads > 0 ? threads : hw, 1, std::max(1, n_units));
  if (t == 1) {
    for (int u = 0; u < n_units; ++u) work(u);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(t));
  auto runner = [&](int slot) {
    try {
      for (;;) {
        const int u = next.fetch_add(1);
        if (u >= n_units) return;
        work(u);
      }
    } catch (...) {
      failures[static_cast<std::size_t>(slot)] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < t; ++i) pool.emplace_back(runner, i);
  for (auto& th : pool) th.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
}

} // namespace

ConditionalGaussian conditional_gaussian(const Eigen::VectorXd& mean,
                                         const Eigen::MatrixXd& cov,
                                         const std::vector<int>& obs_idx,
                                         const Eigen::VectorXd& y_obs) {
  const auto dim = mean.size();
  if (obs_idx.empty() || static_cast<Eigen::Index>(obs_idx.size()) >= dim)
    throw IndexOutOfRange("observed set must be a nonempty proper subset of the coordinates");
  if (static_cast<Eigen::Index>(obs_idx.size()) != y_obs.size())
    throw IndexOutOfRange("y_obs length does not match the observed index set");

  std::vector<int> obs = obs_idx;
  std::sort(obs.begin(), obs.end());
  std::vector<char> is_obs(static_cast<std::size_t>(dim), 0);
  for (int i : obs) {
    if (i < 0 || i >= dim) throw IndexOutOfRange("observed index out of range");
    is_obs[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<int> miss;
  for (int i = 0; i < dim; ++i)
    if (!is_obs[static_cast<std::size_t>(i)]) miss.push_back(i);

  const auto no = static_cast<Eigen::Index>(obs.size());
  const auto nm = static_cast<Eigen::Index>(miss.size());
  Eigen::MatrixXd s_oo(no, no), s_mo(nm, no), s_mm(nm, nm);
  Eigen::VectorXd mu_o(no), mu_m(nm);
  for (Eigen::Index a = 0; a < no; ++a) {
    mu_o[a] = mean[obs[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < no; ++b)
      s_oo(a, b) = cov(obs[static_cast<std::size_t>(a)], obs[static_cast<std::size_t>(b)]);
  }
  for (Eigen::Index a = 0; a < nm; ++a) {
    mu_m[a] = mean[miss[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < no; ++b)
      s_mo(a, b) = cov(miss[static_cast<std::size_t>(a)], obs[static_cast<std::size_t>(b)]);
    for (Eigen::Index b = 0; b < nm; ++b)
      s_mm(a, b) = cov(miss[static_cast<std::size_t>(a)], miss[static_cast<std::size_t>(b)]);
  }

  const Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
  if (llt.info() != Eigen::Success)
    throw SingularObservedBlock("observed-block covariance is not positive definite");

  ConditionalGaussian out;
  out.mean = mu_m + s_mo * llt.solve(y_obs - mu_o);
  out.cov = s_mm - s_mo * llt.solve(s_mo.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

std::optional<int> CellPosterior::column_of(Eigen::Index cell) const {
  const auto it = std::lower_bound(cells.begin(), cells.end(), cell);
  if (it == cells.end() || *it != cell) return std::nullopt;
  return static_cast<int>(it - cells.begin());
}

CellSummary summarize_cell(const CellPosterior& cells, int column) {
  const Eigen::VectorXd col = cells.draws.col(column);
  CellSummary s;
  s.mean = col.mean();
  s.median = quantile(col, 0.5);
  s.q025 = quantile(col, 0.025);
  s.q975 = quantile(col, 0.975);
  return s;
}

CellPosterior predict_missing(const PosteriorDraws& draws, const PanelData& panel,
                              std::uint64_t seed, const PredictOptions& options) {
  if (draws.n_draws() == 0) throw InsufficientDraws("no parameter draws to predict from");
  const int ny = panel.years.count();
  const int bs = block_size(panel.years);

  CellPosterior out;
  for (Eigen::Index i = 0; i < panel.size(); ++i)
    if (!panel.observed(i)) out.cells.push_back(i);
  const auto kept = kept_draw_indices(draws, options.thin);
  out.draws.resize(static_cast<Eigen::Index>(kept.size()),
                   static_cast<Eigen::Index>(out.cells.size()));
  if (out.cells.empty()) return out;

  // Column lookup per global cell index.
  std::vector<int> col_of(static_cast<std::size_t>(panel.size()), -1);
  for (std::size_t c = 0; c < out.cells.size(); ++c)
    col_of[static_cast<std::size_t>(out.cells[c])] = static_cast<int>(c);

  parallel_over(static_cast<int>(kept.size()), options.threads, [&](int r) {
    const Eigen::Index d = kept[static_cast<std::size_t>(r)];
    const StructuralParams params = draws.params_at(d);
    const auto cov = try_country_covariance(params, ny);
    if (!cov) throw NotPositiveDefinite("stored draw does not assemble; draws file corrupt?");
    const Eigen::VectorXd mu = mean_vector(params, panel);

    for (int i = 0; i < panel.n_countries(); ++i) {
      const auto obs = panel.observed_offsets(i);
      if (static_cast<int>(obs.size()) == bs) continue; // fully observed
      const Eigen::Index base = static_cast<Eigen::Index>(i) * bs;
      Rng rng(seed, {kPredictStream, static_cast<std::uint64_t>(d),
                     static_cast<std::uint64_t>(i)});

      Eigen::VectorXd sample;
      std::vector<int> miss;
      if (obs.empty()) {
        sample = sample_mvn(rng, mu.segment(base, bs), cov->chol);
        for (int j = 0; j < bs; ++j) miss.push_back(j);
      } else {
        Eigen::VectorXd y_obs(static_cast<Eigen::Index>(obs.size()));
        for (std::size_t a = 0; a < obs.size(); ++a)
          y_obs[static_cast<Eigen::Index>(a)] = panel.y[base + obs[a]];
        const auto cond = conditional_gaussian(mu.segment(base, bs), cov->sigma, obs, y_obs);
        Eigen::LLT<Eigen::MatrixXd> llt(cond.cov);
        if (llt.info() != Eigen::Success) {
          // Conditional covariance can brush the PSD boundary; nudge it.
          Eigen::MatrixXd jittered = cond.cov;
          jittered.diagonal().array() += 1e-12;
          llt.compute(jittered);
          if (llt.info() != Eigen::Success)
            throw SingularObservedBlock("conditional covariance is numerically singular");
        }
        sample = sample_mvn(rng, cond.mean, llt);
        std::vector<char> is_obs(static_cast<std::size_t>(bs), 0);
        for (int o : obs) is_obs[static_cast<std::size_t>(o)] = 1;
        for (int j = 0; j < bs; ++j)
          if (!is_obs[static_cast<std::size_t>(j)]) miss.push_back(j);
      }
      for (std::size_t a = 0; a < miss.size(); ++a) {
        const int col = col_of[static_cast<std::size_t>(base + miss[a])];
        out.draws(r, col) = sample[static_cast<Eigen::Index>(a)];
      }
    }
  });
  return out;
}

CellPosterior gibbs_reconstruct(const PosteriorDraws& draws, const PanelData& panel,
                                std::uint64_t seed, const GibbsOptions& options) {
  if (draws.n_draws() == 0) throw InsufficientDraws("no parameter draws to reconstruct from");
  const int ny = panel.years.count();
  const int bs = block_size(panel.years);

  CellPosterior out;
  out.cells = panel.observed_cells();
  const auto kept = kept_draw_indices(draws, options.thin);
  out.draws.resize(static_cast<Eigen::Index>(kept.size()),
                   static_cast<Eigen::Index>(out.cells.size()));
  if (out.cells.empty()) return out;

  std::vector<int> col_of(static_cast<std::size_t>(panel.size()), -1);
  for (std::size_t c = 0; c < out.cells.size(); ++c)
    col_of[static_cast<std::size_t>(out.cells[c])] = static_cast<int>(c);

  parallel_over(static_cast<int>(kept.size()), options.threads, [&](int r) {
    const Eigen::Index d = kept[static_cast<std::size_t>(r)];
    const StructuralParams params = draws.params_at(d);
    const auto q = try_country_precision(params, ny);
    if (!q) throw NotPositiveDefinite("stored draw does not assemble; draws file corrupt?");
    const Eigen::VectorXd mu = mean_vector(params, panel);

    for (int i = 0; i < panel.n_countries(); ++i) {
      const auto obs = panel.observed_offsets(i);
      if (obs.empty()) continue;
      const Eigen::Index base = static_cast<Eigen::Index>(i) * bs;
      Rng rng(seed, {kGibbsStream, static_cast<std::uint64_t>(d),
                     static_cast<std::uint64_t>(i)});

      Eigen::Vector3d b = Eigen::Vector3d::Zero();
      Eigen::VectorXd eps = Eigen::VectorXd::Zero(bs);
      std::array<std::vector<int>, kNumPopulations> obs_by_pop;
      for (int o : obs) obs_by_pop[static_cast<std::size_t>(o / ny)].push_back(o);

      const auto update_b = [&] {
        for (int k = 0; k < kNumPopulations; ++k) {
          const auto& years_k = obs_by_pop[static_cast<std::size_t>(k)];
          const double tau = params.tau[k];
          if (tau <= 1e-300) {
            b[k] = 0.0;
            continue;
          }
          double resid_sum = 0.0;
          for (int o : years_k) resid_sum += panel.y[base + o] - mu[base + o] - eps[o];
          const double prec = 1.0 / tau + static_cast<double>(years_k.size());
          b[k] = rng.normal(resid_sum / prec, std::sqrt(1.0 / prec));
        }
      };
      for (int sweep = 0; sweep < options.sweeps; ++sweep) {
        update_b();
        for (int j = 0; j < bs; ++j) {
          const double qjj = (*q)(j, j);
          const double cross = q->row(j).dot(eps) - qjj * eps[j];
          eps[j] = rng.normal(-cross / qjj, std::sqrt(1.0 / qjj));
        }
      }
      // Refresh b against the final eps so the reconstructed pair is
      // internally consistent.
      update_b();
      for (int o : obs) {
        const int col = col_of[static_cast<std::size_t>(base + o)];
        out.draws(r, col) = mu[base + o] + b[o / ny] + eps[o];
      }
    }
  });
  return out;
}

CellPosterior merge_cell_posteriors(const CellPosterior& a, const CellPosterior& b) {
  if (a.n_draws() != b.n_draws())
    throw MismatchedDrawCounts("cell posteriors hold " + std::to_string(a.n_draws()) +
                               " vs " + std::to_string(b.n_draws()) + " draws");
  CellPosterior out;
  out.cells.reserve(a.cells.size() + b.cells.size());
  out.cells = a.cells;
  out.cells.insert(out.cells.end(), b.cells.begin(), b.cells.end());
  std::sort(out.cells.begin(), out.cells.end());
  if (std::adjacent_find(out.cells.begin(), out.cells.end()) != out.cells.end())
    throw MismatchedDrawCounts("cell posteriors overlap");
  out.draws.resize(a.n_draws(), static_cast<Eigen::Index>(out.cells.size()));
  for (std::size_t c = 0; c < a.cells.size(); ++c)
    out.draws.col(*out.column_of(a.cells[c])) = a.draws.col(static_cast<Eigen::Index>(c));
  for (std::size_t c = 0; c < b.cells.size(); ++c)
    out.draws.col(*out.column_of(b.cells[c])) = b.draws.col(static_cast<Eigen::Index>(c));
  return out;
}

const char* to_string(ChangeClass c) {
  switch (c) {
    case ChangeClass::increase: return "increase";
    case ChangeClass::decrease: return "decrease";
    case ChangeClass::no_change: return "no_change";
  }
  return "?";
}

ChangeSummary change_contrast(const CellPosterior& cells, const PanelData& panel,
                              const ContrastOptions& options) {
  ChangeSummary summary;
  summary.options = options;
  const auto n = cells.n_draws();
  if (n == 0) throw InsufficientDraws("no draws to contrast");

  for (int i = 0; i < panel.n_countries(); ++i) {
    for (Population pop : kPopulations) {
      const auto col_a = cells.column_of(panel.flat({i, pop, options.year_a}));
      const auto col_b = cells.column_of(panel.flat({i, pop, options.year_b}));
      if (!col_a || !col_b)
        throw MismatchedDrawCounts("missing joint draws for " + panel.country_codes[i] + "/" +
                                   to_string(pop) + " at the contrast years");
      Eigen::VectorXd ratio =
          (cells.draws.col(*col_b) - cells.draws.col(*col_a)).array().exp();
      ChangeRow row;
      row.country = i;
      row.pop = pop;
      row.ratio_median = quantile(ratio, 0.5);
      row.pr_up = (ratio.array() > options.ratio_up).cast<double>().mean();
      row.pr_down = (ratio.array() < options.ratio_down).cast<double>().mean();
      if (row.pr_up > options.prob)
        row.cls = ChangeClass::increase;
      else if (row.pr_down > options.prob)
        row.cls = ChangeClass::decrease;
      else
        row.cls = ChangeClass::no_change;
      summary.rows.push_back(row);
    }
  }
  return summary;
}

void export_estimates(const CellPosterior& cells, const PanelData& panel,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write estimates file " + path.string());
  out << "country,population,year,log_mean,log_median,log_q2.5,log_q97.5,"
         "nat_mean,nat_median,nat_q2.5,nat_q97.5\n";
  for (std::size_t c = 0; c < cells.cells.size(); ++c) {
    const Cell cell = panel.cell_at(cells.cells[c]);
    const CellSummary log_s = summarize_cell(cells, static_cast<int>(c));
    const Eigen::VectorXd nat_draws = cells.draws.col(static_cast<Eigen::Index>(c)).array().exp();
    const double nat_mean = nat_draws.mean();
    const double nat_median = quantile(nat_draws, 0.5);
    const double nat_q025 = quantile(nat_draws, 0.025);
    const double nat_q975 = quantile(nat_draws, 0.975);
    out << panel.country_codes[cell.country] << ',' << to_string(cell.pop) << ',' << cell.year
        << ',' << format_full(log_s.mean) << ',' << format_full(log_s.median) << ','
        << format_full(log_s.q025) << ',' << format_full(log_s.q975) << ','
        << format_full(nat_mean) << ',' << format_full(nat_median) << ','
        << format_full(nat_q025) << ',' << format_full(nat_q975) << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

void export_changes(const ChangeSummary& changes, const PanelData& panel,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write changes file " + path.string());
  out << "country,population,ratio_median,pr_gt_" << changes.options.ratio_up << ",pr_lt_"
      << changes.options.ratio_down << ",class\n";
  for (const auto& row : changes.rows) {
    out << panel.country_codes[row.country] << ',' << to_string(row.pop) << ','
        << format_full(row.ratio_median) << ',' << format_full(row.pr_up) << ','
        << format_full(row.pr_down) << ',' << to_string(row.cls) << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<EstimateRow> read_estimates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open estimates file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw MalformedRow("estimates file is empty");
  std::vector<EstimateRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 11)
      throw MalformedRow("line " + std::to_string(line_no) + ": expected 11 fields");
    EstimateRow r;
    r.country = f[0];
    r.population = f[1];
    r.year = std::stoi(f[2]);
    r.log_mean = std::stod(f[3]);
    r.log_median = std::stod(f[4]);
    r.log_q025 = std::stod(f[5]);
    r.log_q975 = std::stod(f[6]);
    r.nat_mean = std::stod(f[7]);
    r.nat_median = std::stod(f[8]);
    r.nat_q025 = std::stod(f[9]);
    r.nat_q975 = std::stod(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

} // namespace crosspop
