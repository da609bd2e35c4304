#include "crosspop/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "crosspop/stats.hpp"

namespace crosspop {

namespace {

// Mean autocovariance at the given lag across the split sequences, each
// centered on its own mean (biased 1/n normalization).
double mean_autocovariance(const std::vector<Eigen::VectorXd>& seqs, int lag) {
  double total = 0.0;
  for (const auto& seq : seqs) {
    const auto n = seq.size();
    const double m = seq.mean();
    double acc = 0.0;
    for (Eigen::Index j = 0; j + lag < n; ++j) acc += (seq[j] - m) * (seq[j + lag] - m);
    total += acc / static_cast<double>(n);
  }
  return total / static_cast<double>(seqs.size());
}

} // namespace

ParamDiagnostic sequence_diagnostic(const Eigen::MatrixXd& chains_by_draws) {
  const int n_chains = static_cast<int>(chains_by_draws.rows());
  const auto draws = chains_by_draws.cols();
  if (n_chains < 2 || draws < 4)
    throw InsufficientDraws("diagnostics need at least 2 chains and 4 draws per chain");

  // Split every chain in half to detect within-chain drift.
  const Eigen::Index half = draws / 2;
  std::vector<Eigen::VectorXd> seqs;
  seqs.reserve(static_cast<std::size_t>(2 * n_chains));
  for (int c = 0; c < n_chains; ++c) {
    seqs.push_back(chains_by_draws.row(c).segment(0, half).transpose());
    seqs.push_back(chains_by_draws.row(c).segment(half, half).transpose());
  }
  const auto m = static_cast<double>(seqs.size());
  const auto n = static_cast<double>(half);

  double w = 0.0;   // mean within-sequence variance
  double mean_of_means = 0.0;
  std::vector<double> means(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    means[i] = seqs[i].mean();
    mean_of_means += means[i];
    w += sample_variance(seqs[i]);
  }
  w /= m;
  mean_of_means /= m;
  double b_over_n = 0.0; // variance of the sequence means
  for (double mi : means) b_over_n += (mi - mean_of_means) * (mi - mean_of_means);
  b_over_n /= (m - 1.0);

  ParamDiagnostic d;
  const double total_draws = static_cast<double>(n_chains) * static_cast<double>(draws);
  if (w <= 0.0) {
    // Constant sequences: R-hat is undefined; report 1 and flag it.
    d.rhat = 1.0;
    d.ess = total_draws;
    d.zero_variance = true;
    return d;
  }

  const double var_plus = (n - 1.0) / n * w + b_over_n;
  d.rhat = std::sqrt(var_plus / w);

  // Effective sample size: sum the combined-chain autocorrelations,
  // truncating at the first lag pair with a non-positive sum.
  double rho_sum = 0.0;
  const int max_lag = static_cast<int>(half) - 1;
  for (int lag = 1; lag + 1 <= max_lag; lag += 2) {
    const double rho_a = 1.0 - (w - mean_autocovariance(seqs, lag)) / var_plus;
    const double rho_b = 1.0 - (w - mean_autocovariance(seqs, lag + 1)) / var_plus;
    if (rho_a + rho_b <= 0.0) break;
    rho_sum += rho_a + rho_b;
  }
  const double tau = 1.0 + 2.0 * rho_sum;
  d.ess = std::min(m * n / std::max(tau, 1e-12), total_draws);
  return d;
}

DiagnosticsReport diagnostics(const PosteriorDraws& draws) {
  if (draws.chains < 2)
    throw InsufficientDraws("diagnostics need at least 2 chains");
  if (draws.draws_per_chain < 4)
    throw InsufficientDraws("diagnostics need at least 4 draws per chain");

  DiagnosticsReport report;
  const auto& names = StructuralParams::names();
  std::vector<double> ess_pool;
  for (int j = 0; j < kNumParams; ++j) {
    Eigen::MatrixXd seq(draws.chains, draws.draws_per_chain);
    for (int c = 0; c < draws.chains; ++c)
      seq.row(c) = draws.draws.col(j)
                       .segment(static_cast<Eigen::Index>(c) * draws.draws_per_chain,
                                draws.draws_per_chain)
                       .transpose();
    ParamDiagnostic d = sequence_diagnostic(seq);
    d.name = names[static_cast<std::size_t>(j)];
    report.max_rhat = std::max(report.max_rhat, d.rhat);
    if (!d.zero_variance) ess_pool.push_back(d.ess);
    report.params.push_back(std::move(d));
  }
  if (ess_pool.empty())
    for (const auto& p : report.params) ess_pool.push_back(p.ess);
  report.ess_median = median(ess_pool);
  report.ess_min = *std::min_element(ess_pool.begin(), ess_pool.end());
  report.ess_max = *std::max_element(ess_pool.begin(), ess_pool.end());
  return report;
}

void write_diagnostics(const DiagnosticsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write diagnostics file " + path.string());
  out << "parameter,rhat,ess,zero_variance\n";
  char buf[96];
  for (const auto& p : report.params) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", p.rhat, p.ess);
    out << p.name << ',' << buf << ',' << (p.zero_variance ? 1 : 0) << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g", report.max_rhat, report.ess_median);
  out << "_summary_max_rhat_median_ess," << buf << ",\n";
  if (!out) throw IoError("short write to " + path.string());
}

} // namespace crosspop
