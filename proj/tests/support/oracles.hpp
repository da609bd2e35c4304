#ifndef CROSSPOP_TEST_ORACLES_HPP
#define CROSSPOP_TEST_ORACLES_HPP

// Independent reference implementations used only by tests. Everything here
// is assembled with plain loops and explicit inverses, deliberately avoiding
// the code paths under test.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "crosspop/gmrf.hpp"
#include "crosspop/panel.hpp"
#include "crosspop/rng.hpp"

namespace crosspop::test {

// Global 33N x 33N precision: per-country temporal tridiagonals on the
// population-block diagonal, rho couplings on same-year off-blocks.
inline Eigen::MatrixXd dense_global_precision(const StructuralParams& p, int n_countries,
                                              int n_years) {
  const int bs = 3 * n_years;
  const int total = n_countries * bs;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(total, total);
  const double rho_of[3][3] = {{0.0, p.rho[0], p.rho[1]},
                               {p.rho[0], 0.0, p.rho[2]},
                               {p.rho[1], p.rho[2], 0.0}};
  for (int i = 0; i < n_countries; ++i) {
    const int base = i * bs;
    for (int k = 0; k < 3; ++k) {
      for (int t = 0; t < n_years; ++t) {
        q(base + k * n_years + t, base + k * n_years + t) = p.s[k];
        if (t + 1 < n_years) {
          q(base + k * n_years + t, base + k * n_years + t + 1) = p.gamma[k];
          q(base + k * n_years + t + 1, base + k * n_years + t) = p.gamma[k];
        }
      }
      for (int k2 = 0; k2 < 3; ++k2) {
        if (k2 == k) continue;
        for (int t = 0; t < n_years; ++t)
          q(base + k * n_years + t, base + k2 * n_years + t) = rho_of[k][k2];
      }
    }
  }
  return q;
}

inline Eigen::MatrixXd dense_global_random_effects(const StructuralParams& p, int n_countries,
                                                   int n_years) {
  const int bs = 3 * n_years;
  const int total = n_countries * bs;
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(total, total);
  for (int i = 0; i < n_countries; ++i)
    for (int k = 0; k < 3; ++k)
      for (int t1 = 0; t1 < n_years; ++t1)
        for (int t2 = 0; t2 < n_years; ++t2)
          omega(i * bs + k * n_years + t1, i * bs + k * n_years + t2) = p.tau[k];
  return omega;
}

inline Eigen::MatrixXd dense_global_sigma(const StructuralParams& p, int n_countries,
                                          int n_years) {
  const Eigen::MatrixXd q = dense_global_precision(p, n_countries, n_years);
  return q.inverse() + dense_global_random_effects(p, n_countries, n_years);
}

// Multivariate normal log density through explicit inverse and determinant.
inline double dense_mvn_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& sigma) {
  const auto n = y.size();
  const Eigen::VectorXd r = y - mean;
  const double quad = r.dot(sigma.inverse() * r);
  const double log_det = std::log(sigma.determinant());
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + log_det + quad);
}

// Log likelihood of the observed cells from the dense global matrices.
inline double dense_observed_loglik(const StructuralParams& p, const PanelData& panel) {
  const Eigen::MatrixXd sigma =
      dense_global_sigma(p, panel.n_countries(), panel.years.count());
  const Eigen::VectorXd mu = mean_vector(p, panel);
  std::vector<Eigen::Index> obs = panel.observed_cells();
  if (obs.empty()) return 0.0;
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::VectorXd y(n), m(n);
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    y[a] = panel.y[obs[static_cast<std::size_t>(a)]];
    m[a] = mu[obs[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < n; ++b)
      s(a, b) = sigma(obs[static_cast<std::size_t>(a)], obs[static_cast<std::size_t>(b)]);
  }
  return dense_mvn_logpdf(y, m, s);
}

// Textbook conditional Gaussian with explicit inverses.
struct DenseConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline DenseConditional dense_conditional(const Eigen::VectorXd& mean,
                                          const Eigen::MatrixXd& cov,
                                          const std::vector<int>& obs_idx,
                                          const Eigen::VectorXd& y_obs) {
  const auto dim = mean.size();
  std::vector<char> is_obs(static_cast<std::size_t>(dim), 0);
  for (int i : obs_idx) is_obs[static_cast<std::size_t>(i)] = 1;
  std::vector<int> obs(obs_idx);
  std::sort(obs.begin(), obs.end());
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
  const Eigen::MatrixXd s_oo_inv = s_oo.inverse();
  DenseConditional out;
  out.mean = mu_m + s_mo * s_oo_inv * (y_obs - mu_o);
  out.cov = s_mm - s_mo * s_oo_inv * s_mo.transpose();
  return out;
}

// Random SPD matrix A A^T + dim * I scaled to O(1) entries.
inline Eigen::MatrixXd random_spd(Rng& rng, int dim) {
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = rng.normal();
  Eigen::MatrixXd spd = a * a.transpose() / dim;
  spd.diagonal().array() += 0.5;
  return spd;
}

// Random parameter vector with a PD precision block, rejection sampled.
inline StructuralParams random_valid_params(Rng& rng, int n_years) {
  for (;;) {
    StructuralParams p;
    for (int r = 0; r < kNumRegions; ++r)
      for (int k = 0; k < 3; ++k) p.mu(r, k) = rng.uniform(-4.0, -1.0);
    for (int k = 0; k < 3; ++k) {
      p.tau[k] = rng.uniform(0.05, 0.8);
      p.s[k] = rng.uniform(0.5, 3.0);
      p.gamma[k] = rng.uniform(-0.45, 0.45) * p.s[k];
    }
    for (int k = 0; k < 3; ++k) p.rho[k] = rng.uniform(-0.05, 0.05);
    if (try_country_precision(p, n_years)) return p;
  }
}

} // namespace crosspop::test

#endif
