#include "crosspop/gmrf.hpp"

#include <cmath>

namespace crosspop {

StructuralParams::Vector StructuralParams::pack() const {
  Vector v;
  int j = 0;
  for (int r = 0; r < kNumRegions; ++r)
    for (int k = 0; k < kNumPopulations; ++k) v[j++] = mu(r, k);
  for (int k = 0; k < 3; ++k) v[j++] = tau[k];
  for (int k = 0; k < 3; ++k) v[j++] = s[k];
  for (int k = 0; k < 3; ++k) v[j++] = gamma[k];
  for (int k = 0; k < 3; ++k) v[j++] = rho[k];
  return v;
}

StructuralParams StructuralParams::unpack(const Vector& v) {
  StructuralParams p;
  int j = 0;
  for (int r = 0; r < kNumRegions; ++r)
    for (int k = 0; k < kNumPopulations; ++k) p.mu(r, k) = v[j++];
  for (int k = 0; k < 3; ++k) p.tau[k] = v[j++];
  for (int k = 0; k < 3; ++k) p.s[k] = v[j++];
  for (int k = 0; k < 3; ++k) p.gamma[k] = v[j++];
  for (int k = 0; k < 3; ++k) p.rho[k] = v[j++];
  return p;
}

const std::vector<std::string>& StructuralParams::names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (int r = 0; r < kNumRegions; ++r)
      for (int k = 0; k < kNumPopulations; ++k)
        n.push_back(std::string("mu_") + region_code(static_cast<Region>(r)) + "_" +
                    to_string(static_cast<Population>(k)));
    for (int k = 0; k < 3; ++k)
      n.push_back(std::string("tau_") + to_string(static_cast<Population>(k)));
    for (int k = 0; k < 3; ++k)
      n.push_back(std::string("s_") + to_string(static_cast<Population>(k)));
    for (int k = 0; k < 3; ++k)
      n.push_back(std::string("gamma_") + to_string(static_cast<Population>(k)));
    n.push_back("rho_MSM_FSW");
    n.push_back("rho_MSM_PWID");
    n.push_back("rho_FSW_PWID");
    return n;
  }();
  return names;
}

int StructuralParams::mu_index(Region r, Population k) {
  return static_cast<int>(r) * kNumPopulations + static_cast<int>(k);
}
int StructuralParams::tau_index(Population k) { return 21 + static_cast<int>(k); }
int StructuralParams::s_index(Population k) { return 24 + static_cast<int>(k); }
int StructuralParams::gamma_index(Population k) { return 27 + static_cast<int>(k); }
int StructuralParams::rho_index(int pair) { return 30 + pair; }

int rho_pair_index(Population a, Population b) {
  const int i = static_cast<int>(a), j = static_cast<int>(b);
  if (i == j) return -1;
  const int lo = std::min(i, j), hi = std::max(i, j);
  if (lo == 0) return hi == 1 ? 0 : 1; // (MSM,FSW), (MSM,PWID)
  return 2;                            // (FSW,PWID)
}

std::optional<Eigen::MatrixXd> try_country_precision(const StructuralParams& params,
                                                     int n_years) {
  const int bs = kNumPopulations * n_years;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(bs, bs);
  for (int k = 0; k < kNumPopulations; ++k) {
    if (!(params.s[k] > 0.0)) return std::nullopt;
    q.block(k * n_years, k * n_years, n_years, n_years) =
        temporal_precision_block(params.s[k], params.gamma[k], n_years);
    for (int k2 = k + 1; k2 < kNumPopulations; ++k2) {
      const double rho =
          params.rho[rho_pair_index(static_cast<Population>(k), static_cast<Population>(k2))];
      if (rho != 0.0) {
        q.block(k * n_years, k2 * n_years, n_years, n_years).diagonal().setConstant(rho);
        q.block(k2 * n_years, k * n_years, n_years, n_years).diagonal().setConstant(rho);
      }
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return q;
}

Eigen::MatrixXd country_precision(const StructuralParams& params, int n_years) {
  for (int k = 0; k < kNumPopulations; ++k)
    if (!(params.s[k] > 0.0))
      throw NonPositiveDiagonal("temporal precision diagonal s must be positive");
  auto q = try_country_precision(params, n_years);
  if (!q) throw NotPositiveDefinite("assembled country precision block is not positive definite");
  return *q;
}

Eigen::MatrixXd random_effect_covariance(const StructuralParams& params, int n_years) {
  const int bs = kNumPopulations * n_years;
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(bs, bs);
  for (int k = 0; k < kNumPopulations; ++k)
    omega.block(k * n_years, k * n_years, n_years, n_years).setConstant(params.tau[k]);
  return omega;
}

std::optional<CountryCovariance> try_country_covariance(const StructuralParams& params,
                                                        int n_years, int country) {
  const auto q = try_country_precision(params, n_years);
  if (!q) return std::nullopt;
  const Eigen::LLT<Eigen::MatrixXd> qllt(*q);
  const int bs = kNumPopulations * n_years;
  CountryCovariance cov;
  cov.country = country;
  cov.sigma = qllt.solve(Eigen::MatrixXd::Identity(bs, bs)) +
              random_effect_covariance(params, n_years);
  cov.sigma = 0.5 * (cov.sigma + cov.sigma.transpose()).eval();
  cov.chol.compute(cov.sigma);
  if (cov.chol.info() != Eigen::Success) return std::nullopt;
  return cov;
}

CountryCovariance country_covariance(const StructuralParams& params, int n_years, int country) {
  auto cov = try_country_covariance(params, n_years, country);
  if (!cov) throw NotPositiveDefinite("country covariance is not positive definite");
  return *cov;
}

Eigen::VectorXd mean_vector(const StructuralParams& params, const PanelData& panel) {
  const int ny = panel.years.count();
  Eigen::VectorXd mean(panel.size());
  for (int i = 0; i < panel.n_countries(); ++i) {
    const int r = static_cast<int>(panel.region_of[i]);
    const Eigen::Index base = static_cast<Eigen::Index>(i) * block_size(panel.years);
    for (int k = 0; k < kNumPopulations; ++k)
      mean.segment(base + k * ny, ny).setConstant(params.mu(r, k));
  }
  return mean;
}

Eigen::Matrix3d implied_correlations(const StructuralParams& params, int n_years) {
  const auto cov = try_country_covariance(params, n_years);
  if (!cov) throw NotPositiveDefinite("cannot summarize correlations of an invalid block");
  const Eigen::MatrixXd& sigma = cov->sigma;
  // Mid-series year position; with 11 years this is the sixth year.
  const int mid = (n_years - 1) / 2;
  const auto at = [&](int k, int t) { return k * n_years + t; };
  Eigen::Matrix3d summary = Eigen::Matrix3d::Zero();
  for (int k = 0; k < kNumPopulations; ++k) {
    if (n_years > 1) {
      const double c = sigma(at(k, mid), at(k, mid + 1));
      const double v0 = sigma(at(k, mid), at(k, mid));
      const double v1 = sigma(at(k, mid + 1), at(k, mid + 1));
      summary(k, k) = c / std::sqrt(v0 * v1);
    }
    for (int k2 = k + 1; k2 < kNumPopulations; ++k2) {
      const double c = sigma(at(k, mid), at(k2, mid));
      const double v0 = sigma(at(k, mid), at(k, mid));
      const double v1 = sigma(at(k2, mid), at(k2, mid));
      summary(k, k2) = summary(k2, k) = c / std::sqrt(v0 * v1);
    }
  }
  return summary;
}

} // namespace crosspop
