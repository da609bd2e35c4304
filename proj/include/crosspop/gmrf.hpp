#ifndef CROSSPOP_GMRF_HPP
#define CROSSPOP_GMRF_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "crosspop/errors.hpp"
#include "crosspop/panel.hpp"

namespace crosspop {

inline constexpr int kNumParams = 21 + 3 + 3 + 3 + 3; // 33

// The 33 structural parameters of the model: 21 region-by-population mean
// log prevalences, per-population random-effect variances tau, temporal
// precision diagonals s and off-diagonals gamma, and the three
// cross-population precisions rho.
struct StructuralParams {
  Eigen::Matrix<double, kNumRegions, kNumPopulations> mu =
      Eigen::Matrix<double, kNumRegions, kNumPopulations>::Zero();
  Eigen::Vector3d tau = Eigen::Vector3d::Zero();
  Eigen::Vector3d s = Eigen::Vector3d::Ones();
  Eigen::Vector3d gamma = Eigen::Vector3d::Zero();
  Eigen::Vector3d rho = Eigen::Vector3d::Zero(); // (MSM,FSW), (MSM,PWID), (FSW,PWID)

  using Vector = Eigen::Matrix<double, kNumParams, 1>;

  Vector pack() const;
  static StructuralParams unpack(const Vector& v);

  // Stable parameter order used by the packed vector, the draws file and
  // the diagnostics report.
  static const std::vector<std::string>& names();
  static int mu_index(Region r, Population k);
  static int tau_index(Population k);
  static int s_index(Population k);
  static int gamma_index(Population k);
  static int rho_index(int pair); // 0:(MSM,FSW) 1:(MSM,PWID) 2:(FSW,PWID)
};

// rho parameter slot coupling populations a and b, or -1 on the diagonal.
int rho_pair_index(Population a, Population b);

// Tridiagonal temporal precision block: s on the diagonal, gamma on the
// first off-diagonals.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> temporal_precision_block(
    Scalar s, Scalar gamma, Eigen::Index n_years) {
  if (!(s > Scalar(0)))
    throw NonPositiveDiagonal("temporal precision diagonal must be positive");
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat q = Mat::Zero(n_years, n_years);
  q.diagonal().setConstant(s);
  if (n_years > 1) {
    q.template diagonal<1>().setConstant(gamma);
    q.template diagonal<-1>().setConstant(gamma);
  }
  return q;
}

// Same-year cross-population coupling: rho times the identity.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cross_precision_block(
    Scalar rho, Eigen::Index n_years) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  return rho * Mat::Identity(n_years, n_years);
}

// Per-country precision block: a populations-by-populations grid of year
// blocks, temporal on the grid diagonal and cross-population couplings off
// it. The block does not depend on the country, so one template serves all
// of them. Throws NotPositiveDefinite when the assembled block admits no
// Cholesky factor.
Eigen::MatrixXd country_precision(const StructuralParams& params, int n_years = 11);

// Non-throwing variant used inside likelihood evaluation.
std::optional<Eigen::MatrixXd> try_country_precision(const StructuralParams& params,
                                                     int n_years = 11);

// Random-effect covariance: block diagonal with one constant tau_k block
// per population.
Eigen::MatrixXd random_effect_covariance(const StructuralParams& params, int n_years = 11);

struct CountryCovariance {
  Eigen::MatrixXd sigma;          // inverse(precision) + random-effect covariance
  Eigen::LLT<Eigen::MatrixXd> chol;
  int country = 0;
};

CountryCovariance country_covariance(const StructuralParams& params, int n_years = 11,
                                     int country = 0);
std::optional<CountryCovariance> try_country_covariance(const StructuralParams& params,
                                                        int n_years = 11, int country = 0);

// Mean vector over the full panel layout: entry (i, k, t) carries the
// regional mean of country i's region for population k, constant in t.
Eigen::VectorXd mean_vector(const StructuralParams& params, const PanelData& panel);

// Correlation summary implied by the assembled covariance, evaluated at
// mid-series year positions to stay clear of the boundary of the
// tridiagonal structure. Diagonal: lag-1 autocorrelation within each
// population; off-diagonal: same-year correlation across populations.
Eigen::Matrix3d implied_correlations(const StructuralParams& params, int n_years = 11);

} // namespace crosspop

#endif
