#ifndef CROSSPOP_STATS_HPP
#define CROSSPOP_STATS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace crosspop {

// Equal-tailed empirical quantile with linear interpolation between order
// statistics (R type 7). Input is copied and sorted.
inline double quantile(Eigen::Ref<const Eigen::VectorXd> x, double p) {
  std::vector<double> v(x.data(), x.data() + x.size());
  std::sort(v.begin(), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (v.size() == 1) return v[0];
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(Eigen::Ref<const Eigen::VectorXd> x) { return quantile(x, 0.5); }

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double sample_variance(Eigen::Ref<const Eigen::VectorXd> x) {
  const auto n = x.size();
  if (n < 2) return 0.0;
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(n - 1);
}

} // namespace crosspop

#endif
