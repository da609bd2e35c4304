#ifndef CROSSPOP_DIAGNOSTICS_HPP
#define CROSSPOP_DIAGNOSTICS_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "crosspop/posterior.hpp"

namespace crosspop {

struct ParamDiagnostic {
  std::string name;
  double rhat = 1.0;
  double ess = 0.0;
  bool zero_variance = false;
};

struct DiagnosticsReport {
  std::vector<ParamDiagnostic> params;
  double max_rhat = 1.0;
  double ess_median = 0.0;
  double ess_min = 0.0;
  double ess_max = 0.0;
  bool converged(double threshold = 1.01) const { return max_rhat <= threshold; }
};

// Split-chain R-hat and effective sample size for one scalar sequence laid
// out as chains x draws. The exact formulas are documented in
// docs/diagnostics.md. Zero-variance sequences report rhat 1 with the
// zero_variance flag set and ess equal to the draw count.
ParamDiagnostic sequence_diagnostic(const Eigen::MatrixXd& chains_by_draws);

DiagnosticsReport diagnostics(const PosteriorDraws& draws);

void write_diagnostics(const DiagnosticsReport& report, const std::filesystem::path& path);

} // namespace crosspop

#endif
