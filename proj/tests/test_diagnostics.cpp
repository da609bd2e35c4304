#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crosspop/diagnostics.hpp"
#include "crosspop/rng.hpp"

using namespace crosspop;

TEST_CASE("constant chains report rhat 1 with the zero-variance flag") {
  Eigen::MatrixXd chains = Eigen::MatrixXd::Constant(2, 100, 3.5);
  const ParamDiagnostic d = sequence_diagnostic(chains);
  CHECK(d.rhat == 1.0);
  CHECK(d.zero_variance);
  CHECK(d.ess == doctest::Approx(200.0));
}

TEST_CASE("iid draws: rhat near 1 and ess near the nominal count") {
  Rng rng(42);
  Eigen::MatrixXd chains(4, 1000);
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 1000; ++i) chains(c, i) = rng.normal();
  const ParamDiagnostic d = sequence_diagnostic(chains);
  CHECK(d.rhat >= 0.999);
  CHECK(d.rhat <= 1.01);
  CHECK(d.ess >= 0.9 * 4000.0);
  CHECK(d.ess <= 4000.0);
}

TEST_CASE("AR(1) chain: ess close to the analytic value") {
  const double phi = 0.9;
  const double stationary_sd = 1.0 / std::sqrt(1.0 - phi * phi);
  Rng rng(2024);
  const int n = 4000;
  Eigen::MatrixXd chains(4, n);
  for (int c = 0; c < 4; ++c) {
    double x = stationary_sd * rng.normal();
    for (int i = 0; i < n; ++i) {
      x = phi * x + rng.normal();
      chains(c, i) = x;
    }
  }
  const ParamDiagnostic d = sequence_diagnostic(chains);
  const double analytic = 4.0 * n * (1.0 - phi) / (1.0 + phi);
  CHECK(std::abs(d.ess - analytic) < 0.25 * analytic);
}

TEST_CASE("separated chains inflate rhat") {
  Rng rng(1);
  Eigen::MatrixXd chains(2, 500);
  for (int i = 0; i < 500; ++i) {
    chains(0, i) = rng.normal();
    chains(1, i) = 5.0 + rng.normal();
  }
  const ParamDiagnostic d = sequence_diagnostic(chains);
  CHECK(d.rhat > 1.5);
}

TEST_CASE("insufficient draws are rejected") {
  Eigen::MatrixXd one_chain = Eigen::MatrixXd::Zero(1, 100);
  CHECK_THROWS_AS(sequence_diagnostic(one_chain), InsufficientDraws);
  Eigen::MatrixXd short_chains = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(sequence_diagnostic(short_chains), InsufficientDraws);
}
