#pragma once

#include "dbwave/op.hpp"

#include <map>
#include <string>
#include <vector>

namespace dbwave {

/// How weighted operator norms are computed: exact dense SVD below the state
/// dimension dense_svd_limit, power iteration on the congruence-transformed
/// operator (relative tolerance power_tol) above it.
struct NormOptions {
  int dense_svd_limit = 420;
  double power_tol = 1e-8;
  int power_max_iter = 50000;
  std::uint64_t seed = 98172441ull;
};

/// Generic scan/probe result: sampled grid and values plus a fitted power law
/// and bookkeeping about how the numbers were produced.
struct ScanReport {
  std::string claim;          ///< machine-readable statement of the property probed
  std::string method;
  std::vector<double> grid;
  std::vector<double> values;
  double slope = 0.0;         ///< log-log least-squares slope on the window
  double constant = 0.0;      ///< exp(intercept) of the same fit
  double window_lo = 0.0;
  double window_hi = 0.0;
  double sup_value = 0.0;
  bool pass = true;
  std::map<std::string, double> extra;
};

/// Weighted resolvent norm |(lambda I - A)^{-1}| in the strong norm.
double resolvent_norm(const BlockOperator& op, const NormWeights& weights,
                      std::complex<double> lambda, const NormOptions& opts = {});

/// Scan |R(i beta)| over a log-spaced grid and fit the decay exponent on
/// [window_lo, window_hi].  The report's extra["measured_window_hi"] is the
/// largest grid point where the norm still exceeds twice the contraction
/// bound 1/beta, i.e. where the nontrivial decay regime ends on this mesh.
ScanReport resolvent_scan(const BlockOperator& op, const NormWeights& weights,
                          const std::vector<double>& beta_grid, double window_lo,
                          double window_hi, const NormOptions& opts = {});

/// Dense 2n x 2n generator matrix [[0, I], [-M^{-1}K, -M^{-1}D]].
Eigen::MatrixXd dense_generator(const BlockOperator& op);

/// Matrix exponential (scaling-and-squaring).
Eigen::MatrixXd expm(const Eigen::MatrixXd& A);

/// Probe t^gamma_exponent |A e^{A t}| over t_grid (weighted norm), recording
/// the sup and verifying the semigroup contraction |e^{A t}| <= 1 on the way.
/// Dense computation; meant for desk-scale meshes.
ScanReport semigroup_smoothing_probe(const BlockOperator& op, const NormWeights& weights,
                                     const std::vector<double>& t_grid, double gamma_exponent,
                                     const NormOptions& opts = {});

/// Quadrature controls for fractional powers of -A (spectrum in the right
/// half plane).  The Balakrishnan integral
///   (-A)^{-theta} z = sin(pi theta)/pi * int_0^inf lambda^{-theta} (lambda I - A)^{-1} z dlambda
/// is evaluated on the log axis by the trapezoid rule, refining until the
/// relative change drops below tol.
struct FracPowerOptions {
  double tol = 1e-7;
  double initial_spacing = 0.5;
  int max_refinements = 6;
};

class FractionalPower {
 public:
  FractionalPower(const BlockOperator& op, double theta, const FracPowerOptions& opts = {});
  PhaseVector apply(const PhaseVector& z) const;

 private:
  const BlockOperator* op_;
  double theta_;
  FracPowerOptions opts_;
  mutable std::map<double, std::shared_ptr<ResolventSolver>> cache_;
};

/// One-call convenience wrapper around FractionalPower.
PhaseVector fractional_power_apply(const BlockOperator& op, double theta, const PhaseVector& z,
                                   const FracPowerOptions& opts = {});

/// Composite exponential attraction: a set attracted at rate a1 whose
/// attractor is itself attracted at rate a2, with Lipschitz-type constant K,
/// is attracted by the final set with constant C*C1 + C2 and rate
/// a1 a2 / (K + a1 + a2).
struct TransitivityRate {
  double constant = 0.0;
  double rate = 0.0;
};
TransitivityRate transitivity_rate(double C, double K, double C1, double a1, double C2, double a2);

/// Least-squares line fit y ~ slope x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace dbwave
