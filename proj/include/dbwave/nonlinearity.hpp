#pragma once

#include "dbwave/assembly.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace dbwave {

/// Scalar nonlinearity families available for the interior term f and the
/// boundary term g.
enum class Family { zero, polynomial, sine_gordon, klein_gordon, table };

/**
 * One scalar nonlinearity s -> f(s) with exact derivative and antiderivative.
 *
 * polynomial:   f(s) = sum_k coeffs[k] s^k
 * sine_gordon:  f(s) = amplitude * sin(s)
 * klein_gordon: f(s) = |s|^(gamma-1) s, gamma in [1, 3]
 * table:        piecewise-linear interpolant of (table_s, table_f); evaluation
 *               outside the breakpoint range is an error, and the
 *               antiderivative integrates the interpolant exactly from 0.
 */
struct ScalarNonlinearity {
  Family family = Family::zero;
  std::vector<double> coeffs;  ///< polynomial coefficients, constant term first
  double amplitude = 1.0;      ///< sine_gordon prefactor
  double gamma = 3.0;          ///< klein_gordon exponent
  std::vector<double> table_s; ///< strictly increasing breakpoints containing 0
  std::vector<double> table_f; ///< values at the breakpoints

  double eval(double s) const;
  double deriv(double s) const;
  double anti(double s) const;  ///< antiderivative F with F(0) = 0

  /// Throws std::invalid_argument if the parameters are malformed.
  void validate() const;
};

/// Interior + boundary nonlinearity pair with the declared structural
/// constants they are supposed to satisfy.
struct NonlinearitySpec {
  ScalarNonlinearity f;  ///< interior term
  ScalarNonlinearity g;  ///< boundary term
  double ell1 = 1.0;     ///< declared interior growth constant
  double ell2 = 1.0;     ///< declared boundary growth constant
  double rho = 2.0;      ///< declared boundary growth exponent, >= 2
  double mu1 = 0.5;      ///< declared interior sign margin, in (0, 1]
  double mu2 = 0.5;      ///< declared boundary sign margin, in (0, 1]

  void validate() const;
};

/// Sampling plan for validate_assumptions: magnitudes |s| in [S0, S1] for the
/// sign conditions, pair samples up to |s| = S1 for the growth conditions.
struct SamplingConfig {
  double S0 = 10.0;
  double S1 = 1e4;
  int n_samples = 4096;
  std::uint64_t seed = 20260822ull;
};

/**
 * Outcome of sampling-based validation of the structural assumptions.
 *
 * The *_ok flags compare against the declared constants; the *_hat values are
 * the witnessed constants actually measured on the sample set:
 *   mu*_hat  = 1 + min f(s)/s      (capped at 1)
 *   ell*_hat = max difference-quotient ratio against the growth envelope
 *   c1..c4   = smallest nonneg. constants closing the pointwise lower bounds
 *              f(s)s  >= -(1-mu1_hat) s^2   - c1
 *              F(s)   >= -(1-mu1_hat)/2 s^2 - c2     (and c3, c4 for g, G)
 */
struct AssumptionReport {
  bool sign_ok_f = false, sign_ok_g = false;
  bool growth_ok_f = false, growth_ok_g = false;
  double mu1_hat = 0.0, mu2_hat = 0.0;
  double ell1_hat = 0.0, ell2_hat = 0.0;
  double c1_hat = 0.0, c2_hat = 0.0, c3_hat = 0.0, c4_hat = 0.0;
  SamplingConfig sampling;

  bool all_ok() const { return sign_ok_f && sign_ok_g && growth_ok_f && growth_ok_g; }
};

/// Sample the declared nonlinearities and report witnessed constants.
/// Deterministic for fixed sampling seed.  Requires 0 < S0 < S1 < inf.
AssumptionReport validate_assumptions(const NonlinearitySpec& spec,
                                      const SamplingConfig& sampling = {});

/// Nodal nonlinear force: component i is lump_omega[i] f(u[i]) + lump_gamma[i] g(u[i]).
Eigen::VectorXd nodal_force(const FemMatrices& fem, const NonlinearitySpec& spec,
                            const Eigen::VectorXd& u);

/// Diagonal of the nodal force Jacobian (same lumped weights on f' and g').
Eigen::VectorXd nodal_force_jacobian(const FemMatrices& fem, const NonlinearitySpec& spec,
                                     const Eigen::VectorXd& u);

/// Lumped potential integral: sum_i lump_omega[i] F(u[i]) + lump_gamma[i] G(u[i]).
double nodal_potential(const FemMatrices& fem, const NonlinearitySpec& spec,
                       const Eigen::VectorXd& u);

}  // namespace dbwave
