#pragma once

#include "dbwave/integrator.hpp"
#include "dbwave/spectral.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace dbwave {

/**
 * Generic probe outcome: a machine-readable claim, a pass flag, named fitted
 * scalars, the underlying time series (every flag is recomputable from them),
 * and free-form warning notes.
 */
struct ProbeReport {
  std::string claim;
  bool pass = false;
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> series;
  std::vector<std::string> notes;
};

/// Multiplier weight used by the absorbing/contraction functionals and the
/// convolution transform: 0.1 * min(1, mu1_hat*omega/2, mu2_hat*omega/2),
/// with the witnessed sign margins from sampling validation (falling back to
/// the declared margins if sampling returns a nonpositive witness).
double select_epsilon(const NonlinearitySpec& nl, double omega);

/**
 * Absorbing-ball probe: evolve a grid of initial radii for each alpha,
 * track the damped functional
 *   Psi = |zeta|^2 + eps<u,v>_bulk + eps<u,v>_boundary + 2*potential,
 * verify its two-sided sandwich by the squared strong norm (halving eps on a
 * violation), measure a common absorbed radius R0_hat from the trajectory
 * tails, the entry time of every run into that ball, and positive invariance
 * after entry.  Passes when every run enters, stays, and the per-alpha radii
 * agree within the declared spread.
 */
struct AbsorbingOptions {
  std::vector<double> alphas{0.0, 1.0};
  double omega = 1.0;
  std::vector<double> radii{1.0, 5.0, 10.0};
  InitialFamily family = InitialFamily::random_smooth;
  std::uint64_t seed = 20260822ull;
  double epsilon = -1.0;  ///< <= 0: auto-select via select_epsilon
  int max_epsilon_halvings = 4;
  double tail_fraction = 0.8;    ///< R0_hat measured over [tail_fraction*T, T]
  double tail_margin = 1e-3;     ///< relative headroom added to the tail max
  double invariance_slack = 1e-6;
  double alpha_spread_limit = 0.10;
};
ProbeReport absorbing_set_probe(std::shared_ptr<const FemMatrices> fem, const NonlinearitySpec& nl,
                                const StepperConfig& stepper, const AbsorbingOptions& opts = {});

/**
 * Paired-trajectory contraction probe: difference energy E = |d|^2/2, the
 * displacement multiplier functional I, and L = E + eps*I; verifies the
 * sandwich |d|^2/4 <= L <= (1+omega)|d|^2 at every recorded time (halving
 * eps on violation) and the integrated decay-plus-history inequality
 *   |d(t)|^2 <= C_hat e^{-eps t}|d(0)|^2 + C_hat t sup_{s<=t} |u_d(s)|_{L2}^2
 * with witnessed C_hat.  In the source-free linear case the history term is
 * absent and a positive exponential rate is fitted instead.
 */
struct ContractionOptions {
  double epsilon = -1.0;  ///< <= 0: auto-select
  int max_epsilon_halvings = 4;
};
ProbeReport contraction_probe(std::shared_ptr<const FemMatrices> fem, double alpha, double omega,
                              const NonlinearitySpec& nl, const StepperConfig& stepper,
                              const PhaseVector& z01, const PhaseVector& z02,
                              const ContractionOptions& opts = {});

/**
 * Parameter-perturbation scan: D(alpha) = sup_t |S_alpha(t)z0 - S_0(t)z0|
 * over a log-spaced alpha grid, fitted slope of log D vs log alpha, and the
 * witnessed envelope constant M_hat = max D/sqrt(alpha).  Grid points whose
 * deviation is below indistinguishable_factor * newton_tol are excluded from
 * the fit (reported in extra["n_fit_points"]).
 */
struct UscOptions {
  std::vector<double> alpha_grid{1e-4, 1e-3, 1e-2, 3e-2, 1e-1};
  double omega = 1.0;
  InitialData initial{};
  double indistinguishable_factor = 100.0;
  double min_slope = 0.4;
};
ScanReport usc_scan(std::shared_ptr<const FemMatrices> fem, const NonlinearitySpec& nl,
                    const StepperConfig& stepper, const UscOptions& opts = {});

/**
 * Difference decomposition probe: the full difference d of two nonlinear
 * trajectories is reproduced as v-part (source-free linear flow from d(0))
 * plus w-part (linear flow, zero data, midpoint sources taken from the stored
 * nonlinear trajectories).  Checks superposition exactness, exponential decay
 * of the v-part in the weak norm and of its convolution transform in the
 * strong norm, boundedness of the (transformed) w-part, and the decay factor
 * kappa_hat(t*) < 1/2 at the first recorded time that achieves it.
 */
struct DecompositionOptions {
  double epsilon = -1.0;           ///< transform rate; <= 0: auto-select
  double superposition_factor = 10.0;
  double fit_start_fraction = 0.25;  ///< decay fits start at this fraction of T
};
ProbeReport weak_decomposition_probe(std::shared_ptr<const FemMatrices> fem, double alpha,
                                     double omega, const NonlinearitySpec& nl,
                                     const StepperConfig& stepper, const PhaseVector& z01,
                                     const PhaseVector& z02,
                                     const DecompositionOptions& opts = {});

/**
 * Weak-norm box-counting estimate: snapshots are embedded isometrically into
 * Euclidean coordinates through the factor maps of the weak norm, optionally
 * projected onto leading principal components, covered greedily at each
 * radius, and the count-vs-radius slope is fitted on the nondegenerate
 * window.  Heuristic by design; degenerate clouds report dimension 0 with a
 * warning in extra flags.  Requires at least 100 points and a log-spaced
 * radii grid.
 */
ScanReport box_dimension(const NormWeights& weights, const std::vector<PhaseVector>& points,
                         const std::vector<double>& radii, int projection_dim = 0);

}  // namespace dbwave
