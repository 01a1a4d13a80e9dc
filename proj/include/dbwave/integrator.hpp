#pragma once

#include "dbwave/nonlinearity.hpp"
#include "dbwave/op.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace dbwave {

enum class Scheme { implicit_midpoint, bdf2 };

struct StepperConfig {
  double dt = 0.01;
  double T = 1.0;
  Scheme scheme = Scheme::implicit_midpoint;
  double newton_tol = 1e-10;  ///< relative Newton step tolerance
  int newton_max = 25;
  int max_dt_halvings = 4;  ///< sub-step fallback depth on Newton failure
  int state_stride = 0;     ///< 0: keep no intermediate states; k: keep every k-th
};

/**
 * Time series produced by evolve().  Node quantities are sampled at the step
 * ends t_n; diss_* are cumulative midpoint-quadrature dissipation integrals
 * of the full H1 velocity norms (bulk and boundary), and energy_residual[n]
 * is the defect of the discrete energy identity across step n-1 -> n,
 *   r = E_n - E_{n-1} + 2 sum dt_i (v_half' D v_half),
 * which vanishes identically for the linear midpoint scheme and is O(dt^3)
 * per step otherwise.
 */
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<double> energy;
  std::vector<double> h0;
  std::vector<double> diss_bulk;
  std::vector<double> diss_surf;
  std::vector<double> energy_residual;
  std::vector<PhaseVector> states;      ///< stored every state_stride steps (always t=0 and T)
  std::vector<std::size_t> state_steps; ///< step index of each stored state
  int max_newton_iters = 0;
  int dt_halvings = 0;  ///< number of times a step had to sub-step
};

/// Total energy: squared strong norm plus twice the lumped potential.
double energy(const NormWeights& weights, const NonlinearitySpec& nl, const PhaseVector& z);

/**
 * Implicit one-step integrator for  M v' = -K u - D v - N(u) + s(t),  u' = v.
 *
 * The implicit midpoint scheme solves, with v_half = (v_n + v_next)/2 and
 * u_half = u_n + dt/2 v_half,
 *   M (v_next - v_n)/dt + K u_half + D v_half + N(u_half) = s(t_half),
 * by Newton iteration in v_next; the Jacobian's nonlinear contribution is
 * diagonal (lumped nodal terms) and refreshed every iteration, while the
 * sparsity pattern and the symbolic factorization are reused.  A failed
 * Newton solve falls back to two half steps, nested at most
 * max_dt_halvings deep.  The scheme conserves the quadratic part of the
 * energy balance exactly.
 */
class TimeStepper {
 public:
  /// Per-step exogenous source evaluated at the step midpoint (may be null).
  using SourceFn = std::function<Eigen::VectorXd(int step_index)>;

  TimeStepper(const BlockOperator& op, const NormWeights& weights, const NonlinearitySpec& nl,
              const StepperConfig& cfg);

  const StepperConfig& config() const { return cfg_; }

  /// One implicit midpoint step of size dt (no sub-stepping, throws on
  /// Newton failure).  iters, if given, receives the Newton iteration count.
  PhaseVector step(const PhaseVector& z, double dt, const Eigen::VectorXd* source = nullptr,
                   int* iters = nullptr) const;

  /// March from z0 to T with the configured scheme and record the series.
  TrajectoryRecord evolve(const PhaseVector& z0, const SourceFn& source = nullptr) const;

  double energy(const PhaseVector& z) const;

 private:
  struct StepOutcome {
    PhaseVector z;
    double damping_integral = 0.0;
    double diss_bulk = 0.0;
    double diss_surf = 0.0;
  };

  StepOutcome advance(const PhaseVector& z, double t_mid_nominal, double dt, int depth,
                      const Eigen::VectorXd* source, int* max_iters, int* halvings) const;
  PhaseVector step_bdf2(const PhaseVector& z_prev, const PhaseVector& z, double dt,
                        const Eigen::VectorXd* source, int* iters) const;

  const BlockOperator* op_;
  const NormWeights* weights_;
  NonlinearitySpec nl_;
  StepperConfig cfg_;
  bool linear_ = false;
  SpMat bulk_h1_, surf_h1_;  // full H1 velocity forms for the dissipation columns
};

/// Picard-iterated mild solution on a composite Gauss grid; oracle-grade
/// reference for short horizons on coarse meshes (dense matrix exponentials).
struct MildOptions {
  int panels = 16;
  int nodes_per_panel = 4;
  double tol = 1e-10;
  int max_iters = 50;
};

/// State at time T of the mild formulation; throws if Picard does not
/// contract within max_iters (horizon too long - subdivide the interval).
PhaseVector mild_solution_reference(const BlockOperator& op, const NormWeights& weights,
                                    const NonlinearitySpec& nl, const PhaseVector& z0, double T,
                                    const MildOptions& opts = {});

/// Deterministic initial data families, scaled to a target strong norm.
enum class InitialFamily { random_smooth, constant, gaussian_bump };

struct InitialData {
  InitialFamily family = InitialFamily::random_smooth;
  double radius = 1.0;       ///< target strong norm of the state
  std::uint64_t seed = 1ull; ///< random_smooth only
  double center_x = 0.3;     ///< gaussian_bump center
  double center_y = 0.0;
  double width = 0.25;       ///< gaussian_bump standard deviation
};

PhaseVector make_initial(const FemMatrices& fem, const NormWeights& weights, const InitialData& init);

}  // namespace dbwave
