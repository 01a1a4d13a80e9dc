#pragma once

#include "dbwave/assembly.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <complex>
#include <memory>

namespace dbwave {

/// State of the first-order system: nodal displacement u and velocity v.
/// The boundary trace components are the restrictions of u, v to the
/// boundary cycle, so they are never stored separately.
struct PhaseVector {
  Eigen::VectorXd u, v;

  static PhaseVector Zero(int n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)}; }
  Eigen::Index n() const { return u.size(); }
};

/// Complex-valued phase vector (resolvent computations).
struct PhaseVectorC {
  Eigen::VectorXcd u, v;
  Eigen::Index n() const { return u.size(); }
};

PhaseVector operator+(const PhaseVector& a, const PhaseVector& b);
PhaseVector operator-(const PhaseVector& a, const PhaseVector& b);
PhaseVector operator*(double s, const PhaseVector& a);

/**
 * Norms of the discrete phase spaces.
 *
 * Strong norm:  |z|^2 = u' K u + v' M v  with K the full displacement form
 * and M the velocity mass; this is the discrete
 * H1(domain) x L2(domain) x H1(boundary) x L2(boundary) norm.
 *
 * Weak norm: L2 norms on the displacement pair plus dual (inverse-elliptic)
 * norms on the velocity pair,
 *   |z|_-1^2 = u' Mo u + ub' Mb ub + (Mo v)' (Ko + Mo)^{-1} (Mo v)
 *            + (Mb vb)' (Kb + Mb)^{-1} (Mb vb),
 * where the boundary blocks are restricted to the cycle.  The weak norm never
 * exceeds the strong norm.
 */
class NormWeights {
 public:
  explicit NormWeights(std::shared_ptr<const FemMatrices> fem);

  const FemMatrices& fem() const { return *fem_; }
  const SpMat& K() const { return K_; }
  const SpMat& M() const { return M_; }

  double h0_norm(const PhaseVector& z) const;
  double h0_inner(const PhaseVector& a, const PhaseVector& b) const;
  double hminus1_norm(const PhaseVector& z) const;

  /// Congruence factor C with W = C C' for the strong-norm weight
  /// W = blockdiag(K, M): applications of C' and C and their inverses,
  /// acting blockwise on a phase vector.  Used for weighted operator norms.
  PhaseVectorC factor_t_apply(const PhaseVectorC& z) const;  ///< C' z
  PhaseVectorC factor_t_solve(const PhaseVectorC& z) const;  ///< C'^{-1} z
  PhaseVectorC factor_apply(const PhaseVectorC& z) const;    ///< C z
  PhaseVectorC factor_solve(const PhaseVectorC& z) const;    ///< C^{-1} z

 private:
  std::shared_ptr<const FemMatrices> fem_;
  SpMat K_, M_;
  SpMat boundary_elliptic_;  // restricted Kb + Mb on the cycle
  SpMat boundary_mass_;      // restricted Mb on the cycle
  Eigen::SimplicialLDLT<SpMat> bulk_elliptic_solver_;      // Ko + Mo
  Eigen::SimplicialLDLT<SpMat> boundary_elliptic_solver_;  // restricted Kb + Mb
  // Cached Cholesky triangles and permutations of K and M (W = C C').
  SpMat k_L_, k_U_, m_L_, m_U_;
  Eigen::PermutationMatrix<Eigen::Dynamic> k_P_, m_P_;
};

/**
 * The damped wave generator in first-order form,
 *   A (u, v) = (v, -M^{-1} (K u + D v)),
 * with D = D(alpha, omega) the damping form.  A is dissipative in the strong
 * norm: <A z, z> = -(v' D v) exactly, which dissipativity_residual verifies
 * without any linear solve.
 */
class BlockOperator {
 public:
  BlockOperator(std::shared_ptr<const FemMatrices> fem, double alpha, double omega);

  const FemMatrices& fem() const { return *fem_; }
  std::shared_ptr<const FemMatrices> fem_ptr() const { return fem_; }
  double alpha() const { return alpha_; }
  double omega() const { return omega_; }
  const SpMat& M() const { return M_; }
  const SpMat& K() const { return K_; }
  const SpMat& D() const { return D_; }

  PhaseVector apply(const PhaseVector& z) const;

  /// v' D v spelled out termwise: omega |grad v|^2 + |v|^2 over the domain
  /// plus alpha omega |grad_b vb|^2 + |vb|^2 over the boundary.
  double damping_form(const Eigen::VectorXd& v) const;

  /// <A z, z>_H0 + damping_form(v); identically zero in exact arithmetic.
  double dissipativity_residual(const PhaseVector& z) const;

 private:
  std::shared_ptr<const FemMatrices> fem_;
  double alpha_ = 0.0, omega_ = 1.0;
  SpMat M_, K_, D_;
  Eigen::SimplicialLDLT<SpMat> m_solver_;
};

/**
 * Factorization of (lambda I - A) for one fixed complex lambda, reduced to
 * the quadratic pencil S(lambda) = lambda^2 M + lambda D + K on the
 * displacement block.  Provides the adjoint solve as well, which reuses the
 * same factorization by conjugation (all coefficient matrices are real).
 */
class ResolventSolver {
 public:
  ResolventSolver(const BlockOperator& op, std::complex<double> lambda);

  std::complex<double> lambda() const { return lambda_; }
  PhaseVectorC solve(const PhaseVectorC& b) const;          ///< (lambda I - A)^{-1} b
  PhaseVectorC solve_adjoint(const PhaseVectorC& b) const;  ///< (conj(lambda) I - A')^{-1} b
  PhaseVector solve_real(const PhaseVector& b) const;       ///< real lambda >= 0 fast path

 private:
  const BlockOperator* op_;
  std::complex<double> lambda_;
  bool real_path_ = false;
  Eigen::SparseLU<Eigen::SparseMatrix<std::complex<double>>> complex_lu_;
  Eigen::SimplicialLDLT<SpMat> real_ldlt_;
};

}  // namespace dbwave
