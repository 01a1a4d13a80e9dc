#pragma once

#include "dbwave/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <string>
#include <vector>

namespace dbwave {

using SpMat = Eigen::SparseMatrix<double>;

/**
 * P1 finite-element matrices on a disk mesh, interior and boundary.
 *
 * All matrices are num_nodes x num_nodes.  The boundary mass/stiffness pair
 * comes from periodic 1D P1 elements on the closed boundary cycle, weighted
 * by segment length (the boundary stiffness is the discrete second arclength
 * derivative, i.e. the Laplace-Beltrami operator of the boundary curve);
 * rows/columns away from boundary nodes are identically zero.
 *
 * Derived combinations used throughout:
 *   mass()                M_omega + M_gamma          (velocity inner product)
 *   stiffness()           K_omega + M_omega + K_gamma + M_gamma
 *                         (full H1(domain) + H1(boundary) displacement form)
 *   damping(alpha, omega) omega*K_omega + M_omega + alpha*omega*K_gamma + M_gamma
 *
 * Lumped masses are row sums of the consistent ones and are the quadrature
 * weights for nodal (pointwise) nonlinear terms; lumping is what makes the
 * discrete chain rule, and hence the discrete energy identity, exact.
 */
struct FemMatrices {
  SpMat M_omega;  ///< consistent interior mass
  SpMat K_omega;  ///< interior stiffness (gradient form)
  SpMat M_gamma;  ///< consistent boundary mass
  SpMat K_gamma;  ///< boundary stiffness (arclength Laplace-Beltrami)
  Eigen::VectorXd lump_omega;  ///< lumped interior mass (size num_nodes)
  Eigen::VectorXd lump_gamma;  ///< lumped boundary mass (zero off the boundary)
  std::vector<int> boundary;   ///< boundary node cycle, copied from the mesh
  Eigen::MatrixXd nodes;       ///< node coordinates, copied from the mesh
  int n = 0;                   ///< number of nodes
  double area = 0.0;
  double perimeter = 0.0;

  SpMat mass() const;
  SpMat stiffness() const;
  SpMat damping(double alpha, double omega) const;

  /// Restrict a nodal vector to the boundary cycle (in cycle order).
  Eigen::VectorXd boundary_values(const Eigen::VectorXd& full) const;
};

/// Assemble all P1 matrices for the mesh.  Deterministic: identical meshes
/// give bit-identical matrices.
FemMatrices assemble(const Mesh& mesh);

/// Write a sparse matrix as "row col value" text, row-major, 17 significant
/// digits, one entry per line.
void write_matrix_coo(const SpMat& A, const std::string& path);

}  // namespace dbwave
