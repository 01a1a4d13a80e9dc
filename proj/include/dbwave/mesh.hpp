#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace dbwave {

/**
 * Triangulation of the unit disk built from a structured polar grid.
 *
 * Nodes: index 0 is the center; ring i (1-based, radius i/n_r) contributes
 * n_theta nodes at angles 2*pi*j/n_theta, stored contiguously, so node
 * (i, j) has index 1 + (i-1)*n_theta + j.  The outermost ring is the
 * boundary cycle.  All triangles are counter-clockwise.
 *
 * The triangulated domain is the regular n_theta-gon inscribed in the unit
 * circle, so area() and perimeter() approach pi and 2*pi from below as
 * n_theta grows.
 */
struct Mesh {
  Eigen::Matrix<double, Eigen::Dynamic, 2> nodes;  ///< one row per node
  std::vector<std::array<int, 3>> triangles;       ///< CCW vertex triples
  std::vector<int> boundary;                       ///< boundary node cycle, ordered by angle
  std::vector<double> boundary_segment_length;     ///< length of edge boundary[k] -> boundary[(k+1)%n]
  int n_r = 0;
  int n_theta = 0;

  int num_nodes() const { return static_cast<int>(nodes.rows()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double area() const;          ///< sum of signed triangle areas (all positive)
  double perimeter() const;     ///< sum of boundary segment lengths
  double max_diameter() const;  ///< longest triangle edge, a mesh-size proxy

  /// Signed area of triangle t (positive for CCW orientation).
  double triangle_area(int t) const;
};

/**
 * Build the structured polar disk mesh.
 *
 * Requires n_r >= 1 and n_theta >= 3; throws std::invalid_argument naming the
 * offending parameter otherwise.  Construction is deterministic: identical
 * inputs produce identical node/triangle orderings and bit-identical
 * coordinates.  A degenerate (non-positive-area) triangle aborts construction
 * with std::runtime_error, since it indicates a programming error rather than
 * a user error.
 */
Mesh build_disk_mesh(int n_r, int n_theta);

/// Serialize nodes, triangles and the boundary cycle as human-readable JSON.
void write_mesh_json(const Mesh& mesh, const std::string& path);

}  // namespace dbwave
