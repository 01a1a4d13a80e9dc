#include "dbwave/mesh.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace dbwave {

double Mesh::triangle_area(int t) const {
  const auto& tri = triangles[static_cast<std::size_t>(t)];
  const auto a = nodes.row(tri[0]);
  const auto b = nodes.row(tri[1]);
  const auto c = nodes.row(tri[2]);
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

double Mesh::area() const {
  double total = 0.0;
  for (int t = 0; t < num_triangles(); ++t) total += triangle_area(t);
  return total;
}

double Mesh::perimeter() const {
  double total = 0.0;
  for (double len : boundary_segment_length) total += len;
  return total;
}

double Mesh::max_diameter() const {
  double best = 0.0;
  for (const auto& tri : triangles) {
    for (int e = 0; e < 3; ++e) {
      const auto a = nodes.row(tri[e]);
      const auto b = nodes.row(tri[(e + 1) % 3]);
      best = std::max(best, std::hypot(b[0] - a[0], b[1] - a[1]));
    }
  }
  return best;
}

Mesh build_disk_mesh(int n_r, int n_theta) {
  if (n_r < 1) throw std::invalid_argument("build_disk_mesh: n_r must be >= 1");
  if (n_theta < 3) throw std::invalid_argument("build_disk_mesh: n_theta must be >= 3");

  Mesh mesh;
  mesh.n_r = n_r;
  mesh.n_theta = n_theta;

  const int n_nodes = 1 + n_r * n_theta;
  mesh.nodes.resize(n_nodes, 2);
  mesh.nodes.row(0) << 0.0, 0.0;
  for (int i = 1; i <= n_r; ++i) {
    const double r = static_cast<double>(i) / n_r;
    for (int j = 0; j < n_theta; ++j) {
      const double th = 2.0 * std::numbers::pi * j / n_theta;
      mesh.nodes.row(1 + (i - 1) * n_theta + j) << r * std::cos(th), r * std::sin(th);
    }
  }

  auto ring = [n_theta](int i, int j) { return 1 + (i - 1) * n_theta + ((j % n_theta + n_theta) % n_theta); };

  // Innermost fan around the center, then two triangles per annulus quad.
  mesh.triangles.reserve(static_cast<std::size_t>(n_theta) * (2 * n_r - 1));
  for (int j = 0; j < n_theta; ++j) mesh.triangles.push_back({0, ring(1, j), ring(1, j + 1)});
  for (int i = 1; i < n_r; ++i) {
    for (int j = 0; j < n_theta; ++j) {
      const int a = ring(i, j), b = ring(i + 1, j), c = ring(i + 1, j + 1), d = ring(i, j + 1);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  }

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!(mesh.triangle_area(t) > 0.0))
      throw std::runtime_error("build_disk_mesh: degenerate triangle " + std::to_string(t));
  }

  mesh.boundary.resize(n_theta);
  mesh.boundary_segment_length.resize(n_theta);
  for (int j = 0; j < n_theta; ++j) mesh.boundary[j] = ring(n_r, j);
  for (int j = 0; j < n_theta; ++j) {
    const auto a = mesh.nodes.row(mesh.boundary[j]);
    const auto b = mesh.nodes.row(mesh.boundary[(j + 1) % n_theta]);
    mesh.boundary_segment_length[j] = std::hypot(b[0] - a[0], b[1] - a[1]);
  }
  return mesh;
}

void write_mesh_json(const Mesh& mesh, const std::string& path) {
  nlohmann::json j;
  j["n_r"] = mesh.n_r;
  j["n_theta"] = mesh.n_theta;
  j["num_nodes"] = mesh.num_nodes();
  j["num_triangles"] = mesh.num_triangles();
  auto nodes = nlohmann::json::array();
  for (int i = 0; i < mesh.num_nodes(); ++i)
    nodes.push_back({mesh.nodes(i, 0), mesh.nodes(i, 1)});
  j["nodes"] = std::move(nodes);
  auto tris = nlohmann::json::array();
  for (const auto& t : mesh.triangles) tris.push_back({t[0], t[1], t[2]});
  j["triangles"] = std::move(tris);
  j["boundary"] = mesh.boundary;
  j["area"] = mesh.area();
  j["perimeter"] = mesh.perimeter();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_mesh_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace dbwave
