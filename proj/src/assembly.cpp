#include "dbwave/assembly.hpp"

#include <cinttypes>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace dbwave {

namespace {

using Triplet = Eigen::Triplet<double>;

SpMat from_triplets(int n, const std::vector<Triplet>& trips) {
  SpMat A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

}  // namespace

FemMatrices assemble(const Mesh& mesh) {
  FemMatrices fem;
  fem.n = mesh.num_nodes();
  fem.boundary = mesh.boundary;
  fem.nodes = mesh.nodes;
  fem.area = mesh.area();
  fem.perimeter = mesh.perimeter();
  fem.lump_omega = Eigen::VectorXd::Zero(fem.n);
  fem.lump_gamma = Eigen::VectorXd::Zero(fem.n);

  std::vector<Triplet> m_omega, k_omega, m_gamma, k_gamma;
  m_omega.reserve(9 * mesh.triangles.size());
  k_omega.reserve(9 * mesh.triangles.size());

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const double x0 = mesh.nodes(tri[0], 0), y0 = mesh.nodes(tri[0], 1);
    const double x1 = mesh.nodes(tri[1], 0), y1 = mesh.nodes(tri[1], 1);
    const double x2 = mesh.nodes(tri[2], 0), y2 = mesh.nodes(tri[2], 1);
    const double at = mesh.triangle_area(t);

    // P1 gradient coefficients: grad phi_i = (b_i, c_i) / (2 |T|).
    const double b[3] = {y1 - y2, y2 - y0, y0 - y1};
    const double c[3] = {x2 - x1, x0 - x2, x1 - x0};

    for (int i = 0; i < 3; ++i) {
      fem.lump_omega[tri[i]] += at / 3.0;
      for (int j = 0; j < 3; ++j) {
        m_omega.emplace_back(tri[i], tri[j], at / 12.0 * (i == j ? 2.0 : 1.0));
        k_omega.emplace_back(tri[i], tri[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * at));
      }
    }
  }

  const int nb = static_cast<int>(mesh.boundary.size());
  for (int s = 0; s < nb; ++s) {
    const int a = mesh.boundary[static_cast<std::size_t>(s)];
    const int b = mesh.boundary[static_cast<std::size_t>((s + 1) % nb)];
    const double len = mesh.boundary_segment_length[static_cast<std::size_t>(s)];
    fem.lump_gamma[a] += len / 2.0;
    fem.lump_gamma[b] += len / 2.0;
    m_gamma.emplace_back(a, a, len / 3.0);
    m_gamma.emplace_back(b, b, len / 3.0);
    m_gamma.emplace_back(a, b, len / 6.0);
    m_gamma.emplace_back(b, a, len / 6.0);
    k_gamma.emplace_back(a, a, 1.0 / len);
    k_gamma.emplace_back(b, b, 1.0 / len);
    k_gamma.emplace_back(a, b, -1.0 / len);
    k_gamma.emplace_back(b, a, -1.0 / len);
  }

  fem.M_omega = from_triplets(fem.n, m_omega);
  fem.K_omega = from_triplets(fem.n, k_omega);
  fem.M_gamma = from_triplets(fem.n, m_gamma);
  fem.K_gamma = from_triplets(fem.n, k_gamma);
  return fem;
}

SpMat FemMatrices::mass() const {
  SpMat A = M_omega + M_gamma;
  A.makeCompressed();
  return A;
}

SpMat FemMatrices::stiffness() const {
  SpMat A = K_omega + M_omega + K_gamma + M_gamma;
  A.makeCompressed();
  return A;
}

SpMat FemMatrices::damping(double alpha, double omega) const {
  SpMat A = omega * K_omega + M_omega + (alpha * omega) * K_gamma + M_gamma;
  A.makeCompressed();
  return A;
}

Eigen::VectorXd FemMatrices::boundary_values(const Eigen::VectorXd& full) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(boundary.size()));
  for (std::size_t i = 0; i < boundary.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = full[boundary[i]];
  return out;
}

void write_matrix_coo(const SpMat& A, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_matrix_coo: cannot open " + path);
  Eigen::SparseMatrix<double, Eigen::RowMajor> R(A);
  R.makeCompressed();
  for (int row = 0; row < R.outerSize(); ++row) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(R, row); it; ++it)
      std::fprintf(f, "%d %d %.17g\n", static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  }
  std::fclose(f);
}

}  // namespace dbwave
