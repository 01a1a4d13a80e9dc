#include "dbwave/op.hpp"

#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace dbwave {

PhaseVector operator+(const PhaseVector& a, const PhaseVector& b) { return {a.u + b.u, a.v + b.v}; }
PhaseVector operator-(const PhaseVector& a, const PhaseVector& b) { return {a.u - b.u, a.v - b.v}; }
PhaseVector operator*(double s, const PhaseVector& a) { return {s * a.u, s * a.v}; }

namespace {

// Restrict rows/columns of a full-size boundary matrix to the cycle.
SpMat restrict_to_boundary(const SpMat& full, const std::vector<int>& boundary) {
  std::unordered_map<int, int> pos;
  for (std::size_t i = 0; i < boundary.size(); ++i) pos[boundary[i]] = static_cast<int>(i);
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < full.outerSize(); ++k) {
    for (SpMat::InnerIterator it(full, k); it; ++it) {
      auto r = pos.find(static_cast<int>(it.row()));
      auto c = pos.find(static_cast<int>(it.col()));
      if (r != pos.end() && c != pos.end()) trips.emplace_back(r->second, c->second, it.value());
    }
  }
  SpMat out(static_cast<int>(boundary.size()), static_cast<int>(boundary.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

// Apply a real sparse map to a complex vector, componentwise on re/im.
template <typename Op>
Eigen::VectorXcd complex_apply(Op&& f, const Eigen::VectorXcd& z) {
  const Eigen::VectorXd re = f(z.real()), im = f(z.imag());
  return re.cast<std::complex<double>>() + std::complex<double>(0.0, 1.0) * im.cast<std::complex<double>>();
}

}  // namespace

NormWeights::NormWeights(std::shared_ptr<const FemMatrices> fem) : fem_(std::move(fem)) {
  K_ = fem_->stiffness();
  M_ = fem_->mass();
  SpMat bulk = fem_->K_omega + fem_->M_omega;
  bulk.makeCompressed();
  bulk_elliptic_solver_.compute(bulk);
  if (bulk_elliptic_solver_.info() != Eigen::Success)
    throw std::runtime_error("NormWeights: bulk elliptic factorization failed");

  boundary_mass_ = restrict_to_boundary(fem_->M_gamma, fem_->boundary);
  SpMat kb = restrict_to_boundary(fem_->K_gamma, fem_->boundary);
  boundary_elliptic_ = kb + boundary_mass_;
  boundary_elliptic_.makeCompressed();
  boundary_elliptic_solver_.compute(boundary_elliptic_);
  if (boundary_elliptic_solver_.info() != Eigen::Success)
    throw std::runtime_error("NormWeights: boundary elliptic factorization failed");

  Eigen::SimplicialLLT<SpMat> k_factor, m_factor;
  k_factor.compute(K_);
  m_factor.compute(M_);
  if (k_factor.info() != Eigen::Success || m_factor.info() != Eigen::Success)
    throw std::runtime_error("NormWeights: Cholesky factorization failed");
  k_L_ = SpMat(k_factor.matrixL());
  k_U_ = SpMat(k_factor.matrixU());
  m_L_ = SpMat(m_factor.matrixL());
  m_U_ = SpMat(m_factor.matrixU());
  k_P_ = k_factor.permutationP();
  m_P_ = m_factor.permutationP();
}

double NormWeights::h0_norm(const PhaseVector& z) const {
  const double q = z.u.dot(K_ * z.u) + z.v.dot(M_ * z.v);
  return std::sqrt(std::max(0.0, q));
}

double NormWeights::h0_inner(const PhaseVector& a, const PhaseVector& b) const {
  return a.u.dot(K_ * b.u) + a.v.dot(M_ * b.v);
}

double NormWeights::hminus1_norm(const PhaseVector& z) const {
  const Eigen::VectorXd ub = fem_->boundary_values(z.u);
  const Eigen::VectorXd vb = fem_->boundary_values(z.v);
  const Eigen::VectorXd r_bulk = fem_->M_omega * z.v;
  const Eigen::VectorXd r_bnd = boundary_mass_ * vb;
  double q = z.u.dot(fem_->M_omega * z.u);
  q += ub.dot(boundary_mass_ * ub);
  q += r_bulk.dot(bulk_elliptic_solver_.solve(r_bulk));
  q += r_bnd.dot(boundary_elliptic_solver_.solve(r_bnd));
  return std::sqrt(std::max(0.0, q));
}

// SimplicialLLT computes P K P' = L L', so K = P' L L' P and
// |z|_K^2 = |L' P z|^2; the congruence factor is C = P' L with C' = L' P.
PhaseVectorC NormWeights::factor_t_apply(const PhaseVectorC& z) const {
  auto ku = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd { return k_U_ * (k_P_ * x); };
  auto mv = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd { return m_U_ * (m_P_ * x); };
  return {complex_apply(ku, z.u), complex_apply(mv, z.v)};
}

PhaseVectorC NormWeights::factor_t_solve(const PhaseVectorC& z) const {
  auto ku = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return k_P_.inverse() * k_U_.triangularView<Eigen::Upper>().solve(x).eval();
  };
  auto mv = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return m_P_.inverse() * m_U_.triangularView<Eigen::Upper>().solve(x).eval();
  };
  return {complex_apply(ku, z.u), complex_apply(mv, z.v)};
}

PhaseVectorC NormWeights::factor_apply(const PhaseVectorC& z) const {
  auto ku = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd { return k_P_.inverse() * (k_L_ * x).eval(); };
  auto mv = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd { return m_P_.inverse() * (m_L_ * x).eval(); };
  return {complex_apply(ku, z.u), complex_apply(mv, z.v)};
}

PhaseVectorC NormWeights::factor_solve(const PhaseVectorC& z) const {
  auto ku = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return k_L_.triangularView<Eigen::Lower>().solve((k_P_ * x).eval());
  };
  auto mv = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return m_L_.triangularView<Eigen::Lower>().solve((m_P_ * x).eval());
  };
  return {complex_apply(ku, z.u), complex_apply(mv, z.v)};
}

BlockOperator::BlockOperator(std::shared_ptr<const FemMatrices> fem, double alpha, double omega)
    : fem_(std::move(fem)), alpha_(alpha), omega_(omega) {
  if (!(alpha_ >= 0.0 && alpha_ <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (!(omega_ > 0.0 && omega_ <= 1.0)) throw std::invalid_argument("omega must lie in (0, 1]");
  M_ = fem_->mass();
  K_ = fem_->stiffness();
  D_ = fem_->damping(alpha_, omega_);
  m_solver_.compute(M_);
  if (m_solver_.info() != Eigen::Success)
    throw std::runtime_error("BlockOperator: mass factorization failed");
}

PhaseVector BlockOperator::apply(const PhaseVector& z) const {
  PhaseVector out;
  out.u = z.v;
  out.v = -m_solver_.solve(K_ * z.u + D_ * z.v);
  return out;
}

double BlockOperator::damping_form(const Eigen::VectorXd& v) const {
  double q = omega_ * v.dot(fem_->K_omega * v) + v.dot(fem_->M_omega * v);
  q += alpha_ * omega_ * v.dot(fem_->K_gamma * v) + v.dot(fem_->M_gamma * v);
  return q;
}

double BlockOperator::dissipativity_residual(const PhaseVector& z) const {
  // <A z, z> evaluated without the mass solve: the v-block of A z satisfies
  // M (A z)_v = -(K u + D v) exactly, so (A z)_v' M v = -(K u + D v)' v.
  const Eigen::VectorXd ku = K_ * z.u;
  const double pairing = z.v.dot(ku) - (ku + D_ * z.v).dot(z.v);
  return pairing + damping_form(z.v);
}

ResolventSolver::ResolventSolver(const BlockOperator& op, std::complex<double> lambda)
    : op_(&op), lambda_(lambda) {
  real_path_ = (lambda.imag() == 0.0 && lambda.real() >= 0.0);
  if (real_path_) {
    SpMat S = lambda.real() * lambda.real() * op.M() + lambda.real() * op.D() + op.K();
    S.makeCompressed();
    real_ldlt_.compute(S);
    if (real_ldlt_.info() != Eigen::Success)
      throw std::runtime_error("ResolventSolver: real pencil factorization failed");
  } else {
    Eigen::SparseMatrix<std::complex<double>> S =
        (lambda * lambda) * op.M().cast<std::complex<double>>() +
        lambda * op.D().cast<std::complex<double>>() + op.K().cast<std::complex<double>>();
    S.makeCompressed();
    complex_lu_.compute(S);
    if (complex_lu_.info() != Eigen::Success)
      throw std::runtime_error("ResolventSolver: complex pencil factorization failed");
  }
}

// Both solve paths pick the elimination that avoids catastrophic cancellation:
// for |lambda| >= 1 the velocity block is computed directly from
// S(lambda) v = lambda M b_v - K b_u (its true size is O(1/lambda), which the
// difference form lambda*u - b_u destroys in floating point), and the
// displacement follows as u = (v + b_u)/lambda.  For small |lambda| the
// u-elimination is the stable one.
PhaseVector ResolventSolver::solve_real(const PhaseVector& b) const {
  if (!real_path_) throw std::logic_error("ResolventSolver: real solve on a complex pencil");
  const double lam = lambda_.real();
  PhaseVector out;
  if (lam >= 1.0) {
    out.v = real_ldlt_.solve(lam * (op_->M() * b.v) - op_->K() * b.u);
    out.u = (out.v + b.u) / lam;
  } else {
    out.u = real_ldlt_.solve(op_->M() * (b.v + lam * b.u) + op_->D() * b.u);
    out.v = lam * out.u - b.u;
  }
  return out;
}

PhaseVectorC ResolventSolver::solve(const PhaseVectorC& b) const {
  auto pencil_solve = [this](const Eigen::VectorXcd& rhs) -> Eigen::VectorXcd {
    if (real_path_) {
      auto s = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd { return real_ldlt_.solve(x); };
      return complex_apply(s, rhs);
    }
    return complex_lu_.solve(rhs);
  };
  const auto Mc = op_->M().cast<std::complex<double>>();
  PhaseVectorC out;
  if (std::abs(lambda_) >= 1.0) {
    out.v = pencil_solve(lambda_ * (Mc * b.v) - op_->K().cast<std::complex<double>>() * b.u);
    out.u = (out.v + b.u) / lambda_;
  } else {
    out.u = pencil_solve(Mc * (b.v + lambda_ * b.u) + op_->D().cast<std::complex<double>>() * b.u);
    out.v = lambda_ * out.u - b.u;
  }
  return out;
}

PhaseVectorC ResolventSolver::solve_adjoint(const PhaseVectorC& b) const {
  // (conj(lambda) I - A')(w1, w2) = (b1, b2) reduces to S(conj(lambda)) s = b1 + conj(lambda) b2
  // with w2 = M s and w1 = conj(lambda) w2 + D s - b2.  Since all coefficient
  // matrices are real, S(conj(lambda)) x = y solves by conjugating S(lambda).
  const std::complex<double> lc = std::conj(lambda_);
  const Eigen::VectorXcd rhs = b.u + lc * b.v;
  Eigen::VectorXcd s;
  if (real_path_) {
    auto f = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd { return real_ldlt_.solve(x); };
    s = complex_apply(f, rhs);
  } else {
    s = complex_lu_.solve(rhs.conjugate()).conjugate();
  }
  PhaseVectorC out;
  out.v = op_->M().cast<std::complex<double>>() * s;
  if (std::abs(lc) >= 1.0) {
    // Stable form of the first block row: w1 = (b1 - K s)/conj(lambda).
    out.u = (b.u - op_->K().cast<std::complex<double>>() * s) / lc;
  } else {
    out.u = lc * out.v + op_->D().cast<std::complex<double>>() * s - b.v;
  }
  return out;
}

}  // namespace dbwave
