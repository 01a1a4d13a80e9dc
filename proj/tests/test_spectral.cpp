#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dbwave/op.hpp"
#include "dbwave/spectral.hpp"

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <random>

using namespace dbwave;
using Complex = std::complex<double>;

namespace {

std::shared_ptr<const FemMatrices> make_fem(int n_r, int n_theta) {
  return std::make_shared<FemMatrices>(assemble(build_disk_mesh(n_r, n_theta)));
}

PhaseVector random_state(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  PhaseVector z = PhaseVector::Zero(n);
  for (int i = 0; i < n; ++i) {
    z.u[i] = unif(rng);
    z.v[i] = unif(rng);
  }
  return z;
}

// Oracle: (-A)^{-theta} through a dense eigendecomposition, principal branch.
// The generator's spectrum lies in the open left half plane, so -A has
// spectrum in the open right half plane and the principal power is unambiguous.
PhaseVector eigen_fractional_power(const BlockOperator& op, double theta, const PhaseVector& z) {
  const Eigen::MatrixXd A = dense_generator(op);
  Eigen::ComplexEigenSolver<Eigen::MatrixXd> es(A);
  REQUIRE(es.info() == Eigen::Success);
  const Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::VectorXcd x(2 * z.n());
  x << z.u.cast<Complex>(), z.v.cast<Complex>();
  Eigen::VectorXcd coeff = V.partialPivLu().solve(x);
  for (Eigen::Index i = 0; i < coeff.size(); ++i) {
    const Complex neg_lambda = -es.eigenvalues()[i];
    REQUIRE(neg_lambda.real() > 0.0);
    coeff[i] *= std::exp(-theta * std::log(neg_lambda));
  }
  const Eigen::VectorXcd y = V * coeff;
  PhaseVector out = PhaseVector::Zero(static_cast<int>(z.n()));
  out.u = y.head(z.n()).real();
  out.v = y.tail(z.n()).real();
  return out;
}

}  // namespace

TEST_CASE("matrix exponential basics") {
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(4, 4);
  CHECK((expm(Z) - Eigen::MatrixXd::Identity(4, 4)).lpNorm<Eigen::Infinity>() < 1e-14);

  Eigen::MatrixXd Dg = Eigen::Vector3d(0.5, -1.0, 2.0).asDiagonal();
  const Eigen::MatrixXd E = expm(Dg);
  CHECK(E(0, 0) == doctest::Approx(std::exp(0.5)).epsilon(1e-13));
  CHECK(E(1, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
  CHECK(E(2, 2) == doctest::Approx(std::exp(2.0)).epsilon(1e-13));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  Eigen::MatrixXd G(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) G(i, j) = unif(rng);
  const Eigen::MatrixXd lhs = expm(Eigen::MatrixXd(0.7 * G)) * expm(Eigen::MatrixXd(0.3 * G));
  const Eigen::MatrixXd rhs = expm(G);
  CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("fractional powers agree with the dense eigendecomposition oracle") {
  auto fem = make_fem(2, 8);
  std::mt19937_64 rng(17);
  for (double alpha : {0.0, 1.0}) {
    const BlockOperator op(fem, alpha, 1.0);
    const PhaseVector z = random_state(fem->n, rng);
    for (double theta : {0.25, 0.5, 0.75}) {
      const PhaseVector got = fractional_power_apply(op, theta, z);
      const PhaseVector want = eigen_fractional_power(op, theta, z);
      const PhaseVector diff = got - want;
      const double rel = std::sqrt(diff.u.squaredNorm() + diff.v.squaredNorm()) /
                         std::sqrt(want.u.squaredNorm() + want.v.squaredNorm());
      CHECK(rel < 1e-6);
    }
  }
  const BlockOperator op(fem, 1.0, 1.0);
  CHECK_THROWS_AS(fractional_power_apply(op, 1.5, PhaseVector::Zero(fem->n)), std::invalid_argument);
}

TEST_CASE("half powers compose to the negated-generator inverse") {
  auto fem = make_fem(3, 12);
  const BlockOperator op(fem, 0.5, 1.0);
  std::mt19937_64 rng(29);
  const PhaseVector z = random_state(fem->n, rng);

  const FractionalPower half(op, 0.5);
  const PhaseVector twice = half.apply(half.apply(z));
  // (0 I - A)^{-1} z = (-A)^{-1} z.
  const ResolventSolver inv(op, Complex(0.0, 0.0));
  const PhaseVector want = inv.solve_real(z);
  const PhaseVector diff = twice - want;
  const double rel = std::sqrt(diff.u.squaredNorm() + diff.v.squaredNorm()) /
                     std::sqrt(want.u.squaredNorm() + want.v.squaredNorm());
  CHECK(rel < 1e-5);
}

TEST_CASE("smoothing probe reports a finite sup and semigroup contraction") {
  auto fem = make_fem(2, 8);
  const NormWeights weights(fem);
  std::vector<double> t_grid;
  for (int k = 0; k <= 12; ++k) t_grid.push_back(1e-3 * std::pow(10.0, 3.0 * k / 12.0));

  const BlockOperator analytic(fem, 1.0, 1.0);
  const ScanReport rep1 = semigroup_smoothing_probe(analytic, weights, t_grid, 1.0);
  CHECK(rep1.pass);
  CHECK(std::isfinite(rep1.sup_value));
  CHECK(rep1.sup_value > 0.0);
  CHECK(rep1.extra.at("max_semigroup_norm") <= 1.0 + 1e-9);

  const BlockOperator gevrey(fem, 0.0, 1.0);
  const ScanReport rep0 = semigroup_smoothing_probe(gevrey, weights, t_grid, 2.0);
  CHECK(rep0.pass);
  CHECK(std::isfinite(rep0.sup_value));

  CHECK_THROWS_AS(semigroup_smoothing_probe(analytic, weights, {}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(semigroup_smoothing_probe(analytic, weights, {-1.0}, 1.0), std::invalid_argument);
}

TEST_CASE("resolvent scan: deterministic values, sane report fields") {
  auto fem = make_fem(2, 8);
  const NormWeights weights(fem);
  const BlockOperator op(fem, 1.0, 1.0);
  std::vector<double> grid;
  for (int k = 0; k <= 8; ++k) grid.push_back(std::pow(10.0, -0.5 + 2.0 * k / 8.0));

  const ScanReport a = resolvent_scan(op, weights, grid, 1.0, 30.0);
  const ScanReport b = resolvent_scan(op, weights, grid, 1.0, 30.0);
  REQUIRE(a.values.size() == grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(a.values[i] == b.values[i]);  // bitwise deterministic
    CHECK(a.values[i] > 0.0);
  }
  CHECK(a.extra.at("measured_window_hi") >= 0.0);
  CHECK(std::isfinite(a.slope));
  CHECK(a.method == "dense-svd");
  CHECK_THROWS_AS(resolvent_scan(op, weights, {}, 1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(resolvent_scan(op, weights, {-1.0}, 1.0, 2.0), std::invalid_argument);
}
