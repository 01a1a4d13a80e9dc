#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dbwave/mesh.hpp"
#include "dbwave/nonlinearity.hpp"

#include <cmath>
#include <random>

using namespace dbwave;

namespace {

ScalarNonlinearity make_sine() {
  ScalarNonlinearity s;
  s.family = Family::sine_gordon;
  s.amplitude = 1.0;
  return s;
}

ScalarNonlinearity make_kg(double gamma) {
  ScalarNonlinearity s;
  s.family = Family::klein_gordon;
  s.gamma = gamma;
  return s;
}

ScalarNonlinearity make_cubic() {
  ScalarNonlinearity s;
  s.family = Family::polynomial;
  s.coeffs = {0.0, 0.0, 0.0, 1.0};
  return s;
}

}  // namespace

TEST_CASE("family closed forms") {
  const auto sine = make_sine();
  CHECK(sine.eval(0.7) == doctest::Approx(std::sin(0.7)).epsilon(1e-15));
  CHECK(sine.deriv(0.7) == doctest::Approx(std::cos(0.7)).epsilon(1e-15));
  CHECK(sine.anti(0.7) == doctest::Approx(1.0 - std::cos(0.7)).epsilon(1e-15));
  CHECK(sine.anti(0.0) == 0.0);

  const auto kg3 = make_kg(3.0);
  CHECK(kg3.eval(2.0) == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(kg3.anti(2.0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(kg3.deriv(2.0) == doctest::Approx(12.0).epsilon(1e-15));
  const auto kg2 = make_kg(2.0);
  CHECK(kg2.eval(-2.0) == doctest::Approx(-4.0).epsilon(1e-15));
  CHECK(kg2.anti(-2.0) == doctest::Approx(8.0 / 3.0).epsilon(1e-15));

  const auto cubic = make_cubic();
  CHECK(cubic.eval(2.0) == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(cubic.deriv(-1.5) == doctest::Approx(3.0 * 2.25).epsilon(1e-15));
  CHECK(cubic.anti(2.0) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("table family interpolates and integrates exactly") {
  ScalarNonlinearity t;
  t.family = Family::table;
  for (int k = -8; k <= 8; ++k) {
    const double s = 0.5 * k;
    t.table_s.push_back(s);
    t.table_f.push_back(2.0 * s);  // linear data is reproduced exactly
  }
  t.validate();
  CHECK(t.eval(1.25) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(t.deriv(1.25) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(t.anti(1.5) == doctest::Approx(1.5 * 1.5).epsilon(1e-14));   // integral of 2s
  CHECK(t.anti(-1.5) == doctest::Approx(1.5 * 1.5).epsilon(1e-14));
  CHECK(t.anti(0.0) == 0.0);
  CHECK_THROWS_AS(t.eval(4.5), std::domain_error);
  CHECK_THROWS_AS(t.anti(-4.5), std::domain_error);
}

TEST_CASE("parameter validation") {
  ScalarNonlinearity bad = make_kg(3.5);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  ScalarNonlinearity tbl;
  tbl.family = Family::table;
  tbl.table_s = {1.0, 2.0};  // does not contain 0
  tbl.table_f = {0.0, 0.0};
  CHECK_THROWS_AS(tbl.validate(), std::invalid_argument);

  NonlinearitySpec spec;
  spec.rho = 1.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.rho = 2.0;
  spec.mu1 = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("sine nonlinearity passes validation with expected witnessed constants") {
  NonlinearitySpec spec;
  spec.f = make_sine();
  spec.g = make_sine();
  spec.ell1 = 1.0;
  spec.ell2 = 1.0;
  spec.rho = 3.0;
  spec.mu1 = 0.5;
  spec.mu2 = 0.5;

  const AssumptionReport rep = validate_assumptions(spec);
  CHECK(rep.sign_ok_f);
  CHECK(rep.sign_ok_g);
  CHECK(rep.growth_ok_f);
  CHECK(rep.growth_ok_g);
  // min of sin(s)/s over |s| in [10, 1e4] is about -0.0909 (attained near
  // |s| = 3.5*pi), so the witnessed margin sits just above 0.909.
  CHECK(rep.mu1_hat > 0.90);
  CHECK(rep.mu1_hat < 0.915);
  // |sin r - sin s| <= |r - s| makes the envelope ratio at most 1, approached
  // by near-diagonal pairs at small |s|.
  CHECK(rep.ell1_hat > 0.95);
  CHECK(rep.ell1_hat <= 1.0 + 1e-12);
  // The sine potential is nonnegative, so no potential offset is needed.
  CHECK(rep.c2_hat == 0.0);
  CHECK(rep.c1_hat > 1.0);
  CHECK(rep.c1_hat < 4.0);

  // Determinism: same seed, bitwise-identical witnessed constants.
  const AssumptionReport rep2 = validate_assumptions(spec);
  CHECK(rep.mu1_hat == rep2.mu1_hat);
  CHECK(rep.ell1_hat == rep2.ell1_hat);
  CHECK(rep.c1_hat == rep2.c1_hat);
}

TEST_CASE("cubic growth constant: envelope ratio approaches 3/2, not 1") {
  // For f(s) = s^3 the quotient |r^3 - s^3| / (|r-s|(1 + r^2 + s^2)) equals
  // (r^2 + rs + s^2)/(1 + r^2 + s^2), with supremum 3/2 on the diagonal.
  NonlinearitySpec spec;
  spec.f = make_kg(3.0);  // same scalar map as the cubic for s >= 0
  spec.g = make_sine();
  spec.ell1 = 1.5;
  spec.ell2 = 1.0;
  spec.rho = 3.0;

  const AssumptionReport rep = validate_assumptions(spec);
  CHECK(rep.sign_ok_f);
  CHECK(rep.mu1_hat == 1.0);  // |s|^2 s has nonnegative sign quotient
  CHECK(rep.c1_hat == 0.0);
  CHECK(rep.c2_hat == 0.0);
  CHECK(rep.ell1_hat > 1.45);
  CHECK(rep.ell1_hat <= 1.5 + 1e-12);
  CHECK(rep.growth_ok_f);  // declared 3/2 admits the witnessed constant

  spec.ell1 = 1.0;  // too small a declared constant must be caught
  const AssumptionReport tight = validate_assumptions(spec);
  CHECK_FALSE(tight.growth_ok_f);
}

TEST_CASE("sampling config validation") {
  NonlinearitySpec spec;
  spec.f = make_sine();
  spec.g = make_sine();
  SamplingConfig bad;
  bad.S0 = 100.0;
  bad.S1 = 10.0;
  CHECK_THROWS_AS(validate_assumptions(spec, bad), std::invalid_argument);
}

TEST_CASE("nodal force, Jacobian, and potential use lumped weights") {
  const Mesh mesh = build_disk_mesh(2, 8);
  const FemMatrices fem = assemble(mesh);

  NonlinearitySpec spec;
  spec.f = make_cubic();
  spec.g = make_sine();

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd u(fem.n), w(fem.n);
  for (int i = 0; i < fem.n; ++i) {
    u[i] = unif(rng);
    w[i] = unif(rng);
  }

  const Eigen::VectorXd force = nodal_force(fem, spec, u);
  for (int i = 0; i < fem.n; ++i) {
    const double expect = fem.lump_omega[i] * u[i] * u[i] * u[i] +
                          fem.lump_gamma[i] * std::sin(u[i]);
    CHECK(force[i] == doctest::Approx(expect).epsilon(1e-14));
  }

  // The force is the gradient of the lumped potential.
  const double eps = 1e-5;
  const double dplus = nodal_potential(fem, spec, u + eps * w);
  const double dminus = nodal_potential(fem, spec, u - eps * w);
  CHECK((dplus - dminus) / (2.0 * eps) == doctest::Approx(force.dot(w)).epsilon(1e-8));

  // The Jacobian diagonal is the derivative of the force.
  const Eigen::VectorXd jac = nodal_force_jacobian(fem, spec, u);
  const Eigen::VectorXd fplus = nodal_force(fem, spec, u + eps * w);
  const Eigen::VectorXd fminus = nodal_force(fem, spec, u - eps * w);
  const Eigen::VectorXd fd = (fplus - fminus) / (2.0 * eps);
  for (int i = 0; i < fem.n; ++i)
    CHECK(fd[i] == doctest::Approx(jac[i] * w[i]).epsilon(1e-7).scale(1.0));
}
