#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dbwave/experiments.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>

using namespace dbwave;

namespace {

std::shared_ptr<const FemMatrices> make_fem(int n_r, int n_theta) {
  return std::make_shared<FemMatrices>(assemble(build_disk_mesh(n_r, n_theta)));
}

NonlinearitySpec sine_spec() {
  NonlinearitySpec nl;
  nl.f.family = Family::sine_gordon;
  nl.f.amplitude = 1.0;
  nl.g.family = Family::sine_gordon;
  nl.g.amplitude = 1.0;
  return nl;
}

PhaseVector random_state(const FemMatrices& fem, const NormWeights& weights, double radius,
                         std::uint64_t seed) {
  InitialData init;
  init.family = InitialFamily::random_smooth;
  init.radius = radius;
  init.seed = seed;
  return make_initial(fem, weights, init);
}

}  // namespace

TEST_CASE("multiplier weight selection is positive, capped, and deterministic") {
  const NonlinearitySpec lin{};
  const NonlinearitySpec sg = sine_spec();
  const double e1 = select_epsilon(lin, 1.0);
  CHECK(e1 > 0.0);
  CHECK(e1 <= 0.05 + 1e-15);  // 0.1 * min(1, omega/2) with unit sign margins
  CHECK(select_epsilon(lin, 1.0) == e1);
  const double e_half = select_epsilon(lin, 0.5);
  CHECK(e_half <= e1 + 1e-15);
  const double es = select_epsilon(sg, 1.0);
  CHECK(es > 0.0);
  CHECK(es <= e1 + 1e-15);  // weaker witnessed margins can only shrink it
}

TEST_CASE("absorbing probe certifies entry, invariance, and the sandwich") {
  auto fem = make_fem(3, 12);
  const NonlinearitySpec nl = sine_spec();
  StepperConfig cfg;
  cfg.dt = 0.05;
  cfg.T = 8.0;

  AbsorbingOptions opts;
  opts.alphas = {0.0, 1.0};
  opts.omega = 1.0;
  opts.radii = {1e-3, 0.5, 2.0, 4.0};
  const ProbeReport rep = absorbing_set_probe(fem, nl, cfg, opts);

  for (const std::string& note : rep.notes) MESSAGE(note);
  CHECK(rep.pass);
  CHECK(rep.scalars.at("r0_hat") > 0.0);
  CHECK(rep.scalars.at("r0_hat") < 1.0);  // well inside the largest initial radius
  CHECK(rep.scalars.at("epsilon_halvings") == 0.0);
  CHECK(rep.scalars.at("c1_witnessed") > 0.9);  // nonnegative potentials: near 1 - eps/2
  CHECK(rep.scalars.at("c2_witnessed") > 0.0);
  CHECK(rep.scalars.at("c2_witnessed") < 5.0);
  CHECK(rep.scalars.at("alpha_spread") < 0.10);
  // The tiny run starts inside the ball, so it has entered at time zero.
  CHECK(rep.scalars.at("entry_time_a0_r0") == 0.0);
  CHECK(rep.scalars.at("entry_time_a1_r0") == 0.0);
  // Every recorded functional value obeys the claimed lower sandwich.
  const std::vector<double>& t = rep.series.at("t");
  CHECK(t.size() == static_cast<std::size_t>(std::lround(cfg.T / cfg.dt)) + 1);
  REQUIRE(rep.series.count("h0_a1_r3") == 1);

  // Determinism: the probe is a pure function of its configuration.
  const ProbeReport rep2 = absorbing_set_probe(fem, nl, cfg, opts);
  CHECK(rep2.scalars.at("r0_hat") == rep.scalars.at("r0_hat"));
  CHECK(rep2.series.at("h0_a1_r3") == rep.series.at("h0_a1_r3"));
}

TEST_CASE("absorbing probe validates its configuration") {
  auto fem = make_fem(2, 8);
  StepperConfig cfg;
  AbsorbingOptions opts;
  opts.radii = {1.0, -2.0};
  CHECK_THROWS_AS(absorbing_set_probe(fem, sine_spec(), cfg, opts), std::invalid_argument);
  opts.radii = {1.0};
  opts.alphas = {1.5};
  CHECK_THROWS_AS(absorbing_set_probe(fem, sine_spec(), cfg, opts), std::invalid_argument);
  opts.alphas = {1.0};
  opts.tail_fraction = 1.5;
  CHECK_THROWS_AS(absorbing_set_probe(fem, sine_spec(), cfg, opts), std::invalid_argument);
}

TEST_CASE("contraction probe sandwiches the paired-difference functional") {
  auto fem = make_fem(3, 12);
  NormWeights weights(fem);
  const NonlinearitySpec nl = sine_spec();
  StepperConfig cfg;
  cfg.dt = 0.05;
  cfg.T = 4.0;
  const PhaseVector z01 = random_state(*fem, weights, 1.0, 3);
  const PhaseVector z02 = random_state(*fem, weights, 1.0, 4);

  const ProbeReport rep = contraction_probe(fem, 1.0, 0.8, nl, cfg, z01, z02);
  for (const std::string& note : rep.notes) MESSAGE(note);
  CHECK(rep.pass);
  CHECK(rep.scalars.at("epsilon_halvings") == 0.0);
  CHECK(rep.scalars.at("c_hat") > 0.0);
  CHECK(rep.scalars.at("c_hat") < 50.0);

  // Independent recomputation of the displacement functional at t = 0.
  const PhaseVector d0 = z01 - z02;
  const double alpha = 1.0, omega = 0.8;
  const double i0 = 0.5 * omega * d0.u.dot(fem->K_omega * d0.u) +
                    0.5 * alpha * omega * d0.u.dot(fem->K_gamma * d0.u) +
                    d0.u.dot(fem->M_omega * d0.u) + d0.u.dot(fem->M_gamma * d0.u) +
                    d0.v.dot(fem->M_omega * d0.u) + d0.v.dot(fem->M_gamma * d0.u);
  CHECK(rep.series.at("I").front() == doctest::Approx(i0).epsilon(1e-12));
  const double n0 = weights.h0_norm(d0);
  CHECK(rep.series.at("norm_sq").front() == doctest::Approx(n0 * n0).epsilon(1e-12));

  // Sandwich holds pointwise on the recorded series.
  const std::vector<double>& L = rep.series.at("L");
  const std::vector<double>& nsq = rep.series.at("norm_sq");
  const double eps_used = rep.scalars.at("epsilon_used");
  CHECK(eps_used > 0.0);
  for (std::size_t k = 0; k < L.size(); ++k) {
    CHECK(L[k] >= 0.25 * nsq[k] - 1e-12 * (1.0 + nsq[k]));
    CHECK(L[k] <= (1.0 + omega) * nsq[k] + 1e-12 * (1.0 + nsq[k]));
  }
}

TEST_CASE("contraction probe is trivial for identical data and fits a linear rate") {
  auto fem = make_fem(2, 8);
  NormWeights weights(fem);
  StepperConfig cfg;
  cfg.dt = 0.05;
  cfg.T = 3.0;
  const PhaseVector z0 = random_state(*fem, weights, 1.0, 9);

  const ProbeReport same = contraction_probe(fem, 0.5, 1.0, sine_spec(), cfg, z0, z0);
  CHECK(same.pass);
  CHECK(same.scalars.at("c_hat") == 0.0);
  CHECK(!same.notes.empty());

  const PhaseVector z1 = random_state(*fem, weights, 1.0, 10);
  const ProbeReport lin = contraction_probe(fem, 0.5, 1.0, NonlinearitySpec{}, cfg, z0, z1);
  CHECK(lin.pass);
  CHECK(lin.scalars.at("nu_hat_linear") > 0.01);
}

TEST_CASE("parameter scan reports a square-root-compatible deviation envelope") {
  auto fem = make_fem(2, 8);
  const NonlinearitySpec nl = sine_spec();
  StepperConfig cfg;
  cfg.dt = 0.05;
  cfg.T = 2.0;
  UscOptions opts;
  opts.alpha_grid = {0.0, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  opts.initial.radius = 1.0;
  opts.initial.seed = 5;

  const ScanReport rep = usc_scan(fem, nl, cfg, opts);
  REQUIRE(rep.values.size() == opts.alpha_grid.size());
  CHECK(rep.values.front() == 0.0);  // same solver, same path at alpha = 0
  for (std::size_t k = 2; k < rep.values.size(); ++k) CHECK(rep.values[k] > rep.values[k - 1]);
  CHECK(rep.pass);
  CHECK(rep.slope >= 0.4);
  CHECK(rep.slope <= 1.6);  // finite-dimensional truncations are Lipschitz in the parameter
  CHECK(rep.extra.at("m_hat") > 0.0);
  CHECK(rep.extra.at("n_fit_points") >= 2.0);
  CHECK(rep.extra.at("monotone") == 1.0);
  CHECK(rep.sup_value == rep.values.back());
}

TEST_CASE("difference decomposition superposes exactly and certifies weak decay") {
  auto fem = make_fem(3, 12);
  NormWeights weights(fem);
  const NonlinearitySpec nl = sine_spec();
  StepperConfig cfg;
  cfg.dt = 0.05;
  cfg.T = 12.0;  // long enough for the convolution transform to pass its peak
  const PhaseVector z01 = random_state(*fem, weights, 1.0, 7);
  const PhaseVector z02 = random_state(*fem, weights, 0.8, 8);

  const ProbeReport rep = weak_decomposition_probe(fem, 1.0, 0.8, nl, cfg, z01, z02);
  for (const std::string& note : rep.notes) MESSAGE(note);
  CHECK(rep.pass);
  CHECK(rep.notes.empty());  // transform route measurable on this horizon
  CHECK(rep.scalars.at("w_initial_norm") == 0.0);
  CHECK(rep.scalars.at("superposition_sup") <= rep.scalars.at("superposition_tolerance"));
  CHECK(rep.scalars.at("superposition_sup") < 1e-8);
  CHECK(rep.scalars.at("nu2_weak_hat") > 0.02);
  CHECK(rep.scalars.at("nu2_transform_hat") > 0.0);
  CHECK(rep.scalars.at("t_star") > 0.0);
  CHECK(rep.scalars.at("kappa_hat") < 0.5);
  CHECK(rep.scalars.at("lambda_hat") >= 0.0);
  CHECK(std::isfinite(rep.scalars.at("lambda_hat")));
  // kappa starts at 1 by construction and the series align with the horizon.
  CHECK(rep.series.at("kappa").front() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.series.at("t").back() == doctest::Approx(cfg.T).epsilon(1e-12));
}

TEST_CASE("difference decomposition trivial and linear branches") {
  auto fem = make_fem(2, 8);
  NormWeights weights(fem);
  StepperConfig cfg;
  cfg.dt = 0.05;
  cfg.T = 2.0;
  const PhaseVector z0 = random_state(*fem, weights, 1.0, 12);

  const ProbeReport same = weak_decomposition_probe(fem, 0.5, 1.0, sine_spec(), cfg, z0, z0);
  CHECK(same.pass);
  CHECK(same.scalars.at("kappa_hat") == 0.0);
  CHECK(!same.notes.empty());

  // Linear problem: the forced part has no source, so it stays exactly zero.
  const PhaseVector z1 = random_state(*fem, weights, 0.5, 13);
  const ProbeReport lin = weak_decomposition_probe(fem, 0.5, 1.0, NonlinearitySpec{}, cfg, z0, z1);
  CHECK(lin.pass);
  const std::vector<double>& wn = lin.series.at("w_norm");
  double wmax = 0.0;
  for (double w : wn) wmax = std::max(wmax, w);
  CHECK(wmax == 0.0);
}

TEST_CASE("box-counting estimate validates input and flags degenerate clouds") {
  auto fem = make_fem(2, 8);
  NormWeights weights(fem);
  const PhaseVector z = random_state(*fem, weights, 1.0, 11);

  std::vector<PhaseVector> few(50, z);
  CHECK_THROWS_AS(box_dimension(weights, few, {1.0, 0.5}), std::invalid_argument);
  std::vector<PhaseVector> cloud(120, z);
  CHECK_THROWS_AS(box_dimension(weights, cloud, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(box_dimension(weights, cloud, {1.0, -0.5}), std::invalid_argument);

  const ScanReport rep = box_dimension(weights, cloud, {1.0, 0.5, 0.25});
  CHECK(rep.pass);
  CHECK(rep.slope == 0.0);
  CHECK(rep.extra.at("degenerate") == 1.0);
  CHECK(rep.sup_value == 0.0);
  for (double c : rep.values) CHECK(c == 1.0);
}

TEST_CASE("box-counting estimate recovers the dimension of a segment") {
  auto fem = make_fem(2, 8);
  NormWeights weights(fem);
  const PhaseVector base = random_state(*fem, weights, 1.0, 11);

  const int P = 150;
  std::vector<PhaseVector> cloud;
  for (int i = 0; i < P; ++i)
    cloud.push_back((static_cast<double>(i) / (P - 1)) * base);
  const double length = weights.hminus1_norm(base);

  std::vector<double> radii;
  for (int k = 2; k <= 5; ++k) radii.push_back(length / std::pow(2.0, k));
  const ScanReport rep = box_dimension(weights, cloud, radii);
  CHECK(rep.pass);
  // The embedding is an isometry for the weak metric, so the cloud diameter
  // equals the weak norm of the endpoint difference.
  CHECK(rep.sup_value == doctest::Approx(length).epsilon(1e-10));
  CHECK(rep.slope > 0.75);
  CHECK(rep.slope < 1.25);

  const ScanReport proj = box_dimension(weights, cloud, radii, 3);
  CHECK(proj.pass);
  CHECK(proj.extra.at("discarded_variance") < 1e-8);
  CHECK(proj.slope > 0.75);
  CHECK(proj.slope < 1.25);
}
