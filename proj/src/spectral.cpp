#include "dbwave/spectral.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace dbwave {

namespace {

Eigen::VectorXcd flatten(const PhaseVectorC& z) {
  Eigen::VectorXcd out(2 * z.n());
  out << z.u, z.v;
  return out;
}

PhaseVectorC unflatten(const Eigen::VectorXcd& x) {
  const Eigen::Index n = x.size() / 2;
  return {x.head(n), x.tail(n)};
}

// Dense symmetric square root and inverse square root of the strong-norm
// weight blocks; exact (eigendecomposition) and only used at desk scale.
struct DenseWeightFactors {
  Eigen::MatrixXd sqrt_k, isqrt_k, sqrt_m, isqrt_m;

  explicit DenseWeightFactors(const NormWeights& weights) {
    auto split = [](const SpMat& A, Eigen::MatrixXd& root, Eigen::MatrixXd& iroot) {
      const Eigen::MatrixXd Ad(A);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ad);
      if (es.info() != Eigen::Success) throw std::runtime_error("dense weight eigensolve failed");
      if (es.eigenvalues()[0] <= 0.0) throw std::runtime_error("weight matrix not positive definite");
      const Eigen::ArrayXd lam = es.eigenvalues().array();
      root = es.eigenvectors() * lam.sqrt().matrix().asDiagonal() * es.eigenvectors().transpose();
      iroot = es.eigenvectors() * lam.rsqrt().matrix().asDiagonal() * es.eigenvectors().transpose();
    };
    split(weights.K(), sqrt_k, isqrt_k);
    split(weights.M(), sqrt_m, isqrt_m);
  }

  // W^{1/2} G W^{-1/2} for a dense operator G on stacked (u, v) states.
  template <typename Mat>
  Mat congruence(const Mat& G) const {
    const Eigen::Index n = sqrt_k.rows();
    Mat out(G.rows(), G.cols());
    Mat tmp(G.rows(), G.cols());
    // Right-multiply by blockdiag(isqrt_k, isqrt_m).
    tmp.leftCols(n) = G.leftCols(n) * isqrt_k.template cast<typename Mat::Scalar>();
    tmp.rightCols(n) = G.rightCols(n) * isqrt_m.template cast<typename Mat::Scalar>();
    // Left-multiply by blockdiag(sqrt_k, sqrt_m).
    out.topRows(n) = sqrt_k.template cast<typename Mat::Scalar>() * tmp.topRows(n);
    out.bottomRows(n) = sqrt_m.template cast<typename Mat::Scalar>() * tmp.bottomRows(n);
    return out;
  }
};

double power_iteration_norm(const NormWeights& weights, const ResolventSolver& solver,
                            Eigen::Index n, const NormOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXcd x(2 * n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::complex<double>(unif(rng), unif(rng));
  x /= x.norm();

  auto apply_b = [&](const Eigen::VectorXcd& y) {
    return flatten(weights.factor_t_apply(solver.solve(weights.factor_t_solve(unflatten(y)))));
  };
  auto apply_bh = [&](const Eigen::VectorXcd& y) {
    return flatten(weights.factor_solve(solver.solve_adjoint(weights.factor_apply(unflatten(y)))));
  };

  double sigma = 0.0;
  for (int it = 0; it < opts.power_max_iter; ++it) {
    const Eigen::VectorXcd bx = apply_b(x);
    const double next = bx.norm();
    Eigen::VectorXcd hx = apply_bh(bx);
    const double hn = hx.norm();
    if (hn == 0.0 || next == 0.0) return 0.0;
    x = hx / hn;
    if (it > 2 && std::abs(next - sigma) <= opts.power_tol * next) return next;
    sigma = next;
  }
  return sigma;  // converged to tolerance or hit the iteration cap
}

}  // namespace

double resolvent_norm(const BlockOperator& op, const NormWeights& weights,
                      std::complex<double> lambda, const NormOptions& opts) {
  const Eigen::Index n = op.M().rows();
  const Eigen::Index dim = 2 * n;
  const ResolventSolver solver(op, lambda);

  if (dim <= opts.dense_svd_limit) {
    // Form the resolvent densely column by column and take an exact SVD of
    // the symmetric-square-root congruence.
    Eigen::MatrixXcd R(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      Eigen::VectorXcd e = Eigen::VectorXcd::Zero(dim);
      e[j] = 1.0;
      R.col(j) = flatten(solver.solve(unflatten(e)));
    }
    const DenseWeightFactors w(weights);
    const Eigen::MatrixXcd B = w.congruence(R);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(B);
    return svd.singularValues()[0];
  }
  return power_iteration_norm(weights, solver, n, opts);
}

ScanReport resolvent_scan(const BlockOperator& op, const NormWeights& weights,
                          const std::vector<double>& beta_grid, double window_lo,
                          double window_hi, const NormOptions& opts) {
  if (beta_grid.empty()) throw std::invalid_argument("resolvent_scan: empty grid");
  for (double b : beta_grid)
    if (!(b > 0.0)) throw std::invalid_argument("resolvent_scan: grid must be positive");

  ScanReport rep;
  rep.claim = "imaginary-axis resolvent norm decay exponent";
  rep.method = (2 * op.M().rows() <= opts.dense_svd_limit) ? "dense-svd" : "power-iteration";
  rep.window_lo = window_lo;
  rep.window_hi = window_hi;
  rep.grid = beta_grid;
  rep.values.reserve(beta_grid.size());
  for (double beta : beta_grid)
    rep.values.push_back(resolvent_norm(op, weights, std::complex<double>(0.0, beta), opts));

  std::vector<double> lx, ly;
  double measured_hi = 0.0;
  for (std::size_t i = 0; i < beta_grid.size(); ++i) {
    rep.sup_value = std::max(rep.sup_value, rep.values[i]);
    if (rep.values[i] * beta_grid[i] >= 2.0) measured_hi = std::max(measured_hi, beta_grid[i]);
    if (beta_grid[i] >= window_lo && beta_grid[i] <= window_hi) {
      lx.push_back(std::log(beta_grid[i]));
      ly.push_back(std::log(rep.values[i]));
    }
  }
  if (lx.size() >= 2) {
    const LineFit fit = fit_line(lx, ly);
    rep.slope = fit.slope;
    rep.constant = std::exp(fit.intercept);
  }
  rep.extra["measured_window_hi"] = measured_hi;
  rep.extra["n_window_points"] = static_cast<double>(lx.size());
  return rep;
}

Eigen::MatrixXd dense_generator(const BlockOperator& op) {
  const Eigen::Index n = op.M().rows();
  Eigen::SimplicialLDLT<SpMat> m_solver(op.M());
  if (m_solver.info() != Eigen::Success) throw std::runtime_error("dense_generator: mass factorization failed");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  A.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  A.bottomLeftCorner(n, n) = -m_solver.solve(Eigen::MatrixXd(op.K()));
  A.bottomRightCorner(n, n) = -m_solver.solve(Eigen::MatrixXd(op.D()));
  return A;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& A) { return A.exp(); }

ScanReport semigroup_smoothing_probe(const BlockOperator& op, const NormWeights& weights,
                                     const std::vector<double>& t_grid, double gamma_exponent,
                                     const NormOptions& opts) {
  (void)opts;
  if (t_grid.empty()) throw std::invalid_argument("semigroup_smoothing_probe: empty grid");
  for (double t : t_grid)
    if (!(t > 0.0)) throw std::invalid_argument("semigroup_smoothing_probe: times must be positive");

  const Eigen::MatrixXd A = dense_generator(op);
  const DenseWeightFactors w(weights);

  ScanReport rep;
  rep.claim = "semigroup smoothing: sup of t^gamma * generator-times-semigroup norm";
  rep.method = "dense-expm-svd";
  rep.grid = t_grid;
  rep.window_lo = t_grid.front();
  rep.window_hi = t_grid.back();
  rep.extra["gamma_exponent"] = gamma_exponent;

  double max_semigroup_norm = 0.0;
  std::vector<double> lx, ly;
  for (double t : t_grid) {
    const Eigen::MatrixXd E = expm(Eigen::MatrixXd(t * A));
    const Eigen::MatrixXd BE = w.congruence(E);
    Eigen::BDCSVD<Eigen::MatrixXd> svd_e(BE);
    max_semigroup_norm = std::max(max_semigroup_norm, svd_e.singularValues()[0]);
    const Eigen::MatrixXd BAE = w.congruence(Eigen::MatrixXd(A * E));
    Eigen::BDCSVD<Eigen::MatrixXd> svd_ae(BAE);
    const double norm_ae = svd_ae.singularValues()[0];
    rep.values.push_back(std::pow(t, gamma_exponent) * norm_ae);
    lx.push_back(std::log(t));
    ly.push_back(std::log(std::max(norm_ae, 1e-300)));
  }
  for (double v : rep.values) rep.sup_value = std::max(rep.sup_value, v);
  const LineFit fit = fit_line(lx, ly);
  rep.slope = fit.slope;  // raw decay exponent of |A e^{At}| over the grid
  rep.constant = std::exp(fit.intercept);
  rep.extra["max_semigroup_norm"] = max_semigroup_norm;
  rep.pass = (max_semigroup_norm <= 1.0 + 1e-9) && std::isfinite(rep.sup_value);
  return rep;
}

FractionalPower::FractionalPower(const BlockOperator& op, double theta, const FracPowerOptions& opts)
    : op_(&op), theta_(theta), opts_(opts) {
  if (!(theta > 0.0 && theta < 1.0))
    throw std::invalid_argument("FractionalPower: theta must lie in (0, 1)");
}

PhaseVector FractionalPower::apply(const PhaseVector& z) const {
  // Truncation: the integrand decays like e^{-theta s} upward and
  // e^{(1-theta) s} downward on the log axis, so these bounds put the
  // truncation error near 1e-10 relative.
  const double s_hi = 23.0 / theta_;
  const double s_lo = -23.0 / (1.0 - theta_);
  const double prefactor = std::sin(std::numbers::pi * theta_) / std::numbers::pi;

  auto evaluate = [&](double h) {
    PhaseVector acc = PhaseVector::Zero(static_cast<int>(z.n()));
    const int steps = static_cast<int>(std::ceil((s_hi - s_lo) / h));
    for (int k = 0; k <= steps; ++k) {
      const double s = s_lo + k * h;
      const double lam = std::exp(s);
      auto it = cache_.find(s);
      if (it == cache_.end())
        it = cache_.emplace(s, std::make_shared<ResolventSolver>(*op_, std::complex<double>(lam, 0.0))).first;
      const PhaseVector r = it->second->solve_real(z);
      const double wgt = ((k == 0 || k == steps) ? 0.5 : 1.0) * h * std::exp((1.0 - theta_) * s);
      acc = acc + wgt * r;
    }
    return prefactor * acc;
  };

  double h = opts_.initial_spacing;
  PhaseVector prev = evaluate(h);
  for (int r = 0; r < opts_.max_refinements; ++r) {
    h *= 0.5;
    const PhaseVector next = evaluate(h);
    const PhaseVector diff = next - prev;
    const double rel = std::sqrt(diff.u.squaredNorm() + diff.v.squaredNorm()) /
                       std::max(1e-300, std::sqrt(next.u.squaredNorm() + next.v.squaredNorm()));
    prev = next;
    if (rel < opts_.tol) return prev;
  }
  throw std::runtime_error("FractionalPower: quadrature did not reach tolerance");
}

PhaseVector fractional_power_apply(const BlockOperator& op, double theta, const PhaseVector& z,
                                   const FracPowerOptions& opts) {
  return FractionalPower(op, theta, opts).apply(z);
}

TransitivityRate transitivity_rate(double C, double K, double C1, double a1, double C2, double a2) {
  if (!(C > 0.0 && C1 > 0.0 && C2 > 0.0))
    throw std::invalid_argument("transitivity_rate: constants must be positive");
  if (!(a1 > 0.0 && a2 > 0.0)) throw std::invalid_argument("transitivity_rate: rates must be positive");
  if (!(K >= 0.0)) throw std::invalid_argument("transitivity_rate: K must be nonnegative");
  return {C * C1 + C2, a1 * a2 / (K + a1 + a2)};
}

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_line: need at least two points");
  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

}  // namespace dbwave
