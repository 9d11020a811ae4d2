// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/SVD>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "cra/rng.hpp"
#include "cra/solver.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

cra::CMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  cra::CMatrix m(rows, cols);
  cra::PortableRng rng(seed);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return m;
}

Eigen::VectorXcd random_vector(Eigen::Index n, std::uint64_t seed) { return random_matrix(n, 1, seed).col(0); }

cra::SensingMatrix as_sensing(const cra::CMatrix& m) {
  cra::SensingMatrix H;
  H.entries = m;
  H.row_index.assign(static_cast<std::size_t>(m.rows()), {73.5, 0, 0});
  return H;
}

double lasso_objective(const cra::CMatrix& H, const Eigen::VectorXcd& g, double lambda, const Eigen::VectorXcd& x) {
  return 0.5 * (H * x - g).squaredNorm() + lambda * x.lpNorm<1>();
}

// Accelerated proximal-gradient reference for the same functional, written
// from scratch: gradient step 1/L with L the top squared singular value, then
// a complex shrink. Shares no code with the consensus solver.
Eigen::VectorXcd proximal_gradient_reference(const cra::CMatrix& H, const Eigen::VectorXcd& g, double lambda,
                                             int iters) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(H);
  const double top = svd.singularValues()(0);
  const double step = 1.0 / (top * top);

  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(H.cols());
  Eigen::VectorXcd z = x;
  double theta = 1.0;
  for (int k = 0; k < iters; ++k) {
    Eigen::VectorXcd w = z - step * (H.adjoint() * (H * z - g)).eval();
    Eigen::VectorXcd xn(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      double mag = std::abs(w(i));
      double kept = mag - step * lambda;
      xn(i) = kept > 0.0 ? w(i) * (kept / mag) : cra::Complex{0.0, 0.0};
    }
    double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    z = xn + ((theta - 1.0) / theta_next) * (xn - x);
    x = xn;
    theta = theta_next;
  }
  return x;
}

struct LassoProblem {
  cra::SensingMatrix H;
  Eigen::VectorXcd g;
  double lambda = 0.0;
};

LassoProblem sparse_problem() {
  LassoProblem p;
  p.H = as_sensing(random_matrix(30, 90, 51));
  Eigen::VectorXcd x_true = Eigen::VectorXcd::Zero(90);
  cra::PortableRng rng(52);
  for (int k = 0; k < 6; ++k) {
    auto idx = static_cast<Eigen::Index>(rng.next_u64() % 90);
    x_true(idx) = cra::Complex{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
  }
  p.g = p.H.entries * x_true;
  p.lambda = 0.1 * (p.H.entries.adjoint() * p.g).cwiseAbs().maxCoeff();
  return p;
}

}  // namespace

TEST_CASE("row partition is contiguous and balanced", "[solver]") {
  auto even = cra::partition_rows(480, 40);
  REQUIRE(even.size() == 40);
  Eigen::Index start = 0;
  for (const auto& [s, n] : even) {
    REQUIRE(s == start);
    REQUIRE(n == 12);
    start += n;
  }
  REQUIRE(start == 480);

  auto uneven = cra::partition_rows(10, 3);
  REQUIRE(uneven == std::vector<std::pair<Eigen::Index, Eigen::Index>>{{0, 4}, {4, 3}, {7, 3}});

  auto single = cra::partition_rows(5, 1);
  REQUIRE(single == std::vector<std::pair<Eigen::Index, Eigen::Index>>{{0, 5}});

  REQUIRE_THROWS_AS(cra::partition_rows(3, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(cra::partition_rows(3, 0), std::invalid_argument);
}

TEST_CASE("complex soft threshold shrinks magnitudes and keeps phases", "[solver]") {
  Eigen::VectorXcd v(1);
  v(0) = std::polar(3.0, cra::kPi / 4.0);
  Eigen::VectorXcd out = cra::soft_threshold_complex(v, 1.0);
  REQUIRE_THAT(std::abs(out(0) - std::polar(2.0, cra::kPi / 4.0)), WithinAbs(0.0, 1e-15));

  v(0) = {0.5, 0.0};
  REQUIRE(cra::soft_threshold_complex(v, 0.5)(0) == cra::Complex{0.0, 0.0});

  Eigen::VectorXcd r = random_vector(64, 61);
  REQUIRE((cra::soft_threshold_complex(r, 0.0) - r).norm() == 0.0);

  const double kappa = 0.4;
  Eigen::VectorXcd s = cra::soft_threshold_complex(r, kappa);
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    double want = std::max(std::abs(r(i)) - kappa, 0.0);
    REQUIRE_THAT(std::abs(s(i)), WithinAbs(want, 1e-14));
    if (want > 0.0) REQUIRE_THAT(std::arg(s(i)), WithinAbs(std::arg(r(i)), 1e-12));
  }

  REQUIRE_THROWS_AS(cra::soft_threshold_complex(r, -0.1), std::invalid_argument);
}

TEST_CASE("block solver reproduces hand solutions", "[solver]") {
  // Zero operator: the proximal step returns v - y untouched.
  cra::CMatrix zero = cra::CMatrix::Zero(2, 3);
  Eigen::VectorXcd g2 = Eigen::VectorXcd::Zero(2);
  cra::BlockSolver null_solver(zero, g2, 1.0);
  Eigen::VectorXcd v = random_vector(3, 71), y = random_vector(3, 72);
  REQUIRE((null_solver.solve(v, y) - (v - y)).norm() == 0.0);

  // One wide row [1 0], g = 1, rho = 1: minimizer of
  // 1/2 (u1 - 1)^2 + 1/2 |u|^2 is (1/2, 0).
  cra::CMatrix row(1, 2);
  row << cra::Complex{1.0, 0.0}, cra::Complex{0.0, 0.0};
  Eigen::VectorXcd one(1);
  one(0) = {1.0, 0.0};
  cra::BlockSolver wide(row, one, 1.0);
  Eigen::VectorXcd u = wide.solve(Eigen::VectorXcd::Zero(2), Eigen::VectorXcd::Zero(2));
  REQUIRE_THAT(std::abs(u(0) - cra::Complex{0.5, 0.0}), WithinAbs(0.0, 1e-14));
  REQUIRE(std::abs(u(1)) == 0.0);

  // Huge rho pins the solution to v - y.
  cra::CMatrix H3 = random_matrix(3, 5, 73);
  cra::BlockSolver stiff(H3, random_vector(3, 74), 1e8);
  Eigen::VectorXcd v5 = random_vector(5, 75), y5 = random_vector(5, 76);
  REQUIRE((stiff.solve(v5, y5) - (v5 - y5)).norm() < 1e-6);

  REQUIRE_THROWS_AS(cra::BlockSolver(H3, random_vector(4, 77), 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(cra::BlockSolver(H3, random_vector(3, 77), 0.0), std::invalid_argument);
}

TEST_CASE("block solver satisfies its normal equations", "[solver]") {
  for (auto [rows, cols] : {std::pair<int, int>{8, 4}, {4, 8}}) {
    cra::CMatrix H = random_matrix(rows, cols, 81);
    Eigen::VectorXcd g = random_vector(rows, 82);
    cra::BlockSolver solver(H, g, 0.7);
    Eigen::VectorXcd v = random_vector(cols, 83), y = random_vector(cols, 84);
    Eigen::VectorXcd u = solver.solve(v, y);
    REQUIRE(solver.normal_equation_residual(u, v, y) < 1e-10);
  }
}

TEST_CASE("zero measurements converge to zero immediately", "[solver]") {
  cra::SensingMatrix H = as_sensing(random_matrix(8, 6, 91));
  cra::AdmmConfig cfg;
  cfg.block_count = 2;
  cra::AdmmResult r = cra::admm_solve(H, Eigen::VectorXcd::Zero(8), cfg);
  REQUIRE(r.converged);
  REQUIRE(r.v.norm() == 0.0);
  REQUIRE(r.log.size() == 1);
}

TEST_CASE("zero penalty on one block solves least squares", "[solver]") {
  cra::CMatrix H = random_matrix(12, 4, 92);
  Eigen::VectorXcd g = random_vector(12, 93);
  cra::AdmmConfig cfg;
  cfg.block_count = 1;
  cfg.lambda_r = 0.0;
  cfg.tol_primal = cfg.tol_dual = 1e-10;
  cfg.max_iters = 3000;

  cra::AdmmResult r = cra::admm_solve(as_sensing(H), g, cfg);
  REQUIRE(r.converged);
  Eigen::VectorXcd ls = (H.adjoint() * H).ldlt().solve(H.adjoint() * g);
  REQUIRE((r.v - ls).norm() <= 1e-6 * ls.norm());
}

TEST_CASE("consensus admm agrees with the proximal-gradient reference", "[solver]") {
  LassoProblem p = sparse_problem();
  Eigen::VectorXcd ref = proximal_gradient_reference(p.H.entries, p.g, p.lambda, 20000);

  cra::AdmmConfig cfg;
  cfg.block_count = 5;
  cfg.lambda_r = p.lambda;
  cfg.tol_primal = cfg.tol_dual = 1e-9;
  cfg.max_iters = 5000;

  cra::AdmmResult r = cra::admm_solve(p.H, p.g, cfg);
  REQUIRE(r.converged);
  REQUIRE((r.v - ref).norm() <= 1e-4 * ref.norm());
  double f_ref = lasso_objective(p.H.entries, p.g, p.lambda, ref);
  double f_admm = lasso_objective(p.H.entries, p.g, p.lambda, r.v);
  REQUIRE(f_admm <= f_ref * (1.0 + 1e-8));

  // Adaptive penalty must land on the same optimum.
  cfg.adaptive_rho = true;
  cfg.rho = 5.0;
  cra::AdmmResult ra = cra::admm_solve(p.H, p.g, cfg);
  REQUIRE(ra.converged);
  REQUIRE((ra.v - ref).norm() <= 1e-4 * ref.norm());
  REQUIRE(ra.log.back().rho == ra.final_rho);
}

TEST_CASE("block count barely changes the answer", "[solver]") {
  LassoProblem p = sparse_problem();
  cra::AdmmConfig cfg;
  cfg.lambda_r = p.lambda;
  cfg.tol_primal = cfg.tol_dual = 1e-10;
  cfg.max_iters = 8000;

  cfg.block_count = 1;
  Eigen::VectorXcd v1 = cra::admm_solve(p.H, p.g, cfg).v;
  cfg.block_count = 5;
  Eigen::VectorXcd v5 = cra::admm_solve(p.H, p.g, cfg).v;
  REQUIRE((v1 - v5).norm() <= 1e-6 * v1.norm());
}

TEST_CASE("final objective never exceeds the zero start", "[solver]") {
  LassoProblem p = sparse_problem();
  cra::AdmmConfig cfg;
  cfg.block_count = 3;
  cfg.lambda_r = p.lambda;
  cra::AdmmResult r = cra::admm_solve(p.H, p.g, cfg);
  REQUIRE(r.log.back().objective <= 0.5 * p.g.squaredNorm() * (1.0 + 1e-12));
}

TEST_CASE("log residuals match the returned state", "[solver]") {
  LassoProblem p = sparse_problem();
  cra::AdmmConfig cfg;
  cfg.block_count = 4;
  cfg.lambda_r = p.lambda;
  cra::AdmmResult r = cra::admm_solve(p.H, p.g, cfg);

  double primal_sq = 0.0;
  for (const auto& u : r.state.u) primal_sq += (u - r.state.v).squaredNorm();
  REQUIRE_THAT(std::sqrt(primal_sq), WithinRel(r.log.back().primal_residual, 1e-12));
  REQUIRE(r.state.iteration == r.log.back().iteration);
  REQUIRE((r.state.v - r.v).norm() == 0.0);
}

TEST_CASE("thread count changes nothing in the iterate history", "[solver]") {
  LassoProblem p = sparse_problem();
  cra::AdmmConfig cfg;
  cfg.block_count = 6;
  cfg.lambda_r = p.lambda;
  cfg.max_iters = 300;

  cra::AdmmResult serial = cra::admm_solve(p.H, p.g, cfg);
  cfg.threads = 3;
  cra::AdmmResult threaded = cra::admm_solve(p.H, p.g, cfg);

  REQUIRE((serial.v - threaded.v).norm() == 0.0);
  REQUIRE(serial.log.size() == threaded.log.size());
  for (std::size_t i = 0; i < serial.log.size(); ++i) {
    REQUIRE(serial.log[i].objective == threaded.log[i].objective);
    REQUIRE(serial.log[i].primal_residual == threaded.log[i].primal_residual);
    REQUIRE(serial.log[i].dual_residual == threaded.log[i].dual_residual);
    REQUIRE(serial.log[i].rho == threaded.log[i].rho);
  }
}

TEST_CASE("with zero penalty the consensus is the block mean", "[solver]") {
  cra::CMatrix H = random_matrix(9, 4, 95);
  Eigen::VectorXcd g = random_vector(9, 96);
  cra::AdmmConfig cfg;
  cfg.block_count = 3;
  cfg.lambda_r = 0.0;
  cfg.max_iters = 1;

  cra::AdmmResult r = cra::admm_solve(as_sensing(H), g, cfg);

  auto ranges = cra::partition_rows(9, 3);
  Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(4);
  Eigen::VectorXcd zero4 = Eigen::VectorXcd::Zero(4);
  for (auto [start, size] : ranges) {
    cra::BlockSolver solver(H.middleRows(start, size), g.segment(start, size), cfg.rho);
    mean += solver.solve(zero4, zero4);
  }
  mean /= 3.0;
  REQUIRE((r.v - mean).norm() == 0.0);
}

TEST_CASE("non-finite input is reported with the iteration", "[solver]") {
  cra::SensingMatrix H = as_sensing(random_matrix(4, 3, 97));
  Eigen::VectorXcd g = random_vector(4, 98);
  g(1) = {std::numeric_limits<double>::infinity(), 0.0};
  cra::AdmmConfig cfg;
  cfg.block_count = 1;
  REQUIRE_THROWS_WITH(cra::admm_solve(H, g, cfg), ContainsSubstring("non-finite"));
}

TEST_CASE("solver configuration is validated", "[solver]") {
  cra::SensingMatrix H = as_sensing(random_matrix(8, 3, 99));
  Eigen::VectorXcd g = random_vector(8, 100);

  auto expect_invalid = [&](auto mutate) {
    cra::AdmmConfig cfg;
    mutate(cfg);
    REQUIRE_THROWS_AS(cra::admm_solve(H, g, cfg), std::invalid_argument);
  };
  expect_invalid([](cra::AdmmConfig& c) { c.block_count = 0; });
  expect_invalid([](cra::AdmmConfig& c) { c.block_count = 9; });
  expect_invalid([](cra::AdmmConfig& c) { c.block_count = 1, c.lambda_r = -1.0; });
  expect_invalid([](cra::AdmmConfig& c) { c.block_count = 1, c.rho = 0.0; });
  expect_invalid([](cra::AdmmConfig& c) { c.block_count = 1, c.max_iters = 0; });
  expect_invalid([](cra::AdmmConfig& c) { c.block_count = 1, c.tol_primal = 0.0; });

  cra::AdmmConfig ok;
  ok.block_count = 2;
  REQUIRE_THROWS_AS(cra::admm_solve(H, random_vector(7, 101), ok), std::invalid_argument);

  cra::RoIGrid roi = cra::build_roi({{0.0, 0.0, 0.0}, {4.0, 1.0, 1.0}, {1.0, 1.0, 1.0}});
  cra::MeasurementVector mv;
  mv.values = g;
  REQUIRE_THROWS_AS(cra::admm_solve_volume(H, mv, roi, ok), std::invalid_argument);
}
