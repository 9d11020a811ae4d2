// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.
//
// Row-split consensus ADMM for the norm-1 regularized problem
//
//   minimize  1/2 sum_i |H_i u_i - g_i|_2^2  +  lambda_r |v|_1
//   s.t.      u_i = v,  i = 1..N
//
// over complex data. Each row block solves its regularized normal equations
// with a cached factorization (a Woodbury form when the block is wide); the
// consensus update is complex soft thresholding of the block average. Block
// updates may run in parallel; every reduction runs in a fixed block order,
// so iterates are identical for any worker count.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cra/common.hpp"
#include "cra/forward.hpp"
#include "cra/grid.hpp"
#include "cra/parallel.hpp"

namespace cra {

struct AdmmConfig {
  int block_count = 40;       // N
  double lambda_r = 20.0;     // norm-1 weight
  double rho = 1.0;           // augmented-Lagrangian penalty
  int max_iters = 500;
  double tol_primal = 1e-5;   // relative
  double tol_dual = 1e-5;     // relative
  bool adaptive_rho = false;  // residual-balancing x2 / /2, capped
  int threads = 1;

  void validate(Eigen::Index rows) const {
    if (block_count < 1 || block_count > rows)
      throw std::invalid_argument("block_count must be in [1, rows]; got " + std::to_string(block_count) + " for " +
                                  std::to_string(rows) + " rows");
    if (lambda_r < 0.0) throw std::invalid_argument("lambda_r must be non-negative");
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
    if (!(tol_primal > 0.0) || !(tol_dual > 0.0)) throw std::invalid_argument("tolerances must be positive");
  }
};

/// Contiguous row ranges (start, size) with sizes differing by at most one;
/// concatenating the ranges restores the original row order exactly.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> partition_rows(Eigen::Index rows, int blocks) {
  if (blocks < 1 || static_cast<Eigen::Index>(blocks) > rows)
    throw std::invalid_argument("cannot split " + std::to_string(rows) + " rows into " + std::to_string(blocks) +
                                " blocks");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
  ranges.reserve(static_cast<std::size_t>(blocks));
  Eigen::Index base = rows / blocks, extra = rows % blocks, start = 0;
  for (int i = 0; i < blocks; ++i) {
    Eigen::Index size = base + (i < extra ? 1 : 0);
    ranges.emplace_back(start, size);
    start += size;
  }
  return ranges;
}

/// Complex soft thresholding: magnitudes shrink by kappa, phases survive.
inline Eigen::VectorXcd soft_threshold_complex(const Eigen::VectorXcd& v, double kappa) {
  if (kappa < 0.0) throw std::invalid_argument("soft threshold kappa must be non-negative");
  if (kappa == 0.0) return v;
  Eigen::VectorXcd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double mag = std::abs(v(i));
    out(i) = mag > kappa ? v(i) * ((mag - kappa) / mag) : Complex{0.0, 0.0};
  }
  return out;
}

// One row block's proximal least-squares step
//   u = argmin 1/2 |H u - g|^2 + rho/2 |u - v + y|^2,
// i.e. the solution of (H^H H + rho I) u = H^H g + rho (v - y). A tall block
// factors the n x n normal matrix directly; a wide block (the usual case
// here) goes through the matrix inversion lemma so only an m x m system is
// factored. The factorization is reused across iterations and recomputed
// only when rho changes.
class BlockSolver {
 public:
  BlockSolver(Eigen::Ref<const CMatrix> h, Eigen::Ref<const Eigen::VectorXcd> g, double rho)
      : h_(h), hg_(h.adjoint() * g), wide_(h.rows() < h.cols()) {
    if (h.rows() != g.size()) throw std::invalid_argument("block row count does not match measurement count");
    gram_.noalias() = wide_ ? (h_ * h_.adjoint()).eval() : (h_.adjoint() * h_).eval();
    set_rho(rho);
  }

  void set_rho(double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
    rho_ = rho;
    Eigen::MatrixXcd shifted = gram_;
    shifted.diagonal().array() += rho;
    llt_.compute(shifted);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("Cholesky factorization of the shifted Gram matrix failed");
  }

  double rho() const { return rho_; }

  Eigen::VectorXcd solve(const Eigen::VectorXcd& v, const Eigen::VectorXcd& y) const {
    Eigen::VectorXcd b = hg_ + rho_ * (v - y);
    if (!wide_) return llt_.solve(b);
    Eigen::VectorXcd hb = h_ * b;
    Eigen::VectorXcd s = llt_.solve(hb);
    return (b - h_.adjoint() * s) / rho_;
  }

  /// Relative residual of the normal equations at u; for verification.
  double normal_equation_residual(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v,
                                  const Eigen::VectorXcd& y) const {
    Eigen::VectorXcd b = hg_ + rho_ * (v - y);
    Eigen::VectorXcd lhs = h_.adjoint() * (h_ * u) + rho_ * u;
    return (lhs - b).norm() / std::max(b.norm(), 1e-300);
  }

 private:
  Eigen::Ref<const CMatrix> h_;
  Eigen::VectorXcd hg_;
  bool wide_;
  Eigen::MatrixXcd gram_;
  Eigen::LLT<Eigen::MatrixXcd> llt_;
  double rho_ = 1.0;
};

struct ConvergenceRecord {
  int iteration = 0;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double rho = 0.0;
};

using ConvergenceLog = std::vector<ConvergenceRecord>;

struct AdmmState {
  std::vector<Eigen::VectorXcd> u;  // per-block primal variables
  Eigen::VectorXcd v;               // consensus variable
  std::vector<Eigen::VectorXcd> y;  // per-block scaled duals
  int iteration = 0;
  ConvergenceLog history;
};

struct AdmmResult {
  Eigen::VectorXcd v;
  AdmmState state;
  ConvergenceLog log;
  bool converged = false;
  double final_rho = 0.0;
};

/// Runs consensus ADMM on (H, g) split into config.block_count contiguous row
/// blocks. Stops when the scaled primal and dual residuals drop below the
/// configured relative tolerances, or at max_iters. Initialization is
/// v = 0, y_i = 0.
inline AdmmResult admm_solve(const SensingMatrix& H, const Eigen::VectorXcd& g, const AdmmConfig& config) {
  const Eigen::Index rows = H.rows(), n = H.cols();
  config.validate(rows);
  if (g.size() != rows) throw std::invalid_argument("measurement vector length does not match sensing matrix rows");

  const auto ranges = partition_rows(rows, config.block_count);
  const auto N = static_cast<std::size_t>(config.block_count);
  double rho = config.rho;

  std::vector<BlockSolver> solvers;
  solvers.reserve(N);
  for (auto [start, size] : ranges)
    solvers.emplace_back(H.entries.middleRows(start, size), g.segment(start, size), rho);

  AdmmState state;
  state.v = Eigen::VectorXcd::Zero(n);
  state.u.assign(N, Eigen::VectorXcd::Zero(n));
  state.y.assign(N, Eigen::VectorXcd::Zero(n));

  const double g_norm2 = g.squaredNorm();
  const double eps_floor = 1e-14 * std::sqrt(static_cast<double>(n) * static_cast<double>(N));
  constexpr double kBalanceRatio = 10.0, kBalanceFactor = 2.0;
  const double rho_min = config.rho / 1048576.0, rho_max = config.rho * 1048576.0;

  AdmmResult result;
  Eigen::VectorXcd mean(n), v_prev(n);

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    parallel_for(N, config.threads, [&](std::size_t i) { state.u[i] = solvers[i].solve(state.v, state.y[i]); });

    // Deterministic ordered reduction over blocks.
    mean.setZero();
    for (std::size_t i = 0; i < N; ++i) mean += state.u[i] + state.y[i];
    mean /= static_cast<double>(N);

    v_prev.swap(state.v);
    state.v = soft_threshold_complex(mean, config.lambda_r / (static_cast<double>(N) * rho));

    double primal_sq = 0.0, u_sq = 0.0, y_sq = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      state.y[i] += state.u[i] - state.v;
      primal_sq += (state.u[i] - state.v).squaredNorm();
      u_sq += state.u[i].squaredNorm();
      y_sq += state.y[i].squaredNorm();
    }
    double primal = std::sqrt(primal_sq);
    double dual = rho * std::sqrt(static_cast<double>(N)) * (state.v - v_prev).norm();

    double objective = 0.5 * (H.entries * state.v - g).squaredNorm() + config.lambda_r * state.v.lpNorm<1>();
    if (!std::isfinite(objective) || !std::isfinite(primal) || !std::isfinite(dual))
      throw std::runtime_error("ADMM produced a non-finite iterate at iteration " + std::to_string(iter));

    state.iteration = iter;
    state.history.push_back({iter, objective, primal, dual, rho});

    double v_norm = state.v.norm();
    double eps_primal = eps_floor + config.tol_primal * std::max(std::sqrt(u_sq), std::sqrt(static_cast<double>(N)) * v_norm);
    double eps_dual = eps_floor + config.tol_dual * rho * std::sqrt(y_sq);
    // Zero data: everything stays at the origin and both residuals vanish.
    if (g_norm2 == 0.0 && v_norm == 0.0 && primal == 0.0) {
      result.converged = true;
      break;
    }
    if (primal <= eps_primal && dual <= eps_dual) {
      result.converged = true;
      break;
    }

    if (config.adaptive_rho && iter < config.max_iters) {
      double new_rho = rho;
      if (primal > kBalanceRatio * dual)
        new_rho = std::min(rho * kBalanceFactor, rho_max);
      else if (dual > kBalanceRatio * primal)
        new_rho = std::max(rho / kBalanceFactor, rho_min);
      if (new_rho != rho) {
        // Scaled duals carry a 1/rho; rescale so the unscaled duals persist.
        double scale = rho / new_rho;
        for (auto& yi : state.y) yi *= scale;
        rho = new_rho;
        for (auto& s : solvers) s.set_rho(rho);
      }
    }
  }

  result.v = state.v;
  result.log = state.history;
  result.final_rho = rho;
  result.state = std::move(state);
  return result;
}

/// Convenience wrapper returning the consensus estimate as a volume.
inline std::pair<ReflectivityVolume, ConvergenceLog> admm_solve_volume(const SensingMatrix& H,
                                                                       const MeasurementVector& g, const RoIGrid& roi,
                                                                       const AdmmConfig& config) {
  if (static_cast<std::size_t>(H.cols()) != roi.voxel_count())
    throw std::invalid_argument("sensing matrix columns do not match the RoI voxel count");
  AdmmResult r = admm_solve(H, g.values, config);
  return {ReflectivityVolume{roi, r.v}, r.log};
}

}  // namespace cra
