#pragma once

// Continuous-parameter optimization. A hand-rolled BFGS (inverse-Hessian
// update, Armijo backtracking, central-difference gradients, multi-start)
// plus the three circuit objectives built on it: per-step local loss
// minimization, whole-circuit global minimization, and preparation-fidelity
// maximization for fixed ansatz structures.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qsynth/circuit.hpp"
#include "qsynth/qcore.hpp"
#include "qsynth/rng.hpp"

namespace qsynth {

struct OptimizerConfig {
  int max_iters = 500;      // BFGS iterations per restart
  double grad_step = 1e-5;  // central-difference h (radians)
  double tol = 1e-8;        // gradient-norm convergence threshold
  int restarts = 3;         // multi-start count; first start is x0
  std::uint64_t seed = 0;   // seeds the restart-point draws

  void validate() const {
    if (!(grad_step > 0.0)) {
      throw std::invalid_argument("grad_step must be positive");
    }
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
  }
};

struct OptResult {
  std::vector<double> best_params;
  double best_value = std::numeric_limits<double>::infinity();
  int iters_used = 0;   // summed over restarts
  bool converged = false;  // gradient-norm criterion met on the best restart
};

namespace detail {

constexpr double kArmijoC1 = 1e-4;
constexpr int kMaxBacktracks = 60;

template <typename F>
Eigen::VectorXd central_diff_grad(F&& f, std::vector<double>& x, double h,
                                  bool& finite) {
  const int dim = static_cast<int>(x.size());
  Eigen::VectorXd g(dim);
  for (int i = 0; i < dim; ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(std::span<const double>(x));
    x[i] = xi - h;
    const double fm = f(std::span<const double>(x));
    x[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      finite = false;
      return g;
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  finite = true;
  return g;
}

}  // namespace detail

/// Minimize f over an unconstrained real vector. Restart 0 starts at x0,
/// the rest at points drawn uniformly from [-pi, pi]^dim. A non-finite
/// objective value aborts the current restart; the best finite result seen
/// anywhere is kept. Ties keep the earlier restart (strict improvement
/// required), so a fixed seed gives a deterministic result.
template <typename F>
OptResult bfgs_minimize(F&& f, std::span<const double> x0,
                        const OptimizerConfig& cfg) {
  cfg.validate();
  const int dim = static_cast<int>(x0.size());
  Rng rng(cfg.seed);

  OptResult result;
  if (dim == 0) {
    result.best_value = f(x0);
    if (!std::isfinite(result.best_value)) {
      throw std::invalid_argument("objective is not finite at x0");
    }
    result.converged = true;
    return result;
  }

  const auto consider = [&result](const std::vector<double>& x, double fx,
                                  bool converged) {
    if (fx < result.best_value) {
      result.best_params = x;
      result.best_value = fx;
      result.converged = converged;
    }
  };

  for (int restart = 0; restart < cfg.restarts; ++restart) {
    std::vector<double> x(x0.begin(), x0.end());
    if (restart > 0) {
      for (auto& v : x) v = rng.uniform(-std::numbers::pi, std::numbers::pi);
    }
    double fx = f(std::span<const double>(x));
    if (!std::isfinite(fx)) {
      if (restart == 0) {
        throw std::invalid_argument("objective is not finite at x0");
      }
      continue;  // random start landed in a non-finite region
    }

    // Within a restart, accepted steps strictly decrease fx, so the point
    // held at loop exit is this restart's best.
    bool restart_converged = false;
    bool grad_ok = true;
    Eigen::VectorXd g =
        detail::central_diff_grad(f, x, cfg.grad_step, grad_ok);
    if (grad_ok) {
      Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(dim, dim);
      std::vector<double> trial(dim);
      for (int iter = 0; iter < cfg.max_iters; ++iter) {
        ++result.iters_used;
        if (g.norm() < cfg.tol) {
          restart_converged = true;
          break;
        }
        Eigen::VectorXd dir = -(h_inv * g);
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {  // lost positive-definiteness: reset to descent
          h_inv.setIdentity();
          dir = -g;
          slope = g.dot(dir);
        }

        double step = 1.0;
        double f_trial = std::numeric_limits<double>::quiet_NaN();
        bool accepted = false;
        bool aborted = false;
        for (int bt = 0; bt < detail::kMaxBacktracks; ++bt) {
          for (int i = 0; i < dim; ++i) trial[i] = x[i] + step * dir[i];
          f_trial = f(std::span<const double>(trial));
          if (!std::isfinite(f_trial)) {
            aborted = true;
            break;
          }
          if (f_trial <= fx + detail::kArmijoC1 * step * slope) {
            accepted = true;
            break;
          }
          step *= 0.5;
        }
        if (aborted || !accepted) break;

        Eigen::VectorXd g_new =
            detail::central_diff_grad(f, trial, cfg.grad_step, grad_ok);
        if (!grad_ok) {  // keep the finite step, abandon the restart
          x = trial;
          fx = f_trial;
          break;
        }
        const Eigen::VectorXd s = step * dir;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
          const Eigen::VectorXd hy = h_inv * y;
          const double yhy = y.dot(hy);
          h_inv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
                   (hy * s.transpose() + s * hy.transpose()) / sy;
        } else {
          h_inv.setIdentity();
        }
        x = trial;
        fx = f_trial;
        g = std::move(g_new);
      }
    }
    consider(x, fx, restart_converged);
  }
  return result;
}

// ---------- circuit objectives ----------

/// Result of binding and optimizing one circuit fragment against a state.
struct LocalStepResult {
  std::vector<double> params;
  DensityMatrix rho_next;
  double loss = 0.0;
};

struct LocalStepResultPure {
  std::vector<double> params;
  ComplexVector psi_next;
  double loss = 0.0;
};

/// Minimize the off-diagonal weight of U_block rho U_block^dagger over the
/// block's own parameters (zero initial angles).
inline LocalStepResult optimize_local_step(const Circuit& block,
                                           const DensityMatrix& rho,
                                           const OptimizerConfig& cfg) {
  ComplexMatrix scratch;
  const auto f = [&](std::span<const double> p) {
    scratch = rho.mat;
    apply_circuit_dm_inplace(block, p, scratch);
    return coherence_loss(scratch);
  };
  const std::vector<double> x0(block.n_params, 0.0);
  OptResult r = bfgs_minimize(f, x0, cfg);

  LocalStepResult out;
  out.params = std::move(r.best_params);
  out.loss = r.best_value;
  ComplexMatrix next = rho.mat;
  apply_circuit_dm_inplace(block, out.params, next);
  out.rho_next = DensityMatrix::from_matrix(rho.n_qubits, std::move(next));
  return out;
}

/// Pure-state fast path of optimize_local_step (identical optimum for
/// rho = |psi><psi|).
inline LocalStepResultPure optimize_local_step_pure(
    const Circuit& block, const ComplexVector& psi,
    const OptimizerConfig& cfg) {
  ComplexVector scratch;
  const auto f = [&](std::span<const double> p) {
    scratch = psi;
    apply_circuit_inplace(block, p, scratch);
    return coherence_loss_pure(scratch);
  };
  const std::vector<double> x0(block.n_params, 0.0);
  OptResult r = bfgs_minimize(f, x0, cfg);

  LocalStepResultPure out;
  out.params = std::move(r.best_params);
  out.loss = r.best_value;
  out.psi_next = psi;
  apply_circuit_inplace(block, out.params, out.psi_next);
  return out;
}

/// Re-optimize every parameter of the full circuit jointly against the
/// original target, warm-started from the concatenated per-step solutions.
/// The warm start is restart 0, so the result never exceeds its loss.
inline OptResult optimize_global(const Circuit& c, const DensityMatrix& rho_T,
                                 std::span<const double> warm_start,
                                 const OptimizerConfig& cfg) {
  ComplexMatrix scratch;
  const auto f = [&](std::span<const double> p) {
    scratch = rho_T.mat;
    apply_circuit_dm_inplace(c, p, scratch);
    return coherence_loss(scratch);
  };
  detail::check_params(c, warm_start);
  return bfgs_minimize(f, warm_start, cfg);
}

/// Pure-state fast path of optimize_global.
inline OptResult optimize_global_pure(const Circuit& c,
                                      const ComplexVector& psi_T,
                                      std::span<const double> warm_start,
                                      const OptimizerConfig& cfg) {
  ComplexVector scratch;
  const auto f = [&](std::span<const double> p) {
    scratch = psi_T;
    apply_circuit_inplace(c, p, scratch);
    return coherence_loss_pure(scratch);
  };
  detail::check_params(c, warm_start);
  return bfgs_minimize(f, warm_start, cfg);
}

/// Maximize |<psi_T| U_c |0...0>|^2 over the circuit parameters by
/// minimizing 1 - F; used for fixed preparation ansatz structures.
/// best_value is the infidelity, so fidelity = 1 - best_value.
inline OptResult optimize_fidelity(const Circuit& c, const PureState& psi_T,
                                   const OptimizerConfig& cfg) {
  if (c.n_qubits != psi_T.n_qubits) {
    throw std::invalid_argument("circuit and target qubit counts differ");
  }
  const ComplexVector zero = basis_state(c.n_qubits, 0).amps;
  ComplexVector scratch;
  const auto f = [&](std::span<const double> p) {
    scratch = zero;
    apply_circuit_inplace(c, p, scratch);
    const double overlap = std::norm(psi_T.amps.dot(scratch));
    return 1.0 - overlap;
  };
  const std::vector<double> x0(c.n_params, 0.0);
  return bfgs_minimize(f, x0, cfg);
}

}  // namespace qsynth
