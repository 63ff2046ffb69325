#include "qsynth/popt.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

namespace {

using namespace qsynth;

OptimizerConfig quick_cfg(int restarts = 3, std::uint64_t seed = 7) {
  OptimizerConfig cfg;
  cfg.restarts = restarts;
  cfg.seed = seed;
  return cfg;
}

TEST(Bfgs, QuadraticConvergesToMinimum) {
  const auto f = [](std::span<const double> x) {
    return (x[0] - 3.0) * (x[0] - 3.0);
  };
  const std::vector<double> x0 = {0.0};
  const OptResult r = bfgs_minimize(f, x0, quick_cfg(1));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.best_params[0], 3.0, 1e-6);
  EXPECT_NEAR(r.best_value, 0.0, 1e-12);
}

TEST(Bfgs, RosenbrockFromStandardStart) {
  const auto f = [](std::span<const double> x) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  const std::vector<double> x0 = {-1.2, 1.0};
  const OptResult r = bfgs_minimize(f, x0, quick_cfg(1));
  EXPECT_NEAR(r.best_params[0], 1.0, 1e-4);
  EXPECT_NEAR(r.best_params[1], 1.0, 1e-4);
}

TEST(Bfgs, ZeroDimensionalObjective) {
  const auto f = [](std::span<const double>) { return 4.25; };
  const OptResult r = bfgs_minimize(f, {}, quick_cfg());
  EXPECT_TRUE(r.best_params.empty());
  EXPECT_EQ(r.best_value, 4.25);
  EXPECT_TRUE(r.converged);
}

TEST(Bfgs, BestNeverExceedsStartValue) {
  // Multimodal objective; x0 sits at a local maximum.
  const auto f = [](std::span<const double> x) {
    return std::sin(3.0 * x[0]) + 0.1 * x[0] * x[0];
  };
  for (const double start : {0.52, -2.0, 3.0}) {
    const std::vector<double> x0 = {start};
    const OptResult r = bfgs_minimize(f, x0, quick_cfg(4));
    EXPECT_LE(r.best_value, f(std::span<const double>(x0)) + 1e-15);
  }
}

TEST(Bfgs, NonFiniteRegionsAbortOnlyThatRestart) {
  const auto f = [](std::span<const double> x) {
    if (std::abs(x[0]) > 2.0) return std::numeric_limits<double>::quiet_NaN();
    return (x[0] - 0.5) * (x[0] - 0.5);
  };
  const std::vector<double> x0 = {0.0};
  const OptResult r = bfgs_minimize(f, x0, quick_cfg(6));
  EXPECT_NEAR(r.best_params[0], 0.5, 1e-6);

  const std::vector<double> bad = {5.0};
  EXPECT_THROW(bfgs_minimize(f, bad, quick_cfg()), std::invalid_argument);
}

TEST(Bfgs, DeterministicForFixedSeed) {
  const auto f = [](std::span<const double> x) {
    return std::cos(x[0]) + std::sin(2.0 * x[1]) + 0.05 * x[0] * x[0] +
           0.05 * x[1] * x[1];
  };
  const std::vector<double> x0 = {1.0, -1.0};
  const OptResult a = bfgs_minimize(f, x0, quick_cfg(4, 99));
  const OptResult b = bfgs_minimize(f, x0, quick_cfg(4, 99));
  ASSERT_EQ(a.best_params.size(), b.best_params.size());
  for (std::size_t i = 0; i < a.best_params.size(); ++i) {
    EXPECT_EQ(a.best_params[i], b.best_params[i]);
  }
  EXPECT_EQ(a.best_value, b.best_value);
  EXPECT_EQ(a.iters_used, b.iters_used);
}

TEST(Bfgs, InvalidConfigThrows) {
  const auto f = [](std::span<const double> x) { return x[0] * x[0]; };
  const std::vector<double> x0 = {1.0};
  OptimizerConfig cfg;
  cfg.grad_step = 0.0;
  EXPECT_THROW(bfgs_minimize(f, x0, cfg), std::invalid_argument);
  cfg = OptimizerConfig{};
  cfg.restarts = 0;
  EXPECT_THROW(bfgs_minimize(f, x0, cfg), std::invalid_argument);
}

TEST(GradientCheck, CentralDiffTracksRichardsonExtrapolation) {
  // The optimizer's gradients must behave like O(h^2) central differences:
  // comparing against the Richardson-extrapolated estimate at random points
  // bounds the truncation error.
  Rng rng(41);
  Circuit c(2);
  append_rotation_layer(c);
  append_action_block(c, 0, 1);
  const PureState target = haar_state(2, rng);
  ComplexVector scratch;
  const auto f = [&](std::vector<double> p) {
    scratch = target.amps;
    apply_circuit_inplace(c, p, scratch);
    return coherence_loss_pure(scratch);
  };

  const double h = 1e-5;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> p(c.n_params);
    for (auto& v : p) v = rng.uniform(-std::numbers::pi, std::numbers::pi);
    for (int i = 0; i < c.n_params; ++i) {
      const auto diff = [&](double step) {
        std::vector<double> q = p;
        q[i] = p[i] + step;
        const double fp = f(q);
        q[i] = p[i] - step;
        const double fm = f(q);
        return (fp - fm) / (2.0 * step);
      };
      const double d_h = diff(h);
      const double d_h2 = diff(h / 2.0);
      const double richardson = (4.0 * d_h2 - d_h) / 3.0;
      EXPECT_LE(std::abs(d_h - richardson),
                1e-5 * std::max(1.0, std::abs(richardson)));
    }
  }
}

// ---------- local step ----------

TEST(LocalStep, DiagonalStateAlreadyOptimal) {
  Circuit block(2);
  append_action_block(block, 0, 1);
  const DensityMatrix rho = DensityMatrix::from_pure(basis_state(2, 2));
  const LocalStepResult r = optimize_local_step(block, rho, quick_cfg(1));
  EXPECT_LT(r.loss, 1e-12);
  EXPECT_EQ(static_cast<int>(r.params.size()), block.n_params);
  // CNOT(0,1) maps |10> to |11>.
  EXPECT_NEAR(r.rho_next.mat(3, 3).real(), 1.0, 1e-9);
}

TEST(LocalStep, SingleQubitHaarStateDiagonalizes) {
  Rng rng(42);
  Circuit block(1);
  append_rotation_layer(block);
  for (int trial = 0; trial < 5; ++trial) {
    const DensityMatrix rho = DensityMatrix::from_pure(haar_state(1, rng));
    const LocalStepResult r = optimize_local_step(block, rho, quick_cfg());
    EXPECT_LT(r.loss, 1e-9);
  }
}

TEST(LocalStep, BellStateNeedsOneEntanglingBlock) {
  ComplexVector bell = ComplexVector::Zero(4);
  bell[0] = bell[3] = 1.0 / std::sqrt(2.0);
  Circuit block(2);
  append_action_block(block, 0, 1);
  const LocalStepResult r = optimize_local_step(
      block, DensityMatrix::from_pure(PureState(2, bell)), quick_cfg());
  EXPECT_LT(r.loss, 1e-9);
}

TEST(LocalStep, PureAndDensityPathsReachTheSameLoss) {
  Rng rng(43);
  Circuit block(2);
  append_action_block(block, 1, 0);
  for (int trial = 0; trial < 3; ++trial) {
    const PureState psi = haar_state(2, rng);
    const LocalStepResult dense =
        optimize_local_step(block, DensityMatrix::from_pure(psi), quick_cfg());
    const LocalStepResultPure pure =
        optimize_local_step_pure(block, psi.amps, quick_cfg());
    EXPECT_NEAR(dense.loss, pure.loss, 1e-9);
    EXPECT_NEAR(coherence_loss_pure(pure.psi_next), pure.loss, 1e-12);
  }
}

// ---------- global refinement ----------

TEST(Global, NeverWorseThanChainedLocalSolutions) {
  Rng rng(44);
  OptimizerConfig local_cfg = quick_cfg(2);
  OptimizerConfig global_cfg = quick_cfg(2);
  global_cfg.max_iters = 150;

  int strictly_better = 0;
  for (int episode = 0; episode < 100; ++episode) {
    const PureState target = haar_state(3, rng);
    const int blocks = 1 + static_cast<int>(rng.uniform_int(0, 2));

    Circuit full(3);
    append_rotation_layer(full);
    std::vector<double> warm;
    ComplexVector psi = target.amps;
    {
      Circuit frag(3);
      append_rotation_layer(frag);
      auto r = optimize_local_step_pure(frag, psi, local_cfg);
      warm.insert(warm.end(), r.params.begin(), r.params.end());
      psi = std::move(r.psi_next);
    }
    double local_loss = coherence_loss_pure(psi);
    for (int b = 0; b < blocks; ++b) {
      const int control = static_cast<int>(rng.uniform_int(0, 2));
      int target_q = static_cast<int>(rng.uniform_int(0, 1));
      if (target_q >= control) ++target_q;
      append_action_block(full, control, target_q);
      Circuit frag(3);
      append_action_block(frag, control, target_q);
      auto r = optimize_local_step_pure(frag, psi, local_cfg);
      warm.insert(warm.end(), r.params.begin(), r.params.end());
      psi = std::move(r.psi_next);
      local_loss = r.loss;
    }

    const OptResult g = optimize_global_pure(full, target.amps, warm,
                                             global_cfg);
    EXPECT_LE(g.best_value, local_loss + 1e-12);
    if (g.best_value < local_loss - 1e-9) ++strictly_better;
  }
  // Joint refinement should genuinely help on a fair share of episodes.
  EXPECT_GT(strictly_better, 10);
}

TEST(Global, LossUnaffectedByGlobalPhaseOnTarget) {
  Rng rng(45);
  Circuit c(2);
  append_rotation_layer(c);
  append_action_block(c, 0, 1);
  const PureState psi = haar_state(2, rng);
  const std::vector<double> warm(c.n_params, 0.0);

  const Complex phase = std::exp(Complex(0.0, 1.234));
  const OptResult plain =
      optimize_global_pure(c, psi.amps, warm, quick_cfg(2));
  const OptResult rotated =
      optimize_global_pure(c, phase * psi.amps, warm, quick_cfg(2));
  EXPECT_NEAR(plain.best_value, rotated.best_value, 1e-8);

  const OptResult dense = optimize_global(c, DensityMatrix::from_pure(psi),
                                          warm, quick_cfg(2));
  EXPECT_NEAR(dense.best_value, plain.best_value, 1e-9);
}

TEST(Global, ZeroGateCircuitOnDiagonalTarget) {
  Circuit c(2);
  const OptResult r = optimize_global(
      c, DensityMatrix::from_pure(basis_state(2, 1)), {}, quick_cfg());
  EXPECT_EQ(r.best_value, 0.0);
  EXPECT_TRUE(r.best_params.empty());
}

// ---------- fidelity objective ----------

TEST(FidelityObjective, ZeroTargetIsImmediate) {
  Circuit c(4);
  append_rotation_layer(c);
  append_action_block(c, 0, 1);
  append_action_block(c, 2, 3);
  const OptResult r =
      optimize_fidelity(c, basis_state(4, 0), quick_cfg(1));
  EXPECT_LT(r.best_value, 1e-8);  // all-zero angles already prepare |0000>
}

TEST(FidelityObjective, OneCnotPreparesAnyTwoQubitState) {
  Rng rng(46);
  Circuit c(2);
  append_rotation_layer(c);
  append_action_block(c, 0, 1);
  for (int trial = 0; trial < 3; ++trial) {
    const PureState target = haar_state(2, rng);
    const OptResult r = optimize_fidelity(c, target, quick_cfg(4));
    EXPECT_LT(r.best_value, 1e-6);
  }
}

TEST(FidelityObjective, QubitCountMismatchThrows) {
  Circuit c(2);
  append_rotation_layer(c);
  EXPECT_THROW(optimize_fidelity(c, basis_state(3, 0), quick_cfg()),
               std::invalid_argument);
}

}  // namespace
