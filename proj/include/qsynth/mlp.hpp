#pragma once

// Feed-forward network (rectifier hidden layers, linear output) with Adam
// training on a masked-output MSE loss, soft target-network averaging, and a
// finite-difference gradient audit. Batches are column-major: one sample per
// column, so every layer is a single GEMM.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qsynth/rng.hpp"

namespace qsynth {

struct Mlp {
  std::vector<int> layer_sizes;          // input, hidden..., output
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;   // biases[l] is sizes[l+1]

  int d_in() const { return layer_sizes.front(); }
  int d_out() const { return layer_sizes.back(); }
  int n_layers() const { return static_cast<int>(weights.size()); }

  /// Fan-in-scaled normal weights (std = sqrt(2 / fan_in)), zero biases.
  static Mlp init(const std::vector<int>& layer_sizes, Rng& rng) {
    if (layer_sizes.size() < 2) {
      throw std::invalid_argument("network needs at least input and output");
    }
    for (const int s : layer_sizes) {
      if (s < 1) throw std::invalid_argument("layer sizes must be positive");
    }
    Mlp net;
    net.layer_sizes = layer_sizes;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      const int rows = layer_sizes[l + 1];
      const int cols = layer_sizes[l];
      const double scale = std::sqrt(2.0 / cols);
      Eigen::MatrixXd w(rows, cols);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) w(i, j) = scale * rng.normal();
      }
      net.weights.push_back(std::move(w));
      net.biases.push_back(Eigen::VectorXd::Zero(rows));
    }
    return net;
  }

  /// One column per sample.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
    if (x.rows() != d_in()) {
      throw std::invalid_argument("input has " + std::to_string(x.rows()) +
                                  " rows, network expects " +
                                  std::to_string(d_in()));
    }
    Eigen::MatrixXd a = x;
    for (int l = 0; l < n_layers(); ++l) {
      a = (weights[l] * a).colwise() + biases[l];
      if (l + 1 < n_layers()) a = a.cwiseMax(0.0);
    }
    return a;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    return forward_batch(x);
  }
};

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;

  static AdamState for_net(const Mlp& net, double lr = 1e-4) {
    AdamState s;
    s.lr = lr;
    for (int l = 0; l < net.n_layers(); ++l) {
      s.m_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(),
                                            net.weights[l].cols()));
      s.v_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(),
                                            net.weights[l].cols()));
      s.m_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
      s.v_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return s;
  }
};

struct TrainStats {
  double loss = 0.0;   // masked MSE before the step, over kept samples
  int skipped = 0;     // samples dropped for non-finite targets
};

namespace detail {

struct BackpropResult {
  std::vector<Eigen::MatrixXd> grad_w;
  std::vector<Eigen::VectorXd> grad_b;
  double loss = 0.0;
  int kept = 0;
};

/// Masked-MSE backprop: only output action_indices[i] of sample i carries
/// loss; everything else has exactly zero gradient.
inline BackpropResult backprop_masked(const Mlp& net,
                                      const Eigen::MatrixXd& inputs,
                                      const std::vector<int>& action_indices,
                                      const std::vector<double>& targets) {
  const int batch = static_cast<int>(inputs.cols());
  if (static_cast<int>(action_indices.size()) != batch ||
      static_cast<int>(targets.size()) != batch) {
    throw std::invalid_argument("batch component lengths differ");
  }
  const int layers = net.n_layers();

  std::vector<Eigen::MatrixXd> acts(layers + 1);  // post-activation values
  acts[0] = inputs;
  for (int l = 0; l < layers; ++l) {
    acts[l + 1] = (net.weights[l] * acts[l]).colwise() + net.biases[l];
    if (l + 1 < layers) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
  }

  BackpropResult r;
  for (const double t : targets) r.kept += std::isfinite(t) ? 1 : 0;
  Eigen::MatrixXd delta =
      Eigen::MatrixXd::Zero(net.d_out(), batch);
  if (r.kept > 0) {
    for (int i = 0; i < batch; ++i) {
      if (!std::isfinite(targets[i])) continue;
      const int a = action_indices[i];
      if (a < 0 || a >= net.d_out()) {
        throw std::out_of_range("action index " + std::to_string(a) +
                                " outside network output");
      }
      const double diff = acts[layers](a, i) - targets[i];
      r.loss += diff * diff;
      delta(a, i) = 2.0 * diff / r.kept;
    }
    r.loss /= r.kept;
  }

  r.grad_w.resize(layers);
  r.grad_b.resize(layers);
  for (int l = layers - 1; l >= 0; --l) {
    r.grad_w[l] = delta * acts[l].transpose();
    r.grad_b[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (net.weights[l].transpose() * delta)
                  .cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return r;
}

inline void adam_apply(Eigen::MatrixXd& p, Eigen::MatrixXd& m,
                       Eigen::MatrixXd& v, const Eigen::MatrixXd& g,
                       const AdamState& s, double bc1, double bc2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  p.array() -=
      s.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps);
}

}  // namespace detail

/// One Adam step on the masked MSE over the batch; returns the pre-step
/// loss. Samples with non-finite targets are skipped and counted; a batch
/// with nothing left applies no update.
inline TrainStats train_batch(Mlp& net, AdamState& adam,
                              const Eigen::MatrixXd& inputs,
                              const std::vector<int>& action_indices,
                              const std::vector<double>& targets) {
  const auto bp =
      detail::backprop_masked(net, inputs, action_indices, targets);
  TrainStats stats;
  stats.loss = bp.loss;
  stats.skipped = static_cast<int>(targets.size()) - bp.kept;
  if (bp.kept == 0) return stats;

  adam.step += 1;
  const double bc1 = 1.0 - std::pow(adam.beta1, double(adam.step));
  const double bc2 = 1.0 - std::pow(adam.beta2, double(adam.step));
  for (int l = 0; l < net.n_layers(); ++l) {
    detail::adam_apply(net.weights[l], adam.m_w[l], adam.v_w[l], bp.grad_w[l],
                       adam, bc1, bc2);
    adam.m_b[l] = adam.beta1 * adam.m_b[l] + (1.0 - adam.beta1) * bp.grad_b[l];
    adam.v_b[l] = adam.beta2 * adam.v_b[l] +
                  (1.0 - adam.beta2) * bp.grad_b[l].cwiseProduct(bp.grad_b[l]);
    net.biases[l].array() -= adam.lr * (adam.m_b[l].array() / bc1) /
                             ((adam.v_b[l].array() / bc2).sqrt() + adam.eps);
  }
  return stats;
}

/// target <- (1 - tau) target + tau online, elementwise.
inline void polyak(Mlp& target, const Mlp& online, double tau) {
  if (target.layer_sizes != online.layer_sizes) {
    throw std::invalid_argument("polyak requires identical architectures");
  }
  if (!(tau > 0.0) || tau > 1.0) {
    throw std::invalid_argument("tau must lie in (0, 1]");
  }
  for (int l = 0; l < target.n_layers(); ++l) {
    target.weights[l] = (1.0 - tau) * target.weights[l] +
                        tau * online.weights[l];
    target.biases[l] = (1.0 - tau) * target.biases[l] +
                       tau * online.biases[l];
  }
}

/// Compare backprop to central finite differences on a single masked sample.
/// Error measure per entry: |bp - fd| / max(1, |bp|, |fd|), so it reads as a
/// relative error for large gradients and an absolute one near zero.
/// Checks every parameter if there are at most `max_checks`, otherwise a
/// random subsample of that size.
inline double gradient_check(Mlp& net, const Eigen::VectorXd& x,
                             int action_index, double target, Rng& rng,
                             int max_checks = 200) {
  const Eigen::MatrixXd input = x;
  const std::vector<int> actions = {action_index};
  const std::vector<double> targets = {target};
  const auto bp = detail::backprop_masked(net, input, actions, targets);

  const auto loss_at = [&]() {
    const double out = net.forward(x)(action_index);
    const double diff = out - target;
    return diff * diff;
  };
  const double h = 1e-6;

  std::int64_t total = 0;
  for (int l = 0; l < net.n_layers(); ++l) {
    total += net.weights[l].size() + net.biases[l].size();
  }

  const auto check_entry = [&](int l, bool is_bias, int i, int j) {
    double* p = is_bias ? &net.biases[l](i) : &net.weights[l](i, j);
    const double saved = *p;
    *p = saved + h;
    const double fp = loss_at();
    *p = saved - h;
    const double fm = loss_at();
    *p = saved;
    const double fd = (fp - fm) / (2.0 * h);
    const double ref = is_bias ? bp.grad_b[l](i) : bp.grad_w[l](i, j);
    return std::abs(ref - fd) /
           std::max({1.0, std::abs(ref), std::abs(fd)});
  };

  double worst = 0.0;
  if (total <= max_checks) {
    for (int l = 0; l < net.n_layers(); ++l) {
      for (int i = 0; i < net.weights[l].rows(); ++i) {
        for (int j = 0; j < net.weights[l].cols(); ++j) {
          worst = std::max(worst, check_entry(l, false, i, j));
        }
      }
      for (int i = 0; i < net.biases[l].size(); ++i) {
        worst = std::max(worst, check_entry(l, true, i, 0));
      }
    }
  } else {
    for (int k = 0; k < max_checks; ++k) {
      const int l = rng.uniform_int(0, net.n_layers() - 1);
      const int w_size = static_cast<int>(net.weights[l].size());
      const int b_size = static_cast<int>(net.biases[l].size());
      const int pick = rng.uniform_int(0, w_size + b_size - 1);
      if (pick < w_size) {
        const int rows = static_cast<int>(net.weights[l].rows());
        worst = std::max(worst, check_entry(l, false, pick % rows,
                                            pick / rows));
      } else {
        worst = std::max(worst, check_entry(l, true, pick - w_size, 0));
      }
    }
  }
  return worst;
}

// ---------- checkpointing ----------

/// {"layer_sizes": [...], "params": [flat]} with per-layer row-major weights
/// followed by that layer's biases.
inline nlohmann::json mlp_to_json(const Mlp& net) {
  std::vector<double> flat;
  for (int l = 0; l < net.n_layers(); ++l) {
    for (int i = 0; i < net.weights[l].rows(); ++i) {
      for (int j = 0; j < net.weights[l].cols(); ++j) {
        flat.push_back(net.weights[l](i, j));
      }
    }
    for (int i = 0; i < net.biases[l].size(); ++i) {
      flat.push_back(net.biases[l](i));
    }
  }
  return {{"layer_sizes", net.layer_sizes}, {"params", flat}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  if (!j.contains("layer_sizes") || !j.contains("params")) {
    throw std::invalid_argument("network record missing fields");
  }
  const auto sizes = j["layer_sizes"].get<std::vector<int>>();
  const auto flat = j["params"].get<std::vector<double>>();
  if (sizes.size() < 2) {
    throw std::invalid_argument("network needs at least input and output");
  }
  std::size_t expect = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] < 1 || sizes[l + 1] < 1) {
      throw std::invalid_argument("layer sizes must be positive");
    }
    expect += std::size_t(sizes[l + 1]) * sizes[l] + sizes[l + 1];
  }
  if (flat.size() != expect) {
    throw std::invalid_argument("parameter count does not match layer sizes");
  }
  Mlp net;
  net.layer_sizes = sizes;
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (int i = 0; i < w.rows(); ++i) {
      for (int j2 = 0; j2 < w.cols(); ++j2) w(i, j2) = flat[at++];
    }
    Eigen::VectorXd b(sizes[l + 1]);
    for (int i = 0; i < b.size(); ++i) b(i) = flat[at++];
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

}  // namespace qsynth
