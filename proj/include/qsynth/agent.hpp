#pragma once

// Double-DQN machinery: network-input encoding of (state, action history),
// uniform replay, epsilon-greedy selection with prioritized exploration,
// double-Q target computation with legal-action masking, and the threshold /
// input-scaling schedules that shape training.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsynth/circuit.hpp"
#include "qsynth/mlp.hpp"
#include "qsynth/qcore.hpp"
#include "qsynth/rng.hpp"

namespace qsynth {

// ---------- input encoding ----------

struct EncoderSpec {
  int n_qubits = 0;
  int d_out = 0;        // action-catalogue size (CNOTs + STOP)
  int max_actions = 0;  // episode step cap M
  double c_in = 1.0;    // history-feature scaling

  int key_width() const {
    int w = 1;
    while ((1 << w) < d_out) ++w;
    return w;
  }

  int dim() const { return 1 << n_qubits; }

  int d_in() const {
    const int d = dim();
    return 2 * d * d + max_actions * key_width();
  }

  void validate() const {
    check_qubit_count(n_qubits);
    if (d_out < 1) throw std::invalid_argument("d_out must be positive");
    if (max_actions < 1) {
      throw std::invalid_argument("max_actions must be positive");
    }
    if (c_in < 0.0) throw std::invalid_argument("c_in must be nonnegative");
  }
};

/// Zero-mean binary key of an action index: the index's bits, most
/// significant first, mapped 0 -> -0.5 and 1 -> +0.5.
inline Eigen::VectorXd action_key(int index, int width) {
  if (width < 1) throw std::invalid_argument("key width must be positive");
  if (index < 0 || (width < 31 && index >= (1 << width))) {
    throw std::invalid_argument("action index does not fit key width");
  }
  Eigen::VectorXd key(width);
  for (int b = 0; b < width; ++b) {
    key(b) = ((index >> (width - 1 - b)) & 1) ? 0.5 : -0.5;
  }
  return key;
}

namespace detail {

template <typename EntryFn>
Eigen::VectorXd encode_with(EntryFn&& entry, const std::vector<int>& history,
                            const EncoderSpec& spec) {
  spec.validate();
  if (static_cast<int>(history.size()) > spec.max_actions) {
    throw std::invalid_argument("action history exceeds episode cap");
  }
  const int d = spec.dim();
  const int w = spec.key_width();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.d_in());
  const double off = 1.0 / d;
  int at = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      x(at++) = entry(i, j).real() - (i == j ? off : 0.0);
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) x(at++) = entry(i, j).imag();
  }
  for (const int a : history) {
    if (a < 0 || a >= spec.d_out) {
      throw std::invalid_argument("history contains an invalid action");
    }
    x.segment(at, w) = spec.c_in * action_key(a, w);
    at += w;
  }
  return x;
}

}  // namespace detail

/// Network input: Re vec(rho - I/d) row-major, then Im vec(rho - I/d), then
/// c_in-scaled keys of the taken actions in order, zero-padded to M keys.
inline Eigen::VectorXd encode_input(const DensityMatrix& rho,
                                    const std::vector<int>& history,
                                    const EncoderSpec& spec) {
  if (rho.n_qubits != spec.n_qubits) {
    throw std::invalid_argument("state and encoder qubit counts differ");
  }
  return detail::encode_with(
      [&](int i, int j) { return rho.mat(i, j); }, history, spec);
}

/// Pure-state overload; identical to encoding |psi><psi|.
inline Eigen::VectorXd encode_input(const ComplexVector& amps,
                                    const std::vector<int>& history,
                                    const EncoderSpec& spec) {
  if (amps.size() != spec.dim()) {
    throw std::invalid_argument("state and encoder dimensions differ");
  }
  return detail::encode_with(
      [&](int i, int j) { return amps(i) * std::conj(amps(j)); }, history,
      spec);
}

// ---------- replay ----------

/// One environment step. States are pure throughout (unitary evolution of a
/// pure target), so amplitudes are stored and the density-matrix view is
/// reconstructed at encoding time.
struct Transition {
  ComplexVector state_amps;
  std::vector<int> history;
  int action = -1;
  double reward = 0.0;
  ComplexVector next_amps;
  std::vector<int> next_history;
  std::vector<std::uint8_t> next_legal;
  bool terminal = false;
};

/// Fixed-capacity ring with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("capacity must be positive");
  }

  void push(Transition t) {
    if (static_cast<int>(store_.size()) < capacity_) {
      store_.push_back(std::move(t));
    } else {
      store_[next_] = std::move(t);
      next_ = (next_ + 1) % capacity_;
    }
    ++inserted_;
  }

  int size() const { return static_cast<int>(store_.size()); }
  std::int64_t inserted() const { return inserted_; }
  const Transition& operator[](int i) const { return store_.at(i); }

  int sample_index(Rng& rng) const {
    if (store_.empty()) throw std::out_of_range("replay buffer is empty");
    return rng.uniform_int(0, size() - 1);
  }

 private:
  int capacity_;
  std::vector<Transition> store_;
  int next_ = 0;
  std::int64_t inserted_ = 0;
};

// ---------- configuration ----------

struct AgentConfig {
  double gamma = 0.95;

  double eps_start = 1.0;
  double eps_end = 0.05;
  std::int64_t eps_anneal_episodes = 10000;
  double p_prior = 0.5;
  int top_q = 3;

  double c_r = 1.0;           // reward scale on the final fidelity
  double t_f_initial = 0.5;   // starting infidelity threshold
  double t_f_target = 1e-3;   // threshold floor
  double t_f_decay = 0.9;
  double success_criterion = 0.9;
  int success_window = 100;

  double c_in_initial = 1.0;
  double c_in_factor = 0.5;
  int c_in_period = 2000;  // episodes at the floor between c_in steps

  std::vector<int> hidden = {512, 512};
  double lr = 1e-4;
  int batch = 64;
  double tau = 0.01;  // 0 freezes the target net
  int buffer_capacity = 100000;
  int warmup = 1000;      // stored transitions before updates begin
  int update_period = 1;  // environment steps between updates
  int max_actions = -1;   // episode cap M; -1 means 3 * n_qubits

  void validate() const {
    const auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument(std::string(name) + " must be in [0,1]");
      }
    };
    if (!(gamma > 0.0 && gamma < 1.0)) {
      throw std::invalid_argument("gamma must be in (0,1)");
    }
    prob(eps_start, "eps_start");
    prob(eps_end, "eps_end");
    prob(p_prior, "p_prior");
    prob(success_criterion, "success_criterion");
    prob(tau, "tau");
    if (top_q < 1) throw std::invalid_argument("top_q must be positive");
    if (!(t_f_initial > 0.0) || !(t_f_target > 0.0) ||
        t_f_target > t_f_initial) {
      throw std::invalid_argument("thresholds must satisfy 0 < floor <= start");
    }
    if (!(t_f_decay > 0.0 && t_f_decay < 1.0)) {
      throw std::invalid_argument("t_f_decay must be in (0,1)");
    }
    if (success_window < 1) {
      throw std::invalid_argument("success_window must be positive");
    }
    if (c_in_initial < 0.0 || c_in_factor < 0.0 || c_in_factor > 1.0) {
      throw std::invalid_argument("c_in schedule out of range");
    }
    if (c_in_period < 1) {
      throw std::invalid_argument("c_in_period must be positive");
    }
    if (batch < 1 || buffer_capacity < 1 || warmup < 0 || update_period < 1) {
      throw std::invalid_argument("training cadence out of range");
    }
    if (max_actions != -1 && max_actions < 1) {
      throw std::invalid_argument("max_actions must be positive or -1");
    }
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  }
};

/// Linear anneal from eps_start to eps_end over eps_anneal_episodes.
inline double anneal_epsilon(const AgentConfig& cfg, std::int64_t episode) {
  if (cfg.eps_anneal_episodes <= 0 || episode >= cfg.eps_anneal_episodes) {
    return cfg.eps_end;
  }
  const double frac = double(episode) / double(cfg.eps_anneal_episodes);
  return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start);
}

// ---------- action selection ----------

/// STOP (last index) is always legal; CNOT actions are legal until an active
/// budget is exhausted. budget < 0 means unbounded.
inline std::vector<std::uint8_t> legal_action_mask(int d_out, int cnots_used,
                                                   int cnot_budget) {
  if (d_out < 1) throw std::invalid_argument("d_out must be positive");
  std::vector<std::uint8_t> legal(d_out, 1);
  if (cnot_budget >= 0 && cnots_used >= cnot_budget) {
    std::fill(legal.begin(), legal.end() - 1, 0);
  }
  return legal;
}

/// Epsilon-greedy with prioritized exploration: with probability
/// eps*p_prior sample uniformly from the top_q legal actions by Q-value,
/// with probability eps*(1-p_prior) uniformly from all legal actions,
/// otherwise take the legal argmax (ties resolve to the lowest index).
inline int select_action(const Eigen::VectorXd& qvals,
                         const std::vector<std::uint8_t>& legal, double eps,
                         double p_prior, int top_q, Rng& rng) {
  if (qvals.size() != static_cast<Eigen::Index>(legal.size())) {
    throw std::invalid_argument("mask and Q-vector lengths differ");
  }
  if (top_q < 1) throw std::invalid_argument("top_q must be positive");
  std::vector<int> candidates;
  for (int i = 0; i < static_cast<int>(legal.size()); ++i) {
    if (legal[i]) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw std::invalid_argument("no legal action available");
  }

  const double u = rng.uniform();
  if (u < eps * p_prior) {
    std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
      return qvals(a) != qvals(b) ? qvals(a) > qvals(b) : a < b;
    });
    const int k = std::min<int>(top_q, static_cast<int>(candidates.size()));
    return candidates[rng.uniform_int(0, k - 1)];
  }
  if (u < eps) {
    return candidates[rng.uniform_int(
        0, static_cast<int>(candidates.size()) - 1)];
  }
  int best = candidates.front();
  for (const int i : candidates) {
    if (qvals(i) > qvals(best)) best = i;
  }
  return best;
}

// ---------- double-Q targets and updates ----------

/// Q_target = r for terminal transitions, else
/// r + gamma * Q_target-net(s', argmax over legal a of Q_online(s', a)).
inline std::vector<double> compute_q_targets(
    const std::vector<const Transition*>& batch, const Mlp& online,
    const Mlp& target_net, double gamma, const EncoderSpec& spec) {
  if (online.layer_sizes != target_net.layer_sizes) {
    throw std::invalid_argument("online and target architectures differ");
  }
  std::vector<double> targets(batch.size());
  std::vector<int> open;  // indices of non-terminal transitions
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->terminal) {
      targets[i] = batch[i]->reward;
    } else {
      open.push_back(static_cast<int>(i));
    }
  }
  if (open.empty()) return targets;

  Eigen::MatrixXd next(spec.d_in(), open.size());
  for (std::size_t c = 0; c < open.size(); ++c) {
    const Transition& t = *batch[open[c]];
    next.col(c) = encode_input(t.next_amps, t.next_history, spec);
  }
  const Eigen::MatrixXd q_online = online.forward_batch(next);
  const Eigen::MatrixXd q_target = target_net.forward_batch(next);

  for (std::size_t c = 0; c < open.size(); ++c) {
    const Transition& t = *batch[open[c]];
    if (static_cast<int>(t.next_legal.size()) != spec.d_out) {
      throw std::invalid_argument("transition legal mask has wrong size");
    }
    int best = -1;
    for (int a = 0; a < spec.d_out; ++a) {
      if (!t.next_legal[a]) continue;
      if (best < 0 || q_online(a, c) > q_online(best, c)) best = a;
    }
    if (best < 0) {
      throw std::invalid_argument("transition has no legal next action");
    }
    targets[open[c]] = t.reward + gamma * q_target(best, c);
  }
  return targets;
}

struct UpdateResult {
  bool applied = false;
  double loss = 0.0;
  int skipped = 0;
};

/// One DDQN update: uniform batch draw (the only randomness, consumed as
/// cfg.batch uniform_int calls), states encoded with the current c_in,
/// targets via double-Q, one Adam step, then polyak averaging (skipped when
/// tau is 0, which freezes the target net). No-op when the buffer holds
/// fewer than cfg.batch transitions.
inline UpdateResult update(ReplayBuffer& buffer, Mlp& online, Mlp& target_net,
                           AdamState& adam, const AgentConfig& cfg,
                           const EncoderSpec& spec, Rng& rng) {
  if (buffer.size() < cfg.batch) return {};

  std::vector<const Transition*> batch(cfg.batch);
  for (int i = 0; i < cfg.batch; ++i) {
    batch[i] = &buffer[buffer.sample_index(rng)];
  }

  Eigen::MatrixXd inputs(spec.d_in(), cfg.batch);
  std::vector<int> actions(cfg.batch);
  for (int i = 0; i < cfg.batch; ++i) {
    inputs.col(i) = encode_input(batch[i]->state_amps, batch[i]->history,
                                 spec);
    actions[i] = batch[i]->action;
  }
  const std::vector<double> targets =
      compute_q_targets(batch, online, target_net, cfg.gamma, spec);

  const TrainStats stats =
      train_batch(online, adam, inputs, actions, targets);
  if (cfg.tau > 0.0) polyak(target_net, online, cfg.tau);
  return {true, stats.loss, stats.skipped};
}

// ---------- schedules ----------

/// Rolling window of final-episode infidelities; success is measured against
/// whatever threshold is current, so a tightened threshold immediately
/// lowers the observed rate.
class RollingSuccess {
 public:
  explicit RollingSuccess(int window) : window_(window) {
    if (window < 1) throw std::invalid_argument("window must be positive");
  }

  void record(double infidelity) {
    vals_.push_back(infidelity);
    if (static_cast<int>(vals_.size()) > window_) vals_.pop_front();
  }

  bool full() const { return static_cast<int>(vals_.size()) == window_; }

  double rate_below(double t_f) const {
    if (vals_.empty()) return 0.0;
    int hits = 0;
    for (const double v : vals_) hits += v < t_f ? 1 : 0;
    return double(hits) / double(vals_.size());
  }

 private:
  int window_;
  std::deque<double> vals_;
};

/// Exponential threshold decay once the rolling success rate at the current
/// threshold meets the criterion; clamped at the floor. Monotone
/// non-increasing.
inline double schedule_threshold(const RollingSuccess& stats,
                                 const AgentConfig& cfg, double t_f) {
  if (!stats.full()) return t_f;
  if (stats.rate_below(t_f) < cfg.success_criterion) return t_f;
  return std::max(t_f * cfg.t_f_decay, cfg.t_f_target);
}

/// Stepped c_in decay: fires every c_in_period episodes, counted only after
/// the threshold has reached its floor. Monotone non-increasing.
inline double schedule_cin(std::int64_t episodes_at_floor,
                           const AgentConfig& cfg, double c_in) {
  if (episodes_at_floor <= 0) return c_in;
  if (episodes_at_floor % cfg.c_in_period != 0) return c_in;
  return c_in * cfg.c_in_factor;
}

// ---------- the assembled agent ----------

struct Agent {
  AgentConfig cfg;
  EncoderSpec spec;  // spec.c_in mutates as the schedule fires
  ConnectivityGraph graph;
  ActionSet actions;
  Mlp online;
  Mlp target;
  AdamState adam;
  ReplayBuffer buffer{1};

  // training progress
  double t_f = 0.0;
  double eps = 0.0;
  std::int64_t episodes_done = 0;
  std::int64_t episodes_at_floor = 0;
};

inline Agent make_agent(const AgentConfig& cfg, const ConnectivityGraph& graph,
                        Rng& rng) {
  cfg.validate();
  Agent agent;
  agent.cfg = cfg;
  agent.graph = graph;
  agent.actions = build_action_set(graph);
  agent.spec.n_qubits = graph.n_qubits;
  agent.spec.d_out = agent.actions.size();
  agent.spec.max_actions =
      cfg.max_actions > 0 ? cfg.max_actions : 3 * graph.n_qubits;
  agent.spec.c_in = cfg.c_in_initial;
  agent.spec.validate();

  std::vector<int> sizes = {agent.spec.d_in()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(agent.spec.d_out);
  agent.online = Mlp::init(sizes, rng);
  agent.target = agent.online;
  agent.adam = AdamState::for_net(agent.online, cfg.lr);
  agent.buffer = ReplayBuffer(cfg.buffer_capacity);
  agent.t_f = cfg.t_f_initial;
  agent.eps = cfg.eps_start;
  return agent;
}

// ---------- checkpointing ----------

inline nlohmann::json agent_config_to_json(const AgentConfig& c) {
  return {{"gamma", c.gamma},
          {"eps_start", c.eps_start},
          {"eps_end", c.eps_end},
          {"eps_anneal_episodes", c.eps_anneal_episodes},
          {"p_prior", c.p_prior},
          {"top_q", c.top_q},
          {"c_r", c.c_r},
          {"t_f_initial", c.t_f_initial},
          {"t_f_target", c.t_f_target},
          {"t_f_decay", c.t_f_decay},
          {"success_criterion", c.success_criterion},
          {"success_window", c.success_window},
          {"c_in_initial", c.c_in_initial},
          {"c_in_factor", c.c_in_factor},
          {"c_in_period", c.c_in_period},
          {"hidden", c.hidden},
          {"lr", c.lr},
          {"batch", c.batch},
          {"tau", c.tau},
          {"buffer_capacity", c.buffer_capacity},
          {"warmup", c.warmup},
          {"update_period", c.update_period},
          {"max_actions", c.max_actions}};
}

inline AgentConfig agent_config_from_json(const nlohmann::json& j) {
  AgentConfig c;
  c.gamma = j.at("gamma").get<double>();
  c.eps_start = j.at("eps_start").get<double>();
  c.eps_end = j.at("eps_end").get<double>();
  c.eps_anneal_episodes = j.at("eps_anneal_episodes").get<std::int64_t>();
  c.p_prior = j.at("p_prior").get<double>();
  c.top_q = j.at("top_q").get<int>();
  c.c_r = j.at("c_r").get<double>();
  c.t_f_initial = j.at("t_f_initial").get<double>();
  c.t_f_target = j.at("t_f_target").get<double>();
  c.t_f_decay = j.at("t_f_decay").get<double>();
  c.success_criterion = j.at("success_criterion").get<double>();
  c.success_window = j.at("success_window").get<int>();
  c.c_in_initial = j.at("c_in_initial").get<double>();
  c.c_in_factor = j.at("c_in_factor").get<double>();
  c.c_in_period = j.at("c_in_period").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.lr = j.at("lr").get<double>();
  c.batch = j.at("batch").get<int>();
  c.tau = j.at("tau").get<double>();
  c.buffer_capacity = j.at("buffer_capacity").get<int>();
  c.warmup = j.at("warmup").get<int>();
  c.update_period = j.at("update_period").get<int>();
  c.max_actions = j.at("max_actions").get<int>();
  c.validate();
  return c;
}

/// Versioned checkpoint: both nets, configuration, encoder, graph, and the
/// training progress variables. Replay contents and Adam moments are not
/// persisted.
inline nlohmann::json agent_to_json(const Agent& a) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [x, y] : a.graph.edges) edges.push_back({x, y});
  return {{"format", "qsynth-agent"},
          {"version", 1},
          {"config", agent_config_to_json(a.cfg)},
          {"encoder",
           {{"n_qubits", a.spec.n_qubits},
            {"d_out", a.spec.d_out},
            {"max_actions", a.spec.max_actions},
            {"c_in", a.spec.c_in}}},
          {"graph", {{"n_qubits", a.graph.n_qubits}, {"edges", edges}}},
          {"progress",
           {{"t_f", a.t_f},
            {"eps", a.eps},
            {"episodes_done", a.episodes_done},
            {"episodes_at_floor", a.episodes_at_floor}}},
          {"online", mlp_to_json(a.online)},
          {"target", mlp_to_json(a.target)}};
}

inline Agent agent_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "qsynth-agent" || j.value("version", 0) != 1) {
    throw std::invalid_argument("not a version-1 agent checkpoint");
  }
  Agent a;
  a.cfg = agent_config_from_json(j.at("config"));

  const auto& jg = j.at("graph");
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : jg.at("edges")) {
    edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  }
  a.graph = ConnectivityGraph(jg.at("n_qubits").get<int>(), std::move(edges));
  a.actions = build_action_set(a.graph);

  const auto& je = j.at("encoder");
  a.spec.n_qubits = je.at("n_qubits").get<int>();
  a.spec.d_out = je.at("d_out").get<int>();
  a.spec.max_actions = je.at("max_actions").get<int>();
  a.spec.c_in = je.at("c_in").get<double>();
  a.spec.validate();
  if (a.spec.d_out != a.actions.size()) {
    throw std::invalid_argument("encoder and graph action counts differ");
  }

  a.online = mlp_from_json(j.at("online"));
  a.target = mlp_from_json(j.at("target"));
  if (a.online.d_in() != a.spec.d_in() ||
      a.online.d_out() != a.spec.d_out ||
      a.online.layer_sizes != a.target.layer_sizes) {
    throw std::invalid_argument("checkpoint network shapes are inconsistent");
  }
  a.adam = AdamState::for_net(a.online, a.cfg.lr);
  a.buffer = ReplayBuffer(a.cfg.buffer_capacity);

  const auto& jp = j.at("progress");
  a.t_f = jp.at("t_f").get<double>();
  a.eps = jp.at("eps").get<double>();
  a.episodes_done = jp.at("episodes_done").get<std::int64_t>();
  a.episodes_at_floor = jp.at("episodes_at_floor").get<std::int64_t>();
  return a;
}

}  // namespace qsynth
