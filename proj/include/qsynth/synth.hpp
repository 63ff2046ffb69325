#pragma once

// Episode environment and orchestration: rollout of the diagonalization
// episode (local rotation layer, Q-guided CNOT selection, per-step local
// optimization, final joint optimization, basis correction), the training
// loop with target-structure sampling and schedules, greedy evaluation,
// deployment-time circuit generation (inverted for preparation), the
// exhaustive small-instance search, and the W-state ladder ansatz.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsynth/agent.hpp"
#include "qsynth/circuit.hpp"
#include "qsynth/io.hpp"
#include "qsynth/popt.hpp"
#include "qsynth/qcore.hpp"
#include "qsynth/rng.hpp"

namespace qsynth {

// ---------- episode rollout ----------

struct EpisodeOptions {
  bool explore = true;  // false: pure greedy (selection noise off)
  int cnot_budget = -1;  // >= 0 caps CNOT actions via the legal mask
  std::vector<int> forced_actions;  // override policy while entries remain
  OptimizerConfig local_opt{.max_iters = 200, .restarts = 2};
  OptimizerConfig global_opt{.max_iters = 300, .restarts = 2};
};

struct EpisodeRecord {
  ComplexVector target;  // input amplitudes
  std::vector<Transition> transitions;
  Circuit circuit;  // diagonalizing direction, incl. basis correction
  std::vector<double> params;
  double fidelity = 0.0;  // largest diagonal weight after joint refinement
  double local_fidelity = 0.0;  // same readout from per-step params only
  int cnots = 0;
  double reward = 0.0;  // terminal reward actually assigned
  bool failed = false;  // an optimizer call threw; reward forced to 0
};

/// One full episode on a pure target: rotate, pick CNOTs until STOP / the
/// action limit / the budget, locally optimizing each block, then jointly
/// re-optimize every angle and append the X-gate correction mapping the
/// dominant basis state to |0...0>. The joint parameter set is kept only
/// when its readout is at least as good as the chained local one, so the
/// recorded fidelity never drops below the local-only value. All optimizer
/// seeds are drawn from `rng`, keeping episodes deterministic under a seed.
inline EpisodeRecord run_episode(const ComplexVector& target_amps,
                                 const Agent& agent,
                                 const EpisodeOptions& opts, Rng& rng) {
  const int n = agent.spec.n_qubits;
  if (target_amps.size() != static_cast<Eigen::Index>(check_qubit_count(n))) {
    throw std::invalid_argument("target dimension does not match agent");
  }
  const int d_out = agent.spec.d_out;
  const int max_actions = agent.spec.max_actions;
  int forced_cnots = 0;
  for (int a : opts.forced_actions) {
    if (a < 0 || a >= d_out) {
      throw std::invalid_argument("forced action index out of range");
    }
    if (a == d_out - 1) break;  // entries after a forced STOP are unused
    ++forced_cnots;
  }
  if (opts.cnot_budget >= 0 &&
      std::min(forced_cnots, max_actions) > opts.cnot_budget) {
    throw std::invalid_argument("forced actions violate the budget");
  }

  EpisodeRecord rec;
  rec.target = target_amps;
  rec.circuit = Circuit(n);

  ComplexVector psi = target_amps;
  std::vector<double> warm;
  std::vector<int> history;

  const auto seeded = [&rng](OptimizerConfig cfg) {
    cfg.seed = rng.raw();
    return cfg;
  };

  try {
    // Initial local rotation layer, optimized on its own.
    append_rotation_layer(rec.circuit);
    {
      Circuit layer(n);
      append_rotation_layer(layer);
      auto r = optimize_local_step_pure(layer, psi, seeded(opts.local_opt));
      warm = std::move(r.params);
      psi = std::move(r.psi_next);
    }

    for (int k = 1; k <= max_actions; ++k) {
      const auto legal = legal_action_mask(d_out, rec.cnots, opts.cnot_budget);
      int a;
      if (k - 1 < static_cast<int>(opts.forced_actions.size())) {
        a = opts.forced_actions[k - 1];
      } else {
        const Eigen::VectorXd q =
            agent.online.forward(encode_input(psi, history, agent.spec));
        const double eps = opts.explore ? agent.eps : 0.0;
        a = select_action(q, legal, eps, agent.cfg.p_prior, agent.cfg.top_q,
                          rng);
      }

      Transition t;
      t.state_amps = psi;
      t.history = history;
      t.action = a;

      if (a == agent.actions.stop_index()) {
        t.next_amps = psi;
        t.next_history = history;
        t.next_legal = legal;
        t.terminal = true;
        rec.transitions.push_back(std::move(t));
        break;
      }

      const Action& act = agent.actions[a];
      append_action_block(rec.circuit, act.control, act.target);
      Circuit block(n);
      append_action_block(block, act.control, act.target);
      auto r = optimize_local_step_pure(block, psi, seeded(opts.local_opt));
      warm.insert(warm.end(), r.params.begin(), r.params.end());
      psi = std::move(r.psi_next);
      ++rec.cnots;
      history.push_back(a);

      t.next_amps = psi;
      t.next_history = history;
      t.next_legal = legal_action_mask(d_out, rec.cnots, opts.cnot_budget);
      t.terminal = (k == max_actions);
      rec.transitions.push_back(std::move(t));
    }

    // Joint refinement of every angle, judged by the diagonal readout.
    rec.local_fidelity = std::norm(psi[static_cast<Eigen::Index>(
        closest_basis_state_pure(psi))]);
    auto g = optimize_global_pure(rec.circuit, target_amps, warm,
                                  seeded(opts.global_opt));
    ComplexVector psi_joint = target_amps;
    apply_circuit_inplace(rec.circuit, g.best_params, psi_joint);
    const double f_joint = std::norm(psi_joint[static_cast<Eigen::Index>(
        closest_basis_state_pure(psi_joint))]);
    if (f_joint >= rec.local_fidelity) {
      rec.params = std::move(g.best_params);
      psi = std::move(psi_joint);
      rec.fidelity = f_joint;
    } else {
      rec.params = std::move(warm);
      rec.fidelity = rec.local_fidelity;
    }

    const std::size_t b = closest_basis_state_pure(psi);
    append_basis_correction(rec.circuit, b);

    if (1.0 - rec.fidelity < agent.t_f) {
      rec.reward = agent.cfg.c_r * rec.fidelity;
    }
    if (!rec.transitions.empty()) {
      rec.transitions.back().reward = rec.reward;
    }
  } catch (const std::exception&) {
    rec.failed = true;
    rec.reward = 0.0;
    rec.fidelity = 0.0;
    rec.local_fidelity = 0.0;
    for (auto& t : rec.transitions) t.reward = 0.0;
  }
  return rec;
}

inline EpisodeRecord run_episode(const DensityMatrix& target,
                                 const Agent& agent,
                                 const EpisodeOptions& opts, Rng& rng) {
  return run_episode(pure_amplitudes(target), agent, opts, rng);
}

// ---------- target-structure sampling ----------

/// Uniformly random set partition of {0, ..., n-1}, via restricted-growth
/// strings weighted by exact completion counts.
inline QubitPartition sample_uniform_partition(int n_qubits, Rng& rng) {
  check_qubit_count(n_qubits);
  // completions[i][k]: ways to extend a partial string of length i that
  // already uses k blocks.
  std::vector<std::vector<std::int64_t>> completions(
      n_qubits + 1, std::vector<std::int64_t>(n_qubits + 2, 0));
  for (int k = 0; k <= n_qubits + 1; ++k) completions[n_qubits][k] = 1;
  for (int i = n_qubits - 1; i >= 0; --i) {
    for (int k = 0; k <= n_qubits; ++k) {
      completions[i][k] = k * completions[i + 1][k] + completions[i + 1][k + 1];
    }
  }

  QubitPartition p;
  p.blocks.push_back({0});
  int used = 1;
  for (int i = 1; i < n_qubits; ++i) {
    const std::int64_t stay = completions[i + 1][used];
    const std::int64_t grow = completions[i + 1][used + 1];
    const std::int64_t total = used * stay + grow;
    const std::int64_t r =
        rng.uniform_int(0, static_cast<int>(total) - 1);
    if (r < used * stay) {
      p.blocks[static_cast<std::size_t>(r / stay)].push_back(i);
    } else {
      p.blocks.push_back({i});
      ++used;
    }
  }
  return p;
}

/// Training target: fully entangled with probability p_full, otherwise an
/// independent Haar state per block of a uniformly random partition; block
/// placement is shuffled by the sampler either way.
inline DensityMatrix sample_training_target(int n_qubits, double p_full,
                                            Rng& rng) {
  if (p_full < 0.0 || p_full > 1.0) {
    throw std::invalid_argument("p_full must lie in [0, 1]");
  }
  const QubitPartition partition = (rng.uniform() < p_full)
                                       ? full_partition(n_qubits)
                                       : sample_uniform_partition(n_qubits, rng);
  return sample_structured_target(n_qubits, partition, rng);
}

// ---------- training loop ----------

struct EpisodeMetric {
  std::int64_t episode = 0;
  double fidelity = 0.0;
  int cnots = 0;
  double t_f = 0.0;
  double c_in = 0.0;
  double eps = 0.0;
  double loss = std::numeric_limits<double>::quiet_NaN();  // mean over updates
  bool failed = false;
};

struct TrainReport {
  std::vector<EpisodeMetric> metrics;  // one row per episode
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::int64_t updates = 0;
  std::int64_t failed_episodes = 0;
};

struct TrainOptions {
  std::int64_t episodes = 10000;
  double p_full_entangled = 0.5;
  OptimizerConfig local_opt{.max_iters = 200, .restarts = 2};
  OptimizerConfig global_opt{.max_iters = 300, .restarts = 2};
  std::uint64_t seed = 0;  // recorded in the report; rng is seeded by caller
  std::int64_t checkpoint_every = 0;  // episodes between snapshots; 0 = off
  std::function<void(const Agent&, std::int64_t)> on_checkpoint;
  CsvWriter* metrics = nullptr;  // optional per-episode streaming sink
};

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {
      "episode", "fidelity", "cnots", "t_f", "c_in", "eps", "loss"};
  return cols;
}

inline std::vector<std::string> metric_row(const EpisodeMetric& m) {
  return {std::to_string(m.episode), format_double(m.fidelity),
          std::to_string(m.cnots),   format_double(m.t_f),
          format_double(m.c_in),     format_double(m.eps),
          format_double(m.loss)};
}

/// Train in place: sample a target, roll an episode with exploration, store
/// its transitions, take one replay update per stored transition (subject
/// to warmup and update period), then advance the threshold, input-scale
/// and epsilon schedules. Deterministic for a fixed rng seed.
inline TrainReport train(Agent& agent, const TrainOptions& opts, Rng& rng) {
  if (opts.episodes < 0) throw std::invalid_argument("negative episode count");
  const auto start = std::chrono::steady_clock::now();
  const AgentConfig& cfg = agent.cfg;

  TrainReport report;
  report.seed = opts.seed;
  report.metrics.reserve(static_cast<std::size_t>(opts.episodes));
  RollingSuccess stats(cfg.success_window);
  std::int64_t env_steps = 0;

  EpisodeOptions ep;
  ep.explore = true;
  ep.local_opt = opts.local_opt;
  ep.global_opt = opts.global_opt;

  for (std::int64_t e = 0; e < opts.episodes; ++e) {
    agent.eps = anneal_epsilon(cfg, agent.episodes_done);
    const DensityMatrix target = sample_training_target(
        agent.spec.n_qubits, opts.p_full_entangled, rng);
    const EpisodeRecord rec = run_episode(target, agent, ep, rng);

    double loss_sum = 0.0;
    int loss_count = 0;
    if (!rec.failed) {
      for (const Transition& t : rec.transitions) {
        agent.buffer.push(t);
        ++env_steps;
        if (agent.buffer.inserted() >= cfg.warmup &&
            env_steps % cfg.update_period == 0) {
          const UpdateResult u = update(agent.buffer, agent.online,
                                        agent.target, agent.adam, cfg,
                                        agent.spec, rng);
          if (u.applied) {
            loss_sum += u.loss;
            ++loss_count;
            ++report.updates;
          }
        }
      }
    } else {
      ++report.failed_episodes;
    }

    stats.record(1.0 - rec.fidelity);
    agent.t_f = schedule_threshold(stats, cfg, agent.t_f);
    if (agent.t_f <= cfg.t_f_target * (1.0 + 1e-12)) {
      ++agent.episodes_at_floor;
    }
    agent.spec.c_in = schedule_cin(agent.episodes_at_floor, cfg,
                                   agent.spec.c_in);

    EpisodeMetric m;
    m.episode = agent.episodes_done;
    m.fidelity = rec.fidelity;
    m.cnots = rec.cnots;
    m.t_f = agent.t_f;
    m.c_in = agent.spec.c_in;
    m.eps = agent.eps;
    if (loss_count > 0) m.loss = loss_sum / loss_count;
    m.failed = rec.failed;
    if (opts.metrics != nullptr) {
      opts.metrics->row(metric_row(m));
      opts.metrics->flush();
    }
    report.metrics.push_back(std::move(m));

    ++agent.episodes_done;
    if (opts.checkpoint_every > 0 && opts.on_checkpoint &&
        agent.episodes_done % opts.checkpoint_every == 0) {
      opts.on_checkpoint(agent, agent.episodes_done);
    }
  }
  if (opts.on_checkpoint) opts.on_checkpoint(agent, agent.episodes_done);

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

// ---------- greedy evaluation ----------

struct EvalReport {
  int n_states = 0;
  double mean_fidelity = 0.0;
  double interval_lo = 0.0;  // smallest window holding >= 95% of fidelities
  double interval_hi = 0.0;
  double mean_cnots = 0.0;
  std::vector<std::int64_t> cnot_histogram;  // index = CNOT count
  std::vector<double> fidelities;  // per episode, rollout order
  std::vector<int> cnots;
};

struct EvalOptions {
  int cnot_budget = -1;
  OptimizerConfig local_opt{.max_iters = 200, .restarts = 2};
  OptimizerConfig global_opt{.max_iters = 300, .restarts = 2};
};

/// Greedy-policy evaluation over freshly sampled targets. `structure`
/// selects the entanglement pattern; pass nullptr for fully entangled.
inline EvalReport evaluate(const Agent& agent, int n_states,
                           const QubitPartition* structure,
                           const EvalOptions& opts, Rng& rng) {
  if (n_states < 1) throw std::invalid_argument("n_states must be positive");
  const int n = agent.spec.n_qubits;
  const QubitPartition partition =
      structure != nullptr ? *structure : full_partition(n);
  partition.validate(n);

  EpisodeOptions ep;
  ep.explore = false;
  ep.cnot_budget = opts.cnot_budget;
  ep.local_opt = opts.local_opt;
  ep.global_opt = opts.global_opt;

  EvalReport out;
  out.n_states = n_states;
  out.cnot_histogram.assign(
      static_cast<std::size_t>(agent.spec.max_actions) + 1, 0);
  for (int i = 0; i < n_states; ++i) {
    const DensityMatrix target = sample_structured_target(n, partition, rng);
    const EpisodeRecord rec = run_episode(target, agent, ep, rng);
    out.fidelities.push_back(rec.fidelity);
    out.cnots.push_back(rec.cnots);
    out.cnot_histogram[static_cast<std::size_t>(rec.cnots)] += 1;
    out.mean_fidelity += rec.fidelity;
    out.mean_cnots += rec.cnots;
  }
  out.mean_fidelity /= n_states;
  out.mean_cnots /= n_states;

  std::vector<double> sorted = out.fidelities;
  std::sort(sorted.begin(), sorted.end());
  const int m = static_cast<int>(
      std::ceil(0.95 * static_cast<double>(n_states)));
  double best_span = std::numeric_limits<double>::infinity();
  for (int i = 0; i + m <= n_states; ++i) {
    const double span = sorted[static_cast<std::size_t>(i + m - 1)] -
                        sorted[static_cast<std::size_t>(i)];
    if (span < best_span) {
      best_span = span;
      out.interval_lo = sorted[static_cast<std::size_t>(i)];
      out.interval_hi = sorted[static_cast<std::size_t>(i + m - 1)];
    }
  }
  return out;
}

// ---------- deployment: preparation circuit ----------

struct GeneratedCircuit {
  Circuit circuit;  // preparation direction: maps |0...0> to the target
  std::vector<double> params;
  double fidelity = 0.0;  // episode readout
  double resimulated_fidelity = 0.0;  // overlap of the inverted circuit's
                                      // output with the target
  int cnots = 0;
  EpisodeRecord episode;  // diagonalizing-direction record
};

/// Greedy episode, joint refinement and basis correction, then inversion
/// into a preparation circuit for |0...0>.
inline GeneratedCircuit generate_circuit(const PureState& target,
                                         const Agent& agent,
                                         const EpisodeOptions& opts,
                                         Rng& rng) {
  EpisodeOptions ep = opts;
  ep.explore = false;
  GeneratedCircuit out;
  out.episode = run_episode(target.amps, agent, ep, rng);
  out.circuit = invert(out.episode.circuit);
  out.params = invert_params(out.episode.circuit, out.episode.params);
  out.fidelity = out.episode.fidelity;
  out.cnots = out.episode.cnots;

  ComplexVector prepared =
      basis_state(target.n_qubits, 0).amps;
  apply_circuit_inplace(out.circuit, out.params, prepared);
  out.resimulated_fidelity = std::norm(target.amps.dot(prepared));
  return out;
}

// ---------- exhaustive small-instance search ----------

struct OracleConfig {
  OptimizerConfig local{.max_iters = 120, .restarts = 2};  // per-block chains
  OptimizerConfig cheap{.max_iters = 60, .restarts = 1};   // pool refinement
  OptimizerConfig full{.max_iters = 300, .restarts = 3};   // finalists
  int pool = 4096;       // per length: candidates entering cheap refinement
  int finalists = 1024;  // per length: candidates entering full refinement
  std::uint64_t seed = 0;

  void validate() const {
    if (pool < 1 || finalists < 1) {
      throw std::invalid_argument("pool sizes must be positive");
    }
    local.validate();
    cheap.validate();
    full.validate();
  }
};

struct OracleResult {
  int max_cnots = 0;
  double best_fidelity = 0.0;
  std::vector<std::pair<int, int>> best_sequence;  // diagonalizing order
  // best over all sequences of length <= l; index l in [0, max_cnots]
  std::vector<double> best_by_length;
  std::vector<std::vector<std::pair<int, int>>> best_sequence_by_length;
  std::int64_t sequences_tried = 0;
};

namespace detail {

struct OracleCandidate {
  std::vector<int> seq;  // directed-edge indices into the action list
  std::vector<double> warm;
  double readout = 0.0;
};

/// Total order: higher readout first, lexicographically smaller sequence on
/// ties, so pool truncation is deterministic.
inline bool oracle_candidate_before(const OracleCandidate& a,
                                    const OracleCandidate& b) {
  if (a.readout != b.readout) return a.readout > b.readout;
  return a.seq < b.seq;
}

inline std::uint64_t oracle_sequence_salt(const std::vector<int>& seq) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (int a : seq) h = h * 131 + static_cast<std::uint64_t>(a) + 1;
  return h;
}

inline double oracle_readout(const Circuit& c, std::span<const double> params,
                             const ComplexVector& target) {
  ComplexVector psi = target;
  apply_circuit_inplace(c, params, psi);
  return std::norm(psi[static_cast<Eigen::Index>(
      closest_basis_state_pure(psi))]);
}

}  // namespace detail

/// Exhaustive search over directed CNOT sequences of length <= max_cnots on
/// the graph (consecutive repeats of the same directed edge pruned as
/// redundant under the local-block structure). Each sequence's circuit is
/// the initial rotation layer plus one block per CNOT; parameters come from
/// a chained per-block optimization, and the most promising candidates per
/// length get progressively stronger joint refinement. Deterministic for a
/// fixed config seed. Limited to 4 qubits and 5 CNOTs.
inline OracleResult brute_force_oracle(const PureState& target, int max_cnots,
                                       const ConnectivityGraph& graph,
                                       const OracleConfig& cfg = {}) {
  cfg.validate();
  const int n = target.n_qubits;
  if (graph.n_qubits != n) {
    throw std::invalid_argument("graph qubit count does not match target");
  }
  if (n > 4 || max_cnots > 5) {
    throw std::invalid_argument(
        "exhaustive search is limited to 4 qubits and 5 CNOTs");
  }
  if (max_cnots < 0) throw std::invalid_argument("negative CNOT budget");

  // Directed edges, sorted; the STOP entry of the action set is dropped.
  const ActionSet actions = build_action_set(graph);
  const int n_edges = actions.size() - 1;

  OracleResult out;
  out.max_cnots = max_cnots;
  out.best_by_length.assign(static_cast<std::size_t>(max_cnots) + 1, 0.0);
  out.best_sequence_by_length.assign(static_cast<std::size_t>(max_cnots) + 1,
                                     {});
  std::vector<bool> best_is_set(static_cast<std::size_t>(max_cnots) + 1,
                                false);

  // Exact best per length, merged across phases; ties keep the candidate
  // that orders first.
  std::vector<std::vector<int>> best_seq_exact(
      static_cast<std::size_t>(max_cnots) + 1);
  const auto consider = [&](int len, double fidelity,
                            const std::vector<int>& seq) {
    auto& best = out.best_by_length[static_cast<std::size_t>(len)];
    auto& best_seq = best_seq_exact[static_cast<std::size_t>(len)];
    if (!best_is_set[static_cast<std::size_t>(len)] || fidelity > best ||
        (fidelity == best && seq < best_seq)) {
      best_is_set[static_cast<std::size_t>(len)] = true;
      best = fidelity;
      best_seq = seq;
    }
  };

  // Pass A: depth-first chained local optimization; pool the strongest
  // candidates per length by their chained readout.
  std::vector<std::vector<detail::OracleCandidate>> pools(
      static_cast<std::size_t>(max_cnots) + 1);
  const auto pool_push = [&](int len, detail::OracleCandidate cand) {
    auto& pool = pools[static_cast<std::size_t>(len)];
    pool.push_back(std::move(cand));
    if (static_cast<int>(pool.size()) > 2 * cfg.pool) {
      std::nth_element(pool.begin(), pool.begin() + cfg.pool, pool.end(),
                       detail::oracle_candidate_before);
      pool.resize(static_cast<std::size_t>(cfg.pool));
    }
  };

  const auto local_seeded = [&](const std::vector<int>& seq) {
    OptimizerConfig c = cfg.local;
    c.seed = Rng::from(cfg.seed, detail::oracle_sequence_salt(seq)).raw();
    return c;
  };

  std::vector<int> seq;
  const std::function<void(const ComplexVector&, const std::vector<double>&)>
      dfs = [&](const ComplexVector& psi, const std::vector<double>& warm) {
        ++out.sequences_tried;
        detail::OracleCandidate cand;
        cand.seq = seq;
        cand.warm = warm;
        cand.readout = std::norm(psi[static_cast<Eigen::Index>(
            closest_basis_state_pure(psi))]);
        consider(static_cast<int>(seq.size()), cand.readout, seq);
        pool_push(static_cast<int>(seq.size()), std::move(cand));

        if (static_cast<int>(seq.size()) == max_cnots) return;
        for (int a = 0; a < n_edges; ++a) {
          if (!seq.empty() && seq.back() == a) continue;
          seq.push_back(a);
          Circuit block(n);
          append_action_block(block, actions[a].control, actions[a].target);
          auto r = optimize_local_step_pure(block, psi, local_seeded(seq));
          std::vector<double> next_warm = warm;
          next_warm.insert(next_warm.end(), r.params.begin(), r.params.end());
          dfs(r.psi_next, next_warm);
          seq.pop_back();
        }
      };

  {
    Circuit layer(n);
    append_rotation_layer(layer);
    auto r = optimize_local_step_pure(layer, target.amps, local_seeded(seq));
    dfs(r.psi_next, r.params);
  }

  // Passes B/C: joint refinement over all angles, cheap for the pool and
  // strong for the finalists; readouts only ever improve the tracked best.
  const auto circuit_for = [&](const std::vector<int>& s) {
    Circuit c(n);
    append_rotation_layer(c);
    for (int a : s) append_action_block(c, actions[a].control,
                                        actions[a].target);
    return c;
  };
  const auto refine = [&](detail::OracleCandidate& cand,
                          const OptimizerConfig& base) {
    OptimizerConfig c = base;
    c.seed = Rng::from(cfg.seed ^ 0x5bf0f3a2ULL,
                       detail::oracle_sequence_salt(cand.seq)).raw();
    const Circuit circ = circuit_for(cand.seq);
    auto g = optimize_global_pure(circ, target.amps, cand.warm, c);
    const double f = detail::oracle_readout(circ, g.best_params, target.amps);
    if (f > cand.readout) {
      cand.readout = f;
      cand.warm = std::move(g.best_params);
    }
    consider(static_cast<int>(cand.seq.size()), cand.readout, cand.seq);
  };

  for (int len = 0; len <= max_cnots; ++len) {
    auto& pool = pools[static_cast<std::size_t>(len)];
    std::sort(pool.begin(), pool.end(), detail::oracle_candidate_before);
    if (static_cast<int>(pool.size()) > cfg.pool) {
      pool.resize(static_cast<std::size_t>(cfg.pool));
    }
    for (auto& cand : pool) refine(cand, cfg.cheap);
    std::sort(pool.begin(), pool.end(), detail::oracle_candidate_before);
    if (static_cast<int>(pool.size()) > cfg.finalists) {
      pool.resize(static_cast<std::size_t>(cfg.finalists));
    }
    for (auto& cand : pool) refine(cand, cfg.full);
  }

  // Cumulative best over length <= l; monotone by construction.
  for (int len = 0; len <= max_cnots; ++len) {
    const std::size_t l = static_cast<std::size_t>(len);
    std::vector<std::pair<int, int>> pairs;
    for (int a : best_seq_exact[l]) {
      pairs.emplace_back(actions[a].control, actions[a].target);
    }
    out.best_sequence_by_length[l] = std::move(pairs);
    if (len > 0 && out.best_by_length[l - 1] > out.best_by_length[l]) {
      out.best_by_length[l] = out.best_by_length[l - 1];
      out.best_sequence_by_length[l] = out.best_sequence_by_length[l - 1];
    }
  }
  out.best_fidelity = out.best_by_length.back();
  out.best_sequence = out.best_sequence_by_length.back();
  return out;
}

// ---------- W-state ladder ansatz ----------

/// Preparation-direction ladder generalizing the five-CNOT four-qubit W
/// circuit: an upward sweep of CX(j+1, j) for j = 0..n-3, the bridging
/// CX(n-2, n-1), then a downward sweep of CX(j, j+1) for j = n-3..0, each
/// CNOT preceded by rotations on its two qubits and the whole ladder closed
/// by a rotation layer on every qubit. Uses 2(n-1)-1 CNOTs.
inline Circuit wstate_ladder_circuit(int n_qubits, bool u3_locals = false) {
  if (n_qubits < 2 || n_qubits > kMaxQubits) {
    throw std::invalid_argument("ladder needs between 2 and 10 qubits");
  }
  Circuit c(n_qubits);
  const auto rot = [&](int q) {
    if (u3_locals) {
      c.add_u3(q);
    } else {
      c.add_ry(q);
    }
  };
  const auto rung = [&](int control, int target) {
    rot(control);
    rot(target);
    c.add_cnot(control, target);
  };
  for (int j = 0; j + 2 < n_qubits; ++j) rung(j + 1, j);
  rung(n_qubits - 2, n_qubits - 1);
  for (int j = n_qubits - 3; j >= 0; --j) rung(j, j + 1);
  for (int q = 0; q < n_qubits; ++q) rot(q);
  return c;
}

struct LadderResult {
  Circuit circuit;
  std::vector<double> params;
  double fidelity = 0.0;
  int cnots = 0;
};

/// Fit the ladder's angles against the n-qubit W state.
inline LadderResult optimize_wstate_ladder(int n_qubits,
                                           const OptimizerConfig& cfg,
                                           bool u3_locals = false) {
  LadderResult out;
  out.circuit = wstate_ladder_circuit(n_qubits, u3_locals);
  out.cnots = out.circuit.cnot_count();
  const OptResult r = optimize_fidelity(out.circuit, w_state(n_qubits), cfg);
  out.params = r.best_params;
  out.fidelity = 1.0 - r.best_value;
  return out;
}

}  // namespace qsynth
