#pragma once
// Command-line driver: subcommand wiring, config files, run directories,
// and the file formats the qsynth tool reads and writes. Kept header-only
// so the whole surface is exercisable in-process by the tests; the binary
// in tools/ is a two-line shim over cli_main().

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qsynth/agent.hpp"
#include "qsynth/baseline.hpp"
#include "qsynth/circuit.hpp"
#include "qsynth/io.hpp"
#include "qsynth/popt.hpp"
#include "qsynth/qcore.hpp"
#include "qsynth/rng.hpp"
#include "qsynth/synth.hpp"

namespace qsynth::cli {

namespace detail {

inline std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

inline int env_int_or(const char* name, int fallback) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return fallback;
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string(name) + "='" + v +
                                "' is not an integer");
  }
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out << content;
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path + ": invalid JSON: " + e.what());
  }
}

/// Accepts an array of amplitudes (or {"amplitudes": [...]}) where each
/// entry is a real number, an [re, im] pair, or {"re": r, "im": i}.
inline PureState load_target_file(const std::string& path) {
  const nlohmann::json doc = load_json_file(path);
  const nlohmann::json* arr = nullptr;
  if (doc.is_array()) {
    arr = &doc;
  } else if (doc.is_object() && doc.contains("amplitudes") &&
             doc["amplitudes"].is_array()) {
    arr = &doc["amplitudes"];
  } else {
    throw std::invalid_argument(path + ": expected a JSON amplitude array");
  }

  ComplexVector amps(static_cast<Eigen::Index>(arr->size()));
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const nlohmann::json& a = (*arr)[i];
    if (a.is_number()) {
      amps[static_cast<Eigen::Index>(i)] = {a.get<double>(), 0.0};
    } else if (a.is_array() && a.size() == 2 && a[0].is_number() &&
               a[1].is_number()) {
      amps[static_cast<Eigen::Index>(i)] = {a[0].get<double>(),
                                            a[1].get<double>()};
    } else if (a.is_object() && a.contains("re")) {
      amps[static_cast<Eigen::Index>(i)] = {a["re"].get<double>(),
                                            a.value("im", 0.0)};
    } else {
      throw std::invalid_argument(
          path + ": amplitude " + std::to_string(i) +
          " must be a number, an [re, im] pair, or {\"re\", \"im\"}");
    }
  }

  int n = 0;
  while ((std::size_t{1} << n) < arr->size()) ++n;
  if (arr->size() < 2 || (std::size_t{1} << n) != arr->size() ||
      n > kMaxQubits) {
    throw std::invalid_argument(
        path + ": amplitude count " + std::to_string(arr->size()) +
        " is not a power of two in [2, " +
        std::to_string(std::size_t{1} << kMaxQubits) + "]");
  }
  const double norm = amps.norm();
  if (std::abs(norm - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << path << ": state norm is " << std::setprecision(10) << norm
        << ", expected 1 within 1e-6";
    throw std::invalid_argument(msg.str());
  }
  amps /= norm;
  return PureState(n, std::move(amps));
}

inline Agent load_agent_file(const std::string& path) {
  try {
    return agent_from_json(load_json_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

inline void write_agent_file(const Agent& agent,
                             const std::filesystem::path& path) {
  write_text_file(path, agent_to_json(agent).dump() + "\n");
}

/// "full" keeps the target fully entangled; otherwise blocks of qubit
/// indices, e.g. "0,1/2,3" or "0/1/2" for a fully separable product.
inline std::optional<QubitPartition> parse_partition(const std::string& text,
                                                     int n_qubits) {
  if (text == "full") return std::nullopt;
  QubitPartition partition;
  std::stringstream blocks(text);
  std::string block;
  while (std::getline(blocks, block, '/')) {
    std::vector<int> qubits;
    std::stringstream items(block);
    std::string item;
    while (std::getline(items, item, ',')) {
      try {
        std::size_t used = 0;
        const int q = std::stoi(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        qubits.push_back(q);
      } catch (const std::exception&) {
        throw std::invalid_argument("structure token '" + item +
                                    "' is not a qubit index");
      }
    }
    partition.blocks.push_back(std::move(qubits));
  }
  partition.validate(n_qubits);
  return partition;
}

inline LayeredKind parse_layered_kind(const std::string& s) {
  if (s == "linear") return LayeredKind::Linear;
  if (s == "pairwise") return LayeredKind::Pairwise;
  throw std::invalid_argument("unknown ansatz kind '" + s +
                              "' (expected linear or pairwise)");
}

inline LocalGate parse_local_gate(const std::string& s) {
  if (s == "rzry") return LocalGate::RzRy;
  if (s == "u3") return LocalGate::U3;
  throw std::invalid_argument("unknown local gate '" + s +
                              "' (expected rzry or u3)");
}

/// Smallest window containing at least 95% of the samples.
inline std::pair<double, double> smallest_interval(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const int n = static_cast<int>(xs.size());
  const int m = static_cast<int>(std::ceil(0.95 * static_cast<double>(n)));
  double lo = xs.front(), hi = xs.back();
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i + m <= n; ++i) {
    const double span = xs[static_cast<std::size_t>(i + m - 1)] -
                        xs[static_cast<std::size_t>(i)];
    if (span < best) {
      best = span;
      lo = xs[static_cast<std::size_t>(i)];
      hi = xs[static_cast<std::size_t>(i + m - 1)];
    }
  }
  return {lo, hi};
}

/// runs/<command>-<timestamp>[-k]/, uniquified on collision.
inline std::filesystem::path make_run_dir(const std::string& root,
                                          const std::string& command) {
  std::time_t now = std::time(nullptr);
  std::tm local{};
  localtime_r(&now, &local);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &local);
  const std::filesystem::path base =
      std::filesystem::path(root) / (command + "-" + stamp);
  std::filesystem::path dir = base;
  for (int k = 2; std::filesystem::exists(dir); ++k) {
    dir = base.string() + "-" + std::to_string(k);
  }
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string fixed3(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << v;
  return out.str();
}

inline std::string sequence_to_text(
    const std::vector<std::pair<int, int>>& seq) {
  if (seq.empty()) return "-";
  std::string out;
  for (const auto& [c, t] : seq) {
    if (!out.empty()) out += ' ';
    out += std::to_string(c) + "-" + std::to_string(t);
  }
  return out;
}

}  // namespace detail

// ---------- command option bundles ----------

struct OptKnobs {
  int local_iters = 200;
  int local_restarts = 2;
  int global_iters = 300;
  int global_restarts = 2;

  OptimizerConfig local() const {
    return OptimizerConfig{.max_iters = local_iters,
                           .restarts = local_restarts};
  }
  OptimizerConfig global() const {
    return OptimizerConfig{.max_iters = global_iters,
                           .restarts = global_restarts};
  }
};

struct TrainCmd {
  int qubits = 2;
  std::string graph = "unrestricted";
  std::int64_t episodes = 10000;
  double p_full = 0.5;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 0;
  std::string out_root = "runs";
  AgentConfig agent;
  OptKnobs opt;
};

struct EvalCmd {
  std::string checkpoint;
  int states = 100;
  std::string structure = "full";
  std::vector<int> budgets = {-1};
  std::uint64_t seed = 0;
  std::string csv;
  OptKnobs opt;
};

struct PrepareCmd {
  std::string checkpoint;
  std::string target;
  std::string out_base = "prepared";
  int budget = -1;
  std::uint64_t seed = 0;
  OptKnobs opt;
};

struct CompareCmd {
  std::string checkpoint;
  std::vector<int> layers = {1, 2};
  int states = 50;
  std::string kind = "pairwise";
  std::string local_gate = "rzry";
  std::uint64_t seed = 0;
  std::string csv = "compare.csv";
  OptKnobs opt;
};

struct OracleCmd {
  std::string target;
  std::string graph = "unrestricted";
  int max_cnots = 3;
  std::uint64_t seed = 0;
  int pool = 4096;
  int finalists = 1024;
};

struct Commands {
  int threads = 1;
  TrainCmd train;
  EvalCmd eval;
  PrepareCmd prepare;
  CompareCmd compare;
  OracleCmd oracle;
};

// ---------- option registration ----------

namespace detail {

inline void add_opt_knobs(CLI::App& cmd, OptKnobs& k) {
  cmd.add_option("--local-iters", k.local_iters,
                 "BFGS iteration cap for per-block local optimization")
      ->capture_default_str();
  cmd.add_option("--local-restarts", k.local_restarts,
                 "random restarts for local optimization")
      ->capture_default_str();
  cmd.add_option("--global-iters", k.global_iters,
                 "BFGS iteration cap for whole-circuit optimization")
      ->capture_default_str();
  cmd.add_option("--global-restarts", k.global_restarts,
                 "random restarts for whole-circuit optimization")
      ->capture_default_str();
}

inline void add_agent_options(CLI::App& cmd, AgentConfig& a) {
  cmd.add_option("--gamma", a.gamma, "discount factor")->capture_default_str();
  cmd.add_option("--eps-start", a.eps_start, "initial exploration rate")
      ->capture_default_str();
  cmd.add_option("--eps-end", a.eps_end, "final exploration rate")
      ->capture_default_str();
  cmd.add_option("--eps-anneal", a.eps_anneal_episodes,
                 "episodes over which epsilon anneals linearly")
      ->capture_default_str();
  cmd.add_option("--p-prior", a.p_prior,
                 "probability that an exploration move samples the "
                 "top-Q prior instead of the uniform one")
      ->capture_default_str();
  cmd.add_option("--top-q", a.top_q, "size of the top-Q exploration prior")
      ->capture_default_str();
  cmd.add_option("--c-r", a.c_r, "reward scale on the terminal fidelity")
      ->capture_default_str();
  cmd.add_option("--t-f-initial", a.t_f_initial,
                 "starting infidelity threshold for reward")
      ->capture_default_str();
  cmd.add_option("--t-f-target", a.t_f_target, "infidelity threshold floor")
      ->capture_default_str();
  cmd.add_option("--t-f-decay", a.t_f_decay,
                 "threshold decay factor applied on sustained success")
      ->capture_default_str();
  cmd.add_option("--success-criterion", a.success_criterion,
                 "success fraction of the recent window that triggers a "
                 "threshold decay step")
      ->capture_default_str();
  cmd.add_option("--success-window", a.success_window,
                 "episode window for the success fraction")
      ->capture_default_str();
  cmd.add_option("--c-in-initial", a.c_in_initial,
                 "initial coherence-penalty weight in the state encoding")
      ->capture_default_str();
  cmd.add_option("--c-in-factor", a.c_in_factor,
                 "multiplicative decay of the coherence-penalty weight")
      ->capture_default_str();
  cmd.add_option("--c-in-period", a.c_in_period,
                 "episodes at the threshold floor between decay steps")
      ->capture_default_str();
  cmd.add_option("--hidden", a.hidden, "hidden layer widths")
      ->capture_default_str();
  cmd.add_option("--lr", a.lr, "Adam learning rate")->capture_default_str();
  cmd.add_option("--batch", a.batch, "replay minibatch size")
      ->capture_default_str();
  cmd.add_option("--tau", a.tau,
                 "Polyak averaging rate for the target network (0 freezes it)")
      ->capture_default_str();
  cmd.add_option("--buffer", a.buffer_capacity, "replay buffer capacity")
      ->capture_default_str();
  cmd.add_option("--warmup", a.warmup,
                 "stored transitions required before updates begin")
      ->capture_default_str();
  cmd.add_option("--update-period", a.update_period,
                 "environment steps between network updates")
      ->capture_default_str();
  cmd.add_option("--max-actions", a.max_actions,
                 "episode action cap; -1 selects 3x qubit count")
      ->capture_default_str();
}

}  // namespace detail

/// Registers every subcommand on `app`, binding values into `c`.
inline void build_cli(CLI::App& app, Commands& c) {
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "read options from an INI/TOML file (keys are "
                 "<command>.<option>)")
      ->configurable(false);
  app.allow_config_extras(false);
  app.set_version_flag("--version", "qsynth 1.0.0");

  c.threads = detail::env_int_or("QSYNTH_THREADS", 1);
  app.add_option("--threads", c.threads,
                 "worker thread count (this build executes all work on one "
                 "thread; larger values are accepted and noted)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // train
  c.train.out_root = detail::env_or("QSYNTH_OUT_ROOT", "runs");
  auto* train = app.add_subcommand(
      "train", "Train an agent on randomly sampled target states");
  train->fallthrough();
  train->add_option("--qubits", c.train.qubits, "number of qubits")
      ->required()
      ->check(CLI::Range(1, kMaxQubits));
  train
      ->add_option("--graph", c.train.graph,
                   "connectivity preset: unrestricted, line, manila, quito")
      ->capture_default_str();
  train->add_option("--episodes", c.train.episodes, "training episode budget")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train
      ->add_option("--p-full", c.train.p_full,
                   "probability that a training target is fully entangled "
                   "rather than drawn from a random qubit partition")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train->add_option("--seed", c.train.seed, "master RNG seed")
      ->capture_default_str();
  train
      ->add_option("--checkpoint-every", c.train.checkpoint_every,
                   "episodes between checkpoint snapshots; 0 keeps only the "
                   "final checkpoint")
      ->capture_default_str();
  train
      ->add_option("--out", c.train.out_root,
                   "output root for the timestamped run directory")
      ->capture_default_str();
  detail::add_agent_options(*train, c.train.agent);
  detail::add_opt_knobs(*train, c.train.opt);

  // eval
  auto* eval = app.add_subcommand(
      "eval", "Greedy evaluation of a checkpoint on fresh random targets");
  eval->fallthrough();
  eval->add_option("--checkpoint", c.eval.checkpoint, "agent checkpoint file")
      ->required();
  eval->add_option("--states", c.eval.states, "number of evaluation targets")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval
      ->add_option("--structure", c.eval.structure,
                   "target entanglement structure: 'full' or qubit blocks "
                   "such as 0,1/2,3")
      ->capture_default_str();
  eval
      ->add_option("--budget", c.eval.budgets,
                   "CNOT budget sweep; -1 means unlimited, one report row "
                   "per value")
      ->capture_default_str();
  eval->add_option("--seed", c.eval.seed, "evaluation RNG seed")
      ->capture_default_str();
  eval->add_option("--csv", c.eval.csv, "write report rows to this CSV file")
      ->capture_default_str();
  detail::add_opt_knobs(*eval, c.eval.opt);

  // prepare
  auto* prepare = app.add_subcommand(
      "prepare", "Export a preparation circuit for one target state");
  prepare->fallthrough();
  prepare
      ->add_option("--checkpoint", c.prepare.checkpoint,
                   "agent checkpoint file")
      ->required();
  prepare
      ->add_option("--target", c.prepare.target,
                   "JSON amplitude list for the target state")
      ->required();
  prepare
      ->add_option("--out", c.prepare.out_base,
                   "output path base; writes <base>.txt and <base>.json")
      ->capture_default_str();
  prepare
      ->add_option("--budget", c.prepare.budget,
                   "CNOT budget; -1 means unlimited")
      ->capture_default_str();
  prepare->add_option("--seed", c.prepare.seed, "RNG seed")
      ->capture_default_str();
  detail::add_opt_knobs(*prepare, c.prepare.opt);

  // compare
  auto* compare = app.add_subcommand(
      "compare",
      "Agent vs layered-ansatz baseline on a shared set of random targets");
  compare->fallthrough();
  compare
      ->add_option("--checkpoint", c.compare.checkpoint,
                   "agent checkpoint file")
      ->required();
  compare
      ->add_option("--layers", c.compare.layers,
                   "baseline layer counts; the agent row at L layers uses a "
                   "CNOT budget of L*(qubits-1)")
      ->capture_default_str();
  compare
      ->add_option("--states", c.compare.states,
                   "number of shared random targets")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  compare
      ->add_option("--kind", c.compare.kind,
                   "baseline entangling layout: linear or pairwise")
      ->capture_default_str();
  compare
      ->add_option("--local-gate", c.compare.local_gate,
                   "baseline local gate: rzry or u3")
      ->capture_default_str();
  compare->add_option("--seed", c.compare.seed, "RNG seed")
      ->capture_default_str();
  compare
      ->add_option("--csv", c.compare.csv,
                   "write comparison rows to this CSV file")
      ->capture_default_str();
  detail::add_opt_knobs(*compare, c.compare.opt);

  // oracle
  auto* oracle = app.add_subcommand(
      "oracle", "Exhaustive best-fidelity search over short CNOT sequences");
  oracle->fallthrough();
  oracle
      ->add_option("--target", c.oracle.target,
                   "JSON amplitude list for the target state")
      ->required();
  oracle
      ->add_option("--graph", c.oracle.graph,
                   "connectivity preset: unrestricted, line, manila, quito")
      ->capture_default_str();
  oracle
      ->add_option("--max-cnots", c.oracle.max_cnots,
                   "search sequences up to this many CNOTs (at most 5)")
      ->capture_default_str();
  oracle->add_option("--seed", c.oracle.seed, "optimizer seed")
      ->capture_default_str();
  oracle
      ->add_option("--pool", c.oracle.pool,
                   "per-length candidate pool entering cheap refinement")
      ->capture_default_str();
  oracle
      ->add_option("--finalists", c.oracle.finalists,
                   "per-length candidates entering full refinement")
      ->capture_default_str();
}

// ---------- command implementations ----------

inline int run_train(const TrainCmd& t, const std::string& resolved_config,
                     std::ostream& out) {
  const ConnectivityGraph graph = preset_graph(t.graph, t.qubits);
  Rng rng(t.seed);
  Agent agent = make_agent(t.agent, graph, rng);

  const std::filesystem::path dir = detail::make_run_dir(t.out_root, "train");
  detail::write_text_file(dir / "config.ini", resolved_config);
  detail::write_text_file(dir / "seed.txt", std::to_string(t.seed) + "\n");
  out << "run directory: " << dir.string() << "\n";

  CsvWriter metrics((dir / "metrics.csv").string(), metric_columns());

  TrainOptions opts;
  opts.episodes = t.episodes;
  opts.p_full_entangled = t.p_full;
  opts.local_opt = t.opt.local();
  opts.global_opt = t.opt.global();
  opts.seed = t.seed;
  opts.checkpoint_every = t.checkpoint_every;
  opts.metrics = &metrics;
  opts.on_checkpoint = [&dir](const Agent& a, std::int64_t episode) {
    std::ostringstream name;
    name << "checkpoint-" << std::setw(8) << std::setfill('0') << episode
         << ".json";
    detail::write_agent_file(a, dir / name.str());
    detail::write_agent_file(a, dir / "checkpoint.json");
  };

  const TrainReport report = train(agent, opts, rng);

  double tail = 0.0;
  const std::size_t n = report.metrics.size();
  const std::size_t window = std::min<std::size_t>(100, n);
  for (std::size_t i = n - window; i < n; ++i) {
    tail += report.metrics[i].fidelity;
  }
  out << "episodes " << n << ", updates " << report.updates << ", failed "
      << report.failed_episodes << ", wall " << std::fixed
      << std::setprecision(1) << report.wall_seconds << " s\n";
  if (window > 0) {
    out << "mean fidelity over final " << window << " episodes: "
        << std::setprecision(4) << tail / static_cast<double>(window) << "\n";
  }
  return 0;
}

inline int run_eval(const EvalCmd& e, std::ostream& out) {
  const Agent agent = detail::load_agent_file(e.checkpoint);
  const int n = agent.spec.n_qubits;
  const std::optional<QubitPartition> partition =
      detail::parse_partition(e.structure, n);

  std::unique_ptr<CsvWriter> csv;
  if (!e.csv.empty()) {
    csv = std::make_unique<CsvWriter>(
        e.csv, std::vector<std::string>{"budget", "n_states", "mean_fidelity",
                                        "interval_lo", "interval_hi",
                                        "mean_cnots"});
  }

  EvalOptions opts;
  opts.local_opt = e.opt.local();
  opts.global_opt = e.opt.global();

  for (std::size_t bi = 0; bi < e.budgets.size(); ++bi) {
    const int budget = e.budgets[bi];
    if (budget < -1) {
      throw std::invalid_argument("budget " + std::to_string(budget) +
                                  " is invalid; use -1 for unlimited");
    }
    opts.cnot_budget = budget;
    Rng rng = Rng::from(e.seed, bi);
    const EvalReport r =
        evaluate(agent, e.states, partition ? &*partition : nullptr, opts,
                 rng);
    out << "budget "
        << (budget < 0 ? std::string("unlimited") : std::to_string(budget))
        << ": mean fidelity " << std::fixed << std::setprecision(4)
        << r.mean_fidelity << " in [" << r.interval_lo << ", "
        << r.interval_hi << "], mean CNOTs " << std::setprecision(2)
        << r.mean_cnots << " over " << r.n_states << " states\n";
    if (csv) {
      csv->row({std::to_string(budget), std::to_string(r.n_states),
                format_double(r.mean_fidelity), format_double(r.interval_lo),
                format_double(r.interval_hi), format_double(r.mean_cnots)});
    }
  }
  if (csv) out << "wrote " << e.csv << "\n";
  return 0;
}

inline int run_prepare(const PrepareCmd& p, std::ostream& out) {
  const Agent agent = detail::load_agent_file(p.checkpoint);
  const PureState target = detail::load_target_file(p.target);
  if (target.n_qubits != agent.spec.n_qubits) {
    throw std::invalid_argument(
        "checkpoint is for " + std::to_string(agent.spec.n_qubits) +
        " qubits but the target has " + std::to_string(target.n_qubits));
  }

  EpisodeOptions opts;
  opts.cnot_budget = p.budget;
  opts.local_opt = p.opt.local();
  opts.global_opt = p.opt.global();
  Rng rng(p.seed);
  const GeneratedCircuit g = generate_circuit(target, agent, opts, rng);

  const std::string text_path = p.out_base + ".txt";
  const std::string json_path = p.out_base + ".json";
  detail::write_text_file(text_path, export_text(g.circuit, g.params));
  nlohmann::json doc;
  doc["format"] = "qsynth-prepared";
  doc["version"] = 1;
  doc["n_qubits"] = target.n_qubits;
  doc["cnots"] = g.cnots;
  doc["fidelity"] = g.fidelity;
  doc["resimulated_fidelity"] = g.resimulated_fidelity;
  doc["circuit"] = export_json(g.circuit, g.params);
  detail::write_text_file(json_path, doc.dump(2) + "\n");

  out << "prepared circuit: " << g.cnots << " CNOTs, fidelity " << std::fixed
      << std::setprecision(6) << g.fidelity << " (resimulated "
      << g.resimulated_fidelity << ")\n";
  out << "wrote " << text_path << " and " << json_path << "\n";
  return 0;
}

inline int run_compare(const CompareCmd& c, std::ostream& out) {
  const Agent agent = detail::load_agent_file(c.checkpoint);
  const int n = agent.spec.n_qubits;
  const LayeredKind kind = detail::parse_layered_kind(c.kind);
  const LocalGate gate = detail::parse_local_gate(c.local_gate);

  Rng target_rng = Rng::from(c.seed, 0x7a26);
  std::vector<PureState> targets;
  targets.reserve(static_cast<std::size_t>(c.states));
  for (int i = 0; i < c.states; ++i) {
    targets.push_back(haar_state(n, target_rng));
  }

  CsvWriter csv(c.csv, {"label", "layers", "cnots", "mean_fidelity",
                        "interval_lo", "interval_hi"});

  EpisodeOptions ep;
  ep.explore = false;
  ep.local_opt = c.opt.local();
  ep.global_opt = c.opt.global();

  for (const int layers : c.layers) {
    if (layers < 0) {
      throw std::invalid_argument("layer count must be nonnegative");
    }
    const int budget = layers * (n - 1);

    ep.cnot_budget = budget;
    std::vector<double> agent_f;
    agent_f.reserve(targets.size());
    double agent_mean = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      Rng rng = Rng::from(
          c.seed, (static_cast<std::uint64_t>(layers) << 32) + i + 1);
      const EpisodeRecord rec = run_episode(targets[i].amps, agent, ep, rng);
      agent_f.push_back(rec.fidelity);
      agent_mean += rec.fidelity;
    }
    agent_mean /= static_cast<double>(targets.size());
    const auto [alo, ahi] = detail::smallest_interval(agent_f);

    LayeredSpec spec{kind, n, layers, gate};
    OptimizerConfig bopt = c.opt.global();
    bopt.seed = Rng::from(c.seed, 0xba5e + static_cast<std::uint64_t>(layers))
                    .raw();
    const LayeredEvalReport basel = evaluate_layered(spec, targets, bopt);

    out << "L=" << layers << " agent(budget " << budget
        << "): mean fidelity " << std::fixed << std::setprecision(4)
        << agent_mean << " in [" << alo << ", " << ahi << "] | layered("
        << basel.cnots << " CNOTs): mean fidelity " << basel.mean_fidelity
        << " in [" << basel.interval_lo << ", " << basel.interval_hi << "]\n";

    csv.row({"agent", std::to_string(layers), std::to_string(budget),
             format_double(agent_mean), format_double(alo),
             format_double(ahi)});
    csv.row({"layered", std::to_string(layers), std::to_string(basel.cnots),
             format_double(basel.mean_fidelity),
             format_double(basel.interval_lo),
             format_double(basel.interval_hi)});
  }
  out << "wrote " << c.csv << "\n";
  return 0;
}

inline int run_oracle(const OracleCmd& o, std::ostream& out) {
  const PureState target = detail::load_target_file(o.target);
  const ConnectivityGraph graph = preset_graph(o.graph, target.n_qubits);

  OracleConfig cfg;
  cfg.seed = o.seed;
  cfg.pool = o.pool;
  cfg.finalists = o.finalists;
  const OracleResult r =
      brute_force_oracle(target, o.max_cnots, graph, cfg);

  out << "# CNOTs, best fidelity, best sequence (control-target)\n";
  for (int k = 0; k <= r.max_cnots; ++k) {
    out << k << ", " << detail::fixed3(r.best_by_length[static_cast<std::size_t>(k)])
        << ", "
        << detail::sequence_to_text(
               r.best_sequence_by_length[static_cast<std::size_t>(k)])
        << "\n";
  }
  out << "# sequences tried: " << r.sequences_tried << "\n";
  return 0;
}

// ---------- driver ----------

/// Runs the subcommand selected on `app`. `app` must already be parsed.
inline int dispatch(const CLI::App& app, const Commands& c,
                    std::ostream& out) {
  if (c.threads > 1) {
    out << "note: --threads " << c.threads
        << " requested; this build executes all work on one thread\n";
  }
  if (app.got_subcommand("train")) {
    return run_train(c.train, app.config_to_str(true, true), out);
  }
  if (app.got_subcommand("eval")) return run_eval(c.eval, out);
  if (app.got_subcommand("prepare")) return run_prepare(c.prepare, out);
  if (app.got_subcommand("compare")) return run_compare(c.compare, out);
  if (app.got_subcommand("oracle")) return run_oracle(c.oracle, out);
  throw std::logic_error("no subcommand dispatched");
}

/// Full in-process entry point. Exit codes: 0 success, 1 validation
/// (argument, config, or input-format errors), 2 runtime failures.
inline int cli_main(int argc, const char* const* argv, std::ostream& out,
                    std::ostream& err) {
  CLI::App app{"RL-synthesized CNOT circuits for quantum state preparation",
               "qsynth"};
  Commands commands;
  try {
    build_cli(app, commands);
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    return dispatch(app, commands, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace qsynth::cli
