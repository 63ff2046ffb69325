#pragma once

// Parameterized circuits, hardware connectivity graphs, and the discrete
// action catalogue built from a graph.
//
// A Circuit is a time-ordered op list; continuous parameters live in a flat
// external vector indexed by each op's param_base. Gate ops never own values,
// so the same circuit can be re-evaluated under different parameter vectors.

#include <cstdint>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsynth/io.hpp"
#include "qsynth/qcore.hpp"

namespace qsynth {

struct GateOp {
  GateKind kind;
  int q0 = -1;          // single-qubit target, or CNOT control
  int q1 = -1;          // CNOT target; -1 otherwise
  int param_base = -1;  // first slot in the parameter vector; -1 if none

  bool operator==(const GateOp&) const = default;
};

struct Circuit {
  int n_qubits = 0;
  int n_params = 0;
  std::vector<GateOp> ops;

  Circuit() = default;
  explicit Circuit(int n) : n_qubits(n) { check_qubit_count(n); }

  bool operator==(const Circuit&) const = default;

  int add_u3(int q) { return push_1q(GateKind::U3, q); }
  int add_ry(int q) { return push_1q(GateKind::RY, q); }
  int add_rz(int q) { return push_1q(GateKind::RZ, q); }
  void add_x(int q) { push_1q(GateKind::X, q); }

  void add_cnot(int control, int target) {
    check_qubit(control);
    check_qubit(target);
    if (control == target) {
      throw std::invalid_argument("cnot control equals target");
    }
    ops.push_back({GateKind::CNOT, control, target, -1});
  }

  int cnot_count() const {
    int k = 0;
    for (const auto& op : ops) k += (op.kind == GateKind::CNOT) ? 1 : 0;
    return k;
  }

 private:
  void check_qubit(int q) const {
    if (q < 0 || q >= n_qubits) {
      throw std::invalid_argument("qubit " + std::to_string(q) +
                                  " out of range for " +
                                  std::to_string(n_qubits) + "-qubit circuit");
    }
  }

  int push_1q(GateKind kind, int q) {
    check_qubit(q);
    const int np = gate_param_count(kind);
    const int base = np ? n_params : -1;
    ops.push_back({kind, q, -1, base});
    n_params += np;
    return base;
  }
};

/// One U3 on every qubit (the circuit's initial rotation layer).
inline void append_rotation_layer(Circuit& c) {
  for (int q = 0; q < c.n_qubits; ++q) c.add_u3(q);
}

/// Entangling step: CNOT followed by a U3 on each involved qubit
/// (6 fresh parameter slots).
inline void append_action_block(Circuit& c, int control, int target) {
  c.add_cnot(control, target);
  c.add_u3(control);
  c.add_u3(target);
}

// ---------- evaluation ----------

namespace detail {

inline void check_params(const Circuit& c, std::span<const double> params) {
  if (static_cast<int>(params.size()) != c.n_params) {
    throw std::invalid_argument(
        "parameter vector has " + std::to_string(params.size()) +
        " entries, circuit expects " + std::to_string(c.n_params));
  }
}

}  // namespace detail

/// psi -> U_c(params) psi using the in-place kernels.
inline void apply_circuit_inplace(const Circuit& c,
                                  std::span<const double> params,
                                  ComplexVector& psi) {
  detail::check_params(c, params);
  const int n = c.n_qubits;
  for (const auto& op : c.ops) {
    const double* p = op.param_base >= 0 ? params.data() + op.param_base
                                         : nullptr;
    switch (op.kind) {
      case GateKind::U3:
        apply_1q_inplace(psi, u3_matrix(p[0], p[1], p[2]), op.q0, n);
        break;
      case GateKind::RY:
        apply_1q_inplace(psi, ry_matrix(p[0]), op.q0, n);
        break;
      case GateKind::RZ:
        apply_1q_inplace(psi, rz_matrix(p[0]), op.q0, n);
        break;
      case GateKind::X:
        apply_x_inplace(psi, op.q0, n);
        break;
      case GateKind::CNOT:
        apply_cnot_inplace(psi, op.q0, op.q1, n);
        break;
    }
  }
}

/// rho -> U_c rho U_c^dagger using the in-place kernels.
inline void apply_circuit_dm_inplace(const Circuit& c,
                                     std::span<const double> params,
                                     ComplexMatrix& rho) {
  detail::check_params(c, params);
  const int n = c.n_qubits;
  for (const auto& op : c.ops) {
    const double* p = op.param_base >= 0 ? params.data() + op.param_base
                                         : nullptr;
    switch (op.kind) {
      case GateKind::U3:
        apply_1q_dm_inplace(rho, u3_matrix(p[0], p[1], p[2]), op.q0, n);
        break;
      case GateKind::RY:
        apply_1q_dm_inplace(rho, ry_matrix(p[0]), op.q0, n);
        break;
      case GateKind::RZ:
        apply_1q_dm_inplace(rho, rz_matrix(p[0]), op.q0, n);
        break;
      case GateKind::X:
        apply_1q_dm_inplace(rho, gate_matrix(GateKind::X), op.q0, n);
        break;
      case GateKind::CNOT:
        apply_cnot_dm_inplace(rho, op.q0, op.q1, n);
        break;
    }
  }
}

/// Dense unitary of the whole circuit.
inline ComplexMatrix circuit_unitary(const Circuit& c,
                                     std::span<const double> params) {
  detail::check_params(c, params);
  const std::size_t dim = std::size_t{1} << c.n_qubits;
  ComplexMatrix u = ComplexMatrix::Identity(dim, dim);
  const int n = c.n_qubits;
  for (const auto& op : c.ops) {
    const double* p = op.param_base >= 0 ? params.data() + op.param_base
                                         : nullptr;
    switch (op.kind) {
      case GateKind::U3:
        apply_1q_rows_inplace(u, u3_matrix(p[0], p[1], p[2]), op.q0, n);
        break;
      case GateKind::RY:
        apply_1q_rows_inplace(u, ry_matrix(p[0]), op.q0, n);
        break;
      case GateKind::RZ:
        apply_1q_rows_inplace(u, rz_matrix(p[0]), op.q0, n);
        break;
      case GateKind::X:
        apply_1q_rows_inplace(u, gate_matrix(GateKind::X), op.q0, n);
        break;
      case GateKind::CNOT:
        apply_cnot_rows_inplace(u, op.q0, op.q1, n);
        break;
    }
  }
  return u;
}

// ---------- inversion and basis correction ----------

/// Structural inverse: reversed op order, parameter slots renumbered in the
/// new order. Use invert_params to carry a bound parameter vector across.
inline Circuit invert(const Circuit& c) {
  Circuit inv(c.n_qubits);
  for (auto it = c.ops.rbegin(); it != c.ops.rend(); ++it) {
    switch (it->kind) {
      case GateKind::U3: inv.add_u3(it->q0); break;
      case GateKind::RY: inv.add_ry(it->q0); break;
      case GateKind::RZ: inv.add_rz(it->q0); break;
      case GateKind::X: inv.add_x(it->q0); break;
      case GateKind::CNOT: inv.add_cnot(it->q0, it->q1); break;
    }
  }
  return inv;
}

/// Map parameters bound to `c` onto invert(c) so that
/// U_{invert(c)}(mapped) = U_c(params)^{-1}:
/// U3(t, phi, lam) -> U3(-t, -lam, -phi); RY/RZ(t) -> -t.
inline std::vector<double> invert_params(const Circuit& c,
                                         std::span<const double> params) {
  detail::check_params(c, params);
  std::vector<double> out;
  out.reserve(params.size());
  for (auto it = c.ops.rbegin(); it != c.ops.rend(); ++it) {
    if (it->param_base < 0) continue;
    const double* p = params.data() + it->param_base;
    switch (it->kind) {
      case GateKind::U3:
        out.push_back(-p[0]);
        out.push_back(-p[2]);
        out.push_back(-p[1]);
        break;
      case GateKind::RY:
      case GateKind::RZ:
        out.push_back(-p[0]);
        break;
      default:
        break;
    }
  }
  return out;
}

/// Append an X on every qubit whose bit in `basis_index` is 1, so that the
/// extended circuit maps the dominant basis state onto |0...0>.
inline void append_basis_correction(Circuit& c, std::size_t basis_index) {
  const std::size_t dim = std::size_t{1} << c.n_qubits;
  if (basis_index >= dim) {
    throw std::invalid_argument("basis index out of range");
  }
  for (int q = 0; q < c.n_qubits; ++q) {
    if ((basis_index >> qubit_shift(q, c.n_qubits)) & 1u) c.add_x(q);
  }
}

// ---------- connectivity ----------

/// Undirected qubit-coupling graph; must be connected.
struct ConnectivityGraph {
  int n_qubits = 0;
  std::vector<std::pair<int, int>> edges;  // normalized (lo, hi), sorted

  ConnectivityGraph() = default;
  ConnectivityGraph(int n, std::vector<std::pair<int, int>> raw_edges)
      : n_qubits(n) {
    check_qubit_count(n);
    std::set<std::pair<int, int>> dedup;
    for (auto [a, b] : raw_edges) {
      if (a < 0 || a >= n || b < 0 || b >= n || a == b) {
        throw std::invalid_argument("invalid edge (" + std::to_string(a) +
                                    ", " + std::to_string(b) + ")");
      }
      dedup.insert({std::min(a, b), std::max(a, b)});
    }
    edges.assign(dedup.begin(), dedup.end());
    if (!connected()) {
      throw std::invalid_argument("connectivity graph is not connected");
    }
  }

  bool has_edge(int a, int b) const {
    const auto e = std::make_pair(std::min(a, b), std::max(a, b));
    return std::binary_search(edges.begin(), edges.end(), e);
  }

 private:
  bool connected() const {
    if (n_qubits == 1) return true;
    std::vector<int> comp(n_qubits);
    for (int i = 0; i < n_qubits; ++i) comp[i] = i;
    const auto find = [&](int x) {
      while (comp[x] != x) x = comp[x] = comp[comp[x]];
      return x;
    };
    for (auto [a, b] : edges) comp[find(a)] = find(b);
    for (int i = 1; i < n_qubits; ++i) {
      if (find(i) != find(0)) return false;
    }
    return true;
  }
};

/// Named hardware graphs. "unrestricted" and "line" scale with n;
/// "manila" (line) and "quito" (T shape) are fixed 5-qubit devices.
inline ConnectivityGraph preset_graph(const std::string& name, int n_qubits) {
  std::vector<std::pair<int, int>> edges;
  if (name == "unrestricted") {
    for (int a = 0; a < n_qubits; ++a) {
      for (int b = a + 1; b < n_qubits; ++b) edges.push_back({a, b});
    }
  } else if (name == "line") {
    for (int a = 0; a + 1 < n_qubits; ++a) edges.push_back({a, a + 1});
  } else if (name == "manila") {
    if (n_qubits != 5) {
      throw std::invalid_argument("manila is a 5-qubit device");
    }
    edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  } else if (name == "quito") {
    if (n_qubits != 5) {
      throw std::invalid_argument("quito is a 5-qubit device");
    }
    edges = {{0, 1}, {1, 2}, {1, 3}, {3, 4}};
  } else {
    throw std::invalid_argument("unknown connectivity preset '" + name + "'");
  }
  if (n_qubits >= 2 && edges.empty()) {
    throw std::invalid_argument("graph has no edges");
  }
  return ConnectivityGraph(n_qubits, std::move(edges));
}

// ---------- discrete action catalogue ----------

struct Action {
  bool is_stop = false;
  int control = -1;
  int target = -1;

  bool operator==(const Action&) const = default;
};

/// All directed CNOTs allowed by the graph, sorted by (control, target),
/// followed by the terminating STOP action at the last index.
struct ActionSet {
  std::vector<Action> actions;

  int size() const { return static_cast<int>(actions.size()); }
  int stop_index() const { return size() - 1; }

  const Action& operator[](int i) const { return actions.at(i); }

  /// Index of a directed CNOT, or -1 if the pair is not in the catalogue.
  int index_of_cnot(int control, int target) const {
    for (int i = 0; i + 1 < size(); ++i) {
      if (actions[i].control == control && actions[i].target == target) {
        return i;
      }
    }
    return -1;
  }
};

inline ActionSet build_action_set(const ConnectivityGraph& graph) {
  ActionSet set;
  for (auto [a, b] : graph.edges) {
    set.actions.push_back({false, a, b});
    set.actions.push_back({false, b, a});
  }
  std::sort(set.actions.begin(), set.actions.end(),
            [](const Action& x, const Action& y) {
              return std::make_pair(x.control, x.target) <
                     std::make_pair(y.control, y.target);
            });
  set.actions.push_back({true, -1, -1});
  return set;
}

// ---------- export / import ----------

/// Human-readable listing, one gate per line with bound parameter values.
inline std::string export_text(const Circuit& c,
                               std::span<const double> params) {
  detail::check_params(c, params);
  std::ostringstream out;
  out << "qsynth-circuit v1\n";
  out << "qubits " << c.n_qubits << "\n";
  for (const auto& op : c.ops) {
    const double* p = op.param_base >= 0 ? params.data() + op.param_base
                                         : nullptr;
    switch (op.kind) {
      case GateKind::U3:
        out << "u3(" << format_double(p[0]) << "," << format_double(p[1])
            << "," << format_double(p[2]) << ") " << op.q0 << "\n";
        break;
      case GateKind::RY:
        out << "ry(" << format_double(p[0]) << ") " << op.q0 << "\n";
        break;
      case GateKind::RZ:
        out << "rz(" << format_double(p[0]) << ") " << op.q0 << "\n";
        break;
      case GateKind::X:
        out << "x " << op.q0 << "\n";
        break;
      case GateKind::CNOT:
        out << "cx " << op.q0 << "," << op.q1 << "\n";
        break;
    }
  }
  return out.str();
}

inline nlohmann::json export_json(const Circuit& c,
                                  std::span<const double> params) {
  detail::check_params(c, params);
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : c.ops) {
    nlohmann::json j;
    j["gate"] = gate_name(op.kind);
    if (op.kind == GateKind::CNOT) {
      j["qubits"] = {op.q0, op.q1};
    } else {
      j["qubits"] = {op.q0};
    }
    const int np = gate_param_count(op.kind);
    if (np > 0) {
      std::vector<double> vals(params.begin() + op.param_base,
                               params.begin() + op.param_base + np);
      j["params"] = vals;
    }
    ops.push_back(std::move(j));
  }
  nlohmann::json root;
  root["format"] = "qsynth-circuit";
  root["version"] = 1;
  root["n_qubits"] = c.n_qubits;
  root["ops"] = std::move(ops);
  return root;
}

/// Inverse of export_json. Throws std::invalid_argument on malformed input.
inline std::pair<Circuit, std::vector<double>> import_json(
    const nlohmann::json& root) {
  if (!root.is_object() || root.value("format", "") != "qsynth-circuit") {
    throw std::invalid_argument("not a qsynth-circuit document");
  }
  if (root.value("version", 0) != 1) {
    throw std::invalid_argument("unsupported circuit format version");
  }
  if (!root.contains("n_qubits") || !root["n_qubits"].is_number_integer()) {
    throw std::invalid_argument("missing n_qubits");
  }
  Circuit c(root["n_qubits"].get<int>());
  std::vector<double> params;
  for (const auto& j : root.at("ops")) {
    const std::string gate = j.at("gate").get<std::string>();
    const auto& qubits = j.at("qubits");
    const auto param_list = j.value("params", std::vector<double>{});
    const auto expect_qubits = [&](std::size_t k) {
      if (qubits.size() != k) {
        throw std::invalid_argument("gate " + gate + " expects " +
                                    std::to_string(k) + " qubits");
      }
    };
    const auto expect_params = [&](std::size_t k) {
      if (param_list.size() != k) {
        throw std::invalid_argument("gate " + gate + " expects " +
                                    std::to_string(k) + " parameters");
      }
    };
    if (gate == "u3") {
      expect_qubits(1);
      expect_params(3);
      c.add_u3(qubits[0].get<int>());
    } else if (gate == "ry") {
      expect_qubits(1);
      expect_params(1);
      c.add_ry(qubits[0].get<int>());
    } else if (gate == "rz") {
      expect_qubits(1);
      expect_params(1);
      c.add_rz(qubits[0].get<int>());
    } else if (gate == "x") {
      expect_qubits(1);
      expect_params(0);
      c.add_x(qubits[0].get<int>());
    } else if (gate == "cx") {
      expect_qubits(2);
      expect_params(0);
      c.add_cnot(qubits[0].get<int>(), qubits[1].get<int>());
    } else {
      throw std::invalid_argument("unknown gate '" + gate + "'");
    }
    params.insert(params.end(), param_list.begin(), param_list.end());
  }
  return {std::move(c), std::move(params)};
}

}  // namespace qsynth
