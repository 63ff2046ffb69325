#include "qsynth/circuit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

namespace {

using namespace qsynth;

std::vector<double> random_params(const Circuit& c, Rng& rng) {
  std::vector<double> p(c.n_params);
  for (auto& v : p) v = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return p;
}

// ---------- builders ----------

TEST(CircuitBuild, ParamSlotAccounting) {
  Circuit c(4);
  append_rotation_layer(c);
  EXPECT_EQ(c.n_params, 12);
  append_action_block(c, 0, 1);
  append_action_block(c, 2, 3);
  EXPECT_EQ(c.n_params, 24);
  EXPECT_EQ(c.cnot_count(), 2);
  EXPECT_EQ(c.ops.size(), 4u + 2u * 3u);
}

TEST(CircuitBuild, RejectsBadQubits) {
  Circuit c(2);
  EXPECT_THROW(c.add_u3(2), std::invalid_argument);
  EXPECT_THROW(c.add_cnot(0, 0), std::invalid_argument);
  EXPECT_THROW(c.add_cnot(0, 5), std::invalid_argument);
}

// ---------- evaluation ----------

TEST(CircuitEval, EmptyCircuitIsIdentity) {
  Circuit c(3);
  const ComplexMatrix u = circuit_unitary(c, {});
  EXPECT_LT((u - ComplexMatrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CircuitEval, UnitaryMatchesEmbedProduct) {
  Rng rng(31);
  Circuit c(3);
  append_rotation_layer(c);
  append_action_block(c, 2, 0);
  c.add_ry(1);
  c.add_rz(2);
  c.add_x(0);
  const auto p = random_params(c, rng);

  ComplexMatrix expected = ComplexMatrix::Identity(8, 8);
  for (const auto& op : c.ops) {
    std::vector<double> vals;
    for (int k = 0; k < gate_param_count(op.kind); ++k) {
      vals.push_back(p[op.param_base + k]);
    }
    const ComplexMatrix g = gate_matrix(op.kind, vals);
    const std::vector<int> qs = op.kind == GateKind::CNOT
                                    ? std::vector<int>{op.q0, op.q1}
                                    : std::vector<int>{op.q0};
    expected = embed(g, qs, 3) * expected;
  }
  EXPECT_LT((circuit_unitary(c, p) - expected).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_TRUE(is_unitary(circuit_unitary(c, p), 1e-10));
}

TEST(CircuitEval, StateAndDensityPathsAgree) {
  Rng rng(32);
  Circuit c(3);
  append_rotation_layer(c);
  append_action_block(c, 0, 2);
  append_action_block(c, 1, 2);
  const auto p = random_params(c, rng);
  const PureState psi = haar_state(3, rng);

  ComplexVector fast = psi.amps;
  apply_circuit_inplace(c, p, fast);
  const ComplexMatrix u = circuit_unitary(c, p);
  EXPECT_LT((fast - u * psi.amps).cwiseAbs().maxCoeff(), 1e-12);

  ComplexMatrix rho = DensityMatrix::from_pure(psi).mat;
  apply_circuit_dm_inplace(c, p, rho);
  EXPECT_LT((rho - fast * fast.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CircuitEval, ParamCountMismatchThrows) {
  Circuit c(2);
  append_rotation_layer(c);
  std::vector<double> wrong(5, 0.0);
  EXPECT_THROW(circuit_unitary(c, wrong), std::invalid_argument);
}

// ---------- inversion ----------

TEST(CircuitInvert, ComposesToIdentity) {
  Rng rng(33);
  Circuit c(3);
  append_rotation_layer(c);
  append_action_block(c, 0, 1);
  append_action_block(c, 1, 2);
  c.add_x(1);
  c.add_ry(0);
  const auto p = random_params(c, rng);

  const Circuit inv = invert(c);
  const auto pinv = invert_params(c, p);
  const ComplexMatrix prod = circuit_unitary(inv, pinv) * circuit_unitary(c, p);
  EXPECT_LT(
      (prod - ComplexMatrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(CircuitInvert, InvolutionRestoresStructure) {
  Circuit c(3);
  append_rotation_layer(c);
  append_action_block(c, 2, 1);
  c.add_rz(0);
  EXPECT_EQ(invert(invert(c)), c);
}

TEST(CircuitInvert, BellPreparationRoundTrip) {
  // U3(pi/2, 0, pi) on qubit 0 then CNOT(0,1) prepares a Bell state from
  // |00>; the inverse must take it back.
  Circuit prep(2);
  const int base = prep.add_u3(0);
  prep.add_cnot(0, 1);
  std::vector<double> p(prep.n_params, 0.0);
  p[base] = std::numbers::pi / 2;
  p[base + 2] = std::numbers::pi;

  ComplexVector psi = basis_state(2, 0).amps;
  apply_circuit_inplace(prep, p, psi);
  const PureState bell(2, psi);
  ComplexVector bell_ref = ComplexVector::Zero(4);
  bell_ref[0] = bell_ref[3] = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::norm(bell_ref.dot(bell.amps)), 1.0, 1e-12);

  ComplexVector back = bell.amps;
  apply_circuit_inplace(invert(prep), invert_params(prep, p), back);
  EXPECT_NEAR(std::norm(back[0]), 1.0, 1e-12);
}

TEST(BasisCorrection, MapsDominantStateToZero) {
  Circuit c(3);
  append_basis_correction(c, 0b101);  // X on qubits 0 and 2
  EXPECT_EQ(c.ops.size(), 2u);
  ComplexVector psi = basis_state(3, 0b101).amps;
  apply_circuit_inplace(c, {}, psi);
  EXPECT_NEAR(std::norm(psi[0]), 1.0, 1e-12);
  EXPECT_THROW(append_basis_correction(c, 8), std::invalid_argument);
}

// ---------- connectivity ----------

TEST(Connectivity, PresetEdgeCounts) {
  EXPECT_EQ(preset_graph("unrestricted", 4).edges.size(), 6u);
  EXPECT_EQ(preset_graph("line", 4).edges.size(), 3u);
  const auto manila = preset_graph("manila", 5);
  const std::vector<std::pair<int, int>> manila_ref = {
      {0, 1}, {1, 2}, {2, 3}, {3, 4}};
  EXPECT_EQ(manila.edges, manila_ref);
  const auto quito = preset_graph("quito", 5);
  const std::vector<std::pair<int, int>> quito_ref = {
      {0, 1}, {1, 2}, {1, 3}, {3, 4}};
  EXPECT_EQ(quito.edges, quito_ref);
}

TEST(Connectivity, Validation) {
  EXPECT_THROW(preset_graph("manila", 4), std::invalid_argument);
  EXPECT_THROW(preset_graph("quito", 6), std::invalid_argument);
  EXPECT_THROW(preset_graph("ring", 4), std::invalid_argument);
  // Disconnected custom graph.
  EXPECT_THROW(ConnectivityGraph(4, {{0, 1}, {2, 3}}), std::invalid_argument);
  EXPECT_THROW(ConnectivityGraph(3, {{0, 0}, {1, 2}}), std::invalid_argument);
  EXPECT_NO_THROW(ConnectivityGraph(3, {{0, 1}, {1, 2}, {0, 1}}));
}

TEST(ActionSetBuild, LineFourQubitsOrdering) {
  const ActionSet set = build_action_set(preset_graph("line", 4));
  ASSERT_EQ(set.size(), 7);
  const std::vector<std::pair<int, int>> expected = {
      {0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 3}, {3, 2}};
  for (int i = 0; i < 6; ++i) {
    EXPECT_FALSE(set[i].is_stop);
    EXPECT_EQ(set[i].control, expected[i].first);
    EXPECT_EQ(set[i].target, expected[i].second);
  }
  EXPECT_TRUE(set[6].is_stop);
  EXPECT_EQ(set.stop_index(), 6);
}

TEST(ActionSetBuild, IndexLookupIsBijective) {
  for (const char* name : {"unrestricted", "line"}) {
    const ActionSet set = build_action_set(preset_graph(name, 4));
    for (int i = 0; i + 1 < set.size(); ++i) {
      EXPECT_EQ(set.index_of_cnot(set[i].control, set[i].target), i);
    }
    EXPECT_EQ(set.index_of_cnot(0, 3),
              std::string(name) == "line" ? -1 : 2);
  }
}

// ---------- export / import ----------

TEST(Export, TextListsControlTargetSequence) {
  Circuit c(5);
  append_rotation_layer(c);
  for (auto [a, b] : std::vector<std::pair<int, int>>{
           {0, 1}, {1, 2}, {2, 3}, {2, 1}, {1, 0}}) {
    append_action_block(c, a, b);
  }
  std::vector<double> p(c.n_params, 0.0);
  const std::string text = export_text(c, p);
  std::vector<std::string> cx_lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("cx ", 0) == 0) cx_lines.push_back(line);
  }
  const std::vector<std::string> expected = {"cx 0,1", "cx 1,2", "cx 2,3",
                                             "cx 2,1", "cx 1,0"};
  EXPECT_EQ(cx_lines, expected);
}

TEST(Export, EmptyCircuitIsHeaderOnly) {
  Circuit c(3);
  EXPECT_EQ(export_text(c, {}), "qsynth-circuit v1\nqubits 3\n");
}

TEST(Export, JsonRoundTripIsByteIdentical) {
  Rng rng(34);
  Circuit c(3);
  append_rotation_layer(c);
  append_action_block(c, 1, 0);
  c.add_ry(2);
  c.add_x(0);
  const auto p = random_params(c, rng);

  const std::string once = export_json(c, p).dump(2);
  auto [c2, p2] = import_json(nlohmann::json::parse(once));
  EXPECT_EQ(c2, c);
  const std::string twice = export_json(c2, p2).dump(2);
  EXPECT_EQ(once, twice);
}

TEST(Export, ImportRejectsMalformedDocuments) {
  EXPECT_THROW(import_json(nlohmann::json::parse("{}")),
               std::invalid_argument);
  EXPECT_THROW(import_json(nlohmann::json::parse(
                   R"({"format":"qsynth-circuit","version":9,"n_qubits":2,"ops":[]})")),
               std::invalid_argument);
  EXPECT_THROW(import_json(nlohmann::json::parse(
                   R"({"format":"qsynth-circuit","version":1,"n_qubits":2,
                       "ops":[{"gate":"h","qubits":[0]}]})")),
               std::invalid_argument);
  EXPECT_THROW(import_json(nlohmann::json::parse(
                   R"({"format":"qsynth-circuit","version":1,"n_qubits":2,
                       "ops":[{"gate":"u3","qubits":[0],"params":[1.0]}]})")),
               std::invalid_argument);
}

}  // namespace
