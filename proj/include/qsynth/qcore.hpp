#pragma once

// Core linear algebra for multi-qubit states.
//
// Conventions, fixed across the whole library:
//  * Qubit 0 is the MOST significant bit of a basis index: the basis state
//    |q0 q1 ... q_{n-1}> has index sum_k q_k * 2^(n-1-k).
//  * U3(theta, phi, lam) = Rz(phi) * Ry(theta) * Rz(lam) (global phase free).
//  * CNOT's first qubit argument is the control.
//  * Dense matrices only; systems are capped at 10 qubits (dimension 1024).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qsynth/rng.hpp"

namespace qsynth {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr int kMaxQubits = 10;

inline std::size_t check_qubit_count(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw std::invalid_argument("qubit count " + std::to_string(n_qubits) +
                                " outside supported range [1, " +
                                std::to_string(kMaxQubits) + "]");
  }
  return std::size_t{1} << n_qubits;
}

/// Bit shift of qubit q inside an n-qubit basis index (qubit 0 = MSB).
inline int qubit_shift(int q, int n_qubits) { return n_qubits - 1 - q; }

// ---------- state types ----------

/// Normalized pure state on n qubits.
struct PureState {
  int n_qubits = 0;
  ComplexVector amps;

  PureState() = default;
  PureState(int n, ComplexVector a) : n_qubits(n), amps(std::move(a)) {
    const std::size_t dim = check_qubit_count(n);
    if (static_cast<std::size_t>(amps.size()) != dim) {
      throw std::invalid_argument("amplitude vector has dimension " +
                                  std::to_string(amps.size()) + ", expected " +
                                  std::to_string(dim));
    }
    if (std::abs(amps.norm() - 1.0) > 1e-10) {
      throw std::invalid_argument("pure state is not normalized");
    }
  }
};

/// Hermitian, unit-trace, positive semidefinite matrix on n qubits.
struct DensityMatrix {
  int n_qubits = 0;
  ComplexMatrix mat;

  DensityMatrix() = default;

  /// rho = |psi><psi|.
  static DensityMatrix from_pure(const PureState& psi) {
    DensityMatrix rho;
    rho.n_qubits = psi.n_qubits;
    rho.mat = psi.amps * psi.amps.adjoint();
    return rho;
  }

  /// Validating constructor for externally supplied matrices.
  static DensityMatrix from_matrix(int n, ComplexMatrix m) {
    const std::size_t dim = check_qubit_count(n);
    if (static_cast<std::size_t>(m.rows()) != dim ||
        static_cast<std::size_t>(m.cols()) != dim) {
      throw std::invalid_argument("density matrix dimension mismatch");
    }
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
      throw std::invalid_argument("density matrix is not Hermitian");
    }
    if (std::abs(m.trace().real() - 1.0) > 1e-10 ||
        std::abs(m.trace().imag()) > 1e-10) {
      throw std::invalid_argument("density matrix trace is not 1");
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-9) {
      throw std::invalid_argument("density matrix has negative eigenvalues");
    }
    DensityMatrix rho;
    rho.n_qubits = n;
    rho.mat = std::move(m);
    return rho;
  }
};

/// tr(rho^2); 1 for pure states.
inline double purity(const ComplexMatrix& rho) {
  return (rho * rho).trace().real();
}

/// Disjoint qubit blocks covering {0, ..., n-1}; block sizes define the
/// entanglement structure of a sampled target.
struct QubitPartition {
  std::vector<std::vector<int>> blocks;

  void validate(int n_qubits) const {
    std::vector<int> seen(n_qubits, 0);
    for (const auto& b : blocks) {
      if (b.empty()) throw std::invalid_argument("partition has empty block");
      for (int q : b) {
        if (q < 0 || q >= n_qubits) {
          throw std::invalid_argument("partition qubit " + std::to_string(q) +
                                      " out of range");
        }
        if (seen[q]++) {
          throw std::invalid_argument("partition repeats qubit " +
                                      std::to_string(q));
        }
      }
    }
    for (int q = 0; q < n_qubits; ++q) {
      if (!seen[q]) {
        throw std::invalid_argument("partition misses qubit " +
                                    std::to_string(q));
      }
    }
  }
};

// ---------- gates ----------

enum class GateKind { U3, RY, RZ, X, CNOT };

inline int gate_param_count(GateKind kind) {
  switch (kind) {
    case GateKind::U3: return 3;
    case GateKind::RY: return 1;
    case GateKind::RZ: return 1;
    case GateKind::X: return 0;
    case GateKind::CNOT: return 0;
  }
  return 0;
}

inline const char* gate_name(GateKind kind) {
  switch (kind) {
    case GateKind::U3: return "u3";
    case GateKind::RY: return "ry";
    case GateKind::RZ: return "rz";
    case GateKind::X: return "x";
    case GateKind::CNOT: return "cx";
  }
  return "?";
}

// Allocation-free 2x2 constructors for the hot simulation paths.

inline Eigen::Matrix2cd ry_matrix(double theta) {
  const double h = 0.5 * theta;
  Eigen::Matrix2cd g;
  g << std::cos(h), -std::sin(h), std::sin(h), std::cos(h);
  return g;
}

inline Eigen::Matrix2cd rz_matrix(double theta) {
  const Complex I(0.0, 1.0);
  const double h = 0.5 * theta;
  Eigen::Matrix2cd g;
  g << std::exp(-I * h), 0.0, 0.0, std::exp(I * h);
  return g;
}

/// U3(theta, phi, lam) = Rz(phi) Ry(theta) Rz(lam).
inline Eigen::Matrix2cd u3_matrix(double theta, double phi, double lam) {
  const Complex I(0.0, 1.0);
  const double ct = std::cos(0.5 * theta);
  const double st = std::sin(0.5 * theta);
  Eigen::Matrix2cd g;
  g << std::exp(-I * (0.5 * (phi + lam))) * ct,
      -std::exp(-I * (0.5 * (phi - lam))) * st,
      std::exp(I * (0.5 * (phi - lam))) * st,
      std::exp(I * (0.5 * (phi + lam))) * ct;
  return g;
}

/// Dense matrix of a primitive gate (2x2, or 4x4 for CNOT with the first
/// qubit slot as control).
inline ComplexMatrix gate_matrix(GateKind kind,
                                 const std::vector<double>& params = {}) {
  if (static_cast<int>(params.size()) != gate_param_count(kind)) {
    throw std::invalid_argument(std::string("gate ") + gate_name(kind) +
                                " expects " +
                                std::to_string(gate_param_count(kind)) +
                                " parameters, got " +
                                std::to_string(params.size()));
  }
  switch (kind) {
    case GateKind::RY:
      return ry_matrix(params[0]);
    case GateKind::RZ:
      return rz_matrix(params[0]);
    case GateKind::U3:
      return u3_matrix(params[0], params[1], params[2]);
    case GateKind::X: {
      ComplexMatrix g(2, 2);
      g << 0.0, 1.0, 1.0, 0.0;
      return g;
    }
    case GateKind::CNOT: {
      ComplexMatrix g = ComplexMatrix::Zero(4, 4);
      g(0, 0) = 1.0;
      g(1, 1) = 1.0;
      g(2, 3) = 1.0;
      g(3, 2) = 1.0;
      return g;
    }
  }
  throw std::invalid_argument("unknown gate kind");
}

/// Embed a gate acting on `qubits` (slot 0 = the gate's own most significant
/// qubit) into the full 2^n-dimensional unitary.
inline ComplexMatrix embed(const ComplexMatrix& gate,
                           const std::vector<int>& qubits, int n_qubits) {
  const std::size_t dim = check_qubit_count(n_qubits);
  const int m = static_cast<int>(qubits.size());
  const std::size_t gdim = std::size_t{1} << m;
  if (static_cast<std::size_t>(gate.rows()) != gdim ||
      static_cast<std::size_t>(gate.cols()) != gdim) {
    throw std::invalid_argument("gate dimension does not match qubit count");
  }
  std::vector<std::size_t> mask(m);
  std::size_t qmask = 0;
  for (int s = 0; s < m; ++s) {
    const int q = qubits[s];
    if (q < 0 || q >= n_qubits) {
      throw std::invalid_argument("embed qubit " + std::to_string(q) +
                                  " out of range");
    }
    mask[s] = std::size_t{1} << qubit_shift(q, n_qubits);
    if (qmask & mask[s]) {
      throw std::invalid_argument("embed qubits must be distinct");
    }
    qmask |= mask[s];
  }
  ComplexMatrix full = ComplexMatrix::Zero(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    std::size_t gr = 0;
    for (int s = 0; s < m; ++s) gr = (gr << 1) | ((i & mask[s]) ? 1u : 0u);
    const std::size_t base = i & ~qmask;
    for (std::size_t gc = 0; gc < gdim; ++gc) {
      std::size_t j = base;
      for (int s = 0; s < m; ++s) {
        if ((gc >> (m - 1 - s)) & 1u) j |= mask[s];
      }
      full(i, j) = gate(gr, gc);
    }
  }
  return full;
}

inline bool is_unitary(const ComplexMatrix& u, double tol = 1e-10) {
  if (u.rows() != u.cols()) return false;
  return (u.adjoint() * u - ComplexMatrix::Identity(u.rows(), u.cols()))
             .cwiseAbs()
             .maxCoeff() < tol;
}

/// rho -> U rho U^dagger.
inline DensityMatrix evolve(const DensityMatrix& rho, const ComplexMatrix& u) {
  if (u.rows() != rho.mat.rows() || u.cols() != rho.mat.cols()) {
    throw std::invalid_argument("evolve dimension mismatch");
  }
  if (!is_unitary(u, 1e-10)) {
    throw std::invalid_argument("evolve requires a unitary matrix");
  }
  DensityMatrix out;
  out.n_qubits = rho.n_qubits;
  out.mat = u * rho.mat * u.adjoint();
  return out;
}

// ---------- fast in-place gate application ----------
//
// These kernels avoid building 2^n x 2^n embeddings; they are the workhorses
// of circuit simulation during optimization.

/// psi -> (G on qubit q) psi, with G a 2x2 matrix.
template <class Derived>
inline void apply_1q_inplace(ComplexVector& psi,
                             const Eigen::MatrixBase<Derived>& g, int q,
                             int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t mask = std::size_t{1} << qubit_shift(q, n_qubits);
  const Complex a = g(0, 0), b = g(0, 1), c = g(1, 0), d = g(1, 1);
  Complex* p = psi.data();
  for (std::size_t base = 0; base < dim; base += 2 * mask) {
    for (std::size_t lo = 0; lo < mask; ++lo) {
      const std::size_t i0 = base + lo, i1 = i0 + mask;
      const Complex v0 = p[i0], v1 = p[i1];
      p[i0] = a * v0 + b * v1;
      p[i1] = c * v0 + d * v1;
    }
  }
}

/// psi -> CNOT(control, target) psi.
inline void apply_cnot_inplace(ComplexVector& psi, int control, int target,
                               int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t cm = std::size_t{1} << qubit_shift(control, n_qubits);
  const std::size_t tm = std::size_t{1} << qubit_shift(target, n_qubits);
  Complex* p = psi.data();
  for (std::size_t i = 0; i < dim; ++i) {
    if ((i & cm) && !(i & tm)) std::swap(p[i], p[i | tm]);
  }
}

/// psi -> (X on qubit q) psi.
inline void apply_x_inplace(ComplexVector& psi, int q, int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t mask = std::size_t{1} << qubit_shift(q, n_qubits);
  Complex* p = psi.data();
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(i & mask)) std::swap(p[i], p[i | mask]);
  }
}

/// m -> (G on qubit q) m: left action only (rows transformed).
template <class Derived>
inline void apply_1q_rows_inplace(ComplexMatrix& m,
                                  const Eigen::MatrixBase<Derived>& g, int q,
                                  int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t mask = std::size_t{1} << qubit_shift(q, n_qubits);
  const Complex a = g(0, 0), b = g(0, 1), c = g(1, 0), d = g(1, 1);
  Eigen::RowVectorXcd rtmp(m.cols());
  for (std::size_t base = 0; base < dim; base += 2 * mask) {
    for (std::size_t lo = 0; lo < mask; ++lo) {
      const std::size_t i0 = base + lo, i1 = i0 + mask;
      rtmp = m.row(i0);
      m.row(i0) = a * rtmp + b * m.row(i1);
      m.row(i1) = c * rtmp + d * m.row(i1);
    }
  }
}

/// m -> m (G on qubit q)^dagger: right action only (columns transformed).
template <class Derived>
inline void apply_1q_cols_adjoint_inplace(ComplexMatrix& m,
                                          const Eigen::MatrixBase<Derived>& g,
                                          int q, int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t mask = std::size_t{1} << qubit_shift(q, n_qubits);
  const Complex a = g(0, 0), b = g(0, 1), c = g(1, 0), d = g(1, 1);
  ComplexVector ctmp(m.rows());
  for (std::size_t base = 0; base < dim; base += 2 * mask) {
    for (std::size_t lo = 0; lo < mask; ++lo) {
      const std::size_t i0 = base + lo, i1 = i0 + mask;
      ctmp = m.col(i0);
      m.col(i0) = std::conj(a) * ctmp + std::conj(b) * m.col(i1);
      m.col(i1) = std::conj(c) * ctmp + std::conj(d) * m.col(i1);
    }
  }
}

/// rho -> (G on qubit q) rho (G on qubit q)^dagger.
template <class Derived>
inline void apply_1q_dm_inplace(ComplexMatrix& rho,
                                const Eigen::MatrixBase<Derived>& g, int q,
                                int n_qubits) {
  apply_1q_rows_inplace(rho, g, q, n_qubits);
  apply_1q_cols_adjoint_inplace(rho, g, q, n_qubits);
}

/// m -> CNOT m: left action only.
inline void apply_cnot_rows_inplace(ComplexMatrix& m, int control, int target,
                                    int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t cm = std::size_t{1} << qubit_shift(control, n_qubits);
  const std::size_t tm = std::size_t{1} << qubit_shift(target, n_qubits);
  for (std::size_t i = 0; i < dim; ++i) {
    if ((i & cm) && !(i & tm)) m.row(i).swap(m.row(i | tm));
  }
}

/// m -> m CNOT^dagger: right action only (CNOT is self-adjoint).
inline void apply_cnot_cols_inplace(ComplexMatrix& m, int control, int target,
                                    int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t cm = std::size_t{1} << qubit_shift(control, n_qubits);
  const std::size_t tm = std::size_t{1} << qubit_shift(target, n_qubits);
  for (std::size_t i = 0; i < dim; ++i) {
    if ((i & cm) && !(i & tm)) m.col(i).swap(m.col(i | tm));
  }
}

/// rho -> CNOT rho CNOT^dagger.
inline void apply_cnot_dm_inplace(ComplexMatrix& rho, int control, int target,
                                  int n_qubits) {
  apply_cnot_rows_inplace(rho, control, target, n_qubits);
  apply_cnot_cols_inplace(rho, control, target, n_qubits);
}

// ---------- measures ----------

/// F(rho, |psi>) = <psi| rho |psi> for a pure reference state.
inline double fidelity(const DensityMatrix& rho, const PureState& psi) {
  if (rho.n_qubits != psi.n_qubits) {
    throw std::invalid_argument("fidelity dimension mismatch");
  }
  const double f = (psi.amps.adjoint() * rho.mat * psi.amps)(0, 0).real();
  return std::clamp(f, 0.0, 1.0);
}

/// Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 for general mixed
/// states. Reduces to `fidelity` when either argument is pure.
inline double fidelity_general(const DensityMatrix& rho,
                               const DensityMatrix& sigma) {
  if (rho.n_qubits != sigma.n_qubits) {
    throw std::invalid_argument("fidelity dimension mismatch");
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho.mat);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const ComplexMatrix sqrt_rho =
      es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
  const ComplexMatrix prod = sqrt_rho * sigma.mat * sqrt_rho;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es2(
      ComplexMatrix(0.5 * (prod + prod.adjoint())));
  // Rank-deficient products carry O(eps) noise in their null space; the
  // square root would blow that up to O(sqrt(eps)), so cut it off.
  const double cutoff =
      1e-13 * std::max(1e-300, es2.eigenvalues().cwiseAbs().maxCoeff());
  double s = 0.0;
  for (int i = 0; i < es2.eigenvalues().size(); ++i) {
    const double mu = es2.eigenvalues()[i];
    if (mu > cutoff) s += std::sqrt(mu);
  }
  return std::clamp(s * s, 0.0, 1.0);
}

/// Sum of squared magnitudes of the upper-triangular off-diagonal entries.
/// Zero exactly when the matrix is diagonal in the computational basis.
inline double coherence_loss(const ComplexMatrix& m) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) s += std::norm(m(i, j));
  }
  return s;
}

inline double coherence_loss(const DensityMatrix& rho) {
  return coherence_loss(rho.mat);
}

/// Same loss evaluated on a pure state's amplitudes:
/// sum_{i<j} |psi_i|^2 |psi_j|^2 = (1 - sum_i |psi_i|^4) / 2.
inline double coherence_loss_pure(const ComplexVector& amps) {
  double p4 = 0.0;
  for (Eigen::Index i = 0; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    p4 += p * p;
  }
  return 0.5 * (1.0 - p4);
}

/// Index of the computational basis state with the largest diagonal weight;
/// ties resolve to the smallest index.
inline std::size_t closest_basis_state(const DensityMatrix& rho) {
  std::size_t best = 0;
  double best_p = rho.mat(0, 0).real();
  for (Eigen::Index i = 1; i < rho.mat.rows(); ++i) {
    const double p = rho.mat(i, i).real();
    if (p > best_p) {
      best_p = p;
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

/// Largest diagonal weight variant for pure amplitudes.
inline std::size_t closest_basis_state_pure(const ComplexVector& amps) {
  std::size_t best = 0;
  double best_p = std::norm(amps[0]);
  for (Eigen::Index i = 1; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    if (p > best_p) {
      best_p = p;
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

// ---------- state constructors and sampling ----------

inline PureState basis_state(int n_qubits, std::size_t index) {
  const std::size_t dim = check_qubit_count(n_qubits);
  if (index >= dim) throw std::invalid_argument("basis index out of range");
  ComplexVector a = ComplexVector::Zero(dim);
  a[index] = 1.0;
  return PureState(n_qubits, std::move(a));
}

inline PureState ghz_state(int n_qubits) {
  const std::size_t dim = check_qubit_count(n_qubits);
  ComplexVector a = ComplexVector::Zero(dim);
  a[0] = a[dim - 1] = 1.0 / std::sqrt(2.0);
  return PureState(n_qubits, std::move(a));
}

inline PureState w_state(int n_qubits) {
  const std::size_t dim = check_qubit_count(n_qubits);
  ComplexVector a = ComplexVector::Zero(dim);
  const double amp = 1.0 / std::sqrt(static_cast<double>(n_qubits));
  for (int q = 0; q < n_qubits; ++q) {
    a[std::size_t{1} << qubit_shift(q, n_qubits)] = amp;
  }
  return PureState(n_qubits, std::move(a));
}

/// Haar-random pure state: normalized vector of i.i.d. complex Gaussians.
/// Draw order is fixed (real then imaginary part, ascending index), so a
/// fixed seed reproduces the state bit-for-bit.
inline PureState haar_state(int n_qubits, Rng& rng) {
  const std::size_t dim = check_qubit_count(n_qubits);
  ComplexVector a(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double re = rng.normal();
    const double im = rng.normal();
    a[i] = Complex(re, im);
  }
  a /= a.norm();
  return PureState(n_qubits, std::move(a));
}

/// Reduced state on `keep` (ascending qubit indices), tracing out the rest.
inline DensityMatrix reduced_density(const DensityMatrix& rho,
                                     const std::vector<int>& keep) {
  const int n = rho.n_qubits;
  const int m = static_cast<int>(keep.size());
  std::vector<std::size_t> kmask(m);
  std::size_t keep_bits = 0;
  for (int s = 0; s < m; ++s) {
    kmask[s] = std::size_t{1} << qubit_shift(keep[s], n);
    keep_bits |= kmask[s];
  }
  const std::size_t dim = std::size_t{1} << n;
  const std::size_t kdim = std::size_t{1} << m;
  // Enumerate environment configurations as the complement bits.
  std::vector<std::size_t> env_positions;
  for (int q = 0; q < n; ++q) {
    const std::size_t bit = std::size_t{1} << qubit_shift(q, n);
    if (!(bit & keep_bits)) env_positions.push_back(bit);
  }
  const std::size_t edim = dim >> m;
  ComplexMatrix out = ComplexMatrix::Zero(kdim, kdim);
  for (std::size_t e = 0; e < edim; ++e) {
    std::size_t ebits = 0;
    for (std::size_t s = 0; s < env_positions.size(); ++s) {
      if ((e >> s) & 1u) ebits |= env_positions[s];
    }
    for (std::size_t a = 0; a < kdim; ++a) {
      std::size_t abits = ebits;
      for (int s = 0; s < m; ++s) {
        if ((a >> (m - 1 - s)) & 1u) abits |= kmask[s];
      }
      for (std::size_t b = 0; b < kdim; ++b) {
        std::size_t bbits = ebits;
        for (int s = 0; s < m; ++s) {
          if ((b >> (m - 1 - s)) & 1u) bbits |= kmask[s];
        }
        out(a, b) += rho.mat(abits, bbits);
      }
    }
  }
  DensityMatrix r;
  r.n_qubits = m;
  r.mat = std::move(out);
  return r;
}

/// Pure target with a prescribed entanglement structure: an independent Haar
/// state per partition block (placed on the block's qubits), followed by a
/// uniformly random relabeling of all qubits.
inline DensityMatrix sample_structured_target(int n_qubits,
                                              const QubitPartition& partition,
                                              Rng& rng) {
  const std::size_t dim = check_qubit_count(n_qubits);
  partition.validate(n_qubits);

  // Draw one Haar state per block, in block order.
  std::vector<PureState> block_states;
  std::vector<std::vector<int>> blocks;
  for (const auto& b : partition.blocks) {
    std::vector<int> sorted = b;
    std::sort(sorted.begin(), sorted.end());
    blocks.push_back(std::move(sorted));
    block_states.push_back(haar_state(static_cast<int>(b.size()), rng));
  }

  ComplexVector amps(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    Complex a(1.0, 0.0);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      std::size_t local = 0;
      for (int q : blocks[k]) {
        local = (local << 1) | ((i >> qubit_shift(q, n_qubits)) & 1u);
      }
      a *= block_states[k].amps[local];
    }
    amps[i] = a;
  }

  // Uniform random qubit relabeling: old qubit q plays the role of perm[q].
  std::vector<int> perm(n_qubits);
  for (int q = 0; q < n_qubits; ++q) perm[q] = q;
  rng.shuffle(perm.begin(), perm.end());
  ComplexVector shuffled(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    std::size_t j = 0;
    for (int q = 0; q < n_qubits; ++q) {
      const std::size_t bit = (i >> qubit_shift(perm[q], n_qubits)) & 1u;
      j |= bit << qubit_shift(q, n_qubits);
    }
    shuffled[i] = amps[j];
  }
  return DensityMatrix::from_pure(PureState(n_qubits, std::move(shuffled)));
}

/// Fully entangled structure: one block holding every qubit.
inline QubitPartition full_partition(int n_qubits) {
  QubitPartition p;
  p.blocks.emplace_back();
  for (int q = 0; q < n_qubits; ++q) p.blocks[0].push_back(q);
  return p;
}

/// Extract pure amplitudes from a density matrix known to be pure.
/// Throws if rho is not (numerically) a rank-one projector.
inline ComplexVector pure_amplitudes(const DensityMatrix& rho,
                                     double tol = 1e-8) {
  const auto& m = rho.mat;
  Eigen::Index anchor = 0;
  double best = m(0, 0).real();
  for (Eigen::Index i = 1; i < m.rows(); ++i) {
    if (m(i, i).real() > best) {
      best = m(i, i).real();
      anchor = i;
    }
  }
  if (best <= 0.0) throw std::invalid_argument("state is not pure");
  ComplexVector psi = m.col(anchor) / std::sqrt(best);
  // |psi><psi| must reproduce rho.
  if (((psi * psi.adjoint()) - m).cwiseAbs().maxCoeff() > tol) {
    throw std::invalid_argument("state is not pure");
  }
  return psi;
}

}  // namespace qsynth
