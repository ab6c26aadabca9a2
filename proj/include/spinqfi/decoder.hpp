#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spinqfi/qfi.hpp"

namespace spinqfi {

inline constexpr int kGeneratorCount = 15;

using GateParams = Eigen::Matrix<double, kGeneratorCount, 1>;
using Gate = Eigen::Matrix4cd;

// Two-qubit local index: bit 0 = left site of the pair, bit 1 = right site.
// Generator a is i P_a / 2 with P_a = A (x) B the a-th non-identity Pauli
// product in lexicographic order over {I, X, Y, Z}, A acting on the left site.
// The basis is orthonormal under <X, Y> = Re Tr(X^dag Y).
const std::array<Gate, kGeneratorCount>& su4_generators();
const std::array<std::string, kGeneratorCount>& su4_generator_labels();

/// exp(sum_a p_a B_a); special unitary for every finite p.
Gate su4_gate(const GateParams& params);

/// Principal-branch inverse of su4_gate, for unitaries with unit determinant
/// (a global phase is divided out first).
GateParams su4_parameters(const Gate& gate);

/// Sequential sweep over a contiguous block ending at the output site.
/// Gate i (0-based) acts on block sites (i, i+1); gates are applied in order,
/// so the pair touching the output site acts last.
struct DecoderCircuit {
  std::vector<GateParams> gates;
  std::vector<int> block;

  static DecoderCircuit identity(std::vector<int> block);

  int width() const { return static_cast<int>(block.size()); }
  int output_site() const { return block.back(); }
  void validate() const;

  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
};

/// Full 2^w x 2^w sweep unitary in the block's local basis.
ComplexMatrix circuit_unitary(const DecoderCircuit& circuit);

/// Conjugates rho and drho by a block unitary.
DensityBlock apply_unitary(const ComplexMatrix& unitary, const DensityBlock& block);
DensityBlock apply_circuit(const DecoderCircuit& circuit, const DensityBlock& block);

/// QFI of the output qubit (last block site) after conjugation.
double decoded_qfi(const ComplexMatrix& unitary, const DensityBlock& block);
double decoded_site_qfi(const DecoderCircuit& circuit, const DensityBlock& block);

struct OptimizerConfig {
  int steps = 300;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double fd_step = 1e-5;
  int restarts = 4;           // random restarts, in addition to the zero start
  double init_range = 0.5;    // uniform in [-init_range, init_range]
  std::uint64_t seed = 20240601;
  bool keep_trace = false;

  void validate() const;
};

struct TraceEntry {
  int restart = 0;  // 0 = zero initialization, 1..R random
  int step = 0;
  double objective = 0.0;
  double best = 0.0;
};

struct DecoderResult {
  DecoderCircuit circuit;
  double decoded_qfi = 0.0;
  int best_restart = 0;
  std::vector<TraceEntry> trace;
  std::vector<int> aborted_restarts;
};

/// Maximizes decoded_site_qfi with Adam and central finite-difference gradients.
/// The reported value is the best objective evaluated at any iterate, so it is a
/// lower bound on the true maximum and never below the identity-circuit value.
DecoderResult optimize_decoder(const DensityBlock& block, const OptimizerConfig& config);

}  // namespace spinqfi
