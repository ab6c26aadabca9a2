#include "spinqfi/decoder.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

namespace spinqfi {

namespace {

using Pauli = Eigen::Matrix2cd;

std::array<Pauli, 4> single_paulis() {
  const Complex i(0.0, 1.0);
  Pauli id, x, y, z;
  id << 1, 0, 0, 1;
  x << 0, 1, 1, 0;
  y << 0, -i, i, 0;
  z << 1, 0, 0, -1;
  return {id, x, y, z};
}

struct GeneratorTable {
  std::array<Gate, kGeneratorCount> generators;
  std::array<Gate, kGeneratorCount> half_paulis;  // P_a / 2, Hermitian
  std::array<std::string, kGeneratorCount> labels;
};

const GeneratorTable& generator_table() {
  static const GeneratorTable table = [] {
    GeneratorTable t;
    const auto paulis = single_paulis();
    const char names[] = {'I', 'X', 'Y', 'Z'};
    int a = 0;
    for (int left = 0; left < 4; ++left)
      for (int right = 0; right < 4; ++right) {
        if (left == 0 && right == 0) continue;
        Gate p;
        for (int r = 0; r < 4; ++r)
          for (int c = 0; c < 4; ++c) p(r, c) = paulis[left](r & 1, c & 1) * paulis[right](r >> 1, c >> 1);
        t.half_paulis[a] = p / 2.0;
        t.generators[a] = Complex(0.0, 0.5) * p;
        t.labels[a] = std::string{names[left], names[right]};
        ++a;
      }
    return t;
  }();
  return table;
}

// Embeds a two-qubit gate acting on local bits (bit, bit+1) of a w-qubit block.
ComplexMatrix embed(const Gate& gate, int bit, int width) {
  const Eigen::Index dim = Eigen::Index{1} << width;
  const Eigen::Index pair_mask = Eigen::Index{3} << bit;
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  for (Eigen::Index col = 0; col < dim; ++col) {
    const Eigen::Index rest = col & ~pair_mask;
    const Eigen::Index local_col = (col >> bit) & 3;
    for (Eigen::Index local_row = 0; local_row < 4; ++local_row)
      out(rest | (local_row << bit), col) = gate(local_row, local_col);
  }
  return out;
}

}  // namespace

const std::array<Gate, kGeneratorCount>& su4_generators() { return generator_table().generators; }
const std::array<std::string, kGeneratorCount>& su4_generator_labels() { return generator_table().labels; }

Gate su4_gate(const GateParams& params) {
  if (!params.allFinite()) throw std::invalid_argument("gate parameters must be finite");
  if (params.isZero(0.0)) return Gate::Identity();
  const auto& table = generator_table();
  Gate hermitian = Gate::Zero();
  for (int a = 0; a < kGeneratorCount; ++a) hermitian += params(a) * table.half_paulis[a];
  Eigen::SelfAdjointEigenSolver<Gate> solver(hermitian);
  const Eigen::Vector4cd phases = (Complex(0.0, 1.0) * solver.eigenvalues().cast<Complex>()).array().exp();
  return solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
}

GateParams su4_parameters(const Gate& gate) {
  const Complex det = gate.determinant();
  if (std::abs(std::abs(det) - 1.0) > 1e-8) throw std::invalid_argument("gate is not unitary");
  const Gate special = gate / std::pow(det, 0.25);
  Eigen::ComplexEigenSolver<Gate> solver(special);
  Eigen::Vector4cd logs;
  for (int k = 0; k < 4; ++k) logs(k) = Complex(0.0, std::arg(solver.eigenvalues()(k)));
  const Gate generator = solver.eigenvectors() * logs.asDiagonal() * solver.eigenvectors().inverse();
  GateParams out;
  const auto& basis = su4_generators();
  for (int a = 0; a < kGeneratorCount; ++a) out(a) = (basis[a].adjoint() * generator).trace().real();
  return out;
}

DecoderCircuit DecoderCircuit::identity(std::vector<int> block) {
  DecoderCircuit c;
  c.block = std::move(block);
  c.gates.assign(c.block.empty() ? 0 : c.block.size() - 1, GateParams::Zero());
  c.validate();
  return c;
}

void DecoderCircuit::validate() const {
  if (block.empty()) throw std::invalid_argument("decoder block must not be empty");
  for (std::size_t k = 1; k < block.size(); ++k)
    if (block[k] != block[k - 1] + 1) throw std::invalid_argument("decoder block must be contiguous and ascending");
  if (gates.size() + 1 != block.size()) throw std::invalid_argument("decoder needs exactly w-1 gates");
}

Eigen::VectorXd DecoderCircuit::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(gates.size()) * kGeneratorCount);
  for (std::size_t g = 0; g < gates.size(); ++g)
    flat.segment<kGeneratorCount>(static_cast<Eigen::Index>(g) * kGeneratorCount) = gates[g];
  return flat;
}

void DecoderCircuit::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(gates.size()) * kGeneratorCount)
    throw std::invalid_argument("parameter vector has the wrong length");
  for (std::size_t g = 0; g < gates.size(); ++g)
    gates[g] = flat.segment<kGeneratorCount>(static_cast<Eigen::Index>(g) * kGeneratorCount);
}

ComplexMatrix circuit_unitary(const DecoderCircuit& circuit) {
  circuit.validate();
  const int w = circuit.width();
  ComplexMatrix u = ComplexMatrix::Identity(Eigen::Index{1} << w, Eigen::Index{1} << w);
  for (int g = 0; g < w - 1; ++g) u = embed(su4_gate(circuit.gates[static_cast<std::size_t>(g)]), g, w) * u;
  return u;
}

DensityBlock apply_unitary(const ComplexMatrix& unitary, const DensityBlock& block) {
  if (unitary.rows() != block.rho.rows() || unitary.cols() != block.rho.cols())
    throw std::invalid_argument("unitary does not match block dimension");
  return {unitary * block.rho * unitary.adjoint(), unitary * block.drho * unitary.adjoint(), block.sites};
}

DensityBlock apply_circuit(const DecoderCircuit& circuit, const DensityBlock& block) {
  if (circuit.block != block.sites) throw std::invalid_argument("circuit block differs from density block sites");
  return apply_unitary(circuit_unitary(circuit), block);
}

double decoded_qfi(const ComplexMatrix& unitary, const DensityBlock& block) {
  const DensityBlock out = apply_unitary(unitary, block);
  const int output_bit[] = {block.width() - 1};
  return spectral_qfi(partial_trace(out.rho, block.width(), output_bit),
                      partial_trace(out.drho, block.width(), output_bit));
}

double decoded_site_qfi(const DecoderCircuit& circuit, const DensityBlock& block) {
  if (circuit.block != block.sites) throw std::invalid_argument("circuit block differs from density block sites");
  return decoded_qfi(circuit_unitary(circuit), block);
}

void OptimizerConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("optimizer steps must be non-negative");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("Adam betas must lie in [0,1)");
  if (!(epsilon > 0)) throw std::invalid_argument("Adam epsilon must be positive");
  if (!(fd_step > 0)) throw std::invalid_argument("finite-difference step must be positive");
  if (restarts < 0) throw std::invalid_argument("restart count must be non-negative");
  if (!(init_range >= 0)) throw std::invalid_argument("init range must be non-negative");
}

namespace {

// Objective with cached gate products so a single-parameter probe only
// re-exponentiates one gate.
class SweepObjective {
 public:
  explicit SweepObjective(const DensityBlock& block) : block_(block), width_(block.width()) {}

  double operator()(const Eigen::VectorXd& flat) const {
    ComplexMatrix u = ComplexMatrix::Identity(dim(), dim());
    for (int g = 0; g < width_ - 1; ++g) u = embed(gate_at(flat, g), g, width_) * u;
    return decoded_qfi(u, block_);
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& flat, double step) const {
    const int gates = width_ - 1;
    std::vector<ComplexMatrix> embedded(static_cast<std::size_t>(gates));
    for (int g = 0; g < gates; ++g) embedded[g] = embed(gate_at(flat, g), g, width_);
    // before[g] = E_{g-1} ... E_0, after[g] = E_{w-2} ... E_{g+1}
    std::vector<ComplexMatrix> before(static_cast<std::size_t>(gates)), after(static_cast<std::size_t>(gates));
    ComplexMatrix acc = ComplexMatrix::Identity(dim(), dim());
    for (int g = 0; g < gates; ++g) {
      before[g] = acc;
      acc = embedded[g] * acc;
    }
    acc = ComplexMatrix::Identity(dim(), dim());
    for (int g = gates - 1; g >= 0; --g) {
      after[g] = acc;
      acc = acc * embedded[g];
    }
    Eigen::VectorXd grad(flat.size());
    for (int g = 0; g < gates; ++g)
      for (int a = 0; a < kGeneratorCount; ++a) {
        const Eigen::Index k = g * kGeneratorCount + a;
        Eigen::VectorXd probe = flat.segment<kGeneratorCount>(g * kGeneratorCount);
        probe(a) += step;
        const double plus = decoded_qfi(after[g] * embed(su4_gate(probe), g, width_) * before[g], block_);
        probe(a) -= 2 * step;
        const double minus = decoded_qfi(after[g] * embed(su4_gate(probe), g, width_) * before[g], block_);
        grad(k) = (plus - minus) / (2 * step);
      }
    return grad;
  }

 private:
  Eigen::Index dim() const { return Eigen::Index{1} << width_; }
  static Gate gate_at(const Eigen::VectorXd& flat, int g) {
    return su4_gate(flat.segment<kGeneratorCount>(g * kGeneratorCount));
  }

  const DensityBlock& block_;
  int width_;
};

}  // namespace

DecoderResult optimize_decoder(const DensityBlock& block, const OptimizerConfig& config) {
  config.validate();
  DecoderResult result;
  result.circuit = DecoderCircuit::identity(block.sites);
  const SweepObjective objective(block);
  const Eigen::Index n = static_cast<Eigen::Index>(result.circuit.gates.size()) * kGeneratorCount;

  Eigen::VectorXd best_params = Eigen::VectorXd::Zero(n);
  result.decoded_qfi = objective(best_params);
  result.best_restart = 0;
  if (n == 0) return result;

  for (int restart = 0; restart <= config.restarts; ++restart) {
    Eigen::VectorXd params = Eigen::VectorXd::Zero(n);
    if (restart > 0) {
      std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                        static_cast<std::uint32_t>(restart)};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> uniform(-config.init_range, config.init_range);
      for (Eigen::Index k = 0; k < n; ++k) params(k) = uniform(rng);
    }
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
    double restart_best = -1.0;
    bool aborted = false;
    for (int step = 0; step <= config.steps; ++step) {
      double value = 0.0;
      Eigen::VectorXd grad;
      try {
        value = objective(params);
        if (step < config.steps) grad = objective.gradient(params, config.fd_step);
      } catch (const std::exception&) {
        aborted = true;
        break;
      }
      if (!std::isfinite(value) || (step < config.steps && !grad.allFinite())) {
        aborted = true;
        break;
      }
      if (value > result.decoded_qfi) {
        result.decoded_qfi = value;
        best_params = params;
        result.best_restart = restart;
      }
      restart_best = std::max(restart_best, value);
      if (config.keep_trace) result.trace.push_back({restart, step, value, restart_best});
      if (step == config.steps) break;

      m = config.beta1 * m + (1 - config.beta1) * grad;
      v = config.beta2 * v + (1 - config.beta2) * grad.cwiseAbs2();
      const double c1 = 1 - std::pow(config.beta1, step + 1);
      const double c2 = 1 - std::pow(config.beta2, step + 1);
      params += config.learning_rate *
                ((m / c1).array() / ((v / c2).array().sqrt() + config.epsilon)).matrix();
    }
    if (aborted) result.aborted_restarts.push_back(restart);
  }
  result.circuit.assign(best_params);
  return result;
}

}  // namespace spinqfi
