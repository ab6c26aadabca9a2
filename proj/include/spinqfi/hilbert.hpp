#pragma once

#include <Eigen/Sparse>

#include "spinqfi/chain.hpp"

namespace spinqfi {

/// Real symmetric operator on the 2^N computational basis.
///
/// Every operator this model needs (the Hamiltonian, the field term, the
/// magnon-number projectors) has real matrix elements in the computational
/// basis, so storage is a real sparse matrix. Construction rejects matrices
/// whose asymmetry exceeds 1e-12 in max norm.
class HermitianOperator {
 public:
  using Storage = Eigen::SparseMatrix<double>;

  explicit HermitianOperator(Storage matrix);

  const Storage& matrix() const { return matrix_; }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix_); }
  Eigen::Index dimension() const { return matrix_.rows(); }
  int sites() const { return sites_for_dimension(matrix_.rows()); }

  StateVector apply(const StateVector& state) const;

 private:
  Storage matrix_;
};

enum class Axis { x, y, z };

/// J * sum_i (X_i X_{i+1} + Y_i Y_{i+1}) + h * sum_i X_i, open boundaries.
HermitianOperator build_hamiltonian(const ChainSpec& spec);

/// sum_i X_i.
HermitianOperator field_operator(int sites);

/// Diagonal projector onto basis states with exactly `magnons` down spins.
HermitianOperator magnon_projector(const ChainSpec& spec, int magnons);

StateVector vacuum_state(int sites);
StateVector one_magnon_state(int sites, int site);

/// Single-site Pauli. Y|up> = i|down>, Y|down> = -i|up>.
StateVector apply_pauli(const StateVector& state, int site, Axis axis);

/// exp(-i angle Y_site / 2) applied to `state`; requires |angle| < pi.
StateVector encode(const StateVector& state, int site, double angle);

int magnon_count(std::uint64_t basis_index);

}  // namespace spinqfi
