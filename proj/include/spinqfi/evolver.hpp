#pragma once

#include <memory>

#include "spinqfi/hilbert.hpp"

namespace spinqfi {

enum class EvolutionMethod {
  automatic,  // dense up to kAutoDenseMaxSites, Krylov above
  dense,      // full eigendecomposition, N <= kDenseMaxSites
  krylov,     // Lanczos exponential action on the sparse operator
};

inline constexpr int kDenseMaxSites = 12;
inline constexpr int kAutoDenseMaxSites = 10;

/// Applies exp(-i H t) for a fixed Hamiltonian.
///
/// The dense path diagonalizes H once and is exact to rounding for any t.
/// The Krylov path builds a Lanczos basis per substep with full
/// reorthogonalization and shrinks the substep until the a-posteriori
/// residual estimate is below `kKrylovTolerance`.
/// An Evolver is immutable after construction and safe to share between threads.
class Evolver {
 public:
  explicit Evolver(const HermitianOperator& hamiltonian,
                   EvolutionMethod method = EvolutionMethod::automatic);

  StateVector evolve(const StateVector& state, double t) const;

  /// Evolves every column of `states` by the same time.
  ComplexMatrix evolve_columns(const ComplexMatrix& states, double t) const;

  EvolutionMethod method() const { return method_; }
  int sites() const { return sites_; }
  Eigen::Index dimension() const { return dimension_; }

  /// Eigenvalues of H (dense path only).
  const Eigen::VectorXd& energies() const;

  static constexpr double kKrylovTolerance = 1e-13;
  static constexpr int kKrylovDimension = 30;

 private:
  StateVector krylov_step(const StateVector& state, double dt, double& error_estimate) const;

  EvolutionMethod method_;
  int sites_;
  Eigen::Index dimension_;
  HermitianOperator::Storage sparse_;
  Eigen::VectorXd energies_;
  Eigen::MatrixXd eigenvectors_;
  double norm_bound_ = 0.0;
};

/// One-shot convenience: builds an Evolver and applies it.
StateVector evolve(const StateVector& state, const HermitianOperator& hamiltonian, double t,
                   EvolutionMethod method = EvolutionMethod::automatic);

}  // namespace spinqfi
