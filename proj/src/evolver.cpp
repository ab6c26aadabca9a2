#include "spinqfi/evolver.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

namespace spinqfi {

namespace {

double row_sum_bound(const HermitianOperator::Storage& m) {
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(m.rows());
  for (int k = 0; k < m.outerSize(); ++k)
    for (HermitianOperator::Storage::InnerIterator it(m, k); it; ++it) sums(it.row()) += std::abs(it.value());
  return sums.size() ? sums.maxCoeff() : 0.0;
}

}  // namespace

Evolver::Evolver(const HermitianOperator& hamiltonian, EvolutionMethod method)
    : method_(method),
      sites_(hamiltonian.sites()),
      dimension_(hamiltonian.dimension()),
      sparse_(hamiltonian.matrix()) {
  if (method_ == EvolutionMethod::automatic)
    method_ = sites_ <= kAutoDenseMaxSites ? EvolutionMethod::dense : EvolutionMethod::krylov;
  if (method_ == EvolutionMethod::dense) {
    if (sites_ > kDenseMaxSites)
      throw std::invalid_argument("dense evolution is limited to N <= " + std::to_string(kDenseMaxSites));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hamiltonian.dense());
    if (solver.info() != Eigen::Success) throw NumericalError("Hamiltonian eigendecomposition failed");
    energies_ = solver.eigenvalues();
    eigenvectors_ = solver.eigenvectors();
  }
  norm_bound_ = row_sum_bound(sparse_);
}

const Eigen::VectorXd& Evolver::energies() const {
  if (method_ != EvolutionMethod::dense) throw std::logic_error("energies are only kept by the dense path");
  return energies_;
}

StateVector Evolver::evolve(const StateVector& state, double t) const {
  if (state.size() != dimension_) throw std::invalid_argument("state dimension does not match Hamiltonian");
  if (!std::isfinite(t)) throw std::invalid_argument("evolution time must be finite");
  if (t == 0.0) return state;

  if (method_ == EvolutionMethod::dense) {
    Eigen::VectorXd re = eigenvectors_.transpose() * state.real();
    Eigen::VectorXd im = eigenvectors_.transpose() * state.imag();
    Eigen::VectorXd out_re(dimension_), out_im(dimension_);
    for (Eigen::Index k = 0; k < dimension_; ++k) {
      const double c = std::cos(energies_(k) * t), s = std::sin(energies_(k) * t);
      // (re + i im) * (c - i s)
      out_re(k) = re(k) * c + im(k) * s;
      out_im(k) = im(k) * c - re(k) * s;
    }
    StateVector out(dimension_);
    out.real() = eigenvectors_ * out_re;
    out.imag() = eigenvectors_ * out_im;
    return out;
  }

  StateVector current = state;
  double remaining = std::abs(t);
  const double sign = t < 0 ? -1.0 : 1.0;
  double dt = norm_bound_ > 0 ? std::min(remaining, 6.0 / norm_bound_) : remaining;
  while (remaining > 0.0) {
    dt = std::min(dt, remaining);
    double error = 0.0;
    StateVector trial = krylov_step(current, sign * dt, error);
    const double scale = std::max(current.norm(), 1e-300);
    if (error > kKrylovTolerance * scale && dt > 1e-8 * std::abs(t)) {
      dt *= 0.5;
      continue;
    }
    current = std::move(trial);
    remaining -= dt;
    if (error < 1e-3 * kKrylovTolerance * scale) dt *= 1.5;
  }
  return current;
}

StateVector Evolver::krylov_step(const StateVector& state, double dt, double& error_estimate) const {
  const double beta0 = state.norm();
  error_estimate = 0.0;
  if (beta0 == 0.0) return state;

  const int max_dim = static_cast<int>(std::min<Eigen::Index>(kKrylovDimension, dimension_));
  std::vector<StateVector> basis;
  basis.reserve(max_dim + 1);
  std::vector<double> alpha, beta;
  basis.push_back(state / beta0);

  auto apply = [this](const StateVector& v) {
    StateVector w(v.size());
    w.real() = sparse_ * v.real();
    w.imag() = sparse_ * v.imag();
    return w;
  };

  double next_beta = 0.0;
  for (int k = 0; k < max_dim; ++k) {
    StateVector w = apply(basis[k]);
    alpha.push_back(basis[k].dot(w).real());
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j <= k; ++j) w -= basis[j].dot(w) * basis[j];
    next_beta = w.norm();
    if (k + 1 == max_dim || next_beta < 1e-14 * std::max(1.0, norm_bound_)) break;
    beta.push_back(next_beta);
    basis.push_back(w / next_beta);
  }

  const int m = static_cast<int>(alpha.size());
  const bool exhausted = next_beta < 1e-14 * std::max(1.0, norm_bound_);
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k) tri(k, k) = alpha[k];
  for (int k = 0; k + 1 < m; ++k) tri(k, k + 1) = tri(k + 1, k) = beta[k];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(tri);
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  const Eigen::MatrixXd& vecs = solver.eigenvectors();
  Eigen::VectorXcd phases(m);
  for (int k = 0; k < m; ++k) phases(k) = std::polar(vecs(0, k), -lambda(k) * dt);
  const Eigen::VectorXcd coeffs = vecs.cast<Complex>() * phases;

  StateVector out = StateVector::Zero(dimension_);
  for (int k = 0; k < m; ++k) out += coeffs(k) * basis[k];
  out *= beta0;
  error_estimate = exhausted ? 0.0 : beta0 * next_beta * std::abs(coeffs(m - 1));
  return out;
}

ComplexMatrix Evolver::evolve_columns(const ComplexMatrix& states, double t) const {
  if (states.rows() != dimension_) throw std::invalid_argument("state dimension does not match Hamiltonian");
  if (method_ == EvolutionMethod::dense) {
    Eigen::MatrixXd re = eigenvectors_.transpose() * states.real();
    Eigen::MatrixXd im = eigenvectors_.transpose() * states.imag();
    for (Eigen::Index k = 0; k < dimension_; ++k) {
      const double c = std::cos(energies_(k) * t), s = std::sin(energies_(k) * t);
      const Eigen::RowVectorXd r = re.row(k), i = im.row(k);
      re.row(k) = r * c + i * s;
      im.row(k) = i * c - r * s;
    }
    ComplexMatrix out(states.rows(), states.cols());
    out.real() = eigenvectors_ * re;
    out.imag() = eigenvectors_ * im;
    return out;
  }
  ComplexMatrix out(states.rows(), states.cols());
  for (Eigen::Index c = 0; c < states.cols(); ++c) out.col(c) = evolve(states.col(c), t);
  return out;
}

StateVector evolve(const StateVector& state, const HermitianOperator& hamiltonian, double t,
                   EvolutionMethod method) {
  return Evolver(hamiltonian, method).evolve(state, t);
}

}  // namespace spinqfi
