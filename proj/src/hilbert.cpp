#include "spinqfi/hilbert.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <vector>

namespace spinqfi {

HermitianOperator::HermitianOperator(Storage matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols())
    throw std::invalid_argument("operator must be square");
  sites_for_dimension(matrix_.rows());
  matrix_.makeCompressed();
  const Storage transposed = matrix_.transpose();
  const Storage diff = matrix_ - transposed;
  double worst = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (Storage::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  if (worst > 1e-12) throw std::invalid_argument("operator is not Hermitian");
}

StateVector HermitianOperator::apply(const StateVector& state) const {
  if (state.size() != matrix_.rows()) throw std::invalid_argument("dimension mismatch");
  StateVector out(state.size());
  out.real() = matrix_ * state.real();
  out.imag() = matrix_ * state.imag();
  return out;
}

int magnon_count(std::uint64_t basis_index) { return std::popcount(basis_index); }

namespace {

using Triplet = Eigen::Triplet<double>;

HermitianOperator from_triplets(Eigen::Index dim, const std::vector<Triplet>& entries) {
  HermitianOperator::Storage m(dim, dim);
  m.setFromTriplets(entries.begin(), entries.end());
  return HermitianOperator(std::move(m));
}

}  // namespace

HermitianOperator build_hamiltonian(const ChainSpec& spec) {
  spec.validate();
  const auto dim = static_cast<Eigen::Index>(spec.dimension());
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(dim) * (2 * spec.sites));
  // X_i X_{i+1} + Y_i Y_{i+1} = 2 (S+_i S-_{i+1} + S-_i S+_{i+1}): hops a magnon
  // between neighbours with amplitude 2J and annihilates aligned pairs.
  for (Eigen::Index b = 0; b < dim; ++b) {
    const auto basis = static_cast<std::uint64_t>(b);
    for (int i = 1; i < spec.sites; ++i) {
      const std::uint64_t pair = site_bit(i) | site_bit(i + 1);
      const std::uint64_t bits = basis & pair;
      if (bits != 0 && bits != pair)
        entries.emplace_back(static_cast<Eigen::Index>(basis ^ pair), b, 2.0 * spec.coupling);
    }
    if (spec.field != 0.0)
      for (int i = 1; i <= spec.sites; ++i)
        entries.emplace_back(static_cast<Eigen::Index>(basis ^ site_bit(i)), b, spec.field);
  }
  return from_triplets(dim, entries);
}

HermitianOperator field_operator(int sites) {
  ChainSpec spec;
  spec.sites = sites;
  spec.validate();
  const auto dim = static_cast<Eigen::Index>(spec.dimension());
  std::vector<Triplet> entries;
  for (Eigen::Index b = 0; b < dim; ++b)
    for (int i = 1; i <= sites; ++i)
      entries.emplace_back(static_cast<Eigen::Index>(static_cast<std::uint64_t>(b) ^ site_bit(i)), b, 1.0);
  return from_triplets(dim, entries);
}

HermitianOperator magnon_projector(const ChainSpec& spec, int magnons) {
  spec.validate();
  if (magnons < 0 || magnons > spec.sites)
    throw std::out_of_range("magnon number outside 0..N");
  const auto dim = static_cast<Eigen::Index>(spec.dimension());
  std::vector<Triplet> entries;
  for (Eigen::Index b = 0; b < dim; ++b)
    if (magnon_count(static_cast<std::uint64_t>(b)) == magnons) entries.emplace_back(b, b, 1.0);
  return from_triplets(dim, entries);
}

StateVector vacuum_state(int sites) {
  ChainSpec spec;
  spec.sites = sites;
  spec.validate();
  StateVector v = StateVector::Zero(static_cast<Eigen::Index>(spec.dimension()));
  v(0) = 1.0;
  return v;
}

StateVector one_magnon_state(int sites, int site) {
  require_site(site, sites, "magnon site");
  StateVector v = vacuum_state(sites);
  v(0) = 0.0;
  v(static_cast<Eigen::Index>(site_bit(site))) = 1.0;
  return v;
}

StateVector apply_pauli(const StateVector& state, int site, Axis axis) {
  const int sites = sites_for_dimension(state.size());
  require_site(site, sites, "Pauli site");
  const std::uint64_t mask = site_bit(site);
  StateVector out(state.size());
  const Complex i_unit(0.0, 1.0);
  for (Eigen::Index b = 0; b < state.size(); ++b) {
    const auto basis = static_cast<std::uint64_t>(b);
    const bool down = (basis & mask) != 0;
    switch (axis) {
      case Axis::x:
        out(static_cast<Eigen::Index>(basis ^ mask)) = state(b);
        break;
      case Axis::y:
        out(static_cast<Eigen::Index>(basis ^ mask)) = (down ? -i_unit : i_unit) * state(b);
        break;
      case Axis::z:
        out(b) = down ? -state(b) : state(b);
        break;
    }
  }
  return out;
}

StateVector encode(const StateVector& state, int site, double angle) {
  if (!(std::abs(angle) < std::numbers::pi)) throw std::invalid_argument("encoding angle must satisfy |theta| < pi");
  // exp(-i a Y/2) = cos(a/2) I - i sin(a/2) Y
  StateVector rotated = apply_pauli(state, site, Axis::y);
  return std::cos(angle / 2) * state - Complex(0.0, std::sin(angle / 2)) * rotated;
}

}  // namespace spinqfi
