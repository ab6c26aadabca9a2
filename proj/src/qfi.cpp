#include "spinqfi/qfi.hpp"

#include <cmath>
#include <numeric>
#include <set>

namespace spinqfi {

TangentPair make_tangent_pair(const ChainSpec& spec, const Evolver& evolver, double tJ) {
  spec.validate();
  if (evolver.sites() != spec.sites) throw std::invalid_argument("evolver does not match chain");
  const StateVector vacuum = vacuum_state(spec.sites);
  const StateVector kick = Complex(0.0, -0.5) * apply_pauli(vacuum, spec.source, Axis::y);
  // Time is in units of 1/J; the evolver's Hamiltonian already carries J.
  const double t = tJ / spec.coupling;
  return {evolver.evolve(vacuum, t), evolver.evolve(kick, t), tJ, spec};
}

TangentPair make_tangent_pair(const ChainSpec& spec, double tJ) {
  return make_tangent_pair(spec, Evolver(build_hamiltonian(spec)), tJ);
}

void walk_tangent(const ChainSpec& spec, const Evolver& evolver, std::span<const double> tJ_grid,
                  const std::function<void(const TangentPair&)>& visit) {
  spec.validate();
  if (evolver.sites() != spec.sites) throw std::invalid_argument("evolver does not match chain");
  for (std::size_t k = 1; k < tJ_grid.size(); ++k)
    if (!(tJ_grid[k] > tJ_grid[k - 1])) throw std::invalid_argument("time grid must be strictly increasing");
  ComplexMatrix states(static_cast<Eigen::Index>(spec.dimension()), 2);
  states.col(0) = vacuum_state(spec.sites);
  states.col(1) = Complex(0.0, -0.5) * apply_pauli(states.col(0), spec.source, Axis::y);
  double now = 0.0;
  for (double tJ : tJ_grid) {
    const double dt = (tJ - now) / spec.coupling;
    if (dt != 0.0) states = evolver.evolve_columns(states, dt);
    now = tJ;
    visit(TangentPair{states.col(0), states.col(1), tJ, spec});
  }
}

void DensityBlock::validate(double tolerance) const {
  const Eigen::Index dim = Eigen::Index{1} << sites.size();
  if (rho.rows() != dim || rho.cols() != dim || drho.rows() != dim || drho.cols() != dim)
    throw NumericalError("density block has inconsistent dimensions");
  if (std::abs(rho.trace() - 1.0) > tolerance) throw NumericalError("density block trace differs from 1");
  if (std::abs(drho.trace()) > tolerance) throw NumericalError("derivative block is not traceless");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tolerance ||
      (drho - drho.adjoint()).cwiseAbs().maxCoeff() > tolerance)
    throw NumericalError("density block is not Hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(rho, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < -tolerance) throw NumericalError("density block is not positive");
}

namespace {

struct SiteMasks {
  std::vector<std::uint64_t> scatter;  // local index -> global bits
  std::uint64_t complement = 0;
};

SiteMasks site_masks(std::span<const int> sites, int total_sites) {
  if (sites.empty()) throw std::invalid_argument("site list must not be empty");
  std::set<int> seen;
  std::uint64_t block_mask = 0;
  for (int site : sites) {
    require_site(site, total_sites, "block site");
    if (!seen.insert(site).second) throw std::invalid_argument("duplicate site in block");
    block_mask |= site_bit(site);
  }
  const std::size_t width = sites.size();
  SiteMasks masks;
  masks.scatter.resize(std::size_t{1} << width);
  for (std::size_t a = 0; a < masks.scatter.size(); ++a) {
    std::uint64_t bits = 0;
    for (std::size_t k = 0; k < width; ++k)
      if ((a >> k) & 1U) bits |= site_bit(sites[k]);
    masks.scatter[a] = bits;
  }
  masks.complement = ((std::uint64_t{1} << total_sites) - 1) & ~block_mask;
  return masks;
}

// Columns are indexed by the environment configuration.
ComplexMatrix gather(const StateVector& v, const SiteMasks& masks) {
  const auto local = static_cast<Eigen::Index>(masks.scatter.size());
  const Eigen::Index envs = v.size() / local;
  ComplexMatrix out(local, envs);
  std::uint64_t env = 0;
  for (Eigen::Index e = 0; e < envs; ++e) {
    for (Eigen::Index a = 0; a < local; ++a) out(a, e) = v(static_cast<Eigen::Index>(env | masks.scatter[a]));
    env = (env - masks.complement) & masks.complement;
  }
  return out;
}

}  // namespace

DensityBlock reduce(const StateVector& reference, const StateVector& tangent, std::span<const int> sites) {
  if (reference.size() != tangent.size()) throw std::invalid_argument("reference/tangent size mismatch");
  const int total = sites_for_dimension(reference.size());
  const SiteMasks masks = site_masks(sites, total);
  const ComplexMatrix x = gather(reference, masks);
  const ComplexMatrix y = gather(tangent, masks);
  DensityBlock block;
  block.rho = x * x.adjoint();
  const ComplexMatrix cross = y * x.adjoint();
  block.drho = cross + cross.adjoint();
  block.sites.assign(sites.begin(), sites.end());
  return block;
}

DensityBlock reduce(const TangentPair& pair, std::span<const int> sites) {
  return reduce(pair.reference, pair.tangent, sites);
}

ComplexMatrix partial_trace(const ComplexMatrix& rho, int width, std::span<const int> kept_bits) {
  const Eigen::Index dim = Eigen::Index{1} << width;
  if (rho.rows() != dim || rho.cols() != dim) throw std::invalid_argument("partial_trace: dimension mismatch");
  std::uint64_t kept_mask = 0;
  for (int bit : kept_bits) {
    if (bit < 0 || bit >= width) throw std::out_of_range("partial_trace: bit outside block");
    kept_mask |= std::uint64_t{1} << bit;
  }
  const std::uint64_t env_mask = (static_cast<std::uint64_t>(dim) - 1) & ~kept_mask;
  const Eigen::Index local = Eigen::Index{1} << kept_bits.size();
  std::vector<std::uint64_t> scatter(static_cast<std::size_t>(local));
  for (Eigen::Index a = 0; a < local; ++a) {
    std::uint64_t bits = 0;
    for (std::size_t k = 0; k < kept_bits.size(); ++k)
      if ((a >> k) & 1) bits |= std::uint64_t{1} << kept_bits[k];
    scatter[a] = bits;
  }
  ComplexMatrix out = ComplexMatrix::Zero(local, local);
  std::uint64_t env = 0;
  do {
    for (Eigen::Index a = 0; a < local; ++a)
      for (Eigen::Index b = 0; b < local; ++b)
        out(a, b) += rho(static_cast<Eigen::Index>(scatter[a] | env), static_cast<Eigen::Index>(scatter[b] | env));
    env = (env - env_mask) & env_mask;
  } while (env != 0);
  return out;
}

double bloch_qfi(const Eigen::Vector3d& r, const Eigen::Vector3d& dr) {
  const double r2 = r.squaredNorm();
  if (r2 > (1.0 + 1e-12) * (1.0 + 1e-12)) throw std::invalid_argument("Bloch vector longer than 1");
  const double mixedness = 1.0 - r2;
  const double radial = r.dot(dr);
  if (mixedness < kPureThreshold) {
    if (std::abs(radial) < kRadialThreshold) return dr.squaredNorm();
    throw NumericalError("radial Bloch derivative at a pure state: QFI is singular");
  }
  return dr.squaredNorm() + radial * radial / mixedness;
}

double spectral_qfi(const DensityBlock& block) { return spectral_qfi(block.rho, block.drho); }

double site_qfi(const TangentPair& pair, int site) {
  const int sites[] = {site};
  return spectral_qfi(reduce(pair, sites));
}

double block_qfi(const TangentPair& pair, std::span<const int> sites) {
  const SiteMasks masks = site_masks(sites, pair.spec.sites);
  const ComplexMatrix x = gather(pair.reference, masks);
  if (x.cols() >= x.rows()) return spectral_qfi(reduce(pair, sites));
  const ComplexMatrix y = gather(pair.tangent, masks);

  // rho = X X^dag shares its nonzero spectrum with X^dag X
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(x.adjoint() * x);
  if (solver.info() != Eigen::Success) throw NumericalError("block_qfi: eigendecomposition failed");
  const Eigen::VectorXd& mu = solver.eigenvalues();
  const double cutoff = kSpectralThreshold * std::max(mu.maxCoeff(), 0.0);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index k = 0; k < mu.size(); ++k)
    if (mu(k) > cutoff && mu(k) > 0) kept.push_back(k);
  const auto rank = static_cast<Eigen::Index>(kept.size());
  ComplexMatrix u(x.rows(), rank);
  Eigen::VectorXd lambda(rank);
  for (Eigen::Index r = 0; r < rank; ++r) {
    lambda(r) = mu(kept[static_cast<std::size_t>(r)]);
    u.col(r) = x * solver.eigenvectors().col(kept[static_cast<std::size_t>(r)]) / std::sqrt(lambda(r));
  }

  // drho U = Y (X^dag U) + X (Y^dag U)
  const ComplexMatrix du = y * (x.adjoint() * u) + x * (y.adjoint() * u);
  const ComplexMatrix d = u.adjoint() * du;
  const ComplexMatrix residual = du - u * d;
  double total = 0.0;
  for (Eigen::Index m = 0; m < rank; ++m) {
    for (Eigen::Index n = 0; n < rank; ++n) total += 2.0 * std::norm(d(m, n)) / (lambda(m) + lambda(n));
    // (m, kernel) and (kernel, m)
    total += 4.0 * residual.col(m).squaredNorm() / lambda(m);
  }
  return std::max(total, 0.0);
}

double global_qfi(const TangentPair& pair) {
  return 4.0 * (pair.tangent.squaredNorm() - std::norm(pair.reference.dot(pair.tangent)));
}

SiteBloch site_bloch(const TangentPair& pair, int site) {
  const int sites[] = {site};
  const DensityBlock block = reduce(pair, sites);
  return {bloch_vector(block.rho), bloch_vector(block.drho)};
}

double site_qfi_sum(const TangentPair& pair) {
  double total = 0.0;
  for (int j = 1; j <= pair.spec.sites; ++j) total += site_qfi(pair, j);
  return total;
}

std::vector<int> site_interval(int first, int last) {
  if (last < first) throw std::invalid_argument("empty site interval");
  std::vector<int> out(static_cast<std::size_t>(last - first + 1));
  std::iota(out.begin(), out.end(), first);
  return out;
}

}  // namespace spinqfi
