#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>

#include "spinqfi/evolver.hpp"

namespace spinqfi {

/// Evolved reference state and evolved tangent at the operating point theta = 0.
///
/// reference = exp(-iHt)|up...up>, tangent = exp(-iHt) (-i/2) Y_s |up...up>.
/// The tangent has norm 1/2 for every h and t. The parametric family is
/// rho_theta = |psi_theta><psi_theta| with d rho = |tangent><reference| + h.c.
struct TangentPair {
  StateVector reference;
  StateVector tangent;
  double tJ = 0.0;
  ChainSpec spec;
};

TangentPair make_tangent_pair(const ChainSpec& spec, double tJ);
TangentPair make_tangent_pair(const ChainSpec& spec, const Evolver& evolver, double tJ);

/// Visits the tangent pair at each time of a strictly increasing tJ grid,
/// stepping the two states forward from one grid point to the next.
void walk_tangent(const ChainSpec& spec, const Evolver& evolver, std::span<const double> tJ_grid,
                  const std::function<void(const TangentPair&)>& visit);

/// Reduced state and its theta-derivative on an ordered site list.
/// Local basis index bit k encodes sites[k].
struct DensityBlock {
  ComplexMatrix rho;
  ComplexMatrix drho;
  std::vector<int> sites;

  int width() const { return static_cast<int>(sites.size()); }

  /// Throws NumericalError when trace, hermiticity or positivity are violated.
  void validate(double tolerance = 1e-10) const;
};

/// Bit-indexed partial trace of |ref><ref| and |tan><ref| + |ref><tan|.
DensityBlock reduce(const TangentPair& pair, std::span<const int> sites);
DensityBlock reduce(const StateVector& reference, const StateVector& tangent, std::span<const int> sites);

/// Partial trace of a block onto a subset of its local bit positions.
ComplexMatrix partial_trace(const ComplexMatrix& rho, int width, std::span<const int> kept_bits);

inline constexpr double kPureThreshold = 1e-10;
inline constexpr double kRadialThreshold = 1e-8;

/// Qubit QFI from the Bloch vector and its derivative.
///
/// Near-pure states (1 - |r|^2 < 1e-10) take the continuity limit |dr|^2 when
/// r . dr vanishes and raise NumericalError otherwise. |r| > 1 + 1e-12 is
/// rejected as unphysical.
double bloch_qfi(const Eigen::Vector3d& r, const Eigen::Vector3d& dr);

/// Bloch vector r_a = Tr(rho sigma_a) of a 2x2 density matrix (or derivative).
template <typename Derived>
Eigen::Vector3d bloch_vector(const Eigen::MatrixBase<Derived>& m) {
  eigen_assert(m.rows() == 2 && m.cols() == 2);
  // sigma_x, sigma_y, sigma_z in the (up, down) basis.
  return {2.0 * m(1, 0).real(), 2.0 * m(1, 0).imag(), (m(0, 0) - m(1, 1)).real()};
}

template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, 2, 2> qubit_density(const Eigen::Matrix<Scalar, 3, 1>& r, Scalar trace) {
  using C = std::complex<Scalar>;
  Eigen::Matrix<C, 2, 2> m;
  m << C(trace + r.z()), C(r.x(), -r.y()), C(r.x(), r.y()), C(trace - r.z());
  return m / Scalar(2);
}

inline constexpr double kSpectralThreshold = 1e-12;

/// Spectral QFI 2 sum |<mu|drho|nu>|^2 / (lambda_mu + lambda_nu) over pairs with
/// lambda_mu + lambda_nu > 1e-12 * lambda_max.
template <typename DerivedRho, typename DerivedD>
double spectral_qfi(const Eigen::MatrixBase<DerivedRho>& rho, const Eigen::MatrixBase<DerivedD>& drho) {
  using Matrix = Eigen::Matrix<typename DerivedRho::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (rho.rows() != rho.cols() || drho.rows() != drho.cols() || rho.rows() != drho.rows())
    throw std::invalid_argument("spectral_qfi: shape mismatch");
  const double scale = std::max(1.0, rho.cwiseAbs().maxCoeff());
  const double d_scale = std::max(1.0, drho.cwiseAbs().maxCoeff());
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * scale ||
      (drho - drho.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * d_scale)
    throw std::invalid_argument("spectral_qfi: inputs must be Hermitian");

  const Matrix rho_h = (rho + rho.adjoint()) / 2;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(rho_h);
  if (solver.info() != Eigen::Success) throw NumericalError("spectral_qfi: eigendecomposition failed");
  const auto& lambda = solver.eigenvalues();
  const Matrix d = solver.eigenvectors().adjoint() * drho * solver.eigenvectors();
  const double cutoff = kSpectralThreshold * std::max(lambda.maxCoeff(), 0.0);
  double total = 0.0;
  for (Eigen::Index m = 0; m < lambda.size(); ++m)
    for (Eigen::Index n = 0; n < lambda.size(); ++n) {
      const double denom = lambda(m) + lambda(n);
      if (denom > cutoff && denom > 0) total += 2.0 * std::norm(d(m, n)) / denom;
    }
  return std::max(total, 0.0);
}

double spectral_qfi(const DensityBlock& block);

double site_qfi(const TangentPair& pair, int site);
/// Blocks wider than their environment go through the rank-limited path: X^dag X is
/// diagonalized instead of rho, and kernel partners enter via the projected residual.
double block_qfi(const TangentPair& pair, std::span<const int> sites);

/// 4 (<tan|tan> - |<ref|tan>|^2); equals 1 for the Y-encoded polarized state.
double global_qfi(const TangentPair& pair);

/// Bloch vector and its theta-derivative on one site.
struct SiteBloch {
  Eigen::Vector3d r;
  Eigen::Vector3d dr;
};
SiteBloch site_bloch(const TangentPair& pair, int site);

/// Sum over all sites of the single-site QFI.
double site_qfi_sum(const TangentPair& pair);

std::vector<int> site_interval(int first, int last);

}  // namespace spinqfi
