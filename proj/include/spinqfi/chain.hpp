#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace spinqfi {

using Complex = std::complex<double>;
using StateVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

// Basis convention used everywhere in the library:
//   bit (i-1) of a basis index encodes site i (sites are 1-based),
//   bit value 0 = spin up (vacuum), bit value 1 = spin down (one magnon).
// The fully polarized state is therefore basis index 0.

inline constexpr int kMaxSites = 14;

enum class Boundary { open };

/// Immutable description of the XX chain with a transverse field.
struct ChainSpec {
  int sites = 1;          // N
  double coupling = 1.0;  // J, sets the energy unit
  double field = 0.0;     // h, in units of J
  int source = 1;         // site carrying the encoded parameter
  Boundary boundary = Boundary::open;

  /// Throws std::invalid_argument on a malformed description.
  void validate() const;

  std::size_t dimension() const { return std::size_t{1} << sites; }

  ChainSpec with_field(double h) const {
    ChainSpec copy = *this;
    copy.field = h;
    return copy;
  }
};

/// Thrown when a computation hits a numerically singular or non-finite case.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t site_bit(int site) { return std::uint64_t{1} << (site - 1); }

/// Number of sites encoded by a state of the given length; throws unless the
/// length is a power of two within the supported range.
int sites_for_dimension(Eigen::Index dimension);

void require_site(int site, int sites, const char* what);

}  // namespace spinqfi
