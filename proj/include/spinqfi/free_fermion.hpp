#pragma once

#include <optional>
#include <span>

#include "spinqfi/chain.hpp"

namespace spinqfi {

// Closed-form single-particle propagators of the h = 0 chain. All times are
// given as the dimensionless product tJ; the dispersion is 4J cos q, so the
// Bessel argument is 4tJ and the maximal group velocity is 4J.

/// Bessel function of the first kind J_n(x) for integer order.
///
/// Power series for |x| < 2, Miller's downward recurrence normalized with
/// J_0 + 2 sum_k J_2k = 1 otherwise. Accurate to ~1e-15 absolute for
/// |n| <= 200, |x| <= 50.
double bessel_j(int order, double x);

/// J_0(x) .. J_max(x) from a single downward sweep (x >= 0).
Eigen::VectorXd bessel_j_sequence(int max_order, double x);

/// (-i)^n J_n(4tJ): infinite chain, n = j - s.
Complex green_infinite(int offset, double tJ);

/// Standing-wave propagator of the open chain with N sites.
Complex green_open(int chain_length, int site, int source, double tJ);

/// Image-source propagator with the hard wall at site 0.
Complex green_semi_infinite(int site, int source, double tJ);

enum class ChainKind { infinite, semi_infinite, open };

/// Inclusive site range [first, last]; for the infinite chain sites are offsets
/// relative to an arbitrary origin and may be negative.
struct SiteRange {
  int first = 1;
  int last = 1;
};

/// Single-site QFI profile F_j = |G_{j,s}|^2 over a site range.
///
/// `chain_length` is required for ChainKind::open; when `range` is empty the
/// open chain defaults to 1..N. Entry k of the result belongs to site
/// range.first + k.
Eigen::VectorXd qfi_profile_analytic(ChainKind kind, int source, double tJ,
                                     std::optional<int> chain_length = std::nullopt,
                                     std::optional<SiteRange> range = std::nullopt);

/// p_A(t) = sum over the block of |G_{l,s}|^2 on the open chain.
double block_weight_analytic(std::span<const int> block, int chain_length, int source, double tJ);

/// Full N x N open-chain propagator matrix G[j-1][s-1] at one time.
struct PropagatorTable {
  ComplexMatrix values;
  int chain_length = 0;
  double tJ = 0.0;
};

PropagatorTable open_propagator_table(int chain_length, double tJ);

}  // namespace spinqfi
