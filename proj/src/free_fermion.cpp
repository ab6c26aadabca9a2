#include "spinqfi/free_fermion.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace spinqfi {

namespace {

double bessel_series(int n, double x) {
  const double half = 0.5 * x;
  const double q = half * half;
  double term = std::exp(n * std::log(half) - std::lgamma(n + 1.0));
  double sum = term;
  for (int k = 1; k < 200; ++k) {
    term *= -q / (static_cast<double>(k) * (k + n));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum) || term == 0.0) break;
  }
  return sum;
}

double bessel_miller(int n, double x) {
  constexpr double kBig = 1e200;
  const double two_over_x = 2.0 / x;
  const int top = std::max(n, static_cast<int>(x));
  int start = top + static_cast<int>(std::sqrt(60.0 * top)) + 30;
  start += start % 2;

  double above = 0.0, current = 1e-250, result = 0.0, norm = 0.0;
  for (int k = start; k > 0; --k) {
    const double below = k * two_over_x * current - above;
    above = current;
    current = below;  // current holds the unnormalized J_{k-1}
    if (std::abs(current) > kBig) {
      current /= kBig;
      above /= kBig;
      result /= kBig;
      norm /= kBig;
    }
    if (k - 1 == n) result = current;
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * current;
  }
  norm += current;  // J_0
  return result / norm;
}

Complex minus_i_power(int n) {
  switch (((n % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, -1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, 1.0};
  }
}

}  // namespace

double bessel_j(int order, double x) {
  if (order < 0) return (order % 2 ? -1.0 : 1.0) * bessel_j(-order, x);
  if (x < 0) return (order % 2 ? -1.0 : 1.0) * bessel_j(order, -x);
  if (x == 0.0) return order == 0 ? 1.0 : 0.0;
  if (x < 2.0) return bessel_series(order, x);
  return bessel_miller(order, x);
}

Eigen::VectorXd bessel_j_sequence(int max_order, double x) {
  if (max_order < 0) throw std::invalid_argument("max order must be non-negative");
  if (x < 0) throw std::invalid_argument("bessel_j_sequence expects x >= 0");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(max_order + 1);
  if (x == 0.0) {
    out(0) = 1.0;
    return out;
  }
  if (x < 2.0) {
    for (int n = 0; n <= max_order; ++n) out(n) = bessel_series(n, x);
    return out;
  }
  constexpr double kBig = 1e200;
  const int top = std::max(max_order, static_cast<int>(x));
  int start = top + static_cast<int>(std::sqrt(60.0 * top)) + 30;
  start += start % 2;
  double above = 0.0, current = 1e-250, norm = 0.0;
  for (int k = start; k > 0; --k) {
    const double below = k * (2.0 / x) * current - above;
    above = current;
    current = below;
    if (std::abs(current) > kBig) {
      current /= kBig;
      above /= kBig;
      out /= kBig;
      norm /= kBig;
    }
    if (k - 1 <= max_order) out(k - 1) = current;
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * current;
  }
  norm += current;
  return out / norm;
}

Complex green_infinite(int offset, double tJ) {
  return minus_i_power(offset) * bessel_j(offset, 4.0 * tJ);
}

Complex green_open(int chain_length, int site, int source, double tJ) {
  if (chain_length < 1) throw std::invalid_argument("chain length must be positive");
  require_site(site, chain_length, "site");
  require_site(source, chain_length, "source");
  const double spacing = std::numbers::pi / (chain_length + 1);
  Complex sum = 0.0;
  for (int m = 1; m <= chain_length; ++m) {
    const double q = m * spacing;
    sum += std::sin(q * site) * std::sin(q * source) * std::polar(1.0, -4.0 * tJ * std::cos(q));
  }
  return 2.0 / (chain_length + 1) * sum;
}

Complex green_semi_infinite(int site, int source, double tJ) {
  if (site < 1 || source < 1) throw std::out_of_range("semi-infinite sites start at 1");
  return green_infinite(site - source, tJ) - minus_i_power(site + source) * bessel_j(site + source, 4.0 * tJ);
}

Eigen::VectorXd qfi_profile_analytic(ChainKind kind, int source, double tJ, std::optional<int> chain_length,
                                     std::optional<SiteRange> range) {
  if (kind == ChainKind::open && !chain_length) throw std::invalid_argument("open chain profile needs N");
  if (!range) {
    if (kind != ChainKind::open) throw std::invalid_argument("unbounded chain profile needs a site range");
    range = SiteRange{1, *chain_length};
  }
  if (range->last < range->first) throw std::invalid_argument("empty site range");
  Eigen::VectorXd profile(range->last - range->first + 1);
  for (int j = range->first; j <= range->last; ++j) {
    Complex g;
    switch (kind) {
      case ChainKind::infinite: g = green_infinite(j - source, tJ); break;
      case ChainKind::semi_infinite: g = green_semi_infinite(j, source, tJ); break;
      case ChainKind::open: g = green_open(*chain_length, j, source, tJ); break;
    }
    profile(j - range->first) = std::norm(g);
  }
  return profile;
}

double block_weight_analytic(std::span<const int> block, int chain_length, int source, double tJ) {
  if (block.empty()) throw std::invalid_argument("block must not be empty");
  std::set<int> seen;
  double weight = 0.0;
  for (int site : block) {
    if (!seen.insert(site).second) throw std::invalid_argument("duplicate site in block");
    weight += std::norm(green_open(chain_length, site, source, tJ));
  }
  return weight;
}

PropagatorTable open_propagator_table(int chain_length, double tJ) {
  PropagatorTable table{ComplexMatrix(chain_length, chain_length), chain_length, tJ};
  for (int j = 1; j <= chain_length; ++j)
    for (int s = 1; s <= chain_length; ++s) table.values(j - 1, s - 1) = green_open(chain_length, j, s, tJ);
  return table;
}

}  // namespace spinqfi
