#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "spinqfi/free_fermion.hpp"
#include "spinqfi/qfi.hpp"

namespace spinqfi {

/// Site-summed single-site QFI on a strictly increasing tJ grid.
Eigen::VectorXd site_qfi_sum_series(const ChainSpec& spec, const Evolver& evolver, std::span<const double> tJ_grid);
Eigen::VectorXd site_qfi_sum_series(const ChainSpec& spec, std::span<const double> tJ_grid,
                                    EvolutionMethod method = EvolutionMethod::automatic);

struct DepletionCurve {
  std::vector<double> tJ;
  std::vector<double> eta;
  double field = 0.0;
  int sites = 0;
  int source = 0;
};

/// eta = 1 - sum_j F_j(t; h) / sum_j F_j(t; 0) from precomputed site sums.
DepletionCurve depletion_from_sums(const ChainSpec& spec, std::span<const double> tJ_grid,
                                   const Eigen::VectorXd& perturbed, const Eigen::VectorXd& baseline);

/// Runs both chains (h = spec.field and h = 0) and forms the ratio.
DepletionCurve depletion_eta(const ChainSpec& spec, std::span<const double> tJ_grid,
                             EvolutionMethod method = EvolutionMethod::automatic);

inline constexpr double kCollapseTolerance = 0.15;

struct CollapseReport {
  double deviation = 0.0;  // max over t and pairs of |a - b| / ((|a| + |b|) / 2)
  double worst_tJ = 0.0;
  double window_lo = 0.5;
  double window_hi = 1.5;
  bool collapsed = false;
};

/// Compares eta / h^2 across curves sharing one time grid.
CollapseReport collapse_check(std::span<const DepletionCurve> curves, double window_lo = 0.5,
                              double window_hi = 1.5);

struct RateFit {
  double field = 0.0;
  double gamma_star = 0.0;  // d eta / d(tJ), i.e. Gamma* in units of J
  double intercept = 0.0;
  double window_lo = 0.8;
  double window_hi = 1.2;
  std::vector<double> residuals;
};

/// Least-squares line of eta vs tJ inside [window_lo, window_hi] (>= 5 points).
RateFit fit_gamma_star(const DepletionCurve& curve, double window_lo = 0.8, double window_hi = 1.2);

/// Slope of Gamma* vs (h/J)^2 through the origin.
struct RatePrefactor {
  double slope = 0.0;
  std::vector<double> residuals;
};
RatePrefactor fit_rate_prefactor(std::span<const RateFit> fits, double coupling = 1.0);

/// Least-squares slope of log y vs log x; all entries must be positive.
double loglog_exponent(std::span<const double> x, std::span<const double> y);

/// (h^2 / 8J^2)(1 - cos 4tJ): infinite-chain vacuum-channel norm.
double vacuum_channel_norm(double tJ, double field, double coupling = 1.0);

/// h^2 |int_0^t sum_l G_{l,s}(t') dt'|^2 by composite Simpson with step halving.
/// ChainKind::infinite sums the lattice generating series; ChainKind::open
/// needs the chain length and uses the standing-wave propagator. Throws
/// NumericalError when successive halvings do not settle within 1e-10.
double vacuum_channel_norm_numerical(double tJ, double field, double coupling = 1.0,
                                     ChainKind kind = ChainKind::infinite, int source = 1,
                                     std::optional<int> chain_length = std::nullopt);

/// w_n = |P_n v|^2 for n = 0..N.
Eigen::VectorXd sector_weights(const StateVector& state);
Eigen::VectorXd sector_weights(const TangentPair& pair);

/// First-order leakage from the one-magnon into the two-magnon sector.
///
/// With `eigenstate` set (0-based, ascending energy) the initial state is that
/// one-magnon eigenstate of the h = 0 chain; otherwise it is the magnon
/// localized on the source site, propagated coherently through all one-magnon
/// eigenstates. Requires h > 0.
double golden_rule_p12(const ChainSpec& spec, double tJ, std::optional<int> eigenstate = std::nullopt);

/// Result of X_i acting on the one-magnon state c_l^dag |0> in Jordan-Wigner form.
struct VacuumTerm {
  double coefficient = 1.0;
};
struct TwoMagnonTerm {
  int first = 0;  // first < second, state c_first^dag c_second^dag |0>
  int second = 0;
  double coefficient = 1.0;
};
using MagnonAction = std::variant<VacuumTerm, TwoMagnonTerm>;

MagnonAction sigma_x_one_magnon_action(int magnon_site, int flip_site, int sites);

}  // namespace spinqfi
