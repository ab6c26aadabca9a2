#include "spinqfi/perturbation.hpp"

#include <bit>
#include <cmath>
#include <map>

namespace spinqfi {

Eigen::VectorXd site_qfi_sum_series(const ChainSpec& spec, const Evolver& evolver, std::span<const double> tJ_grid) {
  Eigen::VectorXd sums(static_cast<Eigen::Index>(tJ_grid.size()));
  Eigen::Index k = 0;
  walk_tangent(spec, evolver, tJ_grid, [&](const TangentPair& pair) { sums(k++) = site_qfi_sum(pair); });
  return sums;
}

Eigen::VectorXd site_qfi_sum_series(const ChainSpec& spec, std::span<const double> tJ_grid, EvolutionMethod method) {
  spec.validate();
  return site_qfi_sum_series(spec, Evolver(build_hamiltonian(spec), method), tJ_grid);
}

DepletionCurve depletion_from_sums(const ChainSpec& spec, std::span<const double> tJ_grid,
                                   const Eigen::VectorXd& perturbed, const Eigen::VectorXd& baseline) {
  const auto n = static_cast<Eigen::Index>(tJ_grid.size());
  if (perturbed.size() != n || baseline.size() != n) throw std::invalid_argument("site sums do not match the grid");
  DepletionCurve curve{{tJ_grid.begin(), tJ_grid.end()}, std::vector<double>(tJ_grid.size()), spec.field,
                       spec.sites, spec.source};
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(baseline(k) > 1e-12)) throw NumericalError("baseline site sum vanishes");
    curve.eta[static_cast<std::size_t>(k)] = 1.0 - perturbed(k) / baseline(k);
  }
  return curve;
}

DepletionCurve depletion_eta(const ChainSpec& spec, std::span<const double> tJ_grid, EvolutionMethod method) {
  const Eigen::VectorXd perturbed = site_qfi_sum_series(spec, tJ_grid, method);
  const Eigen::VectorXd baseline = site_qfi_sum_series(spec.with_field(0.0), tJ_grid, method);
  return depletion_from_sums(spec, tJ_grid, perturbed, baseline);
}

CollapseReport collapse_check(std::span<const DepletionCurve> curves, double window_lo, double window_hi) {
  if (curves.size() < 3) throw std::invalid_argument("collapse check needs at least three curves");
  if (!(window_hi > window_lo)) throw std::invalid_argument("collapse window is empty");
  const auto& grid = curves.front().tJ;
  for (const auto& c : curves) {
    if (c.tJ != grid || c.eta.size() != grid.size()) throw std::invalid_argument("curves do not share a time grid");
    if (c.field == 0.0) throw std::invalid_argument("collapse needs h != 0");
  }
  CollapseReport report{0.0, 0.0, window_lo, window_hi, false};
  int used = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] < window_lo || grid[k] > window_hi) continue;
    ++used;
    for (std::size_t a = 0; a < curves.size(); ++a)
      for (std::size_t b = a + 1; b < curves.size(); ++b) {
        const double u = curves[a].eta[k] / (curves[a].field * curves[a].field);
        const double v = curves[b].eta[k] / (curves[b].field * curves[b].field);
        const double mean = 0.5 * (std::abs(u) + std::abs(v));
        const double dev = mean > 0.0 ? std::abs(u - v) / mean : 0.0;
        if (dev > report.deviation) {
          report.deviation = dev;
          report.worst_tJ = grid[k];
        }
      }
  }
  if (used == 0) throw std::invalid_argument("no grid points inside the collapse window");
  report.collapsed = report.deviation <= kCollapseTolerance;
  return report;
}

RateFit fit_gamma_star(const DepletionCurve& curve, double window_lo, double window_hi) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < curve.tJ.size(); ++k)
    if (curve.tJ[k] >= window_lo && curve.tJ[k] <= window_hi) {
      xs.push_back(curve.tJ[k]);
      ys.push_back(curve.eta[k]);
    }
  if (xs.size() < 5) throw std::invalid_argument("rate fit needs at least five points in the window");
  const auto n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) mx += xs[k], my += ys[k];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  RateFit fit;
  fit.field = curve.field;
  fit.gamma_star = sxy / sxx;
  fit.intercept = my - fit.gamma_star * mx;
  fit.window_lo = window_lo;
  fit.window_hi = window_hi;
  for (std::size_t k = 0; k < xs.size(); ++k) fit.residuals.push_back(ys[k] - fit.intercept - fit.gamma_star * xs[k]);
  return fit;
}

RatePrefactor fit_rate_prefactor(std::span<const RateFit> fits, double coupling) {
  if (fits.empty()) throw std::invalid_argument("no rate fits");
  double sxx = 0, sxy = 0;
  for (const auto& f : fits) {
    const double x = (f.field / coupling) * (f.field / coupling);
    sxx += x * x;
    sxy += x * f.gamma_star;
  }
  if (!(sxx > 0)) throw std::invalid_argument("prefactor fit needs a nonzero field");
  RatePrefactor out{sxy / sxx, {}};
  for (const auto& f : fits) {
    const double x = (f.field / coupling) * (f.field / coupling);
    out.residuals.push_back(f.gamma_star - out.slope * x);
  }
  return out;
}

double loglog_exponent(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("log-log fit needs matching samples");
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0) || !(y[k] > 0)) throw std::invalid_argument("log-log fit needs positive samples");
    lx.push_back(std::log(x[k]));
    ly.push_back(std::log(y[k]));
  }
  const auto n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) mx += lx[k], my += ly[k];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  if (!(sxx > 0)) throw std::invalid_argument("log-log fit needs distinct abscissae");
  return sxy / sxx;
}

double vacuum_channel_norm(double tJ, double field, double coupling) {
  const double r = field / coupling;
  return r * r / 8.0 * (1.0 - std::cos(4.0 * tJ));
}

namespace {

// sum over all l of (-i)^n J_n(x) on the infinite lattice, n = l - s.
Complex lattice_sum_infinite(double tau) {
  const double x = 4.0 * tau;
  const int top = static_cast<int>(x) + 40;
  const Eigen::VectorXd j = bessel_j_sequence(top, x);
  static constexpr Complex kPhase[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
  Complex sum = j(0);
  for (int n = 1; n <= top; ++n) sum += 2.0 * kPhase[n % 4] * j(n);
  return sum;
}

template <typename F>
Complex simpson(const F& f, double upper) {
  constexpr double kTolerance = 1e-10;
  constexpr int kMaxLevels = 14;
  int intervals = 16;
  Complex previous;
  for (int level = 0; level < kMaxLevels; ++level, intervals *= 2) {
    const double step = upper / intervals;
    Complex sum = f(0.0) + f(upper);
    for (int k = 1; k < intervals; ++k) sum += (k % 2 ? 4.0 : 2.0) * f(k * step);
    const Complex current = sum * step / 3.0;
    if (level >= 2 && std::abs(current - previous) < kTolerance) return current;
    previous = current;
  }
  throw NumericalError("vacuum-channel quadrature did not converge");
}

}  // namespace

double vacuum_channel_norm_numerical(double tJ, double field, double coupling, ChainKind kind, int source,
                                     std::optional<int> chain_length) {
  if (!(coupling > 0)) throw std::invalid_argument("coupling must be positive");
  if (tJ == 0.0) return 0.0;
  Complex integral;
  switch (kind) {
    case ChainKind::infinite:
      integral = simpson(lattice_sum_infinite, tJ);
      break;
    case ChainKind::open: {
      if (!chain_length) throw std::invalid_argument("open chain quadrature needs N");
      const int n = *chain_length;
      require_site(source, n, "source");
      integral = simpson(
          [&](double tau) {
            Complex s = 0.0;
            for (int l = 1; l <= n; ++l) s += green_open(n, l, source, tau);
            return s;
          },
          tJ);
      break;
    }
    case ChainKind::semi_infinite:
      throw std::invalid_argument("vacuum channel is not defined for the semi-infinite kind");
  }
  const double r = field / coupling;
  return r * r * std::norm(integral);
}

Eigen::VectorXd sector_weights(const StateVector& state) {
  const int n = sites_for_dimension(state.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n + 1);
  for (Eigen::Index i = 0; i < state.size(); ++i) w(magnon_count(static_cast<std::uint64_t>(i))) += std::norm(state(i));
  return w;
}

Eigen::VectorXd sector_weights(const TangentPair& pair) { return sector_weights(pair.tangent); }

MagnonAction sigma_x_one_magnon_action(int magnon_site, int flip_site, int sites) {
  require_site(magnon_site, sites, "magnon site");
  require_site(flip_site, sites, "flip site");
  // X_i = (c_i + c_i^dag) prod_{m<i} (1 - 2 n_m); the string sees the magnon iff l < i.
  const double string = magnon_site < flip_site ? -1.0 : 1.0;
  if (flip_site == magnon_site) return VacuumTerm{string};
  // c_i^dag c_l^dag |0>; reorder to ascending sites.
  const double reorder = flip_site < magnon_site ? 1.0 : -1.0;
  return TwoMagnonTerm{std::min(magnon_site, flip_site), std::max(magnon_site, flip_site), string * reorder};
}

namespace {

struct Sector {
  std::vector<std::uint64_t> states;
  std::map<std::uint64_t, Eigen::Index> position;
};

Sector sector_basis(int sites, int magnons) {
  Sector s;
  for (std::uint64_t i = 0; i < (std::uint64_t{1} << sites); ++i)
    if (std::popcount(i) == magnons) {
      s.position[i] = static_cast<Eigen::Index>(s.states.size());
      s.states.push_back(i);
    }
  return s;
}

Eigen::MatrixXd restrict_to(const HermitianOperator& op, const Sector& sector) {
  const auto dim = static_cast<Eigen::Index>(sector.states.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, dim);
  const auto& m = op.matrix();
  for (Eigen::Index col = 0; col < dim; ++col)
    for (HermitianOperator::Storage::InnerIterator it(m, static_cast<Eigen::Index>(sector.states[col])); it; ++it) {
      const auto found = sector.position.find(static_cast<std::uint64_t>(it.row()));
      if (found != sector.position.end()) out(found->second, col) = it.value();
    }
  return out;
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> diagonalize(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) throw NumericalError("sector diagonalization failed");
  return solver;
}

constexpr double kDegenerate = 1e-10;

}  // namespace

double golden_rule_p12(const ChainSpec& spec, double tJ, std::optional<int> eigenstate) {
  spec.validate();
  if (!(spec.field > 0)) throw std::invalid_argument("golden rule needs h > 0");
  if (spec.sites < 2) throw std::invalid_argument("golden rule needs at least two sites");
  const int n = spec.sites;
  const double t = tJ / spec.coupling;
  const HermitianOperator bare = build_hamiltonian(spec.with_field(0.0));
  const Sector one = sector_basis(n, 1), two = sector_basis(n, 2);
  const auto solve1 = diagonalize(restrict_to(bare, one));
  const auto solve2 = diagonalize(restrict_to(bare, two));

  // <pair| V |l> in the site bases; V = sum_i X_i.
  Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(two.states.size()), n);
  for (int l = 1; l <= n; ++l)
    for (int i = 1; i <= n; ++i) {
      const MagnonAction action = sigma_x_one_magnon_action(l, i, n);
      if (const auto* term = std::get_if<TwoMagnonTerm>(&action)) {
        const std::uint64_t index = site_bit(term->first) | site_bit(term->second);
        coupling(two.position.at(index), l - 1) = term->coefficient;
      }
    }
  const Eigen::MatrixXd elements = solve2.eigenvectors().transpose() * coupling * solve1.eigenvectors();
  const Eigen::VectorXd& e1 = solve1.eigenvalues();
  const Eigen::VectorXd& e2 = solve2.eigenvalues();

  const double h2 = spec.field * spec.field;
  double total = 0.0;
  if (eigenstate) {
    if (*eigenstate < 0 || *eigenstate >= n) throw std::out_of_range("one-magnon eigenstate index");
    const Eigen::Index k = *eigenstate;
    for (Eigen::Index mu = 0; mu < e2.size(); ++mu) {
      const double w = e2(mu) - e1(k);
      const double factor = std::abs(w) < kDegenerate ? t * t : 4.0 * std::pow(std::sin(w * t / 2.0), 2) / (w * w);
      total += elements(mu, k) * elements(mu, k) * factor;
    }
    return h2 * total;
  }
  const Eigen::VectorXd weights = solve1.eigenvectors().row(spec.source - 1).transpose();
  for (Eigen::Index mu = 0; mu < e2.size(); ++mu) {
    Complex amplitude = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double w = e2(mu) - e1(k);
      const Complex f = std::abs(w) < kDegenerate ? Complex(t) : (std::polar(1.0, w * t) - 1.0) / Complex(0.0, w);
      amplitude += elements(mu, k) * weights(k) * f;
    }
    total += std::norm(amplitude);
  }
  return h2 * total;
}

}  // namespace spinqfi
