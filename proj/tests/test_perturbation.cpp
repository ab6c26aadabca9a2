#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "spinqfi/perturbation.hpp"

using namespace spinqfi;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = a + (b - a) * k / (n - 1);
  return out;
}

}  // namespace

TEST_SUITE("perturbation") {
  TEST_CASE("eta vanishes at h = 0 and at t = 0") {
    const auto grid = linspace(0.0, 3.0, 13);
    const DepletionCurve zero = depletion_eta({8, 1.0, 0.0, 1}, grid);
    for (double eta : zero.eta) CHECK(std::abs(eta) < 1e-9);
    const DepletionCurve some = depletion_eta({8, 1.0, 0.3, 1}, grid);
    CHECK(std::abs(some.eta.front()) < 1e-10);
    CHECK(some.eta[4] > 0.0);
  }

  TEST_CASE("baseline site sum is the free-chain sum rule") {
    const Eigen::VectorXd sums = site_qfi_sum_series({9, 1.0, 0.0, 2}, linspace(0.0, 3.0, 31));
    CHECK((sums.array() - 1.0).abs().maxCoeff() < 1e-9);
  }

  TEST_CASE("collapse of exactly h^2-scaled curves") {
    const auto grid = linspace(0.0, 3.0, 61);
    std::vector<DepletionCurve> curves;
    for (double h : {0.05, 0.1, 0.2}) {
      DepletionCurve c{grid, {}, h, 12, 1};
      for (double t : grid) c.eta.push_back(h * h * std::sin(t) * t);
      curves.push_back(c);
    }
    const CollapseReport r = collapse_check(curves);
    CHECK(r.deviation < 1e-12);
    CHECK(r.collapsed);
    curves[2].eta[20] *= 1.5;  // tJ = 1.0
    const CollapseReport broken = collapse_check(curves);
    CHECK_FALSE(broken.collapsed);
    CHECK(broken.worst_tJ == doctest::Approx(1.0));
    CHECK_THROWS(collapse_check(std::span(curves).first(2)));
    curves[1].tJ[3] += 1e-3;
    CHECK_THROWS(collapse_check(curves));
  }

  TEST_CASE("gamma star on a linear fixture") {
    const auto grid = linspace(0.0, 3.0, 61);
    std::vector<RateFit> fits;
    for (double h : {0.05, 0.1, 0.15, 0.2}) {
      DepletionCurve c{grid, {}, h, 12, 1};
      for (double t : grid) c.eta.push_back(2.86 * h * h * t);
      const RateFit f = fit_gamma_star(c);
      CHECK(std::abs(f.gamma_star - 2.86 * h * h) < 1e-10);
      CHECK(std::abs(f.intercept) < 1e-12);
      fits.push_back(f);
    }
    CHECK(std::abs(fit_rate_prefactor(fits).slope - 2.86) < 1e-10);
    DepletionCurve sparse{linspace(0.0, 3.0, 7), std::vector<double>(7, 0.0), 0.1, 12, 1};
    CHECK_THROWS(fit_gamma_star(sparse));
  }

  TEST_CASE("log-log exponent of a power law") {
    const std::vector<double> x{0.02, 0.05, 0.1, 0.2};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * v * v);
    CHECK(loglog_exponent(x, y) == doctest::Approx(2.0).epsilon(1e-12));
    y[0] = -1;
    CHECK_THROWS(loglog_exponent(x, y));
  }

  TEST_CASE("vacuum channel closed form and quadrature") {
    CHECK(vacuum_channel_norm(0.0, 0.1) == 0.0);
    CHECK(std::abs(vacuum_channel_norm(std::numbers::pi / 2, 0.1)) < 1e-18);
    CHECK(vacuum_channel_norm(std::numbers::pi / 4, 0.1) == doctest::Approx(0.0025).epsilon(1e-14));
    CHECK(std::abs(vacuum_channel_norm_numerical(std::numbers::pi / 4, 0.1) - 0.0025) < 1e-10);
    CHECK(vacuum_channel_norm_numerical(0.0, 0.1) == 0.0);
    for (double tJ : {0.13, 0.77, 1.9, 2.6})
      CHECK(std::abs(vacuum_channel_norm_numerical(tJ, 0.2) - vacuum_channel_norm(tJ, 0.2)) < 1e-10);
  }

  TEST_CASE("open-chain vacuum channel reduces to the infinite chain before reflection") {
    // Boundary source: the image term already acts, so use a bulk source in a long chain.
    const double open = vacuum_channel_norm_numerical(0.6, 0.1, 1.0, ChainKind::open, 30, 60);
    CHECK(open == doctest::Approx(vacuum_channel_norm(0.6, 0.1)).epsilon(1e-8));
    CHECK_THROWS(vacuum_channel_norm_numerical(0.6, 0.1, 1.0, ChainKind::open, 1));
  }

  TEST_CASE("sector weights") {
    const Eigen::VectorXd vac = sector_weights(vacuum_state(6));
    CHECK(vac(0) == 1.0);
    CHECK(vac.sum() == 1.0);
    const TangentPair free_pair = make_tangent_pair({8, 1.0, 0.0, 1}, 1.3);
    const Eigen::VectorXd w = sector_weights(free_pair);
    CHECK(w(1) == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(w.sum() - w(1) < 1e-24);
    for (double h : {0.1, 0.5})
      for (double tJ : {0.5, 2.0}) {
        const Eigen::VectorXd wh = sector_weights(make_tangent_pair({8, 1.0, h, 1}, tJ));
        CHECK(std::abs(wh.sum() - 0.25) < 1e-10);
        CHECK(wh(2) > 0.0);
      }
  }

  TEST_CASE("sigma_x on one magnon in the ordered Jordan-Wigner basis") {
    const MagnonAction same = sigma_x_one_magnon_action(4, 4, 6);
    REQUIRE(std::holds_alternative<VacuumTerm>(same));
    CHECK(std::get<VacuumTerm>(same).coefficient == 1.0);
    const MagnonAction left = sigma_x_one_magnon_action(4, 2, 6);
    REQUIRE(std::holds_alternative<TwoMagnonTerm>(left));
    CHECK(std::get<TwoMagnonTerm>(left).first == 2);
    CHECK(std::get<TwoMagnonTerm>(left).second == 4);
    CHECK(std::get<TwoMagnonTerm>(left).coefficient == 1.0);
    const MagnonAction right = sigma_x_one_magnon_action(2, 5, 6);
    REQUIRE(std::holds_alternative<TwoMagnonTerm>(right));
    CHECK(std::get<TwoMagnonTerm>(right).first == 2);
    CHECK(std::get<TwoMagnonTerm>(right).second == 5);
    CHECK(std::get<TwoMagnonTerm>(right).coefficient == 1.0);
    CHECK_THROWS_AS(sigma_x_one_magnon_action(0, 1, 6), std::out_of_range);
    CHECK_THROWS_AS(sigma_x_one_magnon_action(1, 7, 6), std::out_of_range);
  }

  TEST_CASE("sigma_x action agrees with the spin-basis field operator") {
    const int n = 6;
    const Eigen::MatrixXd v = field_operator(n).dense();
    for (int l = 1; l <= n; ++l)
      for (int i = 1; i <= n; ++i) {
        const StateVector out = apply_pauli(one_magnon_state(n, l), i, Axis::x);
        const MagnonAction a = sigma_x_one_magnon_action(l, i, n);
        StateVector expected = StateVector::Zero(out.size());
        if (const auto* two = std::get_if<TwoMagnonTerm>(&a))
          expected(static_cast<Eigen::Index>(site_bit(two->first) | site_bit(two->second))) = two->coefficient;
        else
          expected(0) = std::get<VacuumTerm>(a).coefficient;
        CHECK((out - expected).norm() < 1e-15);
      }
    CHECK(v.rows() == 64);
  }

  TEST_CASE("golden rule: t = 0, short-time t^2 law, validation") {
    const ChainSpec spec{8, 1.0, 0.1, 1};
    CHECK(golden_rule_p12(spec, 0.0) == 0.0);
    const double ref = golden_rule_p12(spec, 0.005) / (0.005 * 0.005);
    for (double tJ : {0.01, 0.02, 0.03, 0.05})
      CHECK(golden_rule_p12(spec, tJ) / (tJ * tJ) == doctest::Approx(ref).epsilon(0.01));
    // h^2 t^2 |P2 V |s>|^2: a boundary magnon can be joined by N - 1 others
    CHECK(ref == doctest::Approx(0.01 * 7).epsilon(1e-3));
    CHECK_THROWS(golden_rule_p12(spec.with_field(0.0), 1.0));
    CHECK_THROWS(golden_rule_p12(spec, 1.0, 8));
  }

  TEST_CASE("golden rule equals the full-Hilbert Dyson quadrature") {
    for (int s : {1, 4}) {
      const ChainSpec spec{8, 1.0, 0.1, s};
      for (double tJ : {0.3, 1.0, 2.0})
        CHECK(std::abs(golden_rule_p12(spec, tJ) - oracle::dyson_p12(spec, tJ)) < 1e-8);
    }
  }

  TEST_CASE("eigenstate golden rule: degenerate limit is t^2 |V|^2") {
    const ChainSpec spec{4, 1.0, 0.2, 1};
    // symmetric sum over all initial eigenstates equals h^2 t^2 Tr(P1 V P2 V P1) at short time
    double total = 0.0;
    for (int k = 0; k < 4; ++k) total += golden_rule_p12(spec, 1e-4, k);
    CHECK(total / (1e-8 * 0.04) == doctest::Approx(4 * 3).epsilon(1e-6));
  }

  TEST_CASE("golden rule tracks the exact two-magnon leakage") {
    const ChainSpec spec{10, 1.0, 0.1, 1};
    const Evolver ev(build_hamiltonian(spec));
    for (double tJ : {0.25, 0.5, 0.75, 1.0}) {
      const double leak = 4.0 * sector_weights(make_tangent_pair(spec, ev, tJ))(2);
      CHECK(golden_rule_p12(spec, tJ) == doctest::Approx(leak).epsilon(0.25));
    }
  }

  TEST_CASE("depletion is even in h") {
    const auto grid = linspace(0.0, 1.0, 5);
    const Eigen::VectorXd up = site_qfi_sum_series({8, 1.0, 0.05, 1}, grid);
    const Eigen::VectorXd down = site_qfi_sum_series({8, 1.0, -0.05, 1}, grid);
    CHECK((up - down).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("no first-order correction in h at N = 12") {
    const std::vector<double> at_one{1.0};
    auto total = [&](double h) { return site_qfi_sum_series({12, 1.0, h, 1}, at_one)(0); };
    const double central = (total(0.01) - total(-0.01)) / 0.02;
    CHECK(std::abs(central) < 1e-3);
    // The central difference vanishes by h -> -h symmetry alone; a one-sided
    // Richardson estimate of the slope at h = 0 is the sharper test.
    const double base = total(0.0);
    const double d1 = (total(0.01) - base) / 0.01, d2 = (total(0.005) - base) / 0.005;
    CHECK(std::abs(2 * d2 - d1) < 1e-3);
    CHECK(std::abs(d2) > 1e-4);  // the quadratic term is really there
  }
}
