#include <doctest.h>

#include "spinqfi/otoc.hpp"

using namespace spinqfi;

namespace {

constexpr Axis kAxes[] = {Axis::x, Axis::y, Axis::z};

ComplexMatrix pauli_operator(int sites, int site, Axis axis) {
  const Eigen::Index dim = Eigen::Index{1} << sites;
  ComplexMatrix m(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    StateVector e = StateVector::Zero(dim);
    e(c) = 1.0;
    m.col(c) = apply_pauli(e, site, axis);
  }
  return m;
}

ComplexMatrix propagator(const ChainSpec& spec, double t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(build_hamiltonian(spec).dense());
  Eigen::VectorXcd phase(es.eigenvalues().size());
  for (Eigen::Index k = 0; k < phase.size(); ++k) phase(k) = std::polar(1.0, -es.eigenvalues()(k) * t);
  return es.eigenvectors().cast<Complex>() * phase.asDiagonal() * es.eigenvectors().transpose().cast<Complex>();
}

// <psi_theta(t)| sigma_j^a |psi_theta(t)> with the encoding at a finite angle.
Eigen::Vector3d bloch_at(const ChainSpec& spec, const Evolver& ev, int site, double tJ, double theta) {
  const StateVector psi = ev.evolve(encode(vacuum_state(spec.sites), spec.source, theta), tJ / spec.coupling);
  Eigen::Vector3d r;
  for (int a = 0; a < 3; ++a) r(a) = psi.dot(apply_pauli(psi, site, kAxes[a])).real();
  return r;
}

}  // namespace

TEST_SUITE("otoc") {
  TEST_CASE("squared commutators match explicit Heisenberg operators") {
    for (double h : {0.0, 0.3}) {
      const ChainSpec spec{5, 1.0, h, 2};
      const double tJ = 1.4;
      const ComplexMatrix u = propagator(spec, tJ);
      const ComplexMatrix ys = pauli_operator(5, 2, Axis::y);
      const StateVector vac = vacuum_state(5);
      const auto records = otoc_snapshot(spec, Evolver(build_hamiltonian(spec)), tJ);
      for (int j = 1; j <= 5; ++j)
        for (int a = 0; a < 3; ++a) {
          const ComplexMatrix bt = u.adjoint() * pauli_operator(5, j, kAxes[a]) * u;
          const ComplexMatrix comm = ys * bt - bt * ys;
          const double c = vac.dot(comm.adjoint() * comm * vac).real();
          CHECK(records[static_cast<std::size_t>(j - 1)].commutator[static_cast<std::size_t>(a)] ==
                doctest::Approx(c).epsilon(1e-10).scale(1e-12));
        }
    }
  }

  TEST_CASE("at t = 0 only the source site has a commutator") {
    const auto records = otoc_snapshot({5, 1.0, 0.2, 3}, Evolver(build_hamiltonian({5, 1.0, 0.2, 3})), 0.0);
    for (const auto& r : records) {
      if (r.site == 3) {
        // [Y, X] and [Y, Z] have norm 2, [Y, Y] = 0
        CHECK(r.commutator[0] == doctest::Approx(4.0));
        CHECK(r.commutator[1] == doctest::Approx(0.0));
        CHECK(r.commutator[2] == doctest::Approx(4.0));
      } else {
        CHECK(r.commutator_sum() < 1e-24);
      }
    }
  }

  TEST_CASE("commutator response equals the partial-trace Bloch derivative") {
    for (double h : {0.0, 0.2, 0.5}) {
      const ChainSpec spec{7, 1.0, h, 1};
      const auto records = otoc_snapshot(spec, Evolver(build_hamiltonian(spec)), 1.6);
      for (const auto& r : records) CHECK((r.response - r.bloch_derivative).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("commutator response equals the theta finite difference") {
    const double step = 1e-4;
    for (double h : {0.0, 0.2, 0.5}) {
      const ChainSpec spec{6, 1.0, h, 2};
      const Evolver ev(build_hamiltonian(spec));
      for (double tJ : {0.4, 1.3, 2.7}) {
        const auto records = otoc_snapshot(spec, ev, tJ);
        for (int j = 1; j <= 6; ++j) {
          const Eigen::Vector3d fd = (bloch_at(spec, ev, j, tJ, step) - bloch_at(spec, ev, j, tJ, -step)) / (2 * step);
          CHECK((records[static_cast<std::size_t>(j - 1)].response - fd).cwiseAbs().maxCoeff() < 1e-6);
        }
      }
    }
  }

  TEST_CASE("hierarchy chain holds everywhere on a small grid") {
    for (double h : {0.0, 0.1, 0.5}) {
      const ChainSpec spec{7, 1.0, h, 1};
      const Evolver ev(build_hamiltonian(spec));
      for (double tJ = 0.0; tJ <= 3.0; tJ += 0.25)
        for (const auto& r : otoc_snapshot(spec, ev, tJ)) {
          const HierarchyValues v = hierarchy_values(r);
          CHECK(v.holds);
          CHECK(v.cauchy_schwarz);
        }
    }
  }

  TEST_CASE("h = 0 leaves the single-site states pure") {
    const ChainSpec spec{6, 1.0, 0.0, 1};
    for (const auto& r : otoc_snapshot(spec, Evolver(build_hamiltonian(spec)), 1.1)) {
      CHECK(r.bloch.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK_FALSE(hierarchy_values(r).otoc_bound.has_value());
    }
  }

  TEST_CASE("convenience wrappers agree with the snapshot") {
    const ChainSpec spec{5, 1.0, 0.3, 1};
    const auto records = otoc_snapshot(spec, Evolver(build_hamiltonian(spec)), 0.8);
    CHECK(squared_commutator(spec, Axis::y, 4, 0.8) == doctest::Approx(records[3].commutator[1]).epsilon(1e-13));
    CHECK(summed_otoc(spec, 2, 0.8) == doctest::Approx(records[1].commutator_sum()).epsilon(1e-13));
    CHECK((bloch_derivative_response(spec, 3, 0.8) - records[2].response).norm() < 1e-14);
    CHECK(hierarchy_record(spec, 5, 0.8).values.holds);
    CHECK_THROWS_AS(summed_otoc(spec, 6, 0.8), std::out_of_range);
  }
}
