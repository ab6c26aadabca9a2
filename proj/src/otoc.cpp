#include "spinqfi/otoc.hpp"

#include <cmath>

namespace spinqfi {

namespace {

constexpr std::array<Axis, 3> kAxes = {Axis::x, Axis::y, Axis::z};

}  // namespace

std::vector<OtocRecord> otoc_snapshot(const ChainSpec& spec, const Evolver& evolver, double tJ) {
  spec.validate();
  const int n = spec.sites;
  const double t = tJ / spec.coupling;
  const StateVector vacuum = vacuum_state(n);
  const StateVector kicked = apply_pauli(vacuum, spec.source, Axis::y);

  const StateVector forward_vacuum = evolver.evolve(vacuum, t);
  const StateVector forward_kicked = evolver.evolve(kicked, t);

  TangentPair pair{forward_vacuum, Complex(0.0, -0.5) * forward_kicked, tJ, spec};

  // Columns (j, a) of sigma_j^a U|0> and sigma_j^a U Y_s|0>, pulled back by U^dag.
  const Eigen::Index cols = 3 * n;
  ComplexMatrix probe_vacuum(vacuum.size(), cols), probe_kicked(vacuum.size(), cols);
  for (int j = 1; j <= n; ++j)
    for (int a = 0; a < 3; ++a) {
      probe_vacuum.col(3 * (j - 1) + a) = apply_pauli(forward_vacuum, j, kAxes[a]);
      probe_kicked.col(3 * (j - 1) + a) = apply_pauli(forward_kicked, j, kAxes[a]);
    }
  const ComplexMatrix back_vacuum = evolver.evolve_columns(probe_vacuum, -t);  // B(t)|0>
  const ComplexMatrix back_kicked = evolver.evolve_columns(probe_kicked, -t);  // B(t) Y_s|0>

  std::vector<OtocRecord> records(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) {
    OtocRecord& rec = records[static_cast<std::size_t>(j - 1)];
    rec.site = j;
    rec.tJ = tJ;
    for (int a = 0; a < 3; ++a) {
      const Eigen::Index c = 3 * (j - 1) + a;
      const StateVector commutator = apply_pauli(back_vacuum.col(c), spec.source, Axis::y) - back_kicked.col(c);
      rec.commutator[a] = std::max(0.0, commutator.squaredNorm());
      // (i/2)(<Y_s 0| B(t) |0> - <0| B(t) Y_s |0>)
      const Complex expectation = kicked.dot(back_vacuum.col(c)) - vacuum.dot(back_kicked.col(c));
      rec.response(a) = (Complex(0.0, 0.5) * expectation).real();
    }
    const SiteBloch bloch = site_bloch(pair, j);
    rec.bloch = bloch.r;
    rec.bloch_derivative = bloch.dr;
    rec.site_qfi = site_qfi(pair, j);
  }
  return records;
}

HierarchyValues hierarchy_values(const OtocRecord& record, double slack) {
  HierarchyValues v;
  const double mixedness = 1.0 - record.bloch.squaredNorm();
  v.qfi = record.site_qfi;
  v.tangent_norm = record.bloch_derivative.squaredNorm();
  v.mixed_qfi = mixedness * v.qfi;
  if (mixedness >= kPureThreshold) v.otoc_bound = record.commutator_sum() / (4.0 * mixedness);
  v.cauchy_schwarz = 4.0 * v.tangent_norm <= record.commutator_sum() + slack;
  v.holds = v.mixed_qfi <= v.tangent_norm + slack && v.tangent_norm <= v.qfi + slack &&
            (!v.otoc_bound || v.qfi <= *v.otoc_bound + slack);
  return v;
}

namespace {

OtocRecord single_record(const ChainSpec& spec, int site, double tJ) {
  spec.validate();
  require_site(site, spec.sites, "probe site");
  const Evolver evolver(build_hamiltonian(spec));
  return otoc_snapshot(spec, evolver, tJ)[static_cast<std::size_t>(site - 1)];
}

}  // namespace

double squared_commutator(const ChainSpec& spec, Axis axis, int site, double tJ) {
  return single_record(spec, site, tJ).commutator[static_cast<std::size_t>(axis)];
}

double summed_otoc(const ChainSpec& spec, int site, double tJ) {
  return single_record(spec, site, tJ).commutator_sum();
}

Eigen::Vector3d bloch_derivative_response(const ChainSpec& spec, int site, double tJ) {
  return single_record(spec, site, tJ).response;
}

HierarchyRecord hierarchy_record(const ChainSpec& spec, int site, double tJ) {
  HierarchyRecord out{single_record(spec, site, tJ), {}};
  out.values = hierarchy_values(out.record);
  return out;
}

}  // namespace spinqfi
