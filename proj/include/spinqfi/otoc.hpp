#pragma once

#include <array>
#include <optional>
#include <vector>

#include "spinqfi/qfi.hpp"

namespace spinqfi {

/// Squared commutators C^(a) = <[Y_s, sigma_j^a(t)]^dag [Y_s, sigma_j^a(t)]>
/// at theta = 0, one probe site.
struct OtocRecord {
  int site = 0;
  double tJ = 0.0;
  std::array<double, 3> commutator{};  // x, y, z
  Eigen::Vector3d bloch = Eigen::Vector3d::Zero();
  /// Bloch derivative from the reduced tangent (partial-trace route).
  Eigen::Vector3d bloch_derivative = Eigen::Vector3d::Zero();
  /// Bloch derivative from (i/2)<[Y_s, sigma_j^a(t)]> (commutator route).
  Eigen::Vector3d response = Eigen::Vector3d::Zero();
  double site_qfi = 0.0;

  double commutator_sum() const { return commutator[0] + commutator[1] + commutator[2]; }
};

/// The four ordered terms of the single-qubit bound chain
///   (1-|r|^2) F <= |dr|^2 <= F <= C_sum / (4 (1-|r|^2)).
/// `otoc_bound` is empty when 1 - |r|^2 < 1e-10 (bound unbounded).
struct HierarchyValues {
  double mixed_qfi = 0.0;
  double tangent_norm = 0.0;
  double qfi = 0.0;
  std::optional<double> otoc_bound;
  bool cauchy_schwarz = false;  // 4 |dr|^2 <= C_sum
  bool holds = false;
};

inline constexpr double kHierarchySlack = 1e-9;

HierarchyValues hierarchy_values(const OtocRecord& record, double slack = kHierarchySlack);

/// All probe sites at one time, sharing the forward evolutions.
///
/// Built from four families of vectors: U|0>, U Y_s|0>, and U^dag B_j^a of each,
/// so the Heisenberg operators are never formed as matrices.
std::vector<OtocRecord> otoc_snapshot(const ChainSpec& spec, const Evolver& evolver, double tJ);

double squared_commutator(const ChainSpec& spec, Axis axis, int site, double tJ);
double summed_otoc(const ChainSpec& spec, int site, double tJ);
Eigen::Vector3d bloch_derivative_response(const ChainSpec& spec, int site, double tJ);

struct HierarchyRecord {
  OtocRecord record;
  HierarchyValues values;
};
HierarchyRecord hierarchy_record(const ChainSpec& spec, int site, double tJ);

}  // namespace spinqfi
