// Iterative synchronization and graph disentangling: residual-based edge assignment,
// per-group re-synchronization and good/bad edge classification.
#pragma once

#include "ksync/core.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ksync {

struct DisentangleConfig {
  int k = 2;
  int M = 20;
  /// Per-group fraction of assigned edges classified bad, each in [0, 1).
  std::vector<double> bad_fractions;
  Solver solver = Solver::EigH;  // EIG-H or EIG-R
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when an invariant fails.
  void validate() const;
};

/// Model-consistent fractions: outliers split evenly over the k groups, so group l
/// receives p_l + eta/k of the edges, of which eta/k are outliers.
std::vector<double> model_bad_fractions(std::span<const double> p, double eta);
/// The literal per-group rule 1 - p_l.
std::vector<double> literal_bad_fractions(std::span<const double> p);

/// psi(l, e) = circular_distance(Theta_e, theta_hat(l, i) - theta_hat(l, j)) for edge e = (i, j).
Eigen::MatrixXd residual_matrices(const MeasurementGraph& g, const AngleGroups& theta_hat);

/// Nearest-rank quantile rule: entries strictly above the ceil((1 - f) m)-th smallest
/// residual are bad (flag 0); ties at the threshold stay good.
std::vector<char> classify_group(const std::vector<double>& residuals, double bad_fraction);

struct EdgeAssignment {
  std::vector<int> group;     // 0-based group per edge (lowest index on ties)
  Eigen::VectorXd gamma;      // smallest residual per edge
  Eigen::MatrixXd psi_tilde;  // psi kept only at the assigned group, zero elsewhere
};

EdgeAssignment assign_edges(const Eigen::MatrixXd& psi);

/// Angles of one group synchronized over its assigned edges. Only the largest connected
/// component is synchronized; other nodes get angle 0 and are listed in `unsynced`.
struct GroupSync {
  Eigen::VectorXd theta;
  std::vector<int> unsynced;
  bool disconnected = false;
};

GroupSync synchronize_component(const MeasurementGraph& g, std::span<const int> edge_ids,
                                Solver solver);

struct DisentangleState {
  int iteration = 0;
  AngleGroups theta_hat;         // estimate produced by this iteration
  std::vector<int> assignment;   // 0-based group per edge
  std::vector<char> good;        // per edge, within its assigned group
  Eigen::VectorXd gamma;         // smallest residual per edge against theta_hat
  std::vector<GroupSync> groups; // per-group synchronization diagnostics
  std::vector<MeasurementGraph> subgraphs;  // good edges per group, labeled l + 1
  MeasurementGraph bad;          // pooled bad edges, labeled 0
  Eigen::VectorXd correlations;  // by-index correlation per group when truth is known

  /// Edge label as classified: group + 1 when good, 0 when bad.
  int predicted_label(int edge) const;
};

/// Runs M rounds. Round r builds residuals from the previous estimate, assigns every
/// edge to its best-fitting group, synchronizes each group on its assigned edges, then
/// re-partitions the full edge set against the new estimate and classifies, per group,
/// the bad_fractions[l] share of edges with the largest residual as bad. `truth`, when
/// given, fills DisentangleState::correlations.
std::vector<DisentangleState> iterate_disentangle(const MeasurementGraph& g,
                                                  const DisentangleConfig& cfg,
                                                  const SyncEstimate& initial,
                                                  const AngleGroups* truth = nullptr);

struct ClassificationErrors {
  int extra = 0;    // edges placed in a group they do not belong to
  int missing = 0;  // group edges not placed in their group
  int total = 0;    // edges whose predicted label differs from the true label
};

/// Compares predicted labels with the graph's ground-truth labels (group l matched to
/// estimate l). Throws std::invalid_argument if the graph carries no labels.
ClassificationErrors classification_errors(const MeasurementGraph& g, const DisentangleState& s);

/// Writes <prefix>G1.txt .. <prefix>Gk.txt and <prefix>W.txt in the graph file format.
std::vector<std::filesystem::path> write_subgraphs(const DisentangleState& s,
                                                   const std::filesystem::path& prefix);

}  // namespace ksync
