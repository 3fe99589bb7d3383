// Domain types and circular-geometry primitives for k-synchronization over SO(2).
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace ksync {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Complex = std::complex<double>;
using HermitianMatrix = Eigen::MatrixXcd;

/// Maps any finite angle onto [0, 2*pi).
double wrap_angle(double a);

/// k groups of n angles. Row l of `theta()` holds group l; all entries lie in [0, 2*pi).
class AngleGroups {
 public:
  AngleGroups() = default;
  /// Throws std::invalid_argument if k or n is zero or an entry lies outside [0, 2*pi).
  explicit AngleGroups(Eigen::MatrixXd theta);
  /// Wraps every entry into [0, 2*pi) before validating.
  static AngleGroups wrapped(const Eigen::MatrixXd& theta);

  int k() const { return static_cast<int>(theta_.rows()); }
  int n() const { return static_cast<int>(theta_.cols()); }
  const Eigen::MatrixXd& theta() const { return theta_; }
  Eigen::VectorXd group(int l) const { return theta_.row(l).transpose(); }

 private:
  Eigen::MatrixXd theta_;
};

/// Unit-circle representation: column l is z_l with z_{l,i} = exp(i theta_{l,i}) / sqrt(n).
struct UnitVectorRep {
  Eigen::MatrixXcd z;  // n x k

  int k() const { return static_cast<int>(z.cols()); }
  int n() const { return static_cast<int>(z.rows()); }
};

/// Edge label convention shared with the graph file format.
inline constexpr int kOutlierLabel = 0;
inline constexpr int kUnknownLabel = -1;

/// One undirected measurement. Indices are 0-based with i < j; the reverse offset is
/// implicit: theta_ji = (-theta_ij) mod 2*pi. Group labels are 1-based.
struct Edge {
  int i = 0;
  int j = 0;
  double theta = 0.0;
  int label = kUnknownLabel;
};

class MeasurementGraph {
 public:
  MeasurementGraph() = default;
  /// Throws std::invalid_argument on self-loops, i >= j, out-of-range nodes,
  /// duplicate pairs, offsets outside [0, 2*pi) or labels outside {-1, 0, 1..k}.
  MeasurementGraph(int n, std::vector<Edge> edges, int k = 0);

  int n() const { return n_; }
  int k() const { return k_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_labels() const;

  /// Per-node adjacency (neighbor, edge index), derived from the edge list.
  std::vector<std::vector<std::pair<int, int>>> adjacency() const;

 private:
  int n_ = 0;
  int k_ = 0;
  std::vector<Edge> edges_;
};

enum class Solver { EigH, EigR, SdpBm };

std::string to_string(Solver s);
/// Accepts "EIG-H", "EIG-R", "SDP-BM" (case-insensitive). Throws std::invalid_argument.
Solver parse_solver(const std::string& name);

struct SolverInfo {
  int iterations = 0;
  bool converged = true;
  double objective = 0.0;
  std::vector<double> objective_history;
};

/// Output of every solver: estimated angles plus the eigenpairs they came from.
struct SyncEstimate {
  int k = 0;
  AngleGroups theta_hat;              // k x n
  Eigen::VectorXd eigenvalues;        // top-k, descending
  Eigen::MatrixXcd eigenvectors;      // n x k, unit columns
  Solver solver = Solver::EigH;
  std::vector<std::pair<int, int>> degenerate_entries;  // (group, node)
  SolverInfo info;
};

UnitVectorRep to_unit_vectors(const AngleGroups& groups);

/// H_ij = exp(i Theta_ij) on edges, conj on the mirror, 0 off-graph, `diagonal` on the diagonal.
HermitianMatrix build_measurement_matrix(const MeasurementGraph& g, double diagonal = 1.0);

/// min((a - b) mod 2pi, (b - a) mod 2pi), in [0, pi].
double circular_distance(double a, double b);

/// |<z, z_hat>| for the unit-circle representations of two angle vectors.
/// Throws std::invalid_argument on length mismatch or empty input.
double correlation(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_hat);

// Graph text format: "n m k", then m lines "i j theta label" with 1-based nodes.
void write_graph(std::ostream& os, const MeasurementGraph& g);
void write_graph(const std::filesystem::path& path, const MeasurementGraph& g);
MeasurementGraph read_graph(std::istream& is);
MeasurementGraph read_graph(const std::filesystem::path& path);

}  // namespace ksync
