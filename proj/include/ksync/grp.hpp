// Two-configuration graph realization: overlapping patches, pairwise rotation
// alignment, bi-synchronization with disentangling, and least-squares assembly.
#pragma once

#include "ksync/core.hpp"
#include "ksync/disentangle.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ksync {

using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Minimum post-Procrustes mean displacement between X and Y, relative to the diameter
/// of X, for the pair to count as non-congruent.
inline constexpr double kNonCongruenceFloor = 1e-6;

struct PointCloudPair {
  Points2 X;
  Points2 Y;

  int n() const { return static_cast<int>(X.rows()); }
};

enum class CloudGenerator { Grid, UniformSquare };

CloudGenerator parse_generator(const std::string& name);

/// X from the generator (unit spacing grid filled row by row, or uniform points on a
/// square of side sqrt(n)); Y = shear * X, with the points right of the median x
/// coordinate further rotated by `region_rotation` about their centroid.
/// Throws std::invalid_argument if n < 4, the shear is singular, or X and Y are congruent.
PointCloudPair make_two_configurations(int n, CloudGenerator generator, const Eigen::Matrix2d& shear,
                                       double region_rotation, std::uint64_t seed);

/// Largest pairwise distance between rows.
double diameter(const Points2& a);

/// Mean Euclidean displacement after the best rotation + translation of B onto A
/// (optionally also reflection and uniform scale).
double procrustes_error(const Points2& a, const Points2& b, bool allow_reflection = false,
                        bool allow_scale = false);

/// Angle phi such that exp(i phi) (b - mean b) best matches (a - mean a):
/// arg(sum (a_m - a_bar) conj(b_m - b_bar)) in complex coordinates.
double procrustes_rotation(const Points2& a, const Points2& b);

struct Patch {
  int center = 0;
  std::vector<int> members;  // sorted node indices, center included
  Points2 local_x;           // type-X local embedding, rows aligned with members
  Points2 local_y;           // type-Y local embedding
};

struct PatchParams {
  double radius = 2.0;
  int min_overlap = 3;
  double sigma = 0.0;
  double p1 = 0.5;
  double p2 = 0.4;
  std::uint64_t seed = 0;
};

struct PatchSet {
  std::vector<Patch> patches;
  std::vector<std::pair<int, int>> patch_graph;  // parallel to the measurement graph edges
  std::vector<double> fit_residuals;             // mean Procrustes residual per edge
  std::vector<int> dropped_centers;              // centers of patches with < 3 members
  std::vector<std::string> warnings;
  AngleGroups truth;  // row 0: type-X patch rotations, row 1: type-Y
};

/// Patches are discs of `radius` in X around every node. Patch pairs sharing at least
/// `min_overlap` nodes become edges; each edge aligns two type-X embeddings with
/// probability p1 (label 1), two type-Y embeddings with probability p2 (label 2), and
/// one of each otherwise (label 0).
std::pair<PatchSet, MeasurementGraph> build_patches(const PointCloudPair& pc, const PatchParams& params);

struct Assembly {
  Points2 coords;               // NaN rows for nodes outside every synchronized patch
  std::vector<int> unrecovered;
  std::vector<int> unsynced_patches;
  double residual = 0.0;        // RMS residual of the translation least squares
};

struct AsapResult {
  Assembly x_hat;  // group 1 assembled from type-X embeddings
  Assembly y_hat;  // group 2 assembled from type-Y embeddings
  std::vector<DisentangleState> states;
  std::vector<std::vector<int>> good_edges;  // refined good edge ids per group, bridges removed
};

/// Rotates each synchronized patch's local embedding by -theta_i and solves jointly for
/// node coordinates and patch translations (first synchronized patch pinned at 0).
/// Throws std::runtime_error naming the components when memberships are disconnected.
Assembly assemble(const PatchSet& ps, const Eigen::VectorXd& theta, std::span<const int> patches,
                  bool use_x);

/// Bi-synchronization with disentangling on g, then per group: alternate synchronization
/// on the good edges with reclassification of the assigned edges (bridges of the good
/// subgraph are dropped, since no cycle checks them), then assembly of both configurations.
AsapResult asap_recover(const PatchSet& ps, const MeasurementGraph& g, const DisentangleConfig& cfg);

/// procrustes_error restricted to the rows of `estimate` that are finite.
double recovered_error(const Points2& truth, const Points2& estimate);

// CSV "id,x,y" with 1-based ids.
void write_points(const std::filesystem::path& path, const Points2& pts);
Points2 read_points(const std::filesystem::path& path);

}  // namespace ksync
