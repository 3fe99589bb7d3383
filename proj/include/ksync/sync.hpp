// Spectral (EIG-H), degree-normalized spectral (EIG-R) and Burer-Monteiro SDP (SDP-BM)
// k-synchronization, plus evaluation against planted angles.
#pragma once

#include "ksync/core.hpp"
#include "ksync/linalg.hpp"

#include <cstdint>
#include <vector>

namespace ksync {

/// Entries of an eigenvector with modulus below this are extracted as angle 0 and flagged.
inline constexpr double kDegenerateModulus = 1e-12;

struct SdpBmConfig {
  int rank = 0;  // 0 selects k + 2
  int max_iters = 1000;
  double rel_tol = 1e-8;
  std::uint64_t seed = 0;  // only used to seed rows whose start value vanishes
};

/// theta_hat(l, i) = arg(v_{l,i}) mod 2pi for the columns of `vectors`.
SyncEstimate estimate_from_eigenpairs(const Eigen::VectorXd& values, const Eigen::MatrixXcd& vectors,
                                      Solver solver);

/// EIG-H: top-k eigenvectors of H (diagonal 1).
SyncEstimate spectral_ksync(const MeasurementGraph& g, int k);
/// EIG-R: top-k eigenvectors of D^{-1} H.
SyncEstimate normalized_spectral_ksync(const MeasurementGraph& g, int k);
/// SDP-BM: ascent on trace(H V V^*) over V with unit-modulus rows, then the top-k
/// eigenvectors of V V^*. The objective history is non-decreasing.
SyncEstimate sdp_bm_ksync(const MeasurementGraph& g, int k, const SdpBmConfig& cfg = {});

/// Dispatches on the solver tag.
SyncEstimate synchronize(const MeasurementGraph& g, int k, Solver solver,
                         const SdpBmConfig& sdp = {});

/// u^* H u for the rank-one feasible point u_i = exp(i theta_i).
double feasible_objective(const HermitianMatrix& h, const Eigen::VectorXd& theta);

enum class Matching { ByIndex, Greedy, Exhaustive };

Matching parse_matching(const std::string& name);
std::string to_string(Matching m);

struct EvalResult {
  Eigen::MatrixXd corr;         // corr(l, j) = correlation(truth group l, estimate j)
  Eigen::VectorXd matched;      // matched(l) = corr(l, assignment[l])
  std::vector<int> assignment;  // 0-based estimate index per truth group
};

/// Correlation of each planted group with the estimate. Exhaustive matching is limited
/// to k <= 8 (throws std::invalid_argument otherwise).
EvalResult evaluate(const AngleGroups& truth, const SyncEstimate& est,
                    Matching matching = Matching::ByIndex);

}  // namespace ksync
