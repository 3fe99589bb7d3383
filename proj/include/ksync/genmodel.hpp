// Generative measurement models and closed-form theoretical quantities.
#pragma once

#include "ksync/core.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ksync {

/// Parameters of the Erdos-Renyi k-group mixture. Edge density `lambda`, per-group
/// correct-measurement probabilities p_1 > ... > p_k >= 0, outlier probability
/// eta = 1 - sum p.
struct MixtureParams {
  int n = 0;
  int k = 0;
  double lambda = 1.0;
  std::vector<double> p;
  std::uint64_t seed = 0;

  double eta() const;
  /// Throws std::invalid_argument when an invariant fails (ordering, sum, ranges).
  void validate() const;

  /// Two-group convenience form: each edge goes to G_1 with probability q and is then
  /// correct with probability q1, else to G_2 and correct with probability q2.
  static MixtureParams from_q(int n, double lambda, double q, double q1, double q2,
                              std::uint64_t seed);
};

/// k x n i.i.d. U[0, 2pi) angles, drawn group by group.
AngleGroups sample_angles(int n, int k, std::uint64_t seed);

/// Erdos-Renyi mixture graph with ground-truth labels (group 1..k, or 0 for outliers).
MeasurementGraph sample_er_mixture(const MixtureParams& params, const AngleGroups& groups);

/// Barabasi-Albert edge support (complete seed graph on m nodes, then m
/// degree-proportional targets per arriving node) carrying mixture measurements drawn as
/// in the Erdos-Renyi model with lambda = 1. `params.lambda` is ignored.
MeasurementGraph sample_ba_mixture(const MixtureParams& params, int m, const AngleGroups& groups);

/// E[H] = sum_l n p_l lambda z_l z_l^*; its diagonal equals lambda * sum p.
HermitianMatrix expected_H(const MixtureParams& params, const AngleGroups& groups);

/// max_{i != j} |<z_i, z_j>| / (||z_i|| ||z_j||). Throws std::invalid_argument for k < 2.
double delta_orthogonality(const UnitVectorRep& z);

/// Variance constant of the perturbation R = H - E[H] for arbitrary k (reduces to the
/// two-group expression at k = 2).
double noise_constant_C(double lambda, std::span<const double> p);
double noise_constant_C(const MixtureParams& params);

/// (2 + eps) * 6 * sqrt(2 C n): high-probability ceiling on ||H - E[H]||_2, valid for eps >= 0.
double spectral_norm_bound(double C, int n, double eps);

/// Closed-form top two eigenvalues of n lambda (p1 z1 z1^* + p2 z2 z2^*) given |<z1, z2>|.
std::pair<double, double> closed_form_eigs_k2(int n, double lambda, double p1, double p2,
                                              double inner);

/// 1 - (sqrt(eps) + sqrt(2 eps_bar))^2: lower bound on |<x, x_bar>|^2 when
/// |<x, y>|^2 >= 1 - eps and |<x_bar, y>|^2 >= 1 - eps_bar for unit x, y, x_bar.
double chain_bound(double eps, double eps_bar);

/// Lower bounds on |<v_i, v_tilde_i>|^2 (i = 1, 2) for two groups when ||R||_2 <= delta_norm;
/// empty when delta_norm >= min(n (p1 - p2) lambda, n p2 lambda).
std::optional<std::pair<double, double>> perturbation_eigvec_bounds_k2(
    int n, double lambda, double p1, double p2, double delta_norm);

struct TheoryReport {
  double C = 0.0;
  double sigma_bar = 2.0;            // entrywise ceiling on Re(R), Im(R)
  double spectral_norm_bound = 0.0;  // (2 + eps) 6 sqrt(2 C n)

  std::vector<double> S;       // S[m] = p_1 + ... + p_m, S[0] = 0
  std::vector<double> psi;     // psi[j-1] = psi_j(delta), j = 1..k
  std::vector<double> C_j;     // C_j[j-2], j = 2..k
  std::vector<double> E_j;     // E_j[j-2], j = 2..k
  double E_tilde = 0.0;
  std::vector<double> l;       // l[j-1] = l_j(delta)
  std::vector<double> u;       // u[j-1] = u_j(delta)
  std::vector<std::pair<double, double>> deflation_bounds;  // (n p_j lambda - l_j, n p_j lambda + u_j)

  /// Per-group lower bounds 1 - (sqrt(psi_j) + mu / (1 - mu))^2 on |<v_j, z_j>|^2.
  std::vector<double> thm_bounds;
  /// Flags for the four delta conditions guarding the k-group correlation bounds.
  std::array<bool, 4> delta_conditions{};
  /// The first two flags alone: preconditions of the eigenvalue deflation bounds.
  bool deflation_conditions_hold = false;
  double n_required = 0.0;  // sample-size threshold for the k-group bound
  bool n_condition_holds = false;

  // Two-group quantities (set when k == 2).
  std::optional<std::pair<double, double>> closed_eigs;         // extremes at |<z1,z2>| = delta
  std::optional<std::pair<double, double>> eigvec_bounds;       // |<z_i, v_tilde_i>|^2 floors
  std::optional<std::pair<double, double>> thm_bounds_k2;       // |<z_i, v_i>|^2 floors
  std::optional<double> n_required_k2;

  std::string probability;  // symbolic success probability; c_eps is not numeric
};

/// Evaluates every quantity of TheoryReport. Requires p strictly decreasing (throws
/// std::invalid_argument otherwise), delta in [0, 1), mu in [0, 1/2], eps in (0, 1).
/// Conditions that fail are reported through the flags, never by throwing.
TheoryReport theory_bounds(const MixtureParams& params, double delta, double mu, double epsilon);

}  // namespace ksync
