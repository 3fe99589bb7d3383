// Top-k eigenpairs of dense complex Hermitian matrices.
#pragma once

#include "ksync/core.hpp"

#include <stdexcept>
#include <string>

namespace ksync {

/// Eigensolver failed to meet its residual contract within the iteration budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

/// Top-k eigenpairs. Columns of `vectors` align with `values` (descending).
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
  Eigen::VectorXd residuals;  // ||H v - lambda v||_2 per pair
  bool has_ties = false;      // some adjacent gap below 1e-12 * ||H||_2
  int refinement_steps = 0;   // inverse-iteration solves spent
  bool used_full_decomposition = false;
};

inline constexpr double kDefaultEigTol = 1e-10;

/// Largest absolute deviation from conjugate symmetry, max |H_ij - conj(H_ji)|.
double hermitian_defect(const HermitianMatrix& h);

/// Top-k eigenpairs of a Hermitian matrix.
///
/// The matrix is reduced to real tridiagonal form by complex Householder reflections,
/// the full spectrum of the tridiagonal is computed, and only the k requested
/// eigenvectors are recovered by shifted inverse iteration followed by the Householder
/// back-transform. Clusters inside the top k+1 values fall back to a full
/// decomposition so that returned vectors stay orthogonal.
///
/// Postconditions: residuals <= tol * ||H||_2, unit columns, pairwise |<v_i, v_j>| <= 1e-8.
/// The global phase of each vector is fixed so that its largest-modulus entry is real
/// and positive; callers must still treat phase as arbitrary.
///
/// Throws std::invalid_argument for non-square or non-Hermitian input (defect > 1e-10
/// relative to max(1, max |H_ij|)), k outside [1, n] or tol <= 0. Throws
/// ConvergenceError if the residual contract cannot be met.
EigenPairs top_k_eig(const HermitianMatrix& h, int k, double tol = kDefaultEigTol);

/// ||M||_2 = max |eigenvalue| of a Hermitian matrix.
double spectral_norm(const HermitianMatrix& m, double tol = kDefaultEigTol);

/// (smallest, largest) eigenvalue of a Hermitian matrix.
std::pair<double, double> eigenvalue_range(const HermitianMatrix& m);

/// Top-k eigenpairs of R = D^{-1} H with D_ii = sum_j |H_ij|, computed through the
/// similar Hermitian matrix S = D^{-1/2} H D^{-1/2}. Vectors are D^{-1/2} u rescaled to
/// unit norm (so they are eigenvectors of R and are not mutually orthogonal in
/// general); values and residuals are those of S.
///
/// Throws std::invalid_argument naming the first node with a zero row sum.
EigenPairs degree_normalized_eig(const HermitianMatrix& h, int k, double tol = kDefaultEigTol);

}  // namespace ksync
