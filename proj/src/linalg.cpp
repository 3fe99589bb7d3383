#include "ksync/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace ksync {
namespace {

constexpr double kHermitianTol = 1e-10;
constexpr double kTieGap = 1e-12;
// Relative gap below which inverse iteration is not trusted to keep vectors orthogonal.
constexpr double kClusterGap = 1e-8;
constexpr double kOrthoTol = 1e-9;
constexpr int kStepsPerVector = 8;

void check_hermitian(const HermitianMatrix& h, const char* who) {
  if (h.rows() != h.cols()) {
    throw std::invalid_argument(std::string(who) + ": matrix is not square");
  }
  if (h.size() == 0) throw std::invalid_argument(std::string(who) + ": empty matrix");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  const double defect = hermitian_defect(h);
  if (!(defect <= kHermitianTol * scale)) {
    std::ostringstream msg;
    msg << who << ": matrix is not Hermitian (defect " << defect << ")";
    throw std::invalid_argument(msg.str());
  }
}

// LU factorization of a real tridiagonal matrix with partial pivoting (row interchanges
// produce a second superdiagonal). Mirrors the classic gttrf/gttrs pair.
class TridiagonalLu {
 public:
  TridiagonalLu(const Eigen::VectorXd& diag, const Eigen::VectorXd& sub, double shift,
                double tiny)
      : n_(diag.size()), d_(diag.array() - shift), dl_(sub), du_(sub),
        du2_(Eigen::VectorXd::Zero(std::max<Eigen::Index>(n_ - 2, 0))),
        swapped_(static_cast<std::size_t>(std::max<Eigen::Index>(n_ - 1, 0)), false) {
    for (Eigen::Index i = 0; i + 1 < n_; ++i) {
      if (std::abs(d_(i)) >= std::abs(dl_(i))) {
        const double fact = d_(i) != 0.0 ? dl_(i) / d_(i) : 0.0;
        dl_(i) = fact;
        d_(i + 1) -= fact * du_(i);
      } else {
        const double fact = d_(i) / dl_(i);
        d_(i) = dl_(i);
        dl_(i) = fact;
        const double temp = du_(i);
        du_(i) = d_(i + 1);
        d_(i + 1) = temp - fact * d_(i + 1);
        if (i + 2 < n_) {
          du2_(i) = du_(i + 1);
          du_(i + 1) = -fact * du_(i + 1);
        }
        swapped_[static_cast<std::size_t>(i)] = true;
      }
    }
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (std::abs(d_(i)) < tiny) d_(i) = std::copysign(tiny, d_(i) == 0.0 ? 1.0 : d_(i));
    }
  }

  void solve_in_place(Eigen::VectorXd& b) const {
    for (Eigen::Index i = 0; i + 1 < n_; ++i) {
      if (!swapped_[static_cast<std::size_t>(i)]) {
        b(i + 1) -= dl_(i) * b(i);
      } else {
        const double temp = b(i);
        b(i) = b(i + 1);
        b(i + 1) = temp - dl_(i) * b(i);
      }
    }
    b(n_ - 1) /= d_(n_ - 1);
    if (n_ > 1) b(n_ - 2) = (b(n_ - 2) - du_(n_ - 2) * b(n_ - 1)) / d_(n_ - 2);
    for (Eigen::Index i = n_ - 3; i >= 0; --i) {
      b(i) = (b(i) - du_(i) * b(i + 1) - du2_(i) * b(i + 2)) / d_(i);
    }
  }

 private:
  Eigen::Index n_;
  Eigen::VectorXd d_, dl_, du_, du2_;
  std::vector<bool> swapped_;
};

double tridiagonal_residual(const Eigen::VectorXd& diag, const Eigen::VectorXd& sub,
                            const Eigen::VectorXd& x, double lambda) {
  const Eigen::Index n = diag.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double r = (diag(i) - lambda) * x(i);
    if (i > 0) r += sub(i - 1) * x(i - 1);
    if (i + 1 < n) r += sub(i) * x(i + 1);
    acc += r * r;
  }
  return std::sqrt(acc);
}

void fix_phase(Eigen::MatrixXcd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    vectors.col(c).cwiseAbs2().maxCoeff(&arg);
    const Complex pivot = vectors(arg, c);
    if (std::abs(pivot) > 0.0) vectors.col(c) *= std::conj(pivot) / std::abs(pivot);
  }
}

double max_cross_inner(const Eigen::MatrixXcd& v) {
  const Eigen::MatrixXcd g = v.adjoint() * v;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      if (i != j) worst = std::max(worst, std::abs(g(i, j)));
    }
  }
  return worst;
}

EigenPairs from_full_decomposition(const HermitianMatrix& h, int k) {
  Eigen::SelfAdjointEigenSolver<HermitianMatrix> es(h);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("top_k_eig: dense Hermitian eigensolver did not converge",
                           std::numeric_limits<double>::infinity());
  }
  const Eigen::Index n = h.rows();
  EigenPairs out;
  out.values.resize(k);
  out.vectors.resize(n, k);
  for (int j = 0; j < k; ++j) {
    out.values(j) = es.eigenvalues()(n - 1 - j);
    out.vectors.col(j) = es.eigenvectors().col(n - 1 - j);
  }
  out.used_full_decomposition = true;
  return out;
}

}  // namespace

double hermitian_defect(const HermitianMatrix& h) {
  if (h.rows() != h.cols()) return std::numeric_limits<double>::infinity();
  return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

EigenPairs top_k_eig(const HermitianMatrix& h, int k, double tol) {
  check_hermitian(h, "top_k_eig");
  const Eigen::Index n = h.rows();
  if (k < 1 || k > n) throw std::invalid_argument("top_k_eig: k must lie in [1, n]");
  if (!(tol > 0.0)) throw std::invalid_argument("top_k_eig: tol must be positive");

  // Work on a copy scaled into [-1, 1] entrywise to stay clear of over/underflow.
  double scale = h.cwiseAbs().maxCoeff();
  if (scale == 0.0) scale = 1.0;
  const HermitianMatrix scaled = h / scale;

  Eigen::Tridiagonalization<HermitianMatrix> tri(scaled);
  const Eigen::VectorXd diag = tri.diagonal();
  const Eigen::VectorXd sub = tri.subDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum;
  spectrum.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (spectrum.info() != Eigen::Success) {
    throw ConvergenceError("top_k_eig: tridiagonal QR did not converge",
                           std::numeric_limits<double>::infinity());
  }
  const Eigen::VectorXd& all = spectrum.eigenvalues();  // ascending
  const double norm_scaled = std::max(std::abs(all(0)), std::abs(all(n - 1)));
  const double norm = norm_scaled * scale;

  // Gaps among the selected values and to the first unselected one.
  bool clustered = false;
  bool ties = false;
  for (int j = 0; j < k; ++j) {
    const Eigen::Index idx = n - 1 - j;
    if (idx == 0) break;
    const double gap = all(idx) - all(idx - 1);
    if (gap <= kClusterGap * norm_scaled) clustered = true;
    if (j + 1 < k && gap <= kTieGap * norm_scaled) ties = true;
  }

  EigenPairs out;
  const double tiny = std::numeric_limits<double>::epsilon() * std::max(norm_scaled, 1e-300);
  if (!clustered && norm_scaled > 0.0) {
    const int budget = static_cast<int>(10 * n);
    Eigen::MatrixXcd u(n, k);
    out.values.resize(k);
    int used = 0;
    for (int j = 0; j < k; ++j) {
      const double lambda = all(n - 1 - j);
      TridiagonalLu lu(diag, sub, lambda, tiny);
      Eigen::VectorXd x(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        x(i) = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + 0.3 * j);
      }
      x.normalize();
      for (int step = 0; step < kStepsPerVector && used < budget; ++step, ++used) {
        lu.solve_in_place(x);
        x.normalize();
        if (tridiagonal_residual(diag, sub, x, lambda) <= 0.01 * tol * norm_scaled) break;
      }
      u.col(j) = x.cast<Complex>();
      out.values(j) = lambda * scale;
    }
    out.refinement_steps = used;
    out.vectors = tri.matrixQ() * u;
    for (int j = 0; j < k; ++j) out.vectors.col(j).normalize();
  } else {
    out = from_full_decomposition(scaled, k);
    out.values *= scale;
  }

  auto residuals_of = [&](const EigenPairs& p) {
    Eigen::VectorXd r(k);
    const Eigen::MatrixXcd hv = h * p.vectors;
    for (int j = 0; j < k; ++j) r(j) = (hv.col(j) - p.values(j) * p.vectors.col(j)).norm();
    return r;
  };

  out.residuals = residuals_of(out);
  const double limit = tol * std::max(norm, std::numeric_limits<double>::min());
  bool ok = out.residuals.maxCoeff() <= limit && max_cross_inner(out.vectors) <= kOrthoTol;
  if (!ok && !out.used_full_decomposition) {
    const int steps = out.refinement_steps;
    out = from_full_decomposition(scaled, k);
    out.values *= scale;
    out.refinement_steps = steps;
    out.residuals = residuals_of(out);
    ok = out.residuals.maxCoeff() <= limit && max_cross_inner(out.vectors) <= kOrthoTol;
  }
  if (!ok) {
    std::ostringstream msg;
    msg << "top_k_eig: residual " << out.residuals.maxCoeff() << " exceeds " << limit;
    throw ConvergenceError(msg.str(), out.residuals.maxCoeff());
  }
  out.has_ties = ties;
  fix_phase(out.vectors);
  return out;
}

std::pair<double, double> eigenvalue_range(const HermitianMatrix& m) {
  check_hermitian(m, "eigenvalue_range");
  Eigen::SelfAdjointEigenSolver<HermitianMatrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("eigenvalue_range: eigensolver did not converge",
                           std::numeric_limits<double>::infinity());
  }
  const Eigen::VectorXd& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

double spectral_norm(const HermitianMatrix& m, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("spectral_norm: tol must be positive");
  const auto [lo, hi] = eigenvalue_range(m);
  return std::max(std::abs(lo), std::abs(hi));
}

EigenPairs degree_normalized_eig(const HermitianMatrix& h, int k, double tol) {
  check_hermitian(h, "degree_normalized_eig");
  const Eigen::VectorXd degree = h.cwiseAbs().rowwise().sum();
  for (Eigen::Index i = 0; i < degree.size(); ++i) {
    if (!(degree(i) > 0.0)) {
      throw std::invalid_argument("degree_normalized_eig: node " + std::to_string(i) +
                                  " has zero row sum (isolated node)");
    }
  }
  const Eigen::VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  HermitianMatrix s = inv_sqrt.asDiagonal() * h * inv_sqrt.asDiagonal();
  // Restore exact conjugate symmetry lost to rounding in the two-sided scaling.
  s = (0.5 * (s + s.adjoint())).eval();
  EigenPairs pairs = top_k_eig(s, k, tol);
  for (int j = 0; j < k; ++j) {
    pairs.vectors.col(j) = inv_sqrt.asDiagonal() * pairs.vectors.col(j);
    pairs.vectors.col(j).normalize();
  }
  return pairs;
}

}  // namespace ksync
