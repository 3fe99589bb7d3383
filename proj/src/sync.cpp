#include "ksync/sync.hpp"

#include "ksync/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ksync {
namespace {

void check_request(const MeasurementGraph& g, int k, const char* who) {
  if (g.n() < 1) throw std::invalid_argument(std::string(who) + ": graph has no nodes");
  if (k < 1 || k > g.n()) throw std::invalid_argument(std::string(who) + ": k must lie in [1, n]");
}

double objective_of(const HermitianMatrix& h, const Eigen::MatrixXcd& v) {
  return (v.conjugate().cwiseProduct(h * v)).sum().real();
}

// Row-normalizes `next`; rows that vanish keep their value from `prev`.
void normalize_rows(Eigen::MatrixXcd& next, const Eigen::MatrixXcd& prev) {
  for (Eigen::Index i = 0; i < next.rows(); ++i) {
    const double norm = next.row(i).norm();
    if (norm > 0.0) {
      next.row(i) /= norm;
    } else {
      next.row(i) = prev.row(i);
    }
  }
}

}  // namespace

SyncEstimate estimate_from_eigenpairs(const Eigen::VectorXd& values, const Eigen::MatrixXcd& vectors,
                                      Solver solver) {
  const int k = static_cast<int>(vectors.cols());
  const int n = static_cast<int>(vectors.rows());
  SyncEstimate est;
  est.k = k;
  est.solver = solver;
  est.eigenvalues = values;
  est.eigenvectors = vectors;
  Eigen::MatrixXd theta(k, n);
  for (int l = 0; l < k; ++l) {
    for (int i = 0; i < n; ++i) {
      const Complex v = vectors(i, l);
      if (std::abs(v) < kDegenerateModulus) {
        theta(l, i) = 0.0;
        est.degenerate_entries.emplace_back(l, i);
      } else {
        theta(l, i) = wrap_angle(std::arg(v));
      }
    }
  }
  est.theta_hat = AngleGroups(std::move(theta));
  return est;
}

SyncEstimate spectral_ksync(const MeasurementGraph& g, int k) {
  check_request(g, k, "spectral_ksync");
  const EigenPairs pairs = top_k_eig(build_measurement_matrix(g), k);
  return estimate_from_eigenpairs(pairs.values, pairs.vectors, Solver::EigH);
}

SyncEstimate normalized_spectral_ksync(const MeasurementGraph& g, int k) {
  check_request(g, k, "normalized_spectral_ksync");
  const EigenPairs pairs = degree_normalized_eig(build_measurement_matrix(g), k);
  return estimate_from_eigenpairs(pairs.values, pairs.vectors, Solver::EigR);
}

SyncEstimate sdp_bm_ksync(const MeasurementGraph& g, int k, const SdpBmConfig& cfg) {
  check_request(g, k, "sdp_bm_ksync");
  const int n = g.n();
  int r = cfg.rank > 0 ? cfg.rank : k + 2;
  if (r < k) throw std::invalid_argument("sdp_bm_ksync: rank must be at least k");
  if (!(cfg.rel_tol > 0.0)) throw std::invalid_argument("sdp_bm_ksync: rel_tol must be positive");
  if (cfg.max_iters < 0) throw std::invalid_argument("sdp_bm_ksync: max_iters must be >= 0");
  r = std::min(r, n);

  const HermitianMatrix h = build_measurement_matrix(g);
  // Shifting by -lambda_min makes H + cI PSD, so each row-normalized step is an ascent step.
  const double shift = std::max(0.0, -eigenvalue_range(h).first);

  Eigen::MatrixXcd v = top_k_eig(h, r).vectors;
  Rng rng(cfg.seed);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double norm = v.row(i).norm();
    if (norm > kDegenerateModulus) {
      v.row(i) /= norm;
    } else {
      for (Eigen::Index c = 0; c < v.cols(); ++c) v(i, c) = Complex(rng.normal(), rng.normal());
      v.row(i).normalize();
    }
  }

  SolverInfo info;
  info.converged = false;
  double obj = objective_of(h, v);
  info.objective_history.push_back(obj);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    Eigen::MatrixXcd next = h * v;
    next += shift * v;
    normalize_rows(next, v);
    const double next_obj = objective_of(h, next);
    info.iterations = it;
    if (next_obj <= obj) {  // fixed point up to rounding
      info.converged = true;
      break;
    }
    const double change = (next_obj - obj) / std::max(1.0, std::abs(obj));
    v = std::move(next);
    obj = next_obj;
    info.objective_history.push_back(obj);
    if (change < cfg.rel_tol) {
      info.converged = true;
      break;
    }
  }
  info.objective = obj;

  // Top-k eigenvectors of V V^* from the r x r Gram matrix V^* V.
  const Eigen::MatrixXcd gram = v.adjoint() * v;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
  Eigen::VectorXd values(k);
  Eigen::MatrixXcd vectors(n, k);
  for (int j = 0; j < k; ++j) {
    const Eigen::Index idx = gram.rows() - 1 - j;
    values(j) = std::max(0.0, es.eigenvalues()(idx));
    vectors.col(j) = v * es.eigenvectors().col(idx);
    const double norm = vectors.col(j).norm();
    if (norm > 0.0) vectors.col(j) /= norm;
  }
  SyncEstimate est = estimate_from_eigenpairs(values, vectors, Solver::SdpBm);
  est.info = std::move(info);
  return est;
}

SyncEstimate synchronize(const MeasurementGraph& g, int k, Solver solver, const SdpBmConfig& sdp) {
  switch (solver) {
    case Solver::EigH:
      return spectral_ksync(g, k);
    case Solver::EigR:
      return normalized_spectral_ksync(g, k);
    case Solver::SdpBm:
      return sdp_bm_ksync(g, k, sdp);
  }
  throw std::invalid_argument("synchronize: unknown solver");
}

double feasible_objective(const HermitianMatrix& h, const Eigen::VectorXd& theta) {
  if (theta.size() != h.rows()) throw std::invalid_argument("feasible_objective: size mismatch");
  Eigen::VectorXcd u(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) u(i) = std::polar(1.0, theta(i));
  return u.dot(h * u).real();
}

Matching parse_matching(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "by-index" || s == "index") return Matching::ByIndex;
  if (s == "greedy") return Matching::Greedy;
  if (s == "exhaustive") return Matching::Exhaustive;
  throw std::invalid_argument("unknown matching '" + name + "' (by-index, greedy, exhaustive)");
}

std::string to_string(Matching m) {
  switch (m) {
    case Matching::ByIndex:
      return "by-index";
    case Matching::Greedy:
      return "greedy";
    case Matching::Exhaustive:
      return "exhaustive";
  }
  return "?";
}

EvalResult evaluate(const AngleGroups& truth, const SyncEstimate& est, Matching matching) {
  const int k = truth.k();
  if (est.theta_hat.n() != truth.n()) throw std::invalid_argument("evaluate: node counts differ");
  if (est.theta_hat.k() != k) throw std::invalid_argument("evaluate: group counts differ");
  if (matching == Matching::Exhaustive && k > 8) {
    throw std::invalid_argument("evaluate: exhaustive matching supports k <= 8; use greedy");
  }
  EvalResult res;
  res.corr.resize(k, k);
  for (int l = 0; l < k; ++l) {
    const Eigen::VectorXd t = truth.group(l);
    for (int j = 0; j < k; ++j) res.corr(l, j) = correlation(t, est.theta_hat.group(j));
  }
  res.assignment.resize(k);
  std::iota(res.assignment.begin(), res.assignment.end(), 0);
  if (matching == Matching::Greedy) {
    std::vector<char> used(k, 0);
    for (int l = 0; l < k; ++l) {
      int best = -1;
      for (int j = 0; j < k; ++j) {
        if (!used[j] && (best < 0 || res.corr(l, j) > res.corr(l, best))) best = j;
      }
      used[best] = 1;
      res.assignment[l] = best;
    }
  } else if (matching == Matching::Exhaustive) {
    std::vector<int> perm = res.assignment;
    double best_total = -1.0;
    do {
      double total = 0.0;
      for (int l = 0; l < k; ++l) total += res.corr(l, perm[l]);
      if (total > best_total) {
        best_total = total;
        res.assignment = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  res.matched.resize(k);
  for (int l = 0; l < k; ++l) res.matched(l) = res.corr(l, res.assignment[l]);
  return res;
}

}  // namespace ksync
