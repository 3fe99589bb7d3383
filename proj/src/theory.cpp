#include "ksync/genmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ksync {
namespace {

// Literal two-group correlation floor: 1 - (sqrt(2 mu / (1 - mu)) + sqrt(1 - ratio))^2.
double two_term_floor(double mu, double ratio) {
  const double s = std::sqrt(2.0 * mu / (1.0 - mu)) + std::sqrt(std::max(0.0, 1.0 - ratio));
  return 1.0 - s * s;
}

}  // namespace

TheoryReport theory_bounds(const MixtureParams& params, double delta, double mu, double epsilon) {
  params.validate();
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("theory_bounds: delta must lie in [0, 1)");
  if (!(mu >= 0.0 && mu <= 0.5)) throw std::invalid_argument("theory_bounds: mu must lie in [0, 1/2]");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("theory_bounds: epsilon must lie in (0, 1)");
  }

  const int k = params.k;
  const double n = params.n;
  const double lam = params.lambda;
  const double sqrt2 = std::sqrt(2.0);
  // 1-based p with p(k + 1) = 0.
  auto p = [&](int j) { return j >= 1 && j <= k ? params.p[j - 1] : 0.0; };

  TheoryReport r;
  r.C = noise_constant_C(params);
  r.sigma_bar = 2.0;
  r.spectral_norm_bound = spectral_norm_bound(r.C, params.n, epsilon);

  r.S.assign(k + 1, 0.0);
  for (int m = 1; m <= k; ++m) r.S[m] = r.S[m - 1] + p(m);
  auto S = [&](int m) { return m <= 0 ? 0.0 : r.S[std::min(m, k)]; };

  // psi_1 .. psi_k; with k = 1 only psi_1 = 0 is meaningful.
  r.psi.assign(k, 0.0);
  if (k >= 2) r.psi[0] = p(2) * (k - 1) / (p(1) - p(2)) * delta;
  for (int j = 2; j <= k; ++j) {
    const double bracket = 2.0 * S(j - 1) + sqrt2 * (j - 1) * (j - 2) * (p(1) - p(j)) +
                           0.5 * (j - 1) * (p(2) * (k - 1) - 2.0 * p(j + 1));
    const double cj = (p(j + 1) * (k - 1) * sqrt2 + 4.0 * sqrt2 * bracket) / (p(j) - p(j + 1));
    r.C_j.push_back(cj);
    r.psi[j - 1] = cj * std::sqrt(r.psi[j - 2]);
  }
  auto psi = [&](int j) { return j <= 0 ? 0.0 : r.psi[j - 1]; };

  for (int j = 2; j <= k; ++j) {
    r.E_j.push_back(4.0 * sqrt2 * S(j - 2) + 8.0 * (j - 2) * (j - 3) * (p(1) - p(j - 1)) +
                    4.0 * sqrt2 * p(2) * (k - 1) * (j - 2) + 4.0 * (j - 1) * (p(1) - p(j + 1)) +
                    p(j + 1) * (k - 1));
  }
  auto E = [&](int j) { return r.E_j[j - 2]; };
  r.E_tilde = 4.0 * sqrt2 * S(k - 1) + 8.0 * (k - 1) * (k - 2) * (p(1) - p(k)) +
              4.0 * sqrt2 * p(2) * (k - 1) * (k - 1);

  for (int j = 1; j <= k; ++j) {
    const double lj = 4.0 * lam * std::sqrt(2.0 * psi(j - 1)) *
                      (n * S(j - 1) + sqrt2 * (j - 1) * (j - 2) * (n * p(1) - n * p(j)) +
                       n * p(2) * (k - 1) * (j - 1));
    double uj = n * p(j + 1) * lam * (k - 1) * delta;
    for (int i = 1; i < j; ++i) uj += 4.0 * (n * p(i) - n * p(j + 1)) * lam * std::sqrt(psi(i));
    r.l.push_back(lj);
    r.u.push_back(uj);
    r.deflation_bounds.emplace_back(n * p(j) * lam - lj, n * p(j) * lam + uj);
  }

  const double shift = mu / (1.0 - mu);
  for (int j = 1; j <= k; ++j) {
    const double s = std::sqrt(psi(j)) + shift;
    r.thm_bounds.push_back(1.0 - s * s);
  }

  // The four delta conditions; vacuous ranges hold trivially.
  bool c1 = true, c2 = true, c3 = true, c4 = true;
  for (int j = 1; j <= k - 1; ++j) {
    const double root = std::sqrt(2.0 * psi(j));
    c1 = c1 && delta <= root && root <= 0.5;
    if (j >= 2) c2 = c2 && psi(j - 1) <= psi(j);
  }
  for (int j = 1; j <= k - 2; ++j) {
    const double cap = (p(j) - p(j + 1)) / (2.0 * E(j + 1));
    c3 = c3 && psi(j) <= mu * mu * cap * cap;
  }
  if (k >= 2) {
    const double a = p(k) / (2.0 * r.E_tilde);
    const double b = (p(k - 1) - p(k)) / (2.0 * E(k));
    c4 = psi(k - 1) <= mu * mu * std::min(a * a, b * b);
  }
  r.delta_conditions = {c1, c2, c3, c4};
  r.deflation_conditions_hold = c1 && c2;

  double min_gap = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= k; ++j) min_gap = std::min(min_gap, p(j) - p(j + 1));
  const double two_eps = (2.0 + epsilon) * (2.0 + epsilon);
  const double denom = mu * mu * lam * lam * min_gap * min_gap;
  r.n_required = denom > 0.0 ? 288.0 * two_eps * r.C / denom : std::numeric_limits<double>::infinity();
  r.n_condition_holds = n >= r.n_required;

  if (k == 2) {
    const double p1 = p(1), p2 = p(2);
    r.closed_eigs = closed_form_eigs_k2(params.n, lam, p1, p2, delta);
    const double root = std::sqrt((p1 - p2) * (p1 - p2) + 4.0 * p1 * p2 * delta * delta);
    const double ratio1 = (p1 - p2) / root;
    const double ratio2 = (p1 * (1.0 - delta * delta) - p2) / root;
    r.eigvec_bounds = std::pair{ratio1, ratio2};
    r.thm_bounds_k2 = std::pair{two_term_floor(mu, ratio1), two_term_floor(mu, ratio2)};
    const double m2 = std::min((p1 - p2) * (p1 - p2), p2 * p2);
    const double d2 = mu * mu * lam * lam * m2;
    r.n_required_k2 = d2 > 0.0 ? 72.0 * two_eps * r.C / d2 : std::numeric_limits<double>::infinity();
  }

  std::ostringstream prob;
  prob << ">= 1 - 3n exp(-8 C n / (sigma_bar^2 c_eps)) with n = " << params.n << ", C = " << r.C
       << ", sigma_bar = " << r.sigma_bar << ", c_eps unspecified";
  r.probability = prob.str();
  return r;
}

}  // namespace ksync
