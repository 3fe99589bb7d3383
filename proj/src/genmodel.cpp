#include "ksync/genmodel.hpp"

#include "ksync/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ksync {
namespace {

constexpr double kSumSlack = 1e-12;

// Draws the measurement of one present edge: group l with probability p_l, else outlier.
Edge draw_measurement(int i, int j, std::span<const double> p, const AngleGroups& groups,
                      Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    acc += p[l];
    if (u < acc) {
      const auto row = static_cast<Eigen::Index>(l);
      const double theta = wrap_angle(groups.theta()(row, i) - groups.theta()(row, j));
      return {i, j, theta, static_cast<int>(l) + 1};
    }
  }
  return {i, j, rng.angle(), kOutlierLabel};
}

void check_groups(const MixtureParams& params, const AngleGroups& groups) {
  params.validate();
  if (groups.k() != params.k || groups.n() != params.n) {
    throw std::invalid_argument("angle groups do not match mixture parameters (k, n)");
  }
}

}  // namespace

double MixtureParams::eta() const {
  return 1.0 - std::accumulate(p.begin(), p.end(), 0.0);
}

void MixtureParams::validate() const {
  if (n < 1) throw std::invalid_argument("MixtureParams: n must be at least 1");
  if (k < 1) throw std::invalid_argument("MixtureParams: k must be at least 1");
  if (static_cast<int>(p.size()) != k) {
    throw std::invalid_argument("MixtureParams: p must have k entries");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("MixtureParams: lambda must lie in [0, 1]");
  }
  for (int l = 0; l < k; ++l) {
    if (!(p[l] >= 0.0)) throw std::invalid_argument("MixtureParams: p entries must be >= 0");
    if (l > 0 && !(p[l - 1] > p[l])) {
      std::ostringstream msg;
      msg << "MixtureParams: p must be strictly decreasing (p_" << l << " = " << p[l - 1]
          << ", p_" << l + 1 << " = " << p[l] << ")";
      throw std::invalid_argument(msg.str());
    }
  }
  if (eta() < -kSumSlack) throw std::invalid_argument("MixtureParams: sum of p exceeds 1");
}

MixtureParams MixtureParams::from_q(int n, double lambda, double q, double q1, double q2,
                                    std::uint64_t seed) {
  for (double v : {q, q1, q2}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("MixtureParams::from_q: probabilities must lie in [0, 1]");
    }
  }
  MixtureParams params{n, 2, lambda, {q * q1, (1.0 - q) * q2}, seed};
  params.validate();
  return params;
}

AngleGroups sample_angles(int n, int k, std::uint64_t seed) {
  if (n < 1 || k < 1) throw std::invalid_argument("sample_angles: n and k must be at least 1");
  Rng rng(seed);
  Eigen::MatrixXd theta(k, n);
  for (int l = 0; l < k; ++l) {
    for (int i = 0; i < n; ++i) theta(l, i) = rng.angle();
  }
  return AngleGroups(std::move(theta));
}

MeasurementGraph sample_er_mixture(const MixtureParams& params, const AngleGroups& groups) {
  check_groups(params, groups);
  Rng rng(params.seed);
  std::vector<Edge> edges;
  const int n = params.n;
  edges.reserve(static_cast<std::size_t>(params.lambda * n * (n - 1) / 2.0) + 16);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < params.lambda) edges.push_back(draw_measurement(i, j, params.p, groups, rng));
    }
  }
  return MeasurementGraph(n, std::move(edges), params.k);
}

MeasurementGraph sample_ba_mixture(const MixtureParams& params, int m, const AngleGroups& groups) {
  MixtureParams ignoring_lambda = params;
  ignoring_lambda.lambda = 1.0;
  check_groups(ignoring_lambda, groups);
  const int n = params.n;
  if (m < 1 || m >= n) throw std::invalid_argument("sample_ba_mixture: need 1 <= m < n");

  Rng rng(params.seed);
  std::vector<std::pair<int, int>> support;
  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      support.emplace_back(i, j);
      degree[i] += 1.0;
      degree[j] += 1.0;
    }
  }
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<int> targets;
  for (int v = m; v < n; ++v) {
    targets.clear();
    for (int pick = 0; pick < m; ++pick) {
      double total = 0.0;
      int remaining = 0;
      for (int t = 0; t < v; ++t) {
        if (!taken[t]) {
          total += degree[t];
          ++remaining;
        }
      }
      int chosen = -1;
      if (total > 0.0) {
        const double r = rng.uniform() * total;
        double acc = 0.0;
        for (int t = 0; t < v; ++t) {
          if (taken[t]) continue;
          acc += degree[t];
          if (r < acc) {
            chosen = t;
            break;
          }
        }
        if (chosen < 0) {  // r landed on the rounding edge of the last bucket
          for (int t = v - 1; t >= 0; --t) {
            if (!taken[t] && degree[t] > 0.0) {
              chosen = t;
              break;
            }
          }
        }
      } else {
        auto slot = static_cast<int>(rng.below(static_cast<std::uint64_t>(remaining)));
        for (int t = 0; t < v; ++t) {
          if (taken[t]) continue;
          if (slot-- == 0) {
            chosen = t;
            break;
          }
        }
      }
      taken[chosen] = 1;
      targets.push_back(chosen);
    }
    for (int t : targets) {
      taken[t] = 0;
      support.emplace_back(t, v);
      degree[t] += 1.0;
      degree[v] += 1.0;
    }
  }
  std::sort(support.begin(), support.end());
  std::vector<Edge> edges;
  edges.reserve(support.size());
  for (const auto& [i, j] : support) edges.push_back(draw_measurement(i, j, params.p, groups, rng));
  return MeasurementGraph(n, std::move(edges), params.k);
}

HermitianMatrix expected_H(const MixtureParams& params, const AngleGroups& groups) {
  check_groups(params, groups);
  const UnitVectorRep rep = to_unit_vectors(groups);
  HermitianMatrix e = HermitianMatrix::Zero(params.n, params.n);
  for (int l = 0; l < params.k; ++l) {
    const double w = params.n * params.p[l] * params.lambda;
    e.noalias() += w * rep.z.col(l) * rep.z.col(l).adjoint();
  }
  // The diagonal is lambda * sum p analytically; pin it and the mirror exactly.
  const double diag = params.lambda * (1.0 - params.eta());
  for (int i = 0; i < params.n; ++i) {
    e(i, i) = Complex(diag, 0.0);
    for (int j = i + 1; j < params.n; ++j) e(j, i) = std::conj(e(i, j));
  }
  return e;
}

double delta_orthogonality(const UnitVectorRep& z) {
  if (z.k() < 2) throw std::invalid_argument("delta_orthogonality: need at least two vectors");
  double worst = 0.0;
  for (int a = 0; a < z.k(); ++a) {
    for (int b = a + 1; b < z.k(); ++b) {
      const double denom = z.z.col(a).norm() * z.z.col(b).norm();
      worst = std::max(worst, std::abs(z.z.col(a).dot(z.z.col(b))) / denom);
    }
  }
  return worst;
}

double noise_constant_C(double lambda, std::span<const double> p) {
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  const double signal = total * lambda;
  double c = 0.0;
  for (double pl : p) {
    const double others = (total - pl) * lambda;
    c += 2.0 * pl * lambda * ((1.0 - pl * lambda) * (1.0 - pl * lambda) + others * others);
  }
  c += (1.0 - total) * lambda * (0.5 + signal * signal);
  c += (1.0 - lambda) * signal * signal;
  return c;
}

double noise_constant_C(const MixtureParams& params) {
  return noise_constant_C(params.lambda, params.p);
}

double spectral_norm_bound(double C, int n, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("spectral_norm_bound: eps must be >= 0");
  return (2.0 + eps) * 6.0 * std::sqrt(2.0 * C * n);
}

std::pair<double, double> closed_form_eigs_k2(int n, double lambda, double p1, double p2,
                                              double inner) {
  if (!(p1 > p2)) throw std::invalid_argument("closed_form_eigs_k2: need p1 > p2");
  if (!(inner >= 0.0 && inner <= 1.0)) {
    throw std::invalid_argument("closed_form_eigs_k2: inner must lie in [0, 1]");
  }
  const double a = n * lambda * p1;
  const double b = n * lambda * p2;
  const double root = std::sqrt((a - b) * (a - b) + 4.0 * a * b * inner * inner);
  const std::pair<double, double> eigs{(a + b + root) / 2.0, (a + b - root) / 2.0};
  const double slack = 1e-12 * std::max(1.0, a);
  if (eigs.second > b + slack || eigs.first < a - slack) {
    throw std::logic_error("closed_form_eigs_k2: interlacing postcondition violated");
  }
  return eigs;
}

double chain_bound(double eps, double eps_bar) {
  const double s = std::sqrt(eps) + std::sqrt(2.0 * eps_bar);
  return 1.0 - s * s;
}

std::optional<std::pair<double, double>> perturbation_eigvec_bounds_k2(
    int n, double lambda, double p1, double p2, double delta_norm) {
  const double gap12 = n * (p1 - p2) * lambda;
  const double second = n * p2 * lambda;
  if (!(delta_norm < std::min(gap12, second))) return std::nullopt;
  const double r1 = delta_norm / (gap12 - delta_norm);
  const double r2 = delta_norm / std::min(gap12 - delta_norm, second - delta_norm);
  return std::pair{1.0 - r1 * r1, 1.0 - r2 * r2};
}

}  // namespace ksync
