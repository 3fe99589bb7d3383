#include "ksync/disentangle.hpp"

#include "ksync/sync.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ksync {
namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

std::vector<char> classify_group(const std::vector<double>& residuals, double bad_fraction) {
  const auto m = residuals.size();
  std::vector<char> good(m, 1);
  if (m == 0 || bad_fraction <= 0.0) return good;
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - bad_fraction) * m - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, m);
  std::vector<double> sorted = residuals;
  std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
  const double threshold = sorted[rank - 1];
  for (std::size_t e = 0; e < m; ++e) good[e] = residuals[e] <= threshold ? 1 : 0;
  return good;
}

void DisentangleConfig::validate() const {
  if (k < 1) throw std::invalid_argument("DisentangleConfig: k must be at least 1");
  if (M < 1) throw std::invalid_argument("DisentangleConfig: M must be at least 1");
  if (static_cast<int>(bad_fractions.size()) != k) {
    throw std::invalid_argument("DisentangleConfig: bad_fractions must have k entries");
  }
  for (double f : bad_fractions) {
    if (!(f >= 0.0 && f < 1.0)) {
      throw std::invalid_argument("DisentangleConfig: bad fractions must lie in [0, 1)");
    }
  }
  if (solver == Solver::SdpBm) {
    throw std::invalid_argument("DisentangleConfig: solver must be EIG-H or EIG-R");
  }
}

std::vector<double> model_bad_fractions(std::span<const double> p, double eta) {
  if (p.empty()) throw std::invalid_argument("model_bad_fractions: p is empty");
  const double share = eta / static_cast<double>(p.size());
  std::vector<double> f;
  for (double pl : p) f.push_back(pl + share > 0.0 ? share / (pl + share) : 0.0);
  return f;
}

std::vector<double> literal_bad_fractions(std::span<const double> p) {
  std::vector<double> f;
  for (double pl : p) f.push_back(1.0 - pl);
  return f;
}

Eigen::MatrixXd residual_matrices(const MeasurementGraph& g, const AngleGroups& theta_hat) {
  if (theta_hat.n() != g.n()) throw std::invalid_argument("residual_matrices: node counts differ");
  const auto& th = theta_hat.theta();
  Eigen::MatrixXd psi(theta_hat.k(), g.num_edges());
  for (int e = 0; e < g.num_edges(); ++e) {
    const Edge& edge = g.edges()[e];
    for (int l = 0; l < theta_hat.k(); ++l) {
      psi(l, e) = circular_distance(edge.theta, wrap_angle(th(l, edge.i) - th(l, edge.j)));
    }
  }
  return psi;
}

EdgeAssignment assign_edges(const Eigen::MatrixXd& psi) {
  if (psi.rows() < 1) throw std::invalid_argument("assign_edges: need at least one group");
  EdgeAssignment a;
  const auto m = psi.cols();
  a.group.resize(static_cast<std::size_t>(m));
  a.gamma.resize(m);
  a.psi_tilde = Eigen::MatrixXd::Zero(psi.rows(), m);
  for (Eigen::Index e = 0; e < m; ++e) {
    Eigen::Index best = 0;
    for (Eigen::Index l = 1; l < psi.rows(); ++l) {
      if (psi(l, e) < psi(best, e)) best = l;
    }
    a.group[e] = static_cast<int>(best);
    a.gamma(e) = psi(best, e);
    a.psi_tilde(best, e) = psi(best, e);
  }
  return a;
}

GroupSync synchronize_component(const MeasurementGraph& g, std::span<const int> edge_ids,
                                Solver solver) {
  const int n = g.n();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int e : edge_ids) {
    const Edge& edge = g.edges()[e];
    const int a = find_root(parent, edge.i), b = find_root(parent, edge.j);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<int> size(n, 0);
  for (int v = 0; v < n; ++v) ++size[find_root(parent, v)];
  // Largest component; ties go to the one holding the smallest node.
  int root = 0;
  for (int v = 0; v < n; ++v) {
    if (size[v] > size[root]) root = v;
  }

  GroupSync out;
  out.theta = Eigen::VectorXd::Zero(n);
  std::vector<int> local(n, -1);
  std::vector<int> members;
  for (int v = 0; v < n; ++v) {
    if (find_root(parent, v) == root) {
      local[v] = static_cast<int>(members.size());
      members.push_back(v);
    } else {
      out.unsynced.push_back(v);
    }
  }
  out.disconnected = !out.unsynced.empty();
  if (members.size() < 2) return out;

  std::vector<Edge> sub;
  for (int e : edge_ids) {
    const Edge& edge = g.edges()[e];
    if (local[edge.i] >= 0) sub.push_back({local[edge.i], local[edge.j], edge.theta, kUnknownLabel});
  }
  const MeasurementGraph component(static_cast<int>(members.size()), std::move(sub));
  const SyncEstimate est = synchronize(component, 1, solver);
  for (std::size_t c = 0; c < members.size(); ++c) {
    out.theta(members[c]) = est.theta_hat.theta()(0, static_cast<Eigen::Index>(c));
  }
  return out;
}

int DisentangleState::predicted_label(int edge) const {
  return good[edge] ? assignment[edge] + 1 : kOutlierLabel;
}

std::vector<DisentangleState> iterate_disentangle(const MeasurementGraph& g,
                                                  const DisentangleConfig& cfg,
                                                  const SyncEstimate& initial,
                                                  const AngleGroups* truth) {
  cfg.validate();
  if (initial.k != cfg.k || initial.theta_hat.k() != cfg.k) {
    throw std::invalid_argument("iterate_disentangle: initial estimate has the wrong k");
  }
  if (initial.theta_hat.n() != g.n()) {
    throw std::invalid_argument("iterate_disentangle: initial estimate has the wrong n");
  }
  if (truth != nullptr && (truth->k() != cfg.k || truth->n() != g.n())) {
    throw std::invalid_argument("iterate_disentangle: truth has the wrong shape");
  }

  const int k = cfg.k;
  const int m = g.num_edges();
  std::vector<DisentangleState> states;
  states.reserve(cfg.M);
  AngleGroups current = initial.theta_hat;
  for (int r = 1; r <= cfg.M; ++r) {
    const EdgeAssignment split = assign_edges(residual_matrices(g, current));
    std::vector<std::vector<int>> members(k);
    for (int e = 0; e < m; ++e) members[split.group[e]].push_back(e);

    DisentangleState s;
    s.iteration = r;
    Eigen::MatrixXd theta(k, g.n());
    for (int l = 0; l < k; ++l) {
      s.groups.push_back(synchronize_component(g, members[l], cfg.solver));
      theta.row(l) = s.groups.back().theta.transpose();
    }
    s.theta_hat = AngleGroups(std::move(theta));

    // Fresh partition against the new estimate, then per-group quantile classification.
    const EdgeAssignment fresh = assign_edges(residual_matrices(g, s.theta_hat));
    s.assignment = fresh.group;
    s.gamma = fresh.gamma;
    s.good.assign(m, 1);
    std::vector<std::vector<int>> by_group(k);
    for (int e = 0; e < m; ++e) by_group[s.assignment[e]].push_back(e);
    std::vector<std::vector<Edge>> good_edges(k);
    std::vector<Edge> bad_edges;
    for (int l = 0; l < k; ++l) {
      std::vector<double> res;
      for (int e : by_group[l]) res.push_back(s.gamma(e));
      const std::vector<char> flags = classify_group(res, cfg.bad_fractions[l]);
      for (std::size_t t = 0; t < by_group[l].size(); ++t) s.good[by_group[l][t]] = flags[t];
    }
    for (int e = 0; e < m; ++e) {
      Edge edge = g.edges()[e];
      edge.label = s.predicted_label(e);
      if (s.good[e]) {
        good_edges[s.assignment[e]].push_back(edge);
      } else {
        bad_edges.push_back(edge);
      }
    }
    for (int l = 0; l < k; ++l) s.subgraphs.emplace_back(g.n(), std::move(good_edges[l]), k);
    s.bad = MeasurementGraph(g.n(), std::move(bad_edges), k);

    if (truth != nullptr) {
      s.correlations.resize(k);
      for (int l = 0; l < k; ++l) {
        s.correlations(l) = correlation(truth->group(l), s.theta_hat.group(l));
      }
    }
    current = s.theta_hat;
    states.push_back(std::move(s));
  }
  return states;
}

ClassificationErrors classification_errors(const MeasurementGraph& g, const DisentangleState& s) {
  if (!g.has_labels()) throw std::invalid_argument("classification_errors: graph has no labels");
  if (static_cast<int>(s.assignment.size()) != g.num_edges()) {
    throw std::invalid_argument("classification_errors: state does not match graph");
  }
  ClassificationErrors err;
  for (int e = 0; e < g.num_edges(); ++e) {
    const int truth = g.edges()[e].label;
    const int pred = s.predicted_label(e);
    if (pred == truth) continue;
    ++err.total;
    if (pred != kOutlierLabel) ++err.extra;
    if (truth != kOutlierLabel) ++err.missing;
  }
  return err;
}

std::vector<std::filesystem::path> write_subgraphs(const DisentangleState& s,
                                                   const std::filesystem::path& prefix) {
  std::vector<std::filesystem::path> written;
  for (std::size_t l = 0; l < s.subgraphs.size(); ++l) {
    std::filesystem::path p = prefix;
    p += "G" + std::to_string(l + 1) + ".txt";
    write_graph(p, s.subgraphs[l]);
    written.push_back(p);
  }
  std::filesystem::path w = prefix;
  w += "W.txt";
  write_graph(w, s.bad);
  written.push_back(w);
  return written;
}

}  // namespace ksync
