#include "ksync/grp.hpp"

#include "ksync/rng.hpp"
#include "ksync/sync.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ksync {
namespace {

Eigen::VectorXcd as_complex(const Points2& p) {
  Eigen::VectorXcd z(p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i) z(i) = Complex(p(i, 0), p(i, 1));
  return z;
}

Eigen::VectorXcd centered(const Points2& p) {
  Eigen::VectorXcd z = as_complex(p);
  z.array() -= z.mean();
  return z;
}

Points2 rows_of(const Points2& p, const std::vector<int>& idx) {
  Points2 out(static_cast<Eigen::Index>(idx.size()), 2);
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = p.row(idx[r]);
  return out;
}

// Rows of a patch embedding for the given nodes (all must be members).
Points2 patch_rows(const Patch& patch, const Points2& local, const std::vector<int>& nodes) {
  std::vector<int> idx;
  for (int v : nodes) {
    const auto it = std::lower_bound(patch.members.begin(), patch.members.end(), v);
    idx.push_back(static_cast<int>(it - patch.members.begin()));
  }
  return rows_of(local, idx);
}

// e^{i theta} (p - origin) + sigma * noise, row by row.
Points2 local_embedding(const Points2& p, const Eigen::RowVector2d& origin, double theta,
                        double sigma, Rng& rng) {
  const Complex rot = std::polar(1.0, theta);
  Points2 out(p.rows(), 2);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const Complex z = rot * Complex(p(r, 0) - origin(0), p(r, 1) - origin(1));
    out(r, 0) = z.real() + sigma * rng.normal();
    out(r, 1) = z.imag() + sigma * rng.normal();
  }
  return out;
}

constexpr int kRefineRounds = 10;

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

// Removes bridges of the subgraph spanned by `edge_ids`. A bridge lies on no cycle, so
// any synchronization fits it exactly and its residual cannot expose a wrong offset.
std::vector<int> drop_bridges(const MeasurementGraph& g, const std::vector<int>& edge_ids) {
  const int n = g.n();
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, position in edge_ids)
  for (std::size_t t = 0; t < edge_ids.size(); ++t) {
    const Edge& e = g.edges()[edge_ids[t]];
    adj[e.i].push_back({e.j, static_cast<int>(t)});
    adj[e.j].push_back({e.i, static_cast<int>(t)});
  }
  std::vector<int> order(n, -1), low(n, 0);
  std::vector<char> bridge(edge_ids.size(), 0);
  int clock = 0;
  struct Frame {
    int node, via, next;
  };
  for (int root = 0; root < n; ++root) {
    if (order[root] >= 0) continue;
    std::vector<Frame> stack{{root, -1, 0}};
    order[root] = low[root] = clock++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < static_cast<int>(adj[f.node].size())) {
        const auto [to, id] = adj[f.node][f.next++];
        if (id == f.via) continue;
        if (order[to] < 0) {
          order[to] = low[to] = clock++;
          stack.push_back({to, id, 0});
        } else {
          low[f.node] = std::min(low[f.node], order[to]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const int parent = stack.back().node;
          low[parent] = std::min(low[parent], low[done.node]);
          if (low[done.node] > order[parent]) bridge[done.via] = 1;
        }
      }
    }
  }
  std::vector<int> kept;
  for (std::size_t t = 0; t < edge_ids.size(); ++t) {
    if (!bridge[t]) kept.push_back(edge_ids[t]);
  }
  return kept;
}

}  // namespace

CloudGenerator parse_generator(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "grid") return CloudGenerator::Grid;
  if (s == "uniform-square" || s == "uniform") return CloudGenerator::UniformSquare;
  throw std::invalid_argument("unknown point generator '" + name + "' (grid, uniform-square)");
}

PointCloudPair make_two_configurations(int n, CloudGenerator generator, const Eigen::Matrix2d& shear,
                                       double region_rotation, std::uint64_t seed) {
  if (n < 4) throw std::invalid_argument("make_two_configurations: need n >= 4");
  if (std::abs(shear.determinant()) < 1e-9) {
    throw std::invalid_argument("make_two_configurations: shear matrix is singular");
  }
  PointCloudPair pc;
  pc.X.resize(n, 2);
  if (generator == CloudGenerator::Grid) {
    const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)) - 1e-12));
    for (int t = 0; t < n; ++t) pc.X.row(t) << t % side, t / side;
  } else {
    Rng rng(seed);
    const double side = std::sqrt(static_cast<double>(n));
    for (int t = 0; t < n; ++t) {
      const double x = side * rng.uniform();
      pc.X.row(t) << x, side * rng.uniform();
    }
  }
  pc.Y = pc.X * shear.transpose();

  std::vector<double> xs(pc.X.col(0).data(), pc.X.col(0).data() + n);
  std::sort(xs.begin(), xs.end());
  const double median = n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
  std::vector<int> region;
  for (int t = 0; t < n; ++t) {
    if (pc.X(t, 0) > median) region.push_back(t);
  }
  if (!region.empty() && region_rotation != 0.0) {
    const Eigen::RowVector2d c = rows_of(pc.Y, region).colwise().mean();
    const Eigen::Matrix2d rot = Eigen::Rotation2Dd(region_rotation).toRotationMatrix();
    for (int t : region) pc.Y.row(t) = (pc.Y.row(t) - c) * rot.transpose() + c;
  }

  const double err = procrustes_error(pc.X, pc.Y);
  if (!(err > kNonCongruenceFloor * diameter(pc.X))) {
    std::ostringstream msg;
    msg << "make_two_configurations: X and Y are congruent (Procrustes residual " << err << ")";
    throw std::invalid_argument(msg.str());
  }
  return pc;
}

double diameter(const Points2& a) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) best = std::max(best, (a.row(i) - a.row(j)).norm());
  }
  return best;
}

double procrustes_rotation(const Points2& a, const Points2& b) {
  if (a.rows() != b.rows() || a.rows() < 1) {
    throw std::invalid_argument("procrustes_rotation: point sets must be equal and non-empty");
  }
  const Complex s = centered(b).dot(centered(a));  // sum (a - a_bar) conj(b - b_bar)
  return s == Complex(0.0) ? 0.0 : std::arg(s);
}

double procrustes_error(const Points2& a, const Points2& b, bool allow_reflection, bool allow_scale) {
  if (a.rows() != b.rows() || a.rows() < 2) {
    throw std::invalid_argument("procrustes_error: need equal sizes with n >= 2");
  }
  const Eigen::VectorXcd za = centered(a);
  auto fit = [&](const Eigen::VectorXcd& zb) {
    const Complex s = zb.dot(za);  // sum conj(b) a
    const double nb = zb.squaredNorm();
    Complex w = std::abs(s) > 0.0 ? s / std::abs(s) : Complex(1.0);
    if (allow_scale && nb > 0.0) w *= std::abs(s) / nb;
    return (za - w * zb).cwiseAbs().mean();
  };
  const Eigen::VectorXcd zb = centered(b);
  double err = fit(zb);
  if (allow_reflection) err = std::min(err, fit(zb.conjugate()));
  return err;
}

std::pair<PatchSet, MeasurementGraph> build_patches(const PointCloudPair& pc, const PatchParams& params) {
  if (params.min_overlap < 3) throw std::invalid_argument("build_patches: min_overlap must be >= 3");
  if (!(params.radius > 0.0)) throw std::invalid_argument("build_patches: radius must be positive");
  if (!(params.sigma >= 0.0)) throw std::invalid_argument("build_patches: sigma must be >= 0");
  if (!(params.p1 >= 0.0 && params.p2 >= 0.0 && params.p1 + params.p2 <= 1.0 + 1e-12)) {
    throw std::invalid_argument("build_patches: need p1, p2 >= 0 and p1 + p2 <= 1");
  }
  if (pc.Y.rows() != pc.X.rows()) throw std::invalid_argument("build_patches: X and Y differ in size");

  const int n = pc.n();
  PatchSet ps;
  for (int c = 0; c < n; ++c) {
    Patch patch;
    patch.center = c;
    for (int v = 0; v < n; ++v) {
      if ((pc.X.row(v) - pc.X.row(c)).norm() <= params.radius * (1.0 + 1e-12)) patch.members.push_back(v);
    }
    if (patch.members.size() < 3) {
      ps.dropped_centers.push_back(c);
      ps.warnings.push_back("patch at node " + std::to_string(c + 1) + " has fewer than 3 members; dropped");
      continue;
    }
    ps.patches.push_back(std::move(patch));
  }
  const int np = static_cast<int>(ps.patches.size());
  if (np == 0) throw std::invalid_argument("build_patches: every patch has fewer than 3 members");

  const Rng base(params.seed);
  Rng angle_rng = base.substream(1);
  Rng noise_rng = base.substream(2);
  Rng edge_rng = base.substream(3);
  Eigen::MatrixXd truth(2, np);
  for (int t = 0; t < 2; ++t) {
    for (int i = 0; i < np; ++i) truth(t, i) = angle_rng.angle();
  }
  ps.truth = AngleGroups(truth);
  for (int i = 0; i < np; ++i) {
    Patch& patch = ps.patches[i];
    const Points2 xs = rows_of(pc.X, patch.members);
    const Points2 ys = rows_of(pc.Y, patch.members);
    patch.local_x = local_embedding(xs, pc.X.row(patch.center), truth(0, i), params.sigma, noise_rng);
    patch.local_y = local_embedding(ys, pc.Y.row(patch.center), truth(1, i), params.sigma, noise_rng);
  }

  std::vector<Edge> edges;
  std::vector<int> common;
  for (int i = 0; i < np; ++i) {
    for (int j = i + 1; j < np; ++j) {
      const Patch& a = ps.patches[i];
      const Patch& b = ps.patches[j];
      common.clear();
      std::set_intersection(a.members.begin(), a.members.end(), b.members.begin(), b.members.end(),
                            std::back_inserter(common));
      if (static_cast<int>(common.size()) < params.min_overlap) continue;
      const double u = edge_rng.uniform();
      int label = kOutlierLabel;
      bool a_uses_x = true, b_uses_x = true;
      if (u < params.p1) {
        label = 1;
      } else if (u < params.p1 + params.p2) {
        label = 2;
        a_uses_x = b_uses_x = false;
      } else {
        a_uses_x = edge_rng.uniform() < 0.5;
        b_uses_x = !a_uses_x;
      }
      const Points2 pa = patch_rows(a, a_uses_x ? a.local_x : a.local_y, common);
      const Points2 pb = patch_rows(b, b_uses_x ? b.local_x : b.local_y, common);
      const double theta = wrap_angle(procrustes_rotation(pa, pb));
      const Eigen::VectorXcd ca = centered(pa), cb = centered(pb);
      ps.fit_residuals.push_back((ca - std::polar(1.0, theta) * cb).cwiseAbs().mean());
      ps.patch_graph.emplace_back(i, j);
      edges.push_back({i, j, theta, label});
    }
  }
  MeasurementGraph g(np, std::move(edges), 2);
  return {std::move(ps), std::move(g)};
}

Assembly assemble(const PatchSet& ps, const Eigen::VectorXd& theta, std::span<const int> patches,
                  bool use_x) {
  if (patches.empty()) throw std::invalid_argument("assemble: no patches to assemble");
  int n = 0;
  for (const Patch& p : ps.patches) n = std::max(n, p.members.back() + 1);
  for (const Patch& p : ps.patches) n = std::max(n, p.center + 1);

  // Unknowns: node coordinates first, then translations of all but the first patch.
  std::vector<int> node_col(n, -1);
  int cols = 0;
  for (int i : patches) {
    for (int v : ps.patches[i].members) {
      if (node_col[v] < 0) node_col[v] = cols++;
    }
  }
  const int num_nodes = cols;
  const int num_patches = static_cast<int>(patches.size());
  cols += num_patches - 1;

  // Membership connectivity (nodes and patches as one bipartite graph).
  std::vector<int> parent(num_nodes + num_patches);
  std::iota(parent.begin(), parent.end(), 0);
  for (int q = 0; q < num_patches; ++q) {
    for (int v : ps.patches[patches[q]].members) {
      const int a = find_root(parent, node_col[v]), b = find_root(parent, num_nodes + q);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<std::vector<int>> components(parent.size());
  for (int q = 0; q < num_patches; ++q) components[find_root(parent, num_nodes + q)].push_back(patches[q]);
  int count = 0;
  for (const auto& c : components) count += c.empty() ? 0 : 1;
  if (count > 1) {
    std::ostringstream msg;
    msg << "assemble: translation system is rank deficient; patch components:";
    for (const auto& c : components) {
      if (c.empty()) continue;
      msg << " {";
      for (std::size_t t = 0; t < c.size(); ++t) msg << (t ? "," : "") << ps.patches[c[t]].center + 1;
      msg << "}";
    }
    throw std::runtime_error(msg.str());
  }

  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(cols, cols);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(cols, 2);
  std::vector<std::pair<std::pair<int, int>, Eigen::RowVector2d>> equations;
  for (int q = 0; q < num_patches; ++q) {
    const Patch& patch = ps.patches[patches[q]];
    const Points2& local = use_x ? patch.local_x : patch.local_y;
    const Complex rot = std::polar(1.0, -theta(patches[q]));
    const int tcol = q == 0 ? -1 : num_nodes + q - 1;
    for (std::size_t r = 0; r < patch.members.size(); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      const Complex z = rot * Complex(local(row, 0), local(row, 1));
      const Eigen::RowVector2d b(z.real(), z.imag());
      // node - translation = b
      const int ncol = node_col[patch.members[r]];
      normal(ncol, ncol) += 1.0;
      rhs.row(ncol) += b;
      if (tcol >= 0) {
        normal(tcol, tcol) += 1.0;
        normal(ncol, tcol) -= 1.0;
        normal(tcol, ncol) -= 1.0;
        rhs.row(tcol) -= b;
      }
      equations.push_back({{ncol, tcol}, b});
    }
  }
  const Eigen::MatrixXd sol = normal.ldlt().solve(rhs);

  Assembly out;
  out.coords = Points2::Constant(n, 2, std::numeric_limits<double>::quiet_NaN());
  for (int v = 0; v < n; ++v) {
    if (node_col[v] >= 0) {
      out.coords.row(v) = sol.row(node_col[v]);
    } else {
      out.unrecovered.push_back(v);
    }
  }
  double sq = 0.0;
  for (const auto& [cols_pair, b] : equations) {
    Eigen::RowVector2d lhs = sol.row(cols_pair.first);
    if (cols_pair.second >= 0) lhs -= sol.row(cols_pair.second);
    sq += (lhs - b).squaredNorm();
  }
  out.residual = std::sqrt(sq / static_cast<double>(equations.size()));
  return out;
}

AsapResult asap_recover(const PatchSet& ps, const MeasurementGraph& g, const DisentangleConfig& cfg) {
  if (cfg.k != 2) throw std::invalid_argument("asap_recover: two configurations need k = 2");
  cfg.validate();
  if (g.n() != static_cast<int>(ps.patches.size())) {
    throw std::invalid_argument("asap_recover: graph and patch set differ in size");
  }
  AsapResult res;
  std::vector<std::vector<int>> good(2);
  if (g.n() >= 2) {
    const SyncEstimate initial = synchronize(g, 2, cfg.solver);
    const AngleGroups* truth =
        ps.truth.k() == 2 && ps.truth.n() == g.n() ? &ps.truth : nullptr;
    res.states = iterate_disentangle(g, cfg, initial, truth);
    const DisentangleState& last = res.states.back();
    for (int e = 0; e < g.num_edges(); ++e) {
      if (last.good[e]) good[last.assignment[e]].push_back(e);
    }
  }
  for (int l = 0; l < 2; ++l) {
    // Alternate good-edge synchronization and reclassification of the group's assigned
    // edges until the good set is stable. Bridges are dropped before every sync.
    good[l] = drop_bridges(g, good[l]);
    GroupSync gs = synchronize_component(g, good[l], cfg.solver);
    if (!res.states.empty()) {
      const DisentangleState& last = res.states.back();
      std::vector<int> assigned;
      for (int e = 0; e < g.num_edges(); ++e) {
        if (last.assignment[e] == l) assigned.push_back(e);
      }
      for (int round = 0; round < kRefineRounds; ++round) {
        std::vector<double> residuals;
        for (int e : assigned) {
          const Edge& edge = g.edges()[e];
          residuals.push_back(circular_distance(edge.theta, wrap_angle(gs.theta(edge.i) - gs.theta(edge.j))));
        }
        const std::vector<char> flags = classify_group(residuals, cfg.bad_fractions[l]);
        std::vector<int> next;
        for (std::size_t t = 0; t < assigned.size(); ++t) {
          if (flags[t]) next.push_back(assigned[t]);
        }
        next = drop_bridges(g, next);
        if (next == good[l]) break;
        good[l] = std::move(next);
        gs = synchronize_component(g, good[l], cfg.solver);
      }
    }
    std::vector<int> members;
    std::vector<char> skip(g.n(), 0);
    for (int v : gs.unsynced) skip[v] = 1;
    for (int v = 0; v < g.n(); ++v) {
      if (!skip[v]) members.push_back(v);
    }
    Assembly a = assemble(ps, gs.theta, members, l == 0);
    a.unsynced_patches = gs.unsynced;
    (l == 0 ? res.x_hat : res.y_hat) = std::move(a);
  }
  res.good_edges = std::move(good);
  return res;
}

double recovered_error(const Points2& truth, const Points2& estimate) {
  if (truth.rows() != estimate.rows()) throw std::invalid_argument("recovered_error: size mismatch");
  std::vector<int> rows;
  for (Eigen::Index i = 0; i < estimate.rows(); ++i) {
    if (estimate.row(i).allFinite()) rows.push_back(static_cast<int>(i));
  }
  return procrustes_error(rows_of(truth, rows), rows_of(estimate, rows));
}

void write_points(const std::filesystem::path& path, const Points2& pts) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "id,x,y\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) os << i + 1 << ',' << pts(i, 0) << ',' << pts(i, 1) << '\n';
}

Points2 read_points(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line.rfind("id,x,y", 0) != 0) throw std::invalid_argument(path.string() + ": missing id,x,y header");
  std::vector<std::pair<double, double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, x, y;
    if (!std::getline(ls, id, ',') || !std::getline(ls, x, ',') || !std::getline(ls, y)) {
      throw std::invalid_argument(path.string() + ": malformed row '" + line + "'");
    }
    rows.emplace_back(std::stod(x), std::stod(y));
  }
  Points2 pts(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pts(static_cast<Eigen::Index>(i), 0) = rows[i].first;
    pts(static_cast<Eigen::Index>(i), 1) = rows[i].second;
  }
  return pts;
}

}  // namespace ksync
