#include "ksync/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ksync {

double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2*pi.
  if (w >= kTwoPi) w = 0.0;
  return w;
}

AngleGroups::AngleGroups(Eigen::MatrixXd theta) : theta_(std::move(theta)) {
  if (theta_.rows() < 1 || theta_.cols() < 1) {
    throw std::invalid_argument("AngleGroups: k and n must be at least 1");
  }
  for (Eigen::Index c = 0; c < theta_.cols(); ++c) {
    for (Eigen::Index r = 0; r < theta_.rows(); ++r) {
      const double v = theta_(r, c);
      if (!(v >= 0.0 && v < kTwoPi)) {
        std::ostringstream msg;
        msg << "AngleGroups: entry (" << r << ", " << c << ") = " << v << " outside [0, 2pi)";
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

AngleGroups AngleGroups::wrapped(const Eigen::MatrixXd& theta) {
  return AngleGroups(theta.unaryExpr([](double a) { return wrap_angle(a); }));
}

MeasurementGraph::MeasurementGraph(int n, std::vector<Edge> edges, int k)
    : n_(n), k_(k), edges_(std::move(edges)) {
  if (n_ < 1) throw std::invalid_argument("MeasurementGraph: n must be at least 1");
  if (k_ < 0) throw std::invalid_argument("MeasurementGraph: k must be non-negative");
  std::set<std::pair<int, int>> seen;
  for (const Edge& e : edges_) {
    if (e.i < 0 || e.j >= n_ || e.i >= e.j) {
      std::ostringstream msg;
      msg << "MeasurementGraph: invalid edge (" << e.i << ", " << e.j << ") for n = " << n_;
      throw std::invalid_argument(msg.str());
    }
    if (!seen.emplace(e.i, e.j).second) {
      std::ostringstream msg;
      msg << "MeasurementGraph: duplicate edge (" << e.i << ", " << e.j << ")";
      throw std::invalid_argument(msg.str());
    }
    if (!(e.theta >= 0.0 && e.theta < kTwoPi)) {
      throw std::invalid_argument("MeasurementGraph: offset outside [0, 2pi)");
    }
    if (e.label < kUnknownLabel || (k_ > 0 && e.label > k_)) {
      throw std::invalid_argument("MeasurementGraph: label outside {-1, 0, 1..k}");
    }
  }
}

bool MeasurementGraph::has_labels() const {
  return !edges_.empty() &&
         std::none_of(edges_.begin(), edges_.end(),
                      [](const Edge& e) { return e.label == kUnknownLabel; });
}

std::vector<std::vector<std::pair<int, int>>> MeasurementGraph::adjacency() const {
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(n_));
  for (int e = 0; e < num_edges(); ++e) {
    adj[edges_[e].i].emplace_back(edges_[e].j, e);
    adj[edges_[e].j].emplace_back(edges_[e].i, e);
  }
  return adj;
}

std::string to_string(Solver s) {
  switch (s) {
    case Solver::EigH: return "EIG-H";
    case Solver::EigR: return "EIG-R";
    case Solver::SdpBm: return "SDP-BM";
  }
  return "?";
}

Solver parse_solver(const std::string& name) {
  std::string u;
  for (char c : name) {
    if (c != '-' && c != '_') u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (u == "EIGH") return Solver::EigH;
  if (u == "EIGR") return Solver::EigR;
  if (u == "SDPBM") return Solver::SdpBm;
  throw std::invalid_argument("unknown solver '" + name + "' (expected EIG-H, EIG-R or SDP-BM)");
}

UnitVectorRep to_unit_vectors(const AngleGroups& groups) {
  const int n = groups.n();
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  UnitVectorRep rep;
  rep.z.resize(n, groups.k());
  for (int l = 0; l < groups.k(); ++l) {
    for (int i = 0; i < n; ++i) rep.z(i, l) = std::polar(scale, groups.theta()(l, i));
  }
  return rep;
}

HermitianMatrix build_measurement_matrix(const MeasurementGraph& g, double diagonal) {
  HermitianMatrix h = HermitianMatrix::Zero(g.n(), g.n());
  h.diagonal().setConstant(Complex(diagonal, 0.0));
  for (const Edge& e : g.edges()) {
    const Complex w = std::polar(1.0, e.theta);
    h(e.i, e.j) = w;
    h(e.j, e.i) = std::conj(w);
  }
  return h;
}

double circular_distance(double a, double b) {
  const double d = wrap_angle(a - b);
  return std::min(d, wrap_angle(b - a));
}

double correlation(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_hat) {
  if (theta.size() != theta_hat.size()) {
    throw std::invalid_argument("correlation: angle vectors differ in length");
  }
  if (theta.size() == 0) throw std::invalid_argument("correlation: empty angle vectors");
  Complex acc(0.0, 0.0);
  for (Eigen::Index i = 0; i < theta.size(); ++i) acc += std::polar(1.0, theta_hat(i) - theta(i));
  return std::min(1.0, std::abs(acc) / static_cast<double>(theta.size()));
}

void write_graph(std::ostream& os, const MeasurementGraph& g) {
  os << g.n() << ' ' << g.num_edges() << ' ' << g.k() << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const Edge& e : g.edges()) {
    os << (e.i + 1) << ' ' << (e.j + 1) << ' ' << e.theta << ' ' << e.label << '\n';
  }
}

void write_graph(const std::filesystem::path& path, const MeasurementGraph& g) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_graph(os, g);
}

MeasurementGraph read_graph(std::istream& is) {
  long long n = 0, m = 0, k = 0;
  if (!(is >> n >> m >> k)) throw std::invalid_argument("graph file: malformed header");
  if (m < 0) throw std::invalid_argument("graph file: negative edge count");
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long long e = 0; e < m; ++e) {
    long long i = 0, j = 0;
    double theta = 0.0;
    int label = kUnknownLabel;
    if (!(is >> i >> j >> theta >> label)) {
      throw std::invalid_argument("graph file: malformed edge line " + std::to_string(e + 2));
    }
    if (i > j) {
      std::swap(i, j);
      theta = wrap_angle(-theta);
    }
    edges.push_back({static_cast<int>(i - 1), static_cast<int>(j - 1), theta, label});
  }
  return MeasurementGraph(static_cast<int>(n), std::move(edges), static_cast<int>(k));
}

MeasurementGraph read_graph(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_graph(is);
}

}  // namespace ksync
