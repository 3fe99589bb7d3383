#include "doctest.h"

#include "ksync/disentangle.hpp"
#include "ksync/genmodel.hpp"
#include "ksync/rng.hpp"
#include "ksync/sync.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

using namespace ksync;

namespace {

struct Instance {
  AngleGroups truth;
  MeasurementGraph g;
};

Instance mixture(int n, std::vector<double> p, double lambda, std::uint64_t seed) {
  const int k = static_cast<int>(p.size());
  Instance in{sample_angles(n, k, seed), {}};
  in.g = sample_er_mixture({n, k, lambda, std::move(p), seed + 1}, in.truth);
  return in;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

TEST_CASE("residual examples") {
  const MeasurementGraph g(2, {{0, 1, 0.1}});
  Eigen::MatrixXd th(1, 2);
  th << 2 * std::numbers::pi - 0.1, 0.0;
  CHECK(residual_matrices(g, AngleGroups(th))(0, 0) == doctest::Approx(0.2));

  const Instance in = mixture(60, {0.5, 0.4}, 1.0, 3);
  const Eigen::MatrixXd psi = residual_matrices(in.g, in.truth);
  for (int e = 0; e < in.g.num_edges(); ++e) {
    const int label = in.g.edges()[e].label;
    if (label > 0) CHECK(psi(label - 1, e) < 1e-12);
  }

  Rng rng(4);
  std::vector<Edge> edges;
  const int n = 150;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j, rng.angle()});
  const MeasurementGraph noise(n, edges);
  CHECK(noise.num_edges() >= 10000);
  const double mean = residual_matrices(noise, sample_angles(n, 1, 5)).mean();
  CHECK(std::abs(mean - std::numbers::pi / 2) <= 0.05);
}

TEST_CASE("assign_edges rules") {
  Eigen::MatrixXd one(1, 3);
  one << 0.3, 0.1, 2.0;
  const EdgeAssignment a = assign_edges(one);
  CHECK(a.group == std::vector<int>{0, 0, 0});
  CHECK(a.gamma == one.row(0).transpose());

  Eigen::MatrixXd tie(2, 2);
  tie << 0.5, 0.7, 0.5, 0.2;
  const EdgeAssignment b = assign_edges(tie);
  CHECK(b.group == std::vector<int>{0, 1});
  CHECK(b.psi_tilde.colwise().sum().transpose() == b.gamma);

  const Instance in = mixture(100, {0.5, 0.3}, 1.0, 8);
  const EdgeAssignment c = assign_edges(residual_matrices(in.g, in.truth));
  for (int e = 0; e < in.g.num_edges(); ++e) {
    const int label = in.g.edges()[e].label;
    if (label > 0) CHECK(c.group[e] == label - 1);
  }
}

TEST_CASE("nearest-rank classification") {
  const std::vector<double> r{0.5, 0.1, 0.4, 0.2, 0.3};
  CHECK(classify_group(r, 0.4) == std::vector<char>{0, 1, 0, 1, 1});
  CHECK(classify_group(r, 0.0) == std::vector<char>{1, 1, 1, 1, 1});
  const std::vector<double> ties{0.2, 0.2, 0.2, 0.9};
  CHECK(classify_group(ties, 0.5) == std::vector<char>{1, 1, 1, 0});
  CHECK(classify_group({}, 0.3).empty());
}

TEST_CASE("bad-fraction rules") {
  const std::vector<double> p{0.3, 0.2};
  const auto m = model_bad_fractions(p, 0.5);
  CHECK(m[0] == doctest::Approx(0.25 / 0.55));
  CHECK(m[1] == doctest::Approx(0.25 / 0.45));
  const auto l = literal_bad_fractions(p);
  CHECK(l[0] == doctest::Approx(0.7));
  CHECK(model_bad_fractions(p, 0.0) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("config validation") {
  DisentangleConfig cfg;
  cfg.bad_fractions = {0.1};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.bad_fractions = {0.1, 1.0};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.bad_fractions = {0.1, 0.2};
  cfg.solver = Solver::SdpBm;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.solver = Solver::EigR;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("disconnected assigned subgraphs are flagged") {
  // Two triangles, no edge between them.
  const MeasurementGraph g(6, {{0, 1, 0.1}, {0, 2, 0.2}, {1, 2, 0.1}, {3, 4, 0.3}, {3, 5, 0.4}, {4, 5, 0.1}});
  const std::vector<int> all{0, 1, 2, 3, 4, 5};
  const GroupSync s = synchronize_component(g, all, Solver::EigH);
  CHECK(s.disconnected);
  CHECK(s.unsynced == std::vector<int>{3, 4, 5});
  CHECK(s.theta(3) == 0.0);
  CHECK(wrap_angle(s.theta(0) - s.theta(2)) == doctest::Approx(0.2).epsilon(1e-10));
  const std::vector<int> second{3, 4, 5};
  const GroupSync t = synchronize_component(g, second, Solver::EigH);
  CHECK(t.unsynced == std::vector<int>{0, 1, 2});
}

TEST_CASE("noiseless two-group instance reaches zero classification error") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Instance in = mixture(100, {0.55, 0.45}, 1.0, 10 * seed);
    DisentangleConfig cfg;
    cfg.M = 5;
    cfg.bad_fractions = model_bad_fractions(std::vector<double>{0.55, 0.45}, 0.0);
    const auto states = iterate_disentangle(in.g, cfg, spectral_ksync(in.g, 2), &in.truth);
    REQUIRE(states.size() == 5);
    const ClassificationErrors last = classification_errors(in.g, states.back());
    CHECK(last.total == 0);
    CHECK(states.back().correlations.minCoeff() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("partition invariant and residual reconstruction") {
  const Instance in = mixture(120, {0.45, 0.35}, 0.8, 77);
  DisentangleConfig cfg;
  cfg.M = 4;
  cfg.bad_fractions = model_bad_fractions(std::vector<double>{0.45, 0.35}, 0.2);
  const auto states = iterate_disentangle(in.g, cfg, spectral_ksync(in.g, 2), &in.truth);
  for (const DisentangleState& s : states) {
    int good = 0;
    for (const auto& sub : s.subgraphs) good += sub.num_edges();
    CHECK(good + s.bad.num_edges() == in.g.num_edges());
    const EdgeAssignment a = assign_edges(residual_matrices(in.g, s.theta_hat));
    CHECK(a.group == s.assignment);
    CHECK(a.psi_tilde.colwise().sum().transpose() == s.gamma);
    for (const Edge& e : s.bad.edges()) CHECK(e.label == kOutlierLabel);
    for (int l = 0; l < 2; ++l)
      for (const Edge& e : s.subgraphs[l].edges()) CHECK(e.label == l + 1);
  }
  const auto again = iterate_disentangle(in.g, cfg, spectral_ksync(in.g, 2), &in.truth);
  CHECK(again.back().assignment == states.back().assignment);
  CHECK(again.back().good == states.back().good);
}

TEST_CASE("graph recovery with outliers") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Instance in = mixture(100, {0.45, 0.35}, 1.0, 500 + seed);
    DisentangleConfig cfg;
    cfg.M = 20;
    cfg.bad_fractions = model_bad_fractions(std::vector<double>{0.45, 0.35}, 0.2);
    const auto states = iterate_disentangle(in.g, cfg, spectral_ksync(in.g, 2), &in.truth);
    CHECK(classification_errors(in.g, states.back()).total < 0.1 * in.g.num_edges());
  }
}

TEST_CASE("iterations improve correlation and shrink residuals") {
  const std::vector<double> p{0.18, 0.15, 0.12};
  const int seeds = 10;
  Eigen::Vector3d first = Eigen::Vector3d::Zero(), last = Eigen::Vector3d::Zero();
  for (int s = 0; s < seeds; ++s) {
    const Instance in = mixture(500, p, 0.3, 1000 + 7 * s);
    DisentangleConfig cfg;
    cfg.k = 3;
    cfg.M = 20;
    cfg.bad_fractions = model_bad_fractions(p, 0.55);
    const auto states = iterate_disentangle(in.g, cfg, spectral_ksync(in.g, 3), &in.truth);
    first += states.front().correlations;
    last += states.back().correlations;
    auto good_median = [&](const DisentangleState& st) {
      std::vector<double> v;
      for (int e = 0; e < in.g.num_edges(); ++e)
        if (st.good[e]) v.push_back(st.gamma(e));
      return median(v);
    };
    CHECK(good_median(states.back()) <= good_median(states.front()));
  }
  for (int l = 0; l < 3; ++l) CHECK(last(l) >= first(l));
}

TEST_CASE("subgraph files") {
  const Instance in = mixture(30, {0.5, 0.3}, 1.0, 5);
  DisentangleConfig cfg;
  cfg.M = 2;
  cfg.bad_fractions = {0.3, 0.4};
  const auto states = iterate_disentangle(in.g, cfg, spectral_ksync(in.g, 2));
  CHECK(states.back().correlations.size() == 0);
  const auto dir = std::filesystem::temp_directory_path() / "ksync_subgraphs";
  std::filesystem::create_directories(dir);
  const auto files = write_subgraphs(states.back(), dir / "run_");
  REQUIRE(files.size() == 3);
  CHECK(files[2].filename() == "run_W.txt");
  int total = 0;
  for (const auto& f : files) total += read_graph(f).num_edges();
  CHECK(total == in.g.num_edges());
  CHECK_THROWS_AS(classification_errors(MeasurementGraph(30, {}), states.back()), std::invalid_argument);
}
