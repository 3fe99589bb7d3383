// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "ksync/disentangle.hpp"
#include "ksync/genmodel.hpp"
#include "ksync/grp.hpp"
#include "ksync/harness.hpp"
#include "ksync/linalg.hpp"
#include "ksync/rng.hpp"
#include "ksync/sync.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>

using namespace ksync;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

HermitianMatrix sampled_H(const MeasurementGraph& g, const MixtureParams& p) {
  double sum = 0.0;
  for (double pl : p.p) sum += pl;
  return build_measurement_matrix(g, p.lambda * sum);
}

Outcome closed_form_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int n = 50;
    const double p1 = 0.1 + 0.5 * rng.uniform();
    const double p2 = p1 * (0.05 + 0.9 * rng.uniform());
    const double lambda = 0.1 + 0.9 * rng.uniform();
    const AngleGroups ang = sample_angles(n, 2, rng.next_u64());
    const EigenPairs ep = top_k_eig(expected_H({n, 2, lambda, {p1, p2}, 0}, ang), 2);
    const UnitVectorRep z = to_unit_vectors(ang);
    const auto [l1, l2] = closed_form_eigs_k2(n, lambda, p1, p2, std::abs(z.z.col(0).dot(z.z.col(1))));
    worst = std::max({worst, std::abs(ep.values(0) - l1) / l1, std::abs(ep.values(1) - l2) / l2});
  }
  // Exactly orthogonal pair: a constant row and a Fourier mode.
  double worst_orth = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int n = 50;
    const double p1 = 0.3 + 0.05 * t, p2 = 0.2, lambda = 0.5 + 0.05 * t;
    Eigen::MatrixXd th(2, n);
    const double base = rng.angle();
    for (int i = 0; i < n; ++i) {
      th(0, i) = base;
      th(1, i) = wrap_angle(2 * std::numbers::pi * (t % 3 + 1) * i / n);
    }
    const EigenPairs ep = top_k_eig(expected_H({n, 2, lambda, {p1, p2}, 0}, AngleGroups(th)), 2);
    worst_orth = std::max({worst_orth, std::abs(ep.values(0) - n * p1 * lambda),
                           std::abs(ep.values(1) - n * p2 * lambda)});
  }
  return {worst <= 1e-9 && worst_orth <= 1e-12,
          "max rel err " + fmt(worst) + ", orthogonal max abs err " + fmt(worst_orth)};
}

Outcome noiseless_classical() {
  double worst = 0.0;
  for (int n : {10, 100, 1000}) {
    const AngleGroups ang = sample_angles(n, 1, 17 + n);
    const MeasurementGraph g = sample_er_mixture({n, 1, 1.0, {1.0}, 3}, ang);
    worst = std::max(worst, std::abs(1.0 - evaluate(ang, spectral_ksync(g, 1)).matched(0)));
  }
  return {worst <= 1e-8, "max |1 - corr| " + fmt(worst)};
}

struct NormDraw {
  double r_norm;
  Eigen::VectorXd h_top, eh_top;
};

std::vector<NormDraw> norm_draws() {
  static std::vector<NormDraw> draws;
  if (!draws.empty()) return draws;
  const int n = 500;
  for (int t = 0; t < 20; ++t) {
    const AngleGroups ang = sample_angles(n, 2, angle_seed(31, t));
    const MixtureParams params{n, 2, 0.5, {0.3, 0.2}, graph_seed(31, 0, t, 0)};
    const HermitianMatrix h = sampled_H(sample_er_mixture(params, ang), params);
    const HermitianMatrix eh = expected_H(params, ang);
    draws.push_back({spectral_norm(h - eh), top_k_eig(h, 5).values, top_k_eig(eh, 5).values});
  }
  return draws;
}

Outcome norm_containment() {
  const double bound = 18.0 * std::sqrt(2.0 * noise_constant_C(0.5, std::vector<double>{0.3, 0.2}) * 500);
  int ok = 0;
  double worst = 0.0;
  for (const NormDraw& d : norm_draws()) {
    ok += d.r_norm <= bound ? 1 : 0;
    worst = std::max(worst, d.r_norm);
  }
  return {ok == 20, std::to_string(ok) + "/20 draws, max ||R|| " + fmt(worst) + " vs bound " + fmt(bound)};
}

Outcome weyl_containment() {
  int ok = 0;
  double slack = 1e300;
  for (const NormDraw& d : norm_draws()) {
    bool all = true;
    for (int j = 0; j < 5; ++j) {
      const double gap = std::abs(d.h_top(j) - d.eh_top(j));
      all = all && gap <= d.r_norm + 1e-9;
      slack = std::min(slack, d.r_norm - gap);
    }
    ok += all ? 1 : 0;
  }
  return {ok == 20, std::to_string(ok) + "/20 draws, min slack " + fmt(slack)};
}

Outcome deflation_containment() {
  // Fourier modes 0, 1, 2 are exactly orthogonal; a cos bump of size c on group 2 plants
  // |<z_1, z_2>| and |<z_2, z_3>| near c / 2.
  const int n = 600;
  const std::vector<double> p{0.5, 0.3, 0.1};
  const double lambda = 1.0;
  int checked = 0, contained = 0;
  double largest_delta = 0.0;
  for (double c : {0.0, 2e-7, 2e-6, 2e-5, 2e-4, 2e-3, 1e-2, 2e-2, 4e-2}) {
    Eigen::MatrixXd th(3, n);
    for (int i = 0; i < n; ++i) {
      const double phase = 2 * std::numbers::pi * i / n;
      th(0, i) = 0.0;
      th(1, i) = wrap_angle(phase + c * std::cos(phase));
      th(2, i) = wrap_angle(2 * phase);
    }
    const AngleGroups ang(th);
    const double delta = delta_orthogonality(to_unit_vectors(ang));
    if (delta > 0.02) continue;
    const MixtureParams params{n, 3, lambda, p, 0};
    const TheoryReport rep = theory_bounds(params, delta, 0.25, 0.5);
    if (!rep.deflation_conditions_hold) continue;
    ++checked;
    largest_delta = std::max(largest_delta, delta);
    const EigenPairs ep = top_k_eig(expected_H(params, ang), 3);
    bool in = true;
    for (int j = 0; j < 3; ++j) {
      const auto [lo, hi] = rep.deflation_bounds[j];
      in = in && ep.values(j) >= lo - 1e-9 && ep.values(j) <= hi + 1e-9;
    }
    contained += in ? 1 : 0;
  }
  return {checked > 0 && contained == checked,
          std::to_string(contained) + "/" + std::to_string(checked) +
              " flagged instances contained, largest flagged delta " + fmt(largest_delta)};
}

Outcome setup1_trend() {
  ExperimentConfig cfg;
  cfg.mode = Mode::Setup1;
  cfg.n = 500;
  cfg.k = 2;
  cfg.p = {0.3, 0.2};
  cfg.eta = 0.5;
  cfg.lambda_grid = {0.2, 0.4, 0.6, 0.8, 1.0};
  cfg.trials_angles = 5;
  cfg.trials_graphs = 5;
  cfg.threads = std::max(1u, std::thread::hardware_concurrency());
  const SweepResult res = run_sweep(cfg);
  std::vector<double> g1, g2;
  for (const SweepRow& r : res.rows) (r.group == 1 ? g1 : g2).push_back(r.mean_corr);
  int inversions = 0;
  bool small = true, above = true;
  for (std::size_t i = 0; i + 1 < g1.size(); ++i) {
    if (g1[i + 1] < g1[i]) {
      ++inversions;
      small = small && g1[i] - g1[i + 1] <= 0.02;
    }
  }
  for (std::size_t i = 0; i < g1.size(); ++i) above = above && g1[i] >= g2[i];
  std::string curve;
  for (double v : g1) curve += (curve.empty() ? "" : " ") + fmt(v);
  return {inversions <= 1 && small && above && g1.back() >= 0.90,
          "group-1 means [" + curve + "], inversions " + std::to_string(inversions) +
              (above ? ", group 1 >= group 2" : ", group 1 < group 2 somewhere")};
}

Outcome solver_comparison() {
  bool ok = true;
  std::string detail;
  int objective_ok = 0, trials = 0;
  for (double eta : {0.3, 0.5}) {
    const std::vector<double> p = derive_setup2_probs(2, eta, 0.05);
    double sdp = 0.0, eig = 0.0;
    for (int t = 0; t < 10; ++t) {
      const AngleGroups ang = sample_angles(500, 2, angle_seed(77, t));
      const std::uint64_t gs = graph_seed(77, eta == 0.3 ? 0 : 1, t, 0);
      const MeasurementGraph g = sample_er_mixture({500, 2, 0.4, p, gs}, ang);
      SdpBmConfig cfg;
      cfg.seed = gs;
      const SyncEstimate s = sdp_bm_ksync(g, 2, cfg);
      const SyncEstimate e = spectral_ksync(g, 2);
      sdp += evaluate(ang, s).matched(0);
      eig += evaluate(ang, e).matched(0);
      const double feasible = feasible_objective(build_measurement_matrix(g, 1.0), e.theta_hat.group(0));
      objective_ok += s.info.objective >= feasible ? 1 : 0;
      ++trials;
    }
    sdp /= 10;
    eig /= 10;
    ok = ok && sdp >= eig - 0.05;
    detail += "eta " + fmt(eta) + ": SDP-BM " + fmt(sdp) + " vs EIG-H " + fmt(eig) + "; ";
  }
  ok = ok && objective_ok == trials;
  return {ok, detail + "objective dominates in " + std::to_string(objective_ok) + "/" + std::to_string(trials)};
}

Outcome disentangle_exact() {
  const std::vector<double> p{0.55, 0.45};
  std::string counts;
  bool all_zero = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const AngleGroups ang = sample_angles(100, 2, angle_seed(seed, 0));
    const MeasurementGraph g = sample_er_mixture({100, 2, 1.0, p, graph_seed(seed, 0, 0, 0)}, ang);
    DisentangleConfig cfg;
    cfg.M = 1;
    cfg.bad_fractions = model_bad_fractions(p, 0.0);
    const auto states = iterate_disentangle(g, cfg, spectral_ksync(g, 2), &ang);
    const int err = classification_errors(g, states.front()).total;
    all_zero = all_zero && err == 0;
    counts += (counts.empty() ? "" : " ") + std::to_string(err);
  }
  return {all_zero, "misclassified edges after iteration 1 over 5 seeds: " + counts + " (of 4950)"};
}

Outcome disentangle_trend() {
  const std::vector<double> p{0.18, 0.15, 0.12};
  Eigen::Vector3d first = Eigen::Vector3d::Zero(), last = Eigen::Vector3d::Zero();
  int shrunk = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const AngleGroups ang = sample_angles(500, 3, angle_seed(seed, 0));
    const MeasurementGraph g = sample_er_mixture({500, 3, 0.3, p, graph_seed(seed, 0, 0, 0)}, ang);
    DisentangleConfig cfg;
    cfg.k = 3;
    cfg.M = 20;
    cfg.bad_fractions = model_bad_fractions(p, 0.55);
    const auto states = iterate_disentangle(g, cfg, spectral_ksync(g, 3), &ang);
    first += states.front().correlations;
    last += states.back().correlations;
    auto good_median = [&](const DisentangleState& s) {
      std::vector<double> v;
      for (int e = 0; e < g.num_edges(); ++e)
        if (s.good[e]) v.push_back(s.gamma(e));
      std::sort(v.begin(), v.end());
      return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    };
    shrunk += good_median(states.back()) <= good_median(states.front()) ? 1 : 0;
  }
  first /= 5;
  last /= 5;
  const bool up = (last.array() >= first.array()).all();
  return {up && shrunk == 5, "mean corr iteration 1 [" + fmt(first(0)) + " " + fmt(first(1)) + " " +
                                 fmt(first(2)) + "] -> iteration 20 [" + fmt(last(0)) + " " + fmt(last(1)) +
                                 " " + fmt(last(2)) + "], median residual shrank in " +
                                 std::to_string(shrunk) + "/5"};
}

Outcome grp_recovery() {
  bool exact = true, monotone = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    double prev = -1.0;
    detail += "seed " + std::to_string(seed) + ":";
    for (double sigma : {0.0, 0.2, 0.4}) {
      ExperimentConfig cfg;
      cfg.mode = Mode::Grp;
      cfg.seed = seed;
      cfg.grp.patches.sigma = sigma;
      const GrpRun run = run_grp(cfg);
      const bool all = run.result.x_hat.unrecovered.empty() && run.result.y_hat.unrecovered.empty();
      const double err = std::max(run.error_x, run.error_y);
      if (sigma == 0.0) exact = exact && all && err < 1e-6;
      monotone = monotone && err >= prev;
      prev = err;
      detail += " " + fmt(err, 3);
    }
    detail += "; ";
  }
  return {exact && monotone, detail + "post-Procrustes mean displacement (worse of X, Y) at sigma 0, 0.2, 0.4"};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  const auto dir = std::filesystem::temp_directory_path() / "ksync_acceptance";
  std::filesystem::create_directories(dir);
  ExperimentConfig cfg;
  cfg.mode = Mode::Compare;
  cfg.grid = Mode::Setup2;
  cfg.n = 150;
  cfg.eta_grid = {0.3, 0.5};
  cfg.trials_angles = 3;
  cfg.trials_graphs = 3;
  cfg.solvers = {Solver::EigH, Solver::EigR, Solver::SdpBm};
  cfg.seed = 12345;
  std::vector<std::string> csv;
  for (int threads : {1, 1, 4}) {
    cfg.threads = threads;
    cfg.out = (dir / ("run" + std::to_string(csv.size()) + ".csv")).string();
    run_sweep_to_files(cfg);
    csv.push_back(read_file(cfg.out));
  }
  const bool same = csv[0] == csv[1];
  const bool threaded = csv[0] == csv[2];
  return {same && threaded && !csv[0].empty(),
          std::string("repeat ") + (same ? "identical" : "differs") + ", serial vs 4 threads " +
              (threaded ? "identical" : "differs") + " (" + std::to_string(csv[0].size()) + " bytes)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "closed-form eigenvalue oracle", 5, closed_form_oracle},
      {2, "noiseless classical synchronization", 10, noiseless_classical},
      {3, "spectral-norm containment", 120, norm_containment},
      {4, "Weyl containment", 120, weyl_containment},
      {5, "deflation-bound containment", 30, deflation_containment},
      {6, "Setup I trend", 300, setup1_trend},
      {7, "solver comparison floor", 600, solver_comparison},
      {8, "disentangling exactness at zero noise", 10, disentangle_exact},
      {9, "disentangling improvement trend", 900, disentangle_trend},
      {10, "GRP noiseless recovery", 300, grp_recovery},
      {11, "reproducibility", 600, reproducibility},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = out.pass && in_time;
    failed += pass ? 0 : 1;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (pass ? "PASS" : "FAIL") << " | "
              << out.detail << " | " << fmt(secs, 3) << " s of " << c.budget_s << " s"
              << (in_time ? "" : " (over budget)") << std::endl;
  }
  std::cout << std::size(criteria) - failed << "/" << std::size(criteria)
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
