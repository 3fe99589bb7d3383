#include "ksync/harness.hpp"

#include "ksync/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ksync {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path out_path(const ExperimentConfig& cfg, const std::string& fallback) {
  return cfg.out.empty() ? fs::path(fallback) : fs::path(cfg.out);
}

// "<dir>/<stem><suffix>" for an output path.
fs::path sibling(const fs::path& out, const std::string& suffix) {
  return out.parent_path() / (out.stem().string() + suffix);
}

fs::path with_suffix(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p += suffix;
  return p;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << std::setprecision(10);
  return os;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (*std::max_element(v.begin(), v.begin() + mid) + hi);
}

Solver per_group_solver(const ExperimentConfig& cfg) {
  return cfg.solvers.front() == Solver::EigR ? Solver::EigR : Solver::EigH;
}

MixtureParams mixture(const ExperimentConfig& cfg, std::uint64_t seed) {
  return MixtureParams{cfg.n, cfg.k, cfg.lambda, cfg.p, seed};
}

MeasurementGraph sample_instance(const ExperimentConfig& cfg, const AngleGroups& truth, std::uint64_t seed) {
  const MixtureParams params = mixture(cfg, seed);
  if (cfg.graph == GraphModel::BarabasiAlbert) return sample_ba_mixture(params, cfg.ba_m, truth);
  return sample_er_mixture(params, truth);
}

std::vector<double> disentangle_fractions(const ExperimentConfig& cfg) {
  if (cfg.bad_fractions_rule == "explicit") return cfg.bad_fractions;
  if (static_cast<int>(cfg.p.size()) != cfg.k) {
    throw ConfigError("bad_fractions rule '" + cfg.bad_fractions_rule + "' needs p with k entries");
  }
  if (cfg.bad_fractions_rule == "literal") return literal_bad_fractions(cfg.p);
  return model_bad_fractions(cfg.p, cfg.setup1_eta());
}

}  // namespace

std::vector<fs::path> run_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  const AngleGroups truth = sample_angles(cfg.n, cfg.k, angle_seed(cfg.seed, 0));
  const std::uint64_t gs = graph_seed(cfg.seed, 0, 0, 0);
  const MeasurementGraph g = sample_instance(cfg, truth, gs);

  const fs::path out = out_path(cfg, "simulate.csv");
  std::ofstream os = open_out(out);
  os << "solver,group,correlation\n";
  for (Solver s : cfg.solvers) {
    SdpBmConfig sdp = cfg.sdp;
    sdp.seed = Rng(gs).substream(7).next_u64();
    const EvalResult ev = evaluate(truth, synchronize(g, cfg.k, s, sdp), cfg.matching);
    for (int l = 0; l < cfg.k; ++l) os << to_string(s) << ',' << l + 1 << ',' << ev.matched(l) << '\n';
  }
  const fs::path graph_path = with_suffix(out, ".graph.txt");
  write_graph(graph_path, g);
  return {out, graph_path};
}

std::vector<fs::path> run_sweep_to_files(const ExperimentConfig& cfg) {
  const SweepResult res = run_sweep(cfg);
  const fs::path out = out_path(cfg, to_string(cfg.mode) + ".csv");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_csv(out, res.rows);
  const fs::path meta = with_suffix(out, ".meta");
  write_meta(meta, res.meta);
  std::vector<fs::path> written{out, meta};
  if (!res.rows.empty()) {
    const fs::path svg = sibling(out, ".svg");
    emit_plot(res.rows, svg);
    written.push_back(svg);
  }
  return written;
}

DisentangleRun run_disentangle(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mode != Mode::Disentangle) throw ConfigError("run_disentangle needs mode disentangle");
  DisentangleRun run;
  if (cfg.graph_file) {
    run.graph = read_graph(fs::path(*cfg.graph_file));
  } else {
    run.truth = sample_angles(cfg.n, cfg.k, angle_seed(cfg.seed, 0));
    run.graph = sample_instance(cfg, *run.truth, graph_seed(cfg.seed, 0, 0, 0));
  }
  if (run.graph.n() < cfg.k) throw ConfigError("graph has fewer nodes than k");

  DisentangleConfig dc;
  dc.k = cfg.k;
  dc.M = cfg.M;
  dc.bad_fractions = disentangle_fractions(cfg);
  dc.solver = per_group_solver(cfg);
  dc.seed = cfg.seed;
  SdpBmConfig sdp = cfg.sdp;
  sdp.seed = Rng(cfg.seed).substream(7).next_u64();
  const SyncEstimate initial = synchronize(run.graph, cfg.k, cfg.solvers.front(), sdp);
  run.states = iterate_disentangle(run.graph, dc, initial, run.truth ? &*run.truth : nullptr);
  return run;
}

std::vector<fs::path> run_disentangle_to_files(const ExperimentConfig& cfg) {
  const DisentangleRun run = run_disentangle(cfg);
  const fs::path out = out_path(cfg, "disentangle.csv");
  std::ofstream os = open_out(out);
  const bool labeled = run.graph.has_labels();
  os << "iteration,group,correlation,median_gamma_good,good_edges,bad_edges,extra,missing\n";
  for (const DisentangleState& s : run.states) {
    for (int l = 0; l < cfg.k; ++l) {
      std::vector<double> good_gamma;
      int good = 0, bad = 0, extra = 0, missing = 0;
      for (int e = 0; e < run.graph.num_edges(); ++e) {
        const int pred = s.predicted_label(e);
        if (s.assignment[e] == l) {
          if (s.good[e]) {
            ++good;
            good_gamma.push_back(s.gamma(e));
          } else {
            ++bad;
          }
        }
        if (labeled) {
          const int truth = run.graph.edges()[e].label;
          if (pred == l + 1 && truth != l + 1) ++extra;
          if (truth == l + 1 && pred != l + 1) ++missing;
        }
      }
      os << s.iteration << ',' << l + 1 << ',';
      if (s.correlations.size() > 0) os << s.correlations(l);
      os << ',' << median(good_gamma) << ',' << good << ',' << bad << ',';
      if (labeled) os << extra << ',' << missing;
      else os << ',';
      os << '\n';
    }
  }
  std::vector<fs::path> written{out};
  for (const auto& p : write_subgraphs(run.states.back(), sibling(out, "_"))) written.push_back(p);
  return written;
}

GrpRun run_grp(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mode != Mode::Grp) throw ConfigError("run_grp needs mode grp");
  const GrpSettings& gs = cfg.grp;
  PointCloudPair clouds = make_two_configurations(gs.n, gs.generator, gs.shear, gs.region_rotation, cfg.seed);
  PatchParams pp = gs.patches;
  pp.seed = cfg.seed;
  auto [patches, graph] = build_patches(clouds, pp);

  DisentangleConfig dc;
  dc.k = 2;
  dc.M = cfg.M;
  dc.bad_fractions = gs.bad_fractions;
  dc.solver = per_group_solver(cfg);
  dc.seed = cfg.seed;
  AsapResult result = asap_recover(patches, graph, dc);
  GrpRun run{std::move(clouds), std::move(patches), std::move(graph), std::move(result), 0.0, 0.0};
  run.error_x = recovered_error(run.clouds.X, run.result.x_hat.coords);
  run.error_y = recovered_error(run.clouds.Y, run.result.y_hat.coords);
  return run;
}

std::vector<fs::path> run_grp_to_files(const ExperimentConfig& cfg) {
  const GrpRun run = run_grp(cfg);
  const fs::path out = out_path(cfg, "grp.csv");
  std::ofstream os = open_out(out);
  // Good edges kept after refinement, and how many of them carry another group's label.
  std::size_t kept[2] = {0, 0};
  int mislabeled = 0;
  for (int l = 0; l < 2 && l < static_cast<int>(run.result.good_edges.size()); ++l) {
    kept[l] = run.result.good_edges[l].size();
    for (int e : run.result.good_edges[l]) mislabeled += run.graph.edges()[e].label != l + 1 ? 1 : 0;
  }
  os << "n,patches,edges,sigma,error_x,error_y,diameter_x,unrecovered_x,unrecovered_y,good_edges_x,"
        "good_edges_y,mislabeled_good_edges\n";
  os << run.clouds.n() << ',' << run.patches.patches.size() << ',' << run.graph.num_edges() << ','
     << cfg.grp.patches.sigma << ',' << run.error_x << ',' << run.error_y << ',' << diameter(run.clouds.X)
     << ',' << run.result.x_hat.unrecovered.size() << ',' << run.result.y_hat.unrecovered.size() << ','
     << kept[0] << ',' << kept[1] << ',' << mislabeled << '\n';
  os.close();
  std::vector<fs::path> written{out};
  const std::pair<const char*, const Points2*> files[] = {{"_X.csv", &run.clouds.X},
                                                          {"_Y.csv", &run.clouds.Y},
                                                          {"_Xhat.csv", &run.result.x_hat.coords},
                                                          {"_Yhat.csv", &run.result.y_hat.coords}};
  for (const auto& [suffix, pts] : files) {
    write_points(sibling(out, suffix), *pts);
    written.push_back(sibling(out, suffix));
  }
  return written;
}

json theory_to_json(const TheoryReport& r) {
  auto pairs = [](const std::vector<std::pair<double, double>>& v) {
    json a = json::array();
    for (const auto& [lo, hi] : v) a.push_back({lo, hi});
    return a;
  };
  auto opt_pair = [](const std::optional<std::pair<double, double>>& v) -> json {
    if (!v) return nullptr;
    return json::array({v->first, v->second});
  };
  json j;
  j["C"] = r.C;
  j["sigma_bar"] = r.sigma_bar;
  j["spectral_norm_bound"] = r.spectral_norm_bound;
  j["S"] = r.S;
  j["psi"] = r.psi;
  j["C_j"] = r.C_j;
  j["E_j"] = r.E_j;
  j["E_tilde"] = r.E_tilde;
  j["l"] = r.l;
  j["u"] = r.u;
  j["deflation_bounds"] = pairs(r.deflation_bounds);
  j["thm_bounds"] = r.thm_bounds;
  j["delta_conditions"] = std::vector<bool>(r.delta_conditions.begin(), r.delta_conditions.end());
  j["deflation_conditions_hold"] = r.deflation_conditions_hold;
  j["n_required"] = r.n_required;
  j["n_condition_holds"] = r.n_condition_holds;
  j["closed_eigs"] = opt_pair(r.closed_eigs);
  j["eigvec_bounds"] = opt_pair(r.eigvec_bounds);
  j["thm_bounds_k2"] = opt_pair(r.thm_bounds_k2);
  j["n_required_k2"] = r.n_required_k2 ? json(*r.n_required_k2) : json(nullptr);
  j["probability"] = r.probability;
  return j;
}

json run_theory(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mode != Mode::Theory) throw ConfigError("run_theory needs mode theory");
  const TheoryReport report = theory_bounds(mixture(cfg, cfg.seed), cfg.delta, cfg.mu, cfg.epsilon);
  json j = theory_to_json(report);
  if (!cfg.out.empty()) {
    std::ofstream os = open_out(cfg.out);
    os << j.dump(2) << '\n';
  }
  return j;
}

}  // namespace ksync
