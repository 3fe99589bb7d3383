#include "ksync/harness.hpp"

#include "ksync/genmodel.hpp"
#include "ksync/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

namespace ksync {
namespace {

using nlohmann::json;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string fixed2(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

struct GridPoint {
  double lambda = 0.0;
  double eta = 0.0;
  std::optional<double> gamma;
  std::vector<double> p;
  bool skipped = false;
  std::string reason;
};

struct TrialOutcome {
  std::vector<std::vector<double>> matched;  // [solver][group]
  std::vector<int> sdp_iterations;           // per solver, 0 unless SDP-BM
  std::vector<char> converged;
  std::vector<int> degenerate;
};

std::vector<GridPoint> grid_points(const ExperimentConfig& cfg) {
  std::vector<GridPoint> points;
  const Mode layout = cfg.mode == Mode::Compare ? cfg.grid : cfg.mode;
  if (layout == Mode::Setup1) {
    for (double lam : cfg.lambda_grid) points.push_back({lam, cfg.setup1_eta(), std::nullopt, cfg.p, false, {}});
    return points;
  }
  for (double eta : cfg.eta_grid) {
    GridPoint pt{cfg.lambda, eta, cfg.gamma, {}, false, {}};
    try {
      pt.p = derive_setup2_probs(cfg.k, eta, cfg.gamma);
      MixtureParams{cfg.n, cfg.k, cfg.lambda, pt.p, 0}.validate();
    } catch (const std::invalid_argument& e) {
      pt.skipped = true;
      pt.reason = e.what();
    }
    points.push_back(std::move(pt));
  }
  return points;
}

MeasurementGraph sample_graph(const ExperimentConfig& cfg, const MixtureParams& params,
                              const AngleGroups& angles) {
  if (cfg.graph == GraphModel::BarabasiAlbert) return sample_ba_mixture(params, cfg.ba_m, angles);
  return sample_er_mixture(params, angles);
}

// Runs every task index through `body` on `threads` workers; the exception of the
// lowest failing index is rethrown so failures do not depend on scheduling.
template <typename Body>
void parallel_for(std::size_t count, int threads, Body body) {
  std::vector<std::exception_ptr> errors(count);
  if (threads <= 1 || count <= 1) {
    for (std::size_t t = 0; t < count; ++t) {
      try {
        body(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < count; t = next++) {
          try {
            body(t);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void check_probabilities(const std::vector<double>& p, int k, const std::string& what,
                         std::vector<std::string>& problems) {
  if (static_cast<int>(p.size()) != k) {
    problems.push_back(what + " must have k = " + std::to_string(k) + " entries");
    return;
  }
  try {
    MixtureParams{1, k, 1.0, p, 0}.validate();
  } catch (const std::invalid_argument& e) {
    problems.push_back(what + ": " + e.what());
  }
}

template <typename T>
T get_as(const json& v, const std::string& key, std::vector<std::string>& problems) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    problems.push_back("field '" + key + "' has the wrong type");
    return T{};
  }
}

}  // namespace

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Setup1: return "setup1";
    case Mode::Setup2: return "setup2";
    case Mode::Compare: return "compare";
    case Mode::Simulate: return "simulate";
    case Mode::Disentangle: return "disentangle";
    case Mode::Grp: return "grp";
    case Mode::Theory: return "theory";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  const std::string s = lower(name);
  for (Mode m : {Mode::Setup1, Mode::Setup2, Mode::Compare, Mode::Simulate, Mode::Disentangle, Mode::Grp,
                 Mode::Theory}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown mode '" + name + "'");
}

double ExperimentConfig::setup1_eta() const {
  return eta ? *eta : 1.0 - std::accumulate(p.begin(), p.end(), 0.0);
}

void ExperimentConfig::validate() const {
  std::vector<std::string> problems;
  if (n < 1) problems.push_back("n must be at least 1");
  if (k < 1) problems.push_back("k must be at least 1");
  if (k > n && n >= 1) problems.push_back("k must not exceed n");
  if (trials_angles < 1 || trials_graphs < 1) problems.push_back("trial counts must be at least 1");
  if (threads < 1) problems.push_back("threads must be at least 1");
  if (solvers.empty()) problems.push_back("solvers must not be empty");
  if (graph == GraphModel::BarabasiAlbert && (ba_m < 1 || ba_m >= n)) {
    problems.push_back("ba_m must satisfy 1 <= ba_m < n");
  }
  if (sdp.rank != 0 && sdp.rank < k) problems.push_back("sdp.rank must be 0 (auto) or at least k");
  if (!(sdp.rel_tol > 0.0)) problems.push_back("sdp.rel_tol must be positive");
  if (sdp.max_iters < 0) problems.push_back("sdp.max_iters must be >= 0");

  const Mode layout = mode == Mode::Compare ? grid : mode;
  if (mode == Mode::Compare && grid != Mode::Setup1 && grid != Mode::Setup2) {
    problems.push_back("grid must be setup1 or setup2");
  }
  auto check_lambda = [&](double lam, const std::string& what) {
    if (!(lam >= 0.0 && lam <= 1.0)) problems.push_back(what + " must lie in [0, 1]");
  };
  const bool uses_p = layout == Mode::Setup1 || mode == Mode::Simulate || mode == Mode::Disentangle ||
                      mode == Mode::Theory;
  if (uses_p && !(mode == Mode::Disentangle && graph_file)) {
    check_probabilities(p, k, "p", problems);
    const double e = setup1_eta();
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (!(e >= 0.0 && e <= 1.0)) problems.push_back("eta must lie in [0, 1]");
    if (eta && std::abs(total + *eta - 1.0) > 1e-9) problems.push_back("sum of p plus eta must equal 1");
  }
  if (layout == Mode::Setup1 && (mode == Mode::Setup1 || mode == Mode::Compare)) {
    if (lambda_grid.empty()) problems.push_back("lambda_grid must not be empty");
    for (double lam : lambda_grid) check_lambda(lam, "lambda_grid entries");
  }
  if (layout == Mode::Setup2) {
    if (eta_grid.empty()) problems.push_back("eta_grid must not be empty");
    for (double e : eta_grid) {
      if (!(e >= 0.0 && e < 1.0)) problems.push_back("eta_grid entries must lie in [0, 1)");
    }
    if (!(gamma >= 0.0)) problems.push_back("gamma must be >= 0");
  }
  if (layout == Mode::Setup2 || mode == Mode::Simulate || mode == Mode::Disentangle ||
      mode == Mode::Theory) {
    check_lambda(lambda, "lambda");
  }

  if (mode == Mode::Disentangle) {
    if (M < 1) problems.push_back("M must be at least 1");
    if (bad_fractions_rule != "model" && bad_fractions_rule != "literal" && bad_fractions_rule != "explicit") {
      problems.push_back("bad_fractions must be \"model\", \"literal\" or a list");
    }
    if (bad_fractions_rule == "explicit") {
      if (static_cast<int>(bad_fractions.size()) != k) problems.push_back("bad_fractions must have k entries");
      for (double f : bad_fractions) {
        if (!(f >= 0.0 && f < 1.0)) problems.push_back("bad_fractions entries must lie in [0, 1)");
      }
    }
    if (graph_file && bad_fractions_rule == "model") {
      problems.push_back("a graph_file needs explicit or literal bad_fractions");
    }
  }
  if (mode == Mode::Theory) {
    if (!(delta >= 0.0 && delta < 1.0)) problems.push_back("delta must lie in [0, 1)");
    if (!(mu >= 0.0 && mu <= 0.5)) problems.push_back("mu must lie in [0, 1/2]");
    if (!(epsilon > 0.0 && epsilon < 1.0)) problems.push_back("epsilon must lie in (0, 1)");
  }
  if (mode == Mode::Grp) {
    if (grp.n < 4) problems.push_back("grp.n must be at least 4");
    if (std::abs(grp.shear.determinant()) < 1e-9) problems.push_back("grp.shear is singular");
    if (grp.patches.min_overlap < 3) problems.push_back("grp.min_overlap must be at least 3");
    if (!(grp.patches.radius > 0.0)) problems.push_back("grp.radius must be positive");
    if (!(grp.patches.sigma >= 0.0)) problems.push_back("grp.sigma must be >= 0");
    if (!(grp.patches.p1 >= 0.0 && grp.patches.p2 >= 0.0 && grp.patches.p1 + grp.patches.p2 <= 1.0)) {
      problems.push_back("grp.p1, grp.p2 must be >= 0 with sum <= 1");
    }
    if (grp.bad_fractions.size() != 2) problems.push_back("grp.bad_fractions must have 2 entries");
    for (double f : grp.bad_fractions) {
      if (!(f >= 0.0 && f < 1.0)) problems.push_back("grp.bad_fractions entries must lie in [0, 1)");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  ExperimentConfig cfg;
  std::vector<std::string> problems;
  for (const auto& [key, v] : doc.items()) {
    try {
      if (key == "mode") {
        cfg.mode = parse_mode(get_as<std::string>(v, key, problems));
      } else if (key == "grid") {
        cfg.grid = parse_mode(get_as<std::string>(v, key, problems));
      } else if (key == "n") {
        cfg.n = get_as<int>(v, key, problems);
      } else if (key == "k") {
        cfg.k = get_as<int>(v, key, problems);
      } else if (key == "p") {
        cfg.p = get_as<std::vector<double>>(v, key, problems);
      } else if (key == "eta") {
        cfg.eta = get_as<double>(v, key, problems);
      } else if (key == "lambda_grid") {
        cfg.lambda_grid = get_as<std::vector<double>>(v, key, problems);
      } else if (key == "gamma") {
        cfg.gamma = get_as<double>(v, key, problems);
      } else if (key == "eta_grid") {
        cfg.eta_grid = get_as<std::vector<double>>(v, key, problems);
      } else if (key == "lambda") {
        cfg.lambda = get_as<double>(v, key, problems);
      } else if (key == "trials_angles") {
        cfg.trials_angles = get_as<int>(v, key, problems);
      } else if (key == "trials_graphs") {
        cfg.trials_graphs = get_as<int>(v, key, problems);
      } else if (key == "solvers") {
        cfg.solvers.clear();
        for (const auto& s : get_as<std::vector<std::string>>(v, key, problems)) cfg.solvers.push_back(parse_solver(s));
      } else if (key == "matching") {
        cfg.matching = parse_matching(get_as<std::string>(v, key, problems));
      } else if (key == "graph") {
        const std::string g = lower(get_as<std::string>(v, key, problems));
        if (g == "er") {
          cfg.graph = GraphModel::ErdosRenyi;
        } else if (g == "ba") {
          cfg.graph = GraphModel::BarabasiAlbert;
        } else {
          problems.push_back("graph must be \"er\" or \"ba\"");
        }
      } else if (key == "ba_m") {
        cfg.ba_m = get_as<int>(v, key, problems);
      } else if (key == "sdp") {
        for (const auto& [sk, sv] : v.items()) {
          if (sk == "rank") {
            cfg.sdp.rank = get_as<int>(sv, "sdp.rank", problems);
          } else if (sk == "max_iters") {
            cfg.sdp.max_iters = get_as<int>(sv, "sdp.max_iters", problems);
          } else if (sk == "rel_tol") {
            cfg.sdp.rel_tol = get_as<double>(sv, "sdp.rel_tol", problems);
          } else {
            problems.push_back("unknown field 'sdp." + sk + "'");
          }
        }
      } else if (key == "M") {
        cfg.M = get_as<int>(v, key, problems);
      } else if (key == "bad_fractions") {
        if (v.is_string()) {
          cfg.bad_fractions_rule = v.get<std::string>();
        } else {
          cfg.bad_fractions_rule = "explicit";
          cfg.bad_fractions = get_as<std::vector<double>>(v, key, problems);
        }
      } else if (key == "graph_file") {
        cfg.graph_file = get_as<std::string>(v, key, problems);
      } else if (key == "delta") {
        cfg.delta = get_as<double>(v, key, problems);
      } else if (key == "mu") {
        cfg.mu = get_as<double>(v, key, problems);
      } else if (key == "epsilon") {
        cfg.epsilon = get_as<double>(v, key, problems);
      } else if (key == "seed") {
        cfg.seed = get_as<std::uint64_t>(v, key, problems);
      } else if (key == "threads") {
        cfg.threads = get_as<int>(v, key, problems);
      } else if (key == "out") {
        cfg.out = get_as<std::string>(v, key, problems);
      } else if (key == "grp") {
        GrpSettings& g = cfg.grp;
        for (const auto& [gk, gv] : v.items()) {
          const std::string name = "grp." + gk;
          if (gk == "n") {
            g.n = get_as<int>(gv, name, problems);
          } else if (gk == "generator") {
            g.generator = parse_generator(get_as<std::string>(gv, name, problems));
          } else if (gk == "shear") {
            const auto m = get_as<std::vector<std::vector<double>>>(gv, name, problems);
            if (m.size() != 2 || m[0].size() != 2 || m[1].size() != 2) {
              problems.push_back("grp.shear must be a 2x2 array");
            } else {
              g.shear << m[0][0], m[0][1], m[1][0], m[1][1];
            }
          } else if (gk == "region_rotation") {
            g.region_rotation = get_as<double>(gv, name, problems);
          } else if (gk == "radius") {
            g.patches.radius = get_as<double>(gv, name, problems);
          } else if (gk == "min_overlap") {
            g.patches.min_overlap = get_as<int>(gv, name, problems);
          } else if (gk == "sigma") {
            g.patches.sigma = get_as<double>(gv, name, problems);
          } else if (gk == "p1") {
            g.patches.p1 = get_as<double>(gv, name, problems);
          } else if (gk == "p2") {
            g.patches.p2 = get_as<double>(gv, name, problems);
          } else if (gk == "bad_fractions") {
            g.bad_fractions = get_as<std::vector<double>>(gv, name, problems);
          } else {
            problems.push_back("unknown field '" + name + "'");
          }
        }
      } else {
        problems.push_back("unknown field '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      problems.push_back(e.what());
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = to_string(cfg.mode);
  j["grid"] = to_string(cfg.grid);
  j["n"] = cfg.n;
  j["k"] = cfg.k;
  j["p"] = cfg.p;
  if (cfg.eta) j["eta"] = *cfg.eta;
  j["lambda_grid"] = cfg.lambda_grid;
  j["gamma"] = cfg.gamma;
  j["eta_grid"] = cfg.eta_grid;
  j["lambda"] = cfg.lambda;
  j["trials_angles"] = cfg.trials_angles;
  j["trials_graphs"] = cfg.trials_graphs;
  std::vector<std::string> solvers;
  for (Solver s : cfg.solvers) solvers.push_back(to_string(s));
  j["solvers"] = solvers;
  j["matching"] = to_string(cfg.matching);
  j["graph"] = cfg.graph == GraphModel::ErdosRenyi ? "er" : "ba";
  j["ba_m"] = cfg.ba_m;
  j["sdp"] = {{"rank", cfg.sdp.rank}, {"max_iters", cfg.sdp.max_iters}, {"rel_tol", cfg.sdp.rel_tol}};
  j["M"] = cfg.M;
  if (cfg.bad_fractions_rule == "explicit") {
    j["bad_fractions"] = cfg.bad_fractions;
  } else {
    j["bad_fractions"] = cfg.bad_fractions_rule;
  }
  if (cfg.graph_file) j["graph_file"] = *cfg.graph_file;
  j["delta"] = cfg.delta;
  j["mu"] = cfg.mu;
  j["epsilon"] = cfg.epsilon;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["out"] = cfg.out;
  const GrpSettings& g = cfg.grp;
  j["grp"] = {{"n", g.n},
              {"generator", g.generator == CloudGenerator::Grid ? "grid" : "uniform-square"},
              {"shear", {{g.shear(0, 0), g.shear(0, 1)}, {g.shear(1, 0), g.shear(1, 1)}}},
              {"region_rotation", g.region_rotation},
              {"radius", g.patches.radius},
              {"min_overlap", g.patches.min_overlap},
              {"sigma", g.patches.sigma},
              {"p1", g.patches.p1},
              {"p2", g.patches.p2},
              {"bad_fractions", g.bad_fractions}};
  return j;
}

std::vector<double> derive_setup2_probs(int k, double eta, double gamma) {
  if (k < 1) throw std::invalid_argument("derive_setup2_probs: k must be at least 1");
  if (!(gamma >= 0.0)) throw std::invalid_argument("derive_setup2_probs: gamma must be >= 0");
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("derive_setup2_probs: eta must lie in [0, 1)");
  const double mean = (1.0 - eta) / k;
  std::vector<double> p(k);
  for (int l = 1; l <= k; ++l) p[l - 1] = mean + gamma * ((k + 1) / 2.0 - l);
  if (!(p.back() > 0.0)) {
    std::ostringstream msg;
    msg << "derive_setup2_probs: smallest probability " << p.back() << " is not positive (eta = " << eta
        << ", gamma = " << gamma << ")";
    throw std::invalid_argument(msg.str());
  }
  return p;
}

std::uint64_t angle_seed(std::uint64_t seed, int outer) {
  return Rng(seed).substream(1).substream(static_cast<std::uint64_t>(outer)).next_u64();
}

std::uint64_t graph_seed(std::uint64_t seed, int grid_point, int outer, int inner) {
  return Rng(seed)
      .substream(2)
      .substream(static_cast<std::uint64_t>(grid_point))
      .substream(static_cast<std::uint64_t>(outer))
      .substream(static_cast<std::uint64_t>(inner))
      .next_u64();
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mode != Mode::Setup1 && cfg.mode != Mode::Setup2 && cfg.mode != Mode::Compare) {
    throw ConfigError("run_sweep needs mode setup1, setup2 or compare");
  }
  const std::vector<GridPoint> points = grid_points(cfg);
  const int ta = cfg.trials_angles, tg = cfg.trials_graphs;
  const auto ns = cfg.solvers.size();

  std::vector<AngleGroups> angles;
  for (int a = 0; a < ta; ++a) angles.push_back(sample_angles(cfg.n, cfg.k, angle_seed(cfg.seed, a)));

  struct Task {
    int point, outer, inner;
  };
  std::vector<Task> tasks;
  for (int g = 0; g < static_cast<int>(points.size()); ++g) {
    if (points[g].skipped) continue;
    for (int a = 0; a < ta; ++a) {
      for (int b = 0; b < tg; ++b) tasks.push_back({g, a, b});
    }
  }
  std::vector<TrialOutcome> outcomes(tasks.size());
  parallel_for(tasks.size(), cfg.threads, [&](std::size_t t) {
    const Task& task = tasks[t];
    const GridPoint& pt = points[task.point];
    const std::uint64_t gs = graph_seed(cfg.seed, task.point, task.outer, task.inner);
    const MixtureParams params{cfg.n, cfg.k, pt.lambda, pt.p, gs};
    const AngleGroups& truth = angles[task.outer];
    const MeasurementGraph graph = sample_graph(cfg, params, truth);
    TrialOutcome& out = outcomes[t];
    for (std::size_t s = 0; s < ns; ++s) {
      SdpBmConfig sdp = cfg.sdp;
      sdp.seed = Rng(gs).substream(7).next_u64();
      const SyncEstimate est = synchronize(graph, cfg.k, cfg.solvers[s], sdp);
      const EvalResult ev = evaluate(truth, est, cfg.matching);
      out.matched.emplace_back(ev.matched.data(), ev.matched.data() + ev.matched.size());
      out.sdp_iterations.push_back(cfg.solvers[s] == Solver::SdpBm ? est.info.iterations : 0);
      out.converged.push_back(est.info.converged ? 1 : 0);
      out.degenerate.push_back(static_cast<int>(est.degenerate_entries.size()));
    }
  });

  SweepResult res;
  const std::string mode = to_string(cfg.mode);
  res.meta.push_back("mode: " + mode);
  res.meta.push_back("seed: " + std::to_string(cfg.seed));
  res.meta.push_back("trials: " + std::to_string(ta) + " x " + std::to_string(tg));
  res.meta.push_back("matching: " + to_string(cfg.matching));
  res.meta.push_back("error_band: sample standard deviation");
  std::size_t cursor = 0;
  for (int g = 0; g < static_cast<int>(points.size()); ++g) {
    const GridPoint& pt = points[g];
    const std::string where = "lambda=" + num(pt.lambda) + " eta=" + num(pt.eta) +
                              (pt.gamma ? " gamma=" + num(*pt.gamma) : std::string());
    if (pt.skipped) {
      res.meta.push_back("skipped[" + where + "]: " + pt.reason);
      continue;
    }
    const std::size_t count = static_cast<std::size_t>(ta) * tg;
    for (std::size_t s = 0; s < ns; ++s) {
      long iters = 0;
      int nonconverged = 0, degenerate = 0;
      for (std::size_t t = cursor; t < cursor + count; ++t) {
        iters += outcomes[t].sdp_iterations[s];
        nonconverged += outcomes[t].converged[s] ? 0 : 1;
        degenerate += outcomes[t].degenerate[s];
      }
      const std::string tag = "[" + where + " solver=" + to_string(cfg.solvers[s]) + "]";
      if (cfg.solvers[s] == Solver::SdpBm) {
        res.meta.push_back("sdp_iterations" + tag + ": total " + std::to_string(iters));
        res.meta.push_back("sdp_nonconverged" + tag + ": " + std::to_string(nonconverged));
      }
      res.meta.push_back("degenerate_entries" + tag + ": " + std::to_string(degenerate));
      for (int l = 0; l < cfg.k; ++l) {
        double sum = 0.0;
        for (std::size_t t = cursor; t < cursor + count; ++t) sum += outcomes[t].matched[s][l];
        const double mean = sum / static_cast<double>(count);
        double sq = 0.0;
        for (std::size_t t = cursor; t < cursor + count; ++t) {
          const double d = outcomes[t].matched[s][l] - mean;
          sq += d * d;
        }
        const double sd = count > 1 ? std::sqrt(sq / static_cast<double>(count - 1)) : 0.0;
        res.rows.push_back({mode, cfg.solvers[s], cfg.n, cfg.k, pt.lambda, pt.eta, pt.gamma, l + 1, mean, sd,
                            static_cast<int>(count)});
      }
    }
    cursor += count;
  }
  return res;
}

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "mode,solver,n,k,lambda,eta,gamma_or_blank,group,mean_corr,std_corr,trials\n";
  for (const SweepRow& r : rows) {
    os << r.mode << ',' << to_string(r.solver) << ',' << r.n << ',' << r.k << ',' << num(r.lambda) << ','
       << num(r.eta) << ',' << (r.gamma ? num(*r.gamma) : std::string()) << ',' << r.group << ','
       << num(r.mean_corr) << ',' << num(r.std_corr) << ',' << r.trials << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_csv(os, rows);
}

void write_meta(const std::filesystem::path& path, const std::vector<std::string>& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& line : meta) os << line << '\n';
}

std::string render_plot(const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("emit_plot: no rows to plot");
  for (const SweepRow& r : rows) {
    if (r.mode != rows.front().mode) throw std::invalid_argument("emit_plot: rows mix modes");
  }
  const bool over_eta = rows.front().gamma.has_value();
  auto xval = [&](const SweepRow& r) { return over_eta ? r.eta : r.lambda; };

  // Series in order of first appearance, points sorted by x.
  std::vector<std::pair<std::string, std::vector<const SweepRow*>>> series;
  for (const SweepRow& r : rows) {
    const std::string key = to_string(r.solver) + " group " + std::to_string(r.group);
    auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.first == key; });
    if (it == series.end()) {
      series.push_back({key, {}});
      it = series.end() - 1;
    }
    it->second.push_back(&r);
  }
  for (auto& s : series) {
    std::stable_sort(s.second.begin(), s.second.end(),
                     [&](const SweepRow* a, const SweepRow* b) { return xval(*a) < xval(*b); });
  }

  double xmin = xval(rows.front()), xmax = xmin;
  for (const SweepRow& r : rows) {
    xmin = std::min(xmin, xval(r));
    xmax = std::max(xmax, xval(r));
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  const double width = 720, height = 440, left = 70, right = 190, top = 30, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };
  static const char* const palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                        "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
     << "\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
  os << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    const double yv = t / 4.0;
    os << "<text x=\"" << fixed2(px(xv)) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
       << fixed2(xv) << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << fixed2(py(yv) + 4) << "\" text-anchor=\"end\">" << fixed2(yv)
       << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 18 << "\" text-anchor=\"middle\">"
     << (over_eta ? "eta (outlier probability)" : "lambda (edge density)") << "</text>\n";
  os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << top + ph / 2 << ")\">mean correlation (band: +-1 std)</text>\n";
  os << "</g>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % 8];
    const auto& pts = series[s].second;
    if (pts.size() == 1) {
      os << "<circle cx=\"" << fixed2(px(xval(*pts[0]))) << "\" cy=\"" << fixed2(py(pts[0]->mean_corr))
         << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    } else {
      os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (const SweepRow* r : pts) os << fixed2(px(xval(*r))) << ',' << fixed2(py(r->mean_corr + r->std_corr)) << ' ';
      for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
        os << fixed2(px(xval(**it))) << ',' << fixed2(py((*it)->mean_corr - (*it)->std_corr)) << ' ';
      }
      os << "\"/>\n";
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i) {
        os << (i ? " " : "") << fixed2(px(xval(*pts[i]))) << ',' << fixed2(py(pts[i]->mean_corr));
      }
      os << "\"/>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 35 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 40 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << series[s].first << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_plot(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  const std::string svg = render_plot(rows);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << svg;
}

}  // namespace ksync
