// Experiment configuration, Monte-Carlo sweeps, CSV and SVG emission.
#pragma once

#include "ksync/core.hpp"
#include "ksync/disentangle.hpp"
#include "ksync/genmodel.hpp"
#include "ksync/grp.hpp"
#include "ksync/sync.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksync {

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { Setup1, Setup2, Compare, Simulate, Disentangle, Grp, Theory };

std::string to_string(Mode m);
Mode parse_mode(const std::string& name);

enum class GraphModel { ErdosRenyi, BarabasiAlbert };

struct GrpSettings {
  int n = 100;
  CloudGenerator generator = CloudGenerator::Grid;
  Eigen::Matrix2d shear = (Eigen::Matrix2d() << 1.0, 0.3, 0.0, 1.0).finished();
  double region_rotation = 0.3;
  PatchParams patches{5.0, 3, 0.0, 0.6, 0.35, 0};
  std::vector<double> bad_fractions{0.3, 0.3};
};

struct ExperimentConfig {
  Mode mode = Mode::Setup1;
  Mode grid = Mode::Setup1;  // sweep layout used by compare mode
  int n = 500;
  int k = 2;
  // Setup I: explicit p, eta (defaults to 1 - sum p), lambda grid.
  std::vector<double> p{0.3, 0.2};
  std::optional<double> eta;
  std::vector<double> lambda_grid{0.2, 0.4, 0.6, 0.8, 1.0};
  // Setup II: gap, eta grid, fixed lambda.
  double gamma = 0.05;
  std::vector<double> eta_grid{0.3, 0.5};
  double lambda = 0.4;

  int trials_angles = 5;
  int trials_graphs = 5;
  std::vector<Solver> solvers{Solver::EigH};
  Matching matching = Matching::ByIndex;
  GraphModel graph = GraphModel::ErdosRenyi;
  int ba_m = 10;
  SdpBmConfig sdp;

  // Disentangle mode.
  int M = 20;
  std::string bad_fractions_rule = "model";  // "model", "literal" or "explicit"
  std::vector<double> bad_fractions;
  std::optional<std::string> graph_file;

  // Theory mode.
  double delta = 0.1;
  double mu = 0.25;
  double epsilon = 0.5;

  GrpSettings grp;

  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;

  /// Lists every problem before failing; throws ConfigError.
  void validate() const;
  /// Eta of Setup I (explicit, or 1 - sum p).
  double setup1_eta() const;
};

/// Parses a JSON document into a config; unknown keys are rejected. Throws ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Arithmetic sequence with mean (1 - eta) / k and step gamma, descending.
/// Throws std::invalid_argument when the smallest entry is not positive.
std::vector<double> derive_setup2_probs(int k, double eta, double gamma);

struct SweepRow {
  std::string mode;
  Solver solver = Solver::EigH;
  int n = 0;
  int k = 0;
  double lambda = 0.0;
  double eta = 0.0;
  std::optional<double> gamma;
  int group = 1;  // 1-based
  double mean_corr = 0.0;
  double std_corr = 0.0;
  int trials = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> meta;  // diagnostics, one "key: value" line each
};

/// Monte-Carlo sweep over the configured grid. Rows are ordered by grid point, then
/// solver (as configured), then group, independent of the thread count.
SweepResult run_sweep(const ExperimentConfig& cfg);

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
void write_meta(const std::filesystem::path& path, const std::vector<std::string>& meta);

/// SVG line chart: one polyline per (solver, group) over the swept variable with a
/// +-1 std band. Throws std::invalid_argument on empty rows or mixed modes.
std::string render_plot(const std::vector<SweepRow>& rows);
void emit_plot(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

/// Seeds used by the sweep: angles depend on (seed, outer trial) only, graphs on
/// (seed, grid point, outer trial, inner trial).
std::uint64_t angle_seed(std::uint64_t seed, int outer);
std::uint64_t graph_seed(std::uint64_t seed, int grid_point, int outer, int inner);

// Mode runners. Each writes its artifacts next to `cfg.out` and returns the paths written.

/// One planted instance solved by every configured solver: CSV solver,group,correlation
/// plus the sampled graph in "<out>.graph.txt".
std::vector<std::filesystem::path> run_simulate(const ExperimentConfig& cfg);
/// run_sweep followed by the CSV, "<out>.meta" and an SVG plot with the CSV's stem.
std::vector<std::filesystem::path> run_sweep_to_files(const ExperimentConfig& cfg);

struct DisentangleRun {
  std::vector<DisentangleState> states;
  MeasurementGraph graph;
  std::optional<AngleGroups> truth;
};

/// Samples (or reads) the graph, synchronizes it with solvers[0] and iterates the
/// disentangling procedure for M rounds.
DisentangleRun run_disentangle(const ExperimentConfig& cfg);
/// Per-iteration CSV plus the final subgraphs "<stem>_G1.txt" .. "<stem>_W.txt".
std::vector<std::filesystem::path> run_disentangle_to_files(const ExperimentConfig& cfg);

struct GrpRun {
  PointCloudPair clouds;
  PatchSet patches;
  MeasurementGraph graph;
  AsapResult result;
  double error_x = 0.0;
  double error_y = 0.0;
};

GrpRun run_grp(const ExperimentConfig& cfg);
/// "<stem>_X.csv", "_Y.csv", "_Xhat.csv", "_Yhat.csv" and a one-row summary CSV at out.
std::vector<std::filesystem::path> run_grp_to_files(const ExperimentConfig& cfg);

nlohmann::json theory_to_json(const TheoryReport& report);
/// TheoryReport for (n, k, lambda, p, delta, mu, epsilon), written as JSON to out.
nlohmann::json run_theory(const ExperimentConfig& cfg);

}  // namespace ksync
