#pragma once

// Declarative experiment pipeline: data -> train -> evaluate -> summarize,
// plus the policy heatmap export.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dynalloc/analytics.hpp"
#include "dynalloc/market_data.hpp"
#include "dynalloc/objectives.hpp"
#include "dynalloc/policy_net.hpp"
#include "dynalloc/trainer.hpp"
#include "dynalloc/wealth_sim.hpp"

namespace dynalloc {

enum class DataSource { simulate, bootstrap, load };

struct DataConfig {
  DataSource source = DataSource::simulate;
  MarketModel model;  ///< simulate, and bootstrap without a history file
  std::size_t n_paths = 0;
  std::uint64_t seed = 1;

  // bootstrap
  std::filesystem::path history_csv;  ///< empty: synthetic history from `model`
  std::size_t synthetic_months = 1128;
  std::uint64_t history_seed = 1;
  std::string history_start_label = "1926-01";
  std::string window_from;  ///< inclusive "YYYY-MM", empty = first row
  std::string window_to;    ///< inclusive, empty = last row
  double expected_block_months = 6.0;

  // load
  std::filesystem::path paths_file;
};

struct HeatmapGrid {
  std::vector<double> t_values;
  std::vector<double> w_values;
};

struct ExperimentConfig {
  std::string name;
  DataConfig data;
  std::optional<DataConfig> test_data;
  InvestmentHorizon horizon;
  ObjectiveSpec objective;
  NetTopology net;
  std::uint64_t init_seed = 1;
  TrainConfig train;
  std::filesystem::path outputs = "out";
  std::size_t heatmap_t_points = 50;
  std::size_t heatmap_w_points = 50;
  std::optional<double> heatmap_w_max;

  void validate() const;
};

/// Parses the JSON experiment file. Relative paths resolve against
/// `base_dir`. Errors name the offending field, e.g. "horizon.w0".
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Restricts a history to the inclusive [from, to] label window.
HistoricalReturns history_window(const HistoricalReturns& hist, const std::string& from,
                                 const std::string& to);

ReturnPathSet build_paths(const DataConfig& data, const InvestmentHorizon& horizon);

struct EvaluationReport {
  std::vector<double> terminal_wealth;
  DistributionSummary summary;
  ObjectiveValue objective;
  CvarResult cvar;  ///< at the objective's alpha (5% unless MCV says otherwise)
};

EvaluationReport evaluate_policy(const PolicyNetwork& net, const InvestmentHorizon& horizon,
                                 const ReturnPathSet& paths, const ObjectiveSpec& spec,
                                 std::optional<double> xi);

struct ExperimentResult {
  TrainedPolicy trained;
  EvaluationReport train_report;
  std::optional<EvaluationReport> test_report;
};

/// Trains on `train_paths` and evaluates on both sets. No files written.
ExperimentResult train_and_evaluate(const ExperimentConfig& cfg, const ReturnPathSet& train_paths,
                                    const ReturnPathSet* test_paths, std::ostream* log = nullptr);

/// Writes policy.json, summary.json, summary.csv, terminal_wealth_{train,test}.csv,
/// training_log.csv, heatmap.csv and heatmap_<asset>.csv into cfg.outputs.
void write_experiment_artifacts(const ExperimentConfig& cfg, const ExperimentResult& result,
                                const std::vector<std::string>& asset_labels);

/// Full pipeline: build data, train, evaluate, write artifacts.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

struct PolicyHeatmap {
  std::vector<double> t_values;
  std::vector<double> w_values;
  std::size_t n_assets = 0;
  std::vector<double> weights;  ///< [asset][w index][t index]

  double at(std::size_t asset, std::size_t wi, std::size_t ti) const {
    return weights[(asset * w_values.size() + wi) * t_values.size() + ti];
  }
};

/// Uniform grid over [0, T] x [0, w_max]; w_max defaults to 4 gamma for
/// target objectives and 4 w0 otherwise.
HeatmapGrid default_heatmap_grid(const InvestmentHorizon& horizon, const ObjectiveSpec& spec,
                                 std::size_t n_t = 50, std::size_t n_w = 50,
                                 std::optional<double> w_max = std::nullopt);

PolicyHeatmap policy_heatmap(const PolicyNetwork& net, const HeatmapGrid& grid);

/// Long form: t,W,<label_1>,...,<label_N>.
std::string heatmap_long_csv(const PolicyHeatmap& map, const std::vector<std::string>& labels);
/// One asset as a matrix: first column W, header row t values.
std::string heatmap_matrix_csv(const PolicyHeatmap& map, std::size_t asset);
void write_heatmap_files(const std::filesystem::path& dir, const PolicyHeatmap& map,
                         const std::vector<std::string>& labels);

}  // namespace dynalloc
