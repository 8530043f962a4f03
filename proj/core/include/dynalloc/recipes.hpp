#pragma once

// Named end-to-end experiments. Each recipe has a JSON base config (shipped
// in recipes/ and compiled in) holding desk-scale sizes plus a "full" block
// with paper-scale sizes.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dynalloc/analytics.hpp"
#include "dynalloc/experiment.hpp"

namespace dynalloc {

struct RecipeOptions {
  bool full = false;
  std::optional<std::uint64_t> seed;      ///< shifts every data and training seed
  std::optional<std::filesystem::path> out_dir;
  std::optional<double> rho;              ///< overrides the scalarization where meaningful
  std::optional<std::size_t> max_steps;   ///< overrides every training run
  std::optional<std::size_t> n_paths;     ///< overrides the training set size
  bool write_artifacts = true;
  std::ostream* log = nullptr;
};

std::vector<std::string> recipe_names();
/// The compiled-in JSON text of a recipe.
std::string recipe_config_text(const std::string& name);
/// Parsed base experiment with the options applied (full scale, seed, ...).
ExperimentConfig recipe_experiment(const std::string& name, const RecipeOptions& opts);

struct DsqClosedFormReport {
  DistributionSummary nn;
  DistributionSummary closed_form;
  double gamma = 0.0;
  std::size_t nn_paths = 0;
  std::size_t closed_form_paths = 0;
  std::size_t closed_form_steps = 0;
  std::vector<TrainLogEntry> history;
};

struct McvReport {
  double rho = 0.0;
  double alpha = 0.05;
  double mean = 0.0;
  double cvar = 0.0;
  double value_function = 0.0;  ///< rho * mean + cvar
  double xi = 0.0;
  std::optional<double> test_mean;
  std::optional<double> test_cvar;
  std::vector<TrainLogEntry> history;
};

struct EmbeddingReport {
  double rho = 0.0;
  double gamma = 0.0;
  DistributionSummary mv_train, dsq_train;
  DistributionSummary mv_test, dsq_test;
  std::vector<TrainLogEntry> mv_history, dsq_history;
};

struct SemivarianceReport {
  double gamma_osq = 0.0;
  double rho_msv = 0.0;
  DistributionSummary osq;
  DistributionSummary msv;
  std::size_t rho_evaluations = 0;
  std::vector<TrainLogEntry> osq_history, msv_history;
};

DsqClosedFormReport run_dsq_closed_form(const RecipeOptions& opts);
McvReport run_mcv_ground_truth(const RecipeOptions& opts);
EmbeddingReport run_mv_dsq_embedding(const RecipeOptions& opts);
SemivarianceReport run_msemiv_vs_osq(const RecipeOptions& opts);

/// Runs a recipe by name and prints its comparison table to `out`.
void run_recipe(const std::string& name, const RecipeOptions& opts, std::ostream& out);

}  // namespace dynalloc
