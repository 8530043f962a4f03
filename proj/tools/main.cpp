// dynalloc command line: generate-data, train, evaluate, heatmap, recipe.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "dynalloc/error.hpp"
#include "dynalloc/experiment.hpp"
#include "dynalloc/parallel.hpp"
#include "dynalloc/recipes.hpp"
#include "dynalloc/serialization.hpp"

namespace fs = std::filesystem;
using namespace dynalloc;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Shift every data and training seed by this amount");
  cmd->add_option("--out", c.out, "Output directory (or file for generate-data)");
  cmd->add_option("--threads", c.threads, "Worker threads (results do not depend on it)");
  cmd->add_flag("--quiet", c.quiet, "Suppress progress output");
}

void apply_seed(ExperimentConfig& cfg, std::uint64_t s) {
  cfg.data.seed += s;
  cfg.data.history_seed += s;
  if (cfg.test_data) {
    cfg.test_data->seed += s;
    cfg.test_data->history_seed += s;
  }
  cfg.train.seed += s;
  cfg.init_seed += s;
}

ExperimentConfig load_config(const std::string& path, const Common& c) {
  auto cfg = load_experiment_config(path);
  if (c.seed) apply_seed(cfg, *c.seed);
  if (c.out) cfg.outputs = *c.out;
  return cfg;
}

void print_summary(const std::string& label, const EvaluationReport& r) {
  std::cout << label << ": mean " << r.summary.mean << ", stdev " << r.summary.stdev << ", p5 "
            << r.summary.percentile(5) << ", p50 " << r.summary.percentile(50) << ", p95 "
            << r.summary.percentile(95) << ", objective " << r.objective.value << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic portfolio optimization with a neural-network control"};
  app.require_subcommand(1);

  Common common;
  std::string config_path;
  std::string policy_path;
  bool test_block = false;
  std::optional<std::size_t> max_steps;
  std::size_t t_points = 50;
  std::size_t w_points = 50;
  std::optional<double> w_max;
  std::string recipe_name;
  bool full = false;
  bool dump_config = false;
  bool list = false;
  std::optional<double> rho;
  std::optional<std::size_t> n_paths;

  auto* gen = app.add_subcommand("generate-data", "Build a return path set and write the binary cache");
  gen->add_option("--config", config_path, "Experiment config (JSON)")->required();
  gen->add_flag("--test", test_block, "Use the test_data block instead of data");
  add_common(gen, common);

  auto* trn = app.add_subcommand("train", "Train a policy and write all artifacts");
  trn->add_option("--config", config_path, "Experiment config (JSON)")->required();
  trn->add_option("--max-steps", max_steps, "Override train.max_steps");
  add_common(trn, common);

  auto* evl = app.add_subcommand("evaluate", "Evaluate a stored policy on the config's data");
  evl->add_option("--config", config_path, "Experiment config (JSON)")->required();
  evl->add_option("--policy", policy_path, "policy.json")->required();
  add_common(evl, common);

  auto* hm = app.add_subcommand("heatmap", "Export policy weights on a (t, W) grid");
  hm->add_option("--config", config_path, "Experiment config (JSON)")->required();
  hm->add_option("--policy", policy_path, "policy.json")->required();
  hm->add_option("--t-points", t_points, "Grid points in time");
  hm->add_option("--w-points", w_points, "Grid points in wealth");
  hm->add_option("--w-max", w_max, "Upper wealth bound of the grid");
  add_common(hm, common);

  auto* rcp = app.add_subcommand("recipe", "Run a named experiment");
  rcp->add_option("name", recipe_name, "Recipe name");
  rcp->add_flag("--full", full, "Use paper-scale path counts and step budgets");
  rcp->add_option("--rho", rho, "Override the scalarization parameter");
  rcp->add_option("--max-steps", max_steps, "Override every training run's step budget");
  rcp->add_option("--n-paths", n_paths, "Override the training set size");
  rcp->add_flag("--dump-config", dump_config, "Print the recipe's base config and exit");
  rcp->add_flag("--list", list, "List recipe names and exit");
  add_common(rcp, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (common.threads) set_worker_count(*common.threads);
    std::ostream* log = common.quiet ? nullptr : &std::cerr;

    if (*gen) {
      auto cfg = load_config(config_path, Common{common.seed, std::nullopt, {}, false});
      if (test_block && !cfg.test_data) throw ValidationError("config has no test_data block");
      const auto& data = test_block ? *cfg.test_data : cfg.data;
      const auto paths = build_paths(data, cfg.horizon);
      const fs::path out = common.out ? fs::path(*common.out) : fs::path("paths.bin");
      save_paths(paths, out);
      std::cout << "wrote " << paths.n_paths() << " paths x " << paths.n_periods() << " periods x "
                << paths.n_assets() << " assets (" << to_string(paths.provenance()) << ") to "
                << out.string() << "\n";
    } else if (*trn) {
      auto cfg = load_config(config_path, common);
      if (max_steps) cfg.train.max_steps = *max_steps;
      const auto result = run_experiment(cfg, log);
      print_summary("train", result.train_report);
      if (result.test_report) print_summary("test", *result.test_report);
      if (result.trained.xi_star) std::cout << "xi " << *result.trained.xi_star << "\n";
      std::cout << "artifacts in " << cfg.outputs.string() << "\n";
    } else if (*evl) {
      auto cfg = load_config(config_path, common);
      const auto policy = load_policy(policy_path);
      const auto paths = build_paths(cfg.data, cfg.horizon);
      const auto train_rep = evaluate_policy(policy.net, cfg.horizon, paths, cfg.objective, policy.xi);
      print_summary("train", train_rep);
      std::vector<SummaryRow> rows{{"train", train_rep.summary}};
      write_terminal_wealth_csv(cfg.outputs / "terminal_wealth_train.csv", train_rep.terminal_wealth);
      if (cfg.test_data) {
        const auto test_paths = build_paths(*cfg.test_data, cfg.horizon);
        const auto test_rep = evaluate_policy(policy.net, cfg.horizon, test_paths, cfg.objective, policy.xi);
        print_summary("test", test_rep);
        rows.push_back({"test", test_rep.summary});
        write_terminal_wealth_csv(cfg.outputs / "terminal_wealth_test.csv", test_rep.terminal_wealth);
      }
      write_text_file(cfg.outputs / "summary.json", summary_json(rows));
      write_text_file(cfg.outputs / "summary.csv", summary_csv(rows));
    } else if (*hm) {
      auto cfg = load_config(config_path, common);
      const auto policy = load_policy(policy_path);
      const auto grid = default_heatmap_grid(cfg.horizon, cfg.objective, t_points, w_points,
                                             w_max ? w_max : cfg.heatmap_w_max);
      std::vector<std::string> labels = cfg.data.model.labels;
      write_heatmap_files(cfg.outputs, policy_heatmap(policy.net, grid), labels);
      std::cout << "heatmaps in " << cfg.outputs.string() << "\n";
    } else if (*rcp) {
      if (list) {
        for (const auto& n : recipe_names()) std::cout << n << "\n";
        return 0;
      }
      if (recipe_name.empty()) throw ValidationError("recipe name required (see --list)");
      if (dump_config) {
        std::cout << recipe_config_text(recipe_name);
        return 0;
      }
      RecipeOptions opts;
      opts.full = full;
      opts.seed = common.seed;
      if (common.out) opts.out_dir = fs::path(*common.out);
      opts.rho = rho;
      opts.max_steps = max_steps;
      opts.n_paths = n_paths;
      opts.log = log;
      run_recipe(recipe_name, opts, std::cout);
    }
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
