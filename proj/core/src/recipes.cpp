#include "dynalloc/recipes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "dynalloc/error.hpp"
#include "dynalloc/serialization.hpp"
#include "json_fields.hpp"

namespace dynalloc {

namespace detail {
struct EmbeddedRecipe {
  const char* name;
  const char* text;
};
extern const EmbeddedRecipe kEmbeddedRecipes[];
extern const std::size_t kEmbeddedRecipeCount;
}  // namespace detail

using detail::json;

namespace {

json recipe_doc(const std::string& name) {
  return detail::parse_json(recipe_config_text(name), "recipe " + name);
}

double recipe_number(const json& doc, bool full, const char* key, double fallback) {
  if (full && doc.contains("full") && doc["full"].contains(key)) return doc["full"][key].get<double>();
  if (doc.contains("recipe") && doc["recipe"].contains(key)) return doc["recipe"][key].get<double>();
  return fallback;
}

std::uint64_t seed_shift(const RecipeOptions& opts) { return opts.seed.value_or(0); }

std::filesystem::path sub_dir(const ExperimentConfig& cfg, const char* leaf) { return cfg.outputs / leaf; }

std::string fmt(double x, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

void percentile_line(std::ostream& out, const std::string& label, double mean,
                     std::initializer_list<double> pct) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-26s %9s", label.c_str(), fmt(mean).c_str());
  out << buf;
  for (double p : pct) {
    std::snprintf(buf, sizeof buf, " %9s", fmt(p).c_str());
    out << buf;
  }
  out << "\n";
}

void summary_line(std::ostream& out, const std::string& label, const DistributionSummary& s) {
  percentile_line(out, label, s.mean,
                  {s.percentile(5), s.percentile(20), s.percentile(50), s.percentile(80), s.percentile(95)});
}

}  // namespace

std::vector<std::string> recipe_names() {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < detail::kEmbeddedRecipeCount; ++i)
    names.emplace_back(detail::kEmbeddedRecipes[i].name);
  return names;
}

std::string recipe_config_text(const std::string& name) {
  for (std::size_t i = 0; i < detail::kEmbeddedRecipeCount; ++i) {
    if (name == detail::kEmbeddedRecipes[i].name) return detail::kEmbeddedRecipes[i].text;
  }
  std::string known;
  for (const auto& n : recipe_names()) known += (known.empty() ? "" : ", ") + n;
  throw ValidationError("unknown recipe '" + name + "' (known: " + known + ")");
}

ExperimentConfig recipe_experiment(const std::string& name, const RecipeOptions& opts) {
  const json doc = recipe_doc(name);
  ExperimentConfig cfg = parse_experiment_config(recipe_config_text(name));
  if (opts.full) {
    cfg.data.n_paths = static_cast<std::size_t>(recipe_number(doc, true, "n_paths", double(cfg.data.n_paths)));
    cfg.train.max_steps =
        static_cast<std::size_t>(recipe_number(doc, true, "max_steps", double(cfg.train.max_steps)));
    if (cfg.test_data)
      cfg.test_data->n_paths =
          static_cast<std::size_t>(recipe_number(doc, true, "test_n_paths", double(cfg.test_data->n_paths)));
  }
  if (opts.n_paths) cfg.data.n_paths = *opts.n_paths;
  if (opts.max_steps) cfg.train.max_steps = *opts.max_steps;
  if (const auto s = seed_shift(opts)) {
    cfg.data.seed += s;
    cfg.data.history_seed += s;
    if (cfg.test_data) {
      cfg.test_data->seed += s;
      cfg.test_data->history_seed += s;
    }
    cfg.train.seed += s;
    cfg.init_seed += s;
  }
  if (opts.out_dir) cfg.outputs = *opts.out_dir;
  if (opts.rho && cfg.objective.kind != ObjectiveKind::DSQ && cfg.objective.kind != ObjectiveKind::OSQ)
    cfg.objective.rho = *opts.rho;
  cfg.train.batch_size = std::min(cfg.train.batch_size, cfg.data.n_paths);
  cfg.validate();
  return cfg;
}

DsqClosedFormReport run_dsq_closed_form(const RecipeOptions& opts) {
  const std::string name = "dsq-closed-form";
  const json doc = recipe_doc(name);
  const ExperimentConfig cfg = recipe_experiment(name, opts);
  DsqClosedFormReport rep;
  rep.gamma = cfg.objective.gamma;
  {
    const auto paths = build_paths(cfg.data, cfg.horizon);
    auto result = train_and_evaluate(cfg, paths, nullptr, opts.log);
    if (opts.write_artifacts) write_experiment_artifacts(cfg, result, paths.labels());
    rep.nn = result.train_report.summary;
    rep.nn_paths = paths.n_paths();
    rep.history = result.trained.history;
  }
  rep.closed_form_steps = static_cast<std::size_t>(recipe_number(doc, opts.full, "closed_form_steps", 720));
  rep.closed_form_paths = static_cast<std::size_t>(recipe_number(doc, opts.full, "closed_form_paths", 1e5));
  const auto cf_seed = static_cast<std::uint64_t>(recipe_number(doc, false, "closed_form_seed", 202)) + seed_shift(opts);
  const auto params = ClosedFormDsqParams::from_model(cfg.data.model, cfg.objective.gamma, cfg.horizon.T, cfg.horizon.w0);
  const auto cf = simulate_closed_form_dsq(params, cfg.data.model, rep.closed_form_paths, rep.closed_form_steps, cf_seed);
  rep.closed_form = summarize(cf);
  if (opts.write_artifacts) {
    write_terminal_wealth_csv(cfg.outputs / "terminal_wealth_closed_form.csv", cf);
    const std::vector<SummaryRow> rows{{"closed_form", rep.closed_form}, {"nn", rep.nn}};
    write_text_file(cfg.outputs / "comparison.csv", summary_csv(rows));
  }
  return rep;
}

McvReport run_mcv_ground_truth(const RecipeOptions& opts) {
  const ExperimentConfig cfg = recipe_experiment("mcv-ground-truth", opts);
  const auto paths = build_paths(cfg.data, cfg.horizon);
  std::optional<ReturnPathSet> test;
  if (cfg.test_data) test = build_paths(*cfg.test_data, cfg.horizon);
  auto result = train_and_evaluate(cfg, paths, test ? &*test : nullptr, opts.log);
  if (opts.write_artifacts) write_experiment_artifacts(cfg, result, paths.labels());
  McvReport rep;
  rep.rho = cfg.objective.rho;
  rep.alpha = cfg.objective.alpha;
  rep.mean = result.train_report.summary.mean;
  rep.cvar = result.train_report.cvar.cvar;
  rep.value_function = rep.rho * rep.mean + rep.cvar;
  rep.xi = result.trained.xi_star.value_or(0.0);
  if (result.test_report) {
    rep.test_mean = result.test_report->summary.mean;
    rep.test_cvar = result.test_report->cvar.cvar;
  }
  rep.history = result.trained.history;
  return rep;
}

EmbeddingReport run_mv_dsq_embedding(const RecipeOptions& opts) {
  const ExperimentConfig mv_cfg = recipe_experiment("mv-dsq-embedding", opts);
  if (!mv_cfg.test_data) throw ValidationError("mv-dsq-embedding needs test_data");
  const auto paths = build_paths(mv_cfg.data, mv_cfg.horizon);
  const auto test = build_paths(*mv_cfg.test_data, mv_cfg.horizon);

  EmbeddingReport rep;
  rep.rho = mv_cfg.objective.rho;
  ExperimentConfig mv_run = mv_cfg;
  mv_run.name = mv_cfg.name + "-mv";
  mv_run.outputs = sub_dir(mv_cfg, "mv");
  const auto mv = train_and_evaluate(mv_run, paths, &test, opts.log);
  if (opts.write_artifacts) write_experiment_artifacts(mv_run, mv, paths.labels());

  rep.gamma = embedding_gamma(rep.rho, mv.train_report.summary.mean);
  ExperimentConfig dsq_run = mv_cfg;
  dsq_run.name = mv_cfg.name + "-dsq";
  dsq_run.objective = ObjectiveSpec::dsq(rep.gamma);
  dsq_run.outputs = sub_dir(mv_cfg, "dsq");
  const auto dsq = train_and_evaluate(dsq_run, paths, &test, opts.log);
  if (opts.write_artifacts) write_experiment_artifacts(dsq_run, dsq, paths.labels());

  rep.mv_train = mv.train_report.summary;
  rep.dsq_train = dsq.train_report.summary;
  rep.mv_test = mv.test_report->summary;
  rep.dsq_test = dsq.test_report->summary;
  rep.mv_history = mv.trained.history;
  rep.dsq_history = dsq.trained.history;
  if (opts.write_artifacts) {
    const std::vector<SummaryRow> rows{{"mv_train", rep.mv_train},
                                       {"dsq_train", rep.dsq_train},
                                       {"mv_test", rep.mv_test},
                                       {"dsq_test", rep.dsq_test}};
    write_text_file(mv_cfg.outputs / "comparison.csv", summary_csv(rows));
  }
  return rep;
}

SemivarianceReport run_msemiv_vs_osq(const RecipeOptions& opts) {
  const std::string name = "msemiv-vs-osq";
  const json doc = recipe_doc(name);
  RecipeOptions base_opts = opts;
  base_opts.rho.reset();
  const ExperimentConfig osq_cfg = recipe_experiment(name, base_opts);
  const auto paths = build_paths(osq_cfg.data, osq_cfg.horizon);

  SemivarianceReport rep;
  rep.gamma_osq = osq_cfg.objective.gamma;
  ExperimentConfig osq_run = osq_cfg;
  osq_run.name = osq_cfg.name + "-osq";
  osq_run.outputs = sub_dir(osq_cfg, "osq");
  const auto osq = train_and_evaluate(osq_run, paths, nullptr, opts.log);
  if (opts.write_artifacts) write_experiment_artifacts(osq_run, osq, paths.labels());
  rep.osq = osq.train_report.summary;
  rep.osq_history = osq.trained.history;
  const double target = rep.osq.mean;

  ExperimentConfig msv_run = osq_cfg;
  msv_run.name = osq_cfg.name + "-msemiv";
  msv_run.outputs = sub_dir(osq_cfg, "msemiv");
  auto train_msv = [&](double rho) {
    msv_run.objective = ObjectiveSpec::msemiv(rho);
    ++rep.rho_evaluations;
    return train_and_evaluate(msv_run, paths, nullptr, opts.log);
  };

  std::optional<ExperimentResult> best;
  double best_rho = 0.0;
  double best_gap = INFINITY;
  auto consider = [&](double rho, ExperimentResult&& r) {
    const double gap = r.train_report.summary.mean - target;
    if (std::abs(gap) < std::abs(best_gap)) {
      best_gap = gap;
      best_rho = rho;
      best = std::move(r);
    }
    return gap;
  };

  if (opts.rho) {
    consider(*opts.rho, train_msv(*opts.rho));
  } else {
    // Mean terminal wealth decreases in rho; regula falsi (Illinois) on log rho.
    const double tol = recipe_number(doc, false, "mean_rel_tol", 0.005) * std::abs(target);
    const auto max_evals = static_cast<std::size_t>(recipe_number(doc, false, "max_evaluations", 10));
    double a = std::log(recipe_number(doc, false, "rho_low", 1e-4));
    double b = std::log(recipe_number(doc, false, "rho_high", 0.1));
    double fa = consider(std::exp(a), train_msv(std::exp(a)));
    double fb = consider(std::exp(b), train_msv(std::exp(b)));
    if (fa < 0.0 || fb > 0.0)
      throw NumericalError("msemiv-vs-osq: OSQ mean is outside the bracketed MSemiV means");
    int side = 0;
    while (std::abs(best_gap) > tol && rep.rho_evaluations < max_evals) {
      const double c = (a * fb - b * fa) / (fb - fa);
      const double fc = consider(std::exp(c), train_msv(std::exp(c)));
      if (fc > 0.0) {
        a = c;
        fa = fc;
        if (side == 1) fb *= 0.5;
        side = 1;
      } else {
        b = c;
        fb = fc;
        if (side == -1) fa *= 0.5;
        side = -1;
      }
    }
  }
  rep.rho_msv = best_rho;
  rep.msv = best->train_report.summary;
  rep.msv_history = best->trained.history;
  msv_run.objective = ObjectiveSpec::msemiv(best_rho);
  if (opts.write_artifacts) {
    write_experiment_artifacts(msv_run, *best, paths.labels());
    const std::vector<SummaryRow> rows{{"osq", rep.osq}, {"msemiv", rep.msv}};
    write_text_file(osq_cfg.outputs / "comparison.csv", summary_csv(rows));
  }
  return rep;
}

void run_recipe(const std::string& name, const RecipeOptions& opts, std::ostream& out) {
  const char* header = "                              mean        p5       p20       p50       p80       p95\n";
  if (name == "dsq-closed-form") {
    const auto r = run_dsq_closed_form(opts);
    out << "DSQ(gamma=" << fmt(r.gamma) << ") terminal wealth, NN on " << r.nn_paths
        << " paths, closed form on " << r.closed_form_paths << " paths x " << r.closed_form_steps << " steps\n"
        << header;
    summary_line(out, "closed form", r.closed_form);
    percentile_line(out, "closed form (reference)", 105.0, {86.81, 98.02, 106.35, 112.82, 118.15});
    summary_line(out, "NN, N_rb=4", r.nn);
    percentile_line(out, "NN (reference)", 105.0, {86.62, 97.30, 105.67, 112.54, 118.85});
  } else if (name == "mcv-ground-truth") {
    const auto r = run_mcv_ground_truth(opts);
    struct Ref {
      double rho, cvar, mean, value;
    };
    const Ref refs[] = {{0.10, 940.55, 1062.97, 1046.85},
                        {0.25, 937.39, 1081.99, 1207.88},
                        {1.00, 690.11, 1444.16, 2134.27},
                        {1.50, 611.65, 1510.07, 2876.76}};
    out << "MCV(rho=" << fmt(r.rho, 3) << ", alpha=" << fmt(r.alpha, 3) << ")\n"
        << "                          CVaR       mean  value function        xi\n";
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-20s %9s %10s %15s %9s\n", "NN (train)", fmt(r.cvar).c_str(),
                  fmt(r.mean).c_str(), fmt(r.value_function).c_str(), fmt(r.xi).c_str());
    out << buf;
    if (r.test_mean) {
      std::snprintf(buf, sizeof buf, "%-20s %9s %10s %15s\n", "NN (test)", fmt(*r.test_cvar).c_str(),
                    fmt(*r.test_mean).c_str(), fmt(r.rho * *r.test_mean + *r.test_cvar).c_str());
      out << buf;
    }
    for (const auto& ref : refs) {
      if (std::abs(ref.rho - r.rho) > 1e-9) continue;
      std::snprintf(buf, sizeof buf, "%-20s %9s %10s %15s\n", "NN (reference)", fmt(ref.cvar).c_str(),
                    fmt(ref.mean).c_str(), fmt(ref.value).c_str());
      out << buf;
    }
  } else if (name == "mv-dsq-embedding") {
    const auto r = run_mv_dsq_embedding(opts);
    out << "MV(rho=" << fmt(r.rho, 4) << ") vs DSQ(gamma=" << fmt(r.gamma, 3) << ")\n"
        << header;
    summary_line(out, "MV train", r.mv_train);
    summary_line(out, "DSQ train", r.dsq_train);
    summary_line(out, "MV test", r.mv_test);
    summary_line(out, "DSQ test", r.dsq_test);
    out << "stdev: MV train " << fmt(r.mv_train.stdev) << ", DSQ train " << fmt(r.dsq_train.stdev)
        << ", MV test " << fmt(r.mv_test.stdev) << ", DSQ test " << fmt(r.dsq_test.stdev) << "\n";
  } else if (name == "msemiv-vs-osq") {
    const auto r = run_msemiv_vs_osq(opts);
    out << "OSQ(gamma=" << fmt(r.gamma_osq) << ") vs MSemiV(rho=" << fmt(r.rho_msv, 6) << "), "
        << r.rho_evaluations << " MSemiV trainings\n"
        << header;
    summary_line(out, "OSQ", r.osq);
    summary_line(out, "MSemiV", r.msv);
  } else {
    recipe_config_text(name);  // throws with the list of known recipes
  }
}

}  // namespace dynalloc
