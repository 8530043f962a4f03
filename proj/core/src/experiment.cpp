#include "dynalloc/experiment.hpp"

#include <cctype>
#include <cmath>
#include <ostream>
#include <sstream>

#include "dynalloc/error.hpp"
#include "dynalloc/serialization.hpp"
#include "json_fields.hpp"

namespace dynalloc {

using detail::Fields;
using detail::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

DataSource parse_source(const Fields& f) {
  const std::string s = f.string("source");
  if (s == "simulate") return DataSource::simulate;
  if (s == "bootstrap") return DataSource::bootstrap;
  if (s == "load") return DataSource::load;
  Fields::fail(f.path() + ".source", "must be one of simulate, bootstrap, load");
}

MarketModel parse_model(const Fields& f, const std::filesystem::path& base) {
  const json& raw = f.raw("model");
  if (raw.is_string()) {
    const auto file = resolve(base, raw.get<std::string>());
    const json doc = detail::parse_json(read_text_file(file), file.string());
    return detail::model_from_fields(Fields(doc, f.path() + ".model"));
  }
  return detail::model_from_fields(f.object("model"));
}

DataConfig parse_data(const Fields& f, const std::filesystem::path& base, const DataConfig* inherit) {
  DataConfig d = inherit ? *inherit : DataConfig{};
  d.source = f.has("source") || !inherit ? parse_source(f) : inherit->source;
  d.n_paths = f.count("n_paths");
  d.seed = f.seed("seed");
  const bool need_model =
      d.source == DataSource::simulate ||
      (d.source == DataSource::bootstrap && !f.has("history") && (!inherit || inherit->history_csv.empty()));
  if (f.has("model")) {
    d.model = parse_model(f, base);
  } else if (need_model && !inherit) {
    parse_model(f, base);  // reports the missing field
  }
  if (d.source == DataSource::bootstrap) {
    if (f.has("history")) d.history_csv = resolve(base, f.string("history"));
    d.synthetic_months = f.count_or("synthetic_months", d.synthetic_months);
    d.history_seed = f.seed_or("history_seed", d.history_seed);
    d.history_start_label = f.string_or("history_start", d.history_start_label);
    if (auto w = f.optional_object("window")) {
      d.window_from = w->string_or("from", "");
      d.window_to = w->string_or("to", "");
    }
    d.expected_block_months = f.number_or("expected_block_months", d.expected_block_months);
    if (!(d.expected_block_months >= 1.0))
      Fields::fail(f.path() + ".expected_block_months", "must be >= 1");
  }
  if (d.source == DataSource::load) d.paths_file = resolve(base, f.string("paths_file"));
  if (d.n_paths < 1) Fields::fail(f.path() + ".n_paths", "must be >= 1");
  return d;
}

InvestmentHorizon parse_horizon(const Fields& f) {
  InvestmentHorizon h;
  h.T = f.number("T");
  h.n_rebalance = f.count("n_rebalance");
  h.w0 = f.number("w0");
  if (f.has("contributions")) {
    h.contributions = f.numbers("contributions");
  } else if (f.has("contribution")) {
    h.contributions.assign(h.n_rebalance, f.number("contribution"));
  }
  if (!(h.T > 0.0)) Fields::fail(f.path() + ".T", "must be > 0");
  if (h.n_rebalance < 1) Fields::fail(f.path() + ".n_rebalance", "must be >= 1");
  if (!(h.w0 > 0.0)) Fields::fail(f.path() + ".w0", "must be > 0");
  if (!h.contributions.empty() && h.contributions.size() != h.n_rebalance)
    Fields::fail(f.path() + ".contributions", "must have n_rebalance entries");
  h.validate();
  return h;
}

TrainConfig parse_train(const Fields& f) {
  TrainConfig t;
  t.max_steps = f.count("max_steps");
  t.batch_size = f.count("batch_size");
  if (auto a = f.optional_object("adam")) {
    t.adam.step_size = a->number_or("step_size", t.adam.step_size);
    t.adam.beta1 = a->number_or("beta1", t.adam.beta1);
    t.adam.beta2 = a->number_or("beta2", t.adam.beta2);
    t.adam.eps_hat = a->number_or("eps_hat", t.adam.eps_hat);
  }
  t.tail_average_start_fraction =
      f.number_or("tail_average_start_fraction", t.tail_average_start_fraction);
  t.seed = f.seed_or("seed", t.seed);
  t.log_every = f.count_or("log_every", t.log_every);
  t.grad_clip = f.number_or("grad_clip", 1e3);
  return t;
}

json summary_block(const EvaluationReport& r, const ObjectiveSpec& spec, std::size_t n) {
  json j;
  j["n_paths"] = n;
  j["objective_value"] = r.objective.value;
  j["mean"] = r.summary.mean;
  j["stdev"] = r.summary.stdev;
  json p = json::object();
  for (std::size_t i = 0; i < kSummaryPercentiles.size(); ++i)
    p["p" + std::to_string(kSummaryPercentiles[i])] = r.summary.percentiles[i];
  j["percentiles"] = p;
  const double alpha = spec.kind == ObjectiveKind::MCV ? spec.alpha : 0.05;
  j["cvar"] = {{"alpha", alpha}, {"cvar", r.cvar.cvar}, {"var", r.cvar.var}};
  if (spec.kind == ObjectiveKind::MCV) j["value_function"] = spec.rho * r.summary.mean + r.cvar.cvar;
  return j;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

std::string sanitize(const std::string& label) {
  std::string out;
  for (char c : label) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  horizon.validate();
  objective.validate();
  net.validate();
  if (data.source != DataSource::load) {
    train.validate(data.n_paths);
    if (data.model.n_assets() != net.n_assets && data.source == DataSource::simulate)
      throw ValidationError("config: net.n_assets does not match data.model");
  }
  if (!(heatmap_t_points >= 1 && heatmap_w_points >= 1))
    throw ValidationError("config: heatmap grid must be nonempty");
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json doc = detail::parse_json(text, "config");
  const Fields root(doc, "");
  ExperimentConfig cfg;
  cfg.name = root.string_or("name", "experiment");
  cfg.horizon = parse_horizon(root.object("horizon"));
  cfg.data = parse_data(root.object("data"), base_dir, nullptr);
  if (root.has("test_data")) cfg.test_data = parse_data(root.object("test_data"), base_dir, &cfg.data);
  cfg.objective = detail::objective_from_fields(root.object("objective"));

  const Fields net = root.object("net");
  cfg.net.n_features = 2;
  cfg.net.hidden_layers = net.count("hidden_layers");
  cfg.net.hidden_width = net.count("hidden_width");
  if (cfg.data.source != DataSource::load || net.has("n_assets"))
    cfg.net.n_assets = net.has("n_assets") ? net.count("n_assets") : cfg.data.model.n_assets();
  cfg.init_seed = net.seed_or("init_seed", cfg.init_seed);
  if (cfg.net.hidden_layers < 1) Fields::fail("net.hidden_layers", "must be >= 1");
  if (cfg.net.hidden_width < 1) Fields::fail("net.hidden_width", "must be >= 1");

  const Fields train = root.object("train");
  cfg.train = parse_train(train);
  if (cfg.train.batch_size < 1) Fields::fail("train.batch_size", "must be >= 1");
  if (cfg.data.source != DataSource::load && cfg.train.batch_size > cfg.data.n_paths)
    Fields::fail("train.batch_size", "must not exceed data.n_paths");

  if (root.has("outputs")) cfg.outputs = resolve(base_dir, root.string("outputs"));
  if (auto h = root.optional_object("heatmap")) {
    cfg.heatmap_t_points = h->count_or("t_points", cfg.heatmap_t_points);
    cfg.heatmap_w_points = h->count_or("w_points", cfg.heatmap_w_points);
    if (h->has("w_max")) cfg.heatmap_w_max = h->number("w_max");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text_file(path), path.parent_path());
}

HistoricalReturns history_window(const HistoricalReturns& hist, const std::string& from,
                                 const std::string& to) {
  HistoricalReturns out;
  out.asset_labels = hist.asset_labels;
  for (std::size_t m = 0; m < hist.n_months(); ++m) {
    const std::string& d = hist.dates[m];
    if (!from.empty() && d < from) continue;
    if (!to.empty() && d > to) continue;
    out.dates.push_back(d);
    const auto row = hist.row(m);
    out.monthly_gross_returns.insert(out.monthly_gross_returns.end(), row.begin(), row.end());
  }
  if (out.dates.empty()) throw ValidationError("history window [" + from + ", " + to + "] is empty");
  return out;
}

ReturnPathSet build_paths(const DataConfig& data, const InvestmentHorizon& horizon) {
  horizon.validate();
  switch (data.source) {
    case DataSource::simulate:
      return simulate_paths(data.model, data.n_paths, horizon.n_rebalance, horizon.dt(), data.seed);
    case DataSource::bootstrap: {
      const double months = horizon.dt() * 12.0;
      const double rounded = std::round(months);
      if (rounded < 1.0 || std::abs(months - rounded) > 1e-9)
        throw ValidationError("bootstrap needs a whole number of months per rebalancing period");
      HistoricalReturns hist =
          data.history_csv.empty()
              ? synthetic_history(data.model, data.synthetic_months, data.history_seed,
                                  data.history_start_label)
              : load_returns_csv(data.history_csv);
      if (!data.window_from.empty() || !data.window_to.empty())
        hist = history_window(hist, data.window_from, data.window_to);
      return stationary_block_bootstrap(hist, data.expected_block_months, data.n_paths,
                                        horizon.n_rebalance, static_cast<std::size_t>(rounded),
                                        data.seed);
    }
    case DataSource::load: {
      auto paths = load_paths(data.paths_file);
      if (paths.n_periods() != horizon.n_rebalance)
        throw ValidationError("loaded paths have a different number of periods than the horizon");
      if (data.n_paths < paths.n_paths()) {
        std::vector<std::size_t> first(data.n_paths);
        for (std::size_t i = 0; i < first.size(); ++i) first[i] = i;
        return paths.subset(first);
      }
      return paths;
    }
  }
  throw ValidationError("unknown data source");
}

EvaluationReport evaluate_policy(const PolicyNetwork& net, const InvestmentHorizon& horizon,
                                 const ReturnPathSet& paths, const ObjectiveSpec& spec,
                                 std::optional<double> xi) {
  EvaluationReport r;
  r.terminal_wealth = terminal_wealth(net, horizon, paths);
  r.summary = summarize(r.terminal_wealth);
  r.objective = evaluate(spec, r.terminal_wealth, xi.value_or(0.0));
  r.cvar = empirical_cvar(r.terminal_wealth, spec.kind == ObjectiveKind::MCV ? spec.alpha : 0.05);
  return r;
}

ExperimentResult train_and_evaluate(const ExperimentConfig& cfg, const ReturnPathSet& train_paths,
                                    const ReturnPathSet* test_paths, std::ostream* log) {
  if (train_paths.n_assets() != cfg.net.n_assets)
    throw ValidationError("config: net.n_assets does not match the data");
  const auto net0 =
      init_parameters(cfg.net, cfg.init_seed, FeatureScaling::for_horizon(cfg.horizon.T, cfg.horizon.w0));
  StepObserver observer;
  if (log && cfg.train.log_every > 0) {
    observer = [&](const StepInfo& s) {
      if (s.step % cfg.train.log_every == 0 || s.step + 1 == cfg.train.max_steps)
        *log << cfg.name << " step " << s.step << " objective " << s.batch_objective
             << " grad_norm " << s.grad_norm << "\n";
    };
  }
  ExperimentResult result{train(net0, cfg.horizon, train_paths, cfg.objective, cfg.train, observer), {}, {}};
  const auto& tp = result.trained;
  result.train_report = evaluate_policy(tp.net, cfg.horizon, train_paths, cfg.objective, tp.xi_star);
  if (test_paths)
    result.test_report = evaluate_policy(tp.net, cfg.horizon, *test_paths, cfg.objective, tp.xi_star);
  return result;
}

void write_experiment_artifacts(const ExperimentConfig& cfg, const ExperimentResult& result,
                                const std::vector<std::string>& asset_labels) {
  const auto& dir = cfg.outputs;
  std::filesystem::create_directories(dir);
  const auto& tp = result.trained;
  save_policy(dir / "policy.json", tp.net, tp.xi_star);

  json s;
  s["name"] = cfg.name;
  s["objective"] = json::parse(objective_to_json(cfg.objective));
  s["xi"] = tp.xi_star ? json(*tp.xi_star) : json(nullptr);
  s["train"] = summary_block(result.train_report, cfg.objective, result.train_report.terminal_wealth.size());
  if (result.test_report)
    s["test"] = summary_block(*result.test_report, cfg.objective, result.test_report->terminal_wealth.size());
  write_text_file(dir / "summary.json", s.dump(2) + "\n");

  std::vector<SummaryRow> rows{{"train", result.train_report.summary}};
  if (result.test_report) rows.push_back({"test", result.test_report->summary});
  write_text_file(dir / "summary.csv", summary_csv(rows));

  write_terminal_wealth_csv(dir / "terminal_wealth_train.csv", result.train_report.terminal_wealth);
  if (result.test_report)
    write_terminal_wealth_csv(dir / "terminal_wealth_test.csv", result.test_report->terminal_wealth);
  write_training_log_csv(dir / "training_log.csv", tp.history);

  const auto grid = default_heatmap_grid(cfg.horizon, cfg.objective, cfg.heatmap_t_points,
                                         cfg.heatmap_w_points, cfg.heatmap_w_max);
  write_heatmap_files(dir, policy_heatmap(tp.net, grid), asset_labels);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const auto train_paths = build_paths(cfg.data, cfg.horizon);
  cfg.train.validate(train_paths.n_paths());
  std::optional<ReturnPathSet> test_paths;
  if (cfg.test_data) test_paths = build_paths(*cfg.test_data, cfg.horizon);
  auto result = train_and_evaluate(cfg, train_paths, test_paths ? &*test_paths : nullptr, log);
  write_experiment_artifacts(cfg, result, train_paths.labels());
  return result;
}

HeatmapGrid default_heatmap_grid(const InvestmentHorizon& horizon, const ObjectiveSpec& spec,
                                 std::size_t n_t, std::size_t n_w, std::optional<double> w_max) {
  if (n_t < 1 || n_w < 1) throw ValidationError("heatmap grid must be nonempty");
  const bool target = spec.kind == ObjectiveKind::DSQ || spec.kind == ObjectiveKind::OSQ;
  const double hi = w_max.value_or(4.0 * (target ? spec.gamma : horizon.w0));
  return HeatmapGrid{linspace(0.0, horizon.T, n_t), linspace(0.0, hi, n_w)};
}

PolicyHeatmap policy_heatmap(const PolicyNetwork& net, const HeatmapGrid& grid) {
  if (grid.t_values.empty() || grid.w_values.empty())
    throw ValidationError("heatmap grid must be nonempty");
  PolicyHeatmap map{grid.t_values, grid.w_values, net.topology().n_assets, {}};
  const std::size_t nt = grid.t_values.size();
  const std::size_t nw = grid.w_values.size();
  map.weights.assign(map.n_assets * nw * nt, 0.0);
  std::vector<double> rec(net.activation_size());
  for (std::size_t wi = 0; wi < nw; ++wi) {
    for (std::size_t ti = 0; ti < nt; ++ti) {
      net.forward_into(grid.t_values[ti], grid.w_values[wi], rec);
      const double* p = rec.data() + rec.size() - map.n_assets;
      for (std::size_t a = 0; a < map.n_assets; ++a) map.weights[(a * nw + wi) * nt + ti] = p[a];
    }
  }
  return map;
}

std::string heatmap_long_csv(const PolicyHeatmap& map, const std::vector<std::string>& labels) {
  std::ostringstream os;
  os << "t,W";
  for (std::size_t a = 0; a < map.n_assets; ++a)
    os << "," << (a < labels.size() ? labels[a] : "asset" + std::to_string(a + 1));
  os << "\n";
  for (std::size_t wi = 0; wi < map.w_values.size(); ++wi) {
    for (std::size_t ti = 0; ti < map.t_values.size(); ++ti) {
      os << format_double(map.t_values[ti]) << "," << format_double(map.w_values[wi]);
      for (std::size_t a = 0; a < map.n_assets; ++a) os << "," << format_double(map.at(a, wi, ti));
      os << "\n";
    }
  }
  return os.str();
}

std::string heatmap_matrix_csv(const PolicyHeatmap& map, std::size_t asset) {
  std::ostringstream os;
  os << "W\\t";
  for (double t : map.t_values) os << "," << format_double(t);
  os << "\n";
  for (std::size_t wi = 0; wi < map.w_values.size(); ++wi) {
    os << format_double(map.w_values[wi]);
    for (std::size_t ti = 0; ti < map.t_values.size(); ++ti) os << "," << format_double(map.at(asset, wi, ti));
    os << "\n";
  }
  return os.str();
}

void write_heatmap_files(const std::filesystem::path& dir, const PolicyHeatmap& map,
                         const std::vector<std::string>& labels) {
  write_text_file(dir / "heatmap.csv", heatmap_long_csv(map, labels));
  for (std::size_t a = 0; a < map.n_assets; ++a) {
    const std::string label = a < labels.size() ? labels[a] : "asset" + std::to_string(a + 1);
    write_text_file(dir / ("heatmap_" + sanitize(label) + ".csv"), heatmap_matrix_csv(map, a));
  }
}

}  // namespace dynalloc
