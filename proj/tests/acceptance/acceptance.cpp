// Acceptance runner. Prints one [PASS]/[FAIL] line per criterion.
//   acceptance            run every criterion
//   acceptance 2 4        run the listed criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dynalloc/analytics.hpp"
#include "dynalloc/experiment.hpp"
#include "dynalloc/objectives.hpp"
#include "dynalloc/recipes.hpp"
#include "dynalloc/serialization.hpp"
#include "dynalloc/trainer.hpp"
#include "support/oracles.hpp"

using namespace dynalloc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string within(const std::string& label, double got, double ref, double tol) {
  std::ostringstream os;
  os << label << " " << fmt("%.4f", got) << " vs " << fmt("%.4f", ref) << " (tol " << fmt("%g", tol) << ")";
  return os.str();
}

std::string relative(const std::string& label, double got, double ref, double tol) {
  std::ostringstream os;
  os << label << " " << fmt("%.4f", got) << " vs " << fmt("%.4f", ref) << " rel "
     << fmt("%.3e", std::abs(got / ref - 1.0)) << " (tol " << fmt("%g", tol) << ")";
  return os.str();
}

// Median of logged batch objectives over the last 10% of steps vs the first 10%.
void monotone_trend(Outcome& o, const std::string& label, const std::vector<TrainLogEntry>& history) {
  if (history.empty()) {
    o.check(false, label + ": no training history");
    return;
  }
  const double steps = static_cast<double>(history.back().step + 1);
  std::vector<double> head, tail;
  for (const auto& e : history) {
    if (static_cast<double>(e.step) < 0.1 * steps) head.push_back(e.batch_objective);
    if (static_cast<double>(e.step) >= 0.9 * steps) tail.push_back(e.batch_objective);
  }
  const bool ok = !head.empty() && !tail.empty() && oracle::sorted_median(tail) <= oracle::sorted_median(head);
  o.check(ok, label + ": batch objective median, last 10% " +
                  fmt("%.6g", tail.empty() ? NAN : oracle::sorted_median(tail)) + " <= first 10% " +
                  fmt("%.6g", head.empty() ? NAN : oracle::sorted_median(head)));
}

// ---------------------------------------------------------------------------
// 1. gradients vs central differences

Outcome gradient_suite() {
  Outcome o;
  auto rng = Xoshiro256::stream(20240601, 0);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
  };
  const ObjectiveKind kinds[] = {ObjectiveKind::DSQ, ObjectiveKind::OSQ, ObjectiveKind::MV, ObjectiveKind::MCV,
                                 ObjectiveKind::MSemiV};
  double worst_net = 0.0, worst_bptt = 0.0, worst_xi = 0.0;
  for (int cfg_i = 0; cfg_i < 100; ++cfg_i) {
    const NetTopology topo{2, pick(1, 2), pick(1, 8), pick(2, 5)};
    const std::size_t n_rb = pick(1, 8);
    const std::size_t batch = pick(1, 64);
    const double T = 0.25 * static_cast<double>(n_rb);
    const double w0 = 100.0;
    InvestmentHorizon h{T, n_rb, w0, {}};
    if (cfg_i % 3 == 0) h.contributions.assign(n_rb, 5.0);
    const auto scaling = FeatureScaling::for_horizon(T, w0);
    std::vector<double> theta0(topo.parameter_count());
    for (auto& v : theta0) v = 2.0 * rng.uniform() - 1.0;

    std::normal_distribution<double> z;
    std::vector<double> y(batch * n_rb * topo.n_assets);
    for (auto& v : y) v = std::exp(0.02 + 0.15 * z(rng));
    const ReturnPathSet paths(batch, n_rb, topo.n_assets, T / static_cast<double>(n_rb),
                              std::vector<std::string>(topo.n_assets, "x"), Provenance::loaded, y);
    std::vector<std::size_t> idx(batch);
    for (std::size_t j = 0; j < batch; ++j) idx[j] = j;

    // Single-network backward().
    {
      PolicyNetwork net(topo, scaling, theta0);
      std::vector<double> c(topo.n_assets);
      for (auto& v : c) v = 2.0 * rng.uniform() - 1.0;
      const double t = rng.uniform() * T, w = 50.0 + 100.0 * rng.uniform();
      const auto bwd = net.backward(net.forward(t, w).cache, c);
      auto f = [&](const std::vector<double>& x) {
        PolicyNetwork n2(topo, scaling, {x.begin(), x.end() - 1});
        const auto p = n2.forward(t, x.back()).weights;
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += c[i] * p[i];
        return s;
      };
      std::vector<double> x = theta0;
      x.push_back(w);
      std::vector<double> ad = bwd.d_theta.d_theta, fd(x.size());
      ad.push_back(bwd.d_wealth);
      for (std::size_t i = 0; i < x.size(); ++i)
        fd[i] = oracle::central_difference(f, x, i, i + 1 == x.size() ? 1e-4 : 1e-6);
      worst_net = std::max(worst_net, oracle::normwise_relative_error(ad, fd));
    }

    // Wealth recursion + objective + xi.
    const ObjectiveKind kind = kinds[cfg_i % 5];
    PolicyNetwork net(topo, scaling, theta0);
    const auto w_init = terminal_wealth(net, h, paths);
    const double mean_w = std::accumulate(w_init.begin(), w_init.end(), 0.0) / static_cast<double>(batch);
    ObjectiveSpec spec;
    switch (kind) {
      case ObjectiveKind::DSQ: spec = ObjectiveSpec::dsq(1.2 * mean_w); break;
      case ObjectiveKind::OSQ: spec = ObjectiveSpec::osq(1.1 * mean_w, 1e-3); break;
      case ObjectiveKind::MV: spec = ObjectiveSpec::mv(1.0 / mean_w); break;
      case ObjectiveKind::MCV: spec = ObjectiveSpec::mcv(1.0, 0.1, 1e-3); break;
      case ObjectiveKind::MSemiV: spec = ObjectiveSpec::msemiv(1.0 / mean_w); break;
    }
    const double xi0 = kind == ObjectiveKind::MCV ? oracle::sorted_median(w_init) + 0.37 : 0.0;
    const auto bg = batch_gradient(net, h, paths, idx, spec, xi0);
    auto f = [&](const std::vector<double>& x) {
      PolicyNetwork n2(topo, scaling, {x.begin(), x.begin() + static_cast<std::ptrdiff_t>(theta0.size())});
      const auto w = terminal_wealth(n2, h, paths);
      return evaluate(spec, w, spec.has_xi() ? x.back() : 0.0).value;
    };
    std::vector<double> x = theta0;
    if (spec.has_xi()) x.push_back(xi0);
    std::vector<double> fd(theta0.size());
    for (std::size_t i = 0; i < theta0.size(); ++i) fd[i] = oracle::central_difference(f, x, i, 1e-6);
    worst_bptt = std::max(worst_bptt, oracle::normwise_relative_error(bg.d_theta, fd));
    if (spec.has_xi()) {
      const double fd_xi = oracle::central_difference(f, x, theta0.size(), 1e-5);
      worst_xi = std::max(worst_xi, std::abs(bg.d_xi - fd_xi) / std::max(std::abs(fd_xi), 1e-12));
    }
  }
  o.check(worst_net <= 1e-5, "backward(): worst normwise relative error " + fmt("%.3e", worst_net));
  o.check(worst_bptt <= 1e-5, "BPTT, five objectives: worst normwise relative error " + fmt("%.3e", worst_bptt));
  o.check(worst_xi <= 1e-5, "MCV xi-gradient: worst relative error " + fmt("%.3e", worst_xi));
  return o;
}

// ---------------------------------------------------------------------------
// 2. DSQ ground truth

Outcome dsq_ground_truth() {
  Outcome o;
  RecipeOptions opts;
  opts.write_artifacts = false;
  const auto r = run_dsq_closed_form(opts);
  const int probes[] = {5, 20, 50, 80, 95};
  const double nn_ref[] = {86.62, 97.30, 105.67, 112.54, 118.85};
  const double cf_ref[] = {86.81, 98.02, 106.35, 112.82, 118.15};
  o.check(r.nn_paths == 250000, "training paths " + std::to_string(r.nn_paths));
  o.check(r.closed_form_paths == 100000 && r.closed_form_steps == 720,
          "closed form " + std::to_string(r.closed_form_paths) + " paths x " + std::to_string(r.closed_form_steps) +
              " steps");
  for (int k = 0; k < 5; ++k) {
    const double got = r.nn.percentile(probes[k]);
    o.check(std::abs(got - nn_ref[k]) <= 1.5, within("NN p" + std::to_string(probes[k]), got, nn_ref[k], 1.5));
  }
  o.check(std::abs(r.nn.mean - 105.0) <= 1.0, within("NN mean", r.nn.mean, 105.0, 1.0));
  for (int k = 0; k < 5; ++k) {
    const double got = r.closed_form.percentile(probes[k]);
    o.check(std::abs(got - cf_ref[k]) <= 1.0,
            within("closed form p" + std::to_string(probes[k]), got, cf_ref[k], 1.0));
  }
  monotone_trend(o, "DSQ training", r.history);
  return o;
}

// ---------------------------------------------------------------------------
// 3. MCV ground truth

Outcome mcv_ground_truth() {
  Outcome o;
  RecipeOptions opts;
  opts.write_artifacts = false;
  const auto cfg = recipe_experiment("mcv-ground-truth", opts);
  o.check(cfg.data.n_paths == 500000 && cfg.train.batch_size == 2000 && cfg.net.hidden_layers == 2 &&
              cfg.net.hidden_width == 8 && cfg.objective.rho == 1.0,
          "setup: 500000 paths, batch 2000, 2 x 8 network, rho = 1");
  const auto r = run_mcv_ground_truth(opts);
  o.check(std::abs(r.value_function / 2134.27 - 1.0) <= 0.02, relative("value function", r.value_function, 2134.27, 0.02));
  o.check(std::abs(r.mean / 1444.16 - 1.0) <= 0.02, relative("mean", r.mean, 1444.16, 0.02));
  o.check(std::abs(r.cvar / 690.11 - 1.0) <= 0.03, relative("CVaR 5%", r.cvar, 690.11, 0.03));
  monotone_trend(o, "MCV training", r.history);
  return o;
}

// ---------------------------------------------------------------------------
// 4. MV / DSQ embedding

Outcome embedding() {
  Outcome o;
  const double anchor = embedding_gamma(0.017, 400.2);
  o.check(anchor >= 429.5 && anchor <= 429.8, "embedding_gamma(0.017, 400.2) = " + fmt("%.4f", anchor) + " in [429.5, 429.8]");
  RecipeOptions opts;
  opts.write_artifacts = false;
  const auto r = run_mv_dsq_embedding(opts);
  o.notes.push_back("     rho " + fmt("%.4f", r.rho) + ", gamma " + fmt("%.4f", r.gamma));
  auto agree = [&](const std::string& label, double a, double b) {
    o.check(std::abs(b / a - 1.0) <= 0.01, relative(label + " (DSQ vs MV)", b, a, 0.01));
  };
  agree("train mean", r.mv_train.mean, r.dsq_train.mean);
  agree("train stdev", r.mv_train.stdev, r.dsq_train.stdev);
  agree("test mean", r.mv_test.mean, r.dsq_test.mean);
  agree("test stdev", r.mv_test.stdev, r.dsq_test.stdev);
  monotone_trend(o, "MV training", r.mv_history);
  monotone_trend(o, "DSQ training", r.dsq_history);
  return o;
}

// ---------------------------------------------------------------------------
// 5. CVaR vs Rockafellar-Uryasev

Outcome cvar_oracle() {
  Outcome o;
  auto rng = Xoshiro256::stream(777, 0);
  std::normal_distribution<double> z;
  double worst = 0.0;
  bool bracketed = true;
  for (int s = 0; s < 50; ++s) {
    const std::size_t n = 10000;
    std::vector<double> w(n);
    const double vol = 0.1 + 0.4 * rng.uniform();
    for (auto& x : w) x = 1000.0 * std::exp(vol * z(rng)) + (s % 5 == 0 ? 200.0 * z(rng) : 0.0);
    std::vector<double> grid = w;
    std::sort(grid.begin(), grid.end());
    for (double alpha : {0.01, 0.05}) {
      // RU(xi) is concave with its maximum at a sample point no larger than the
      // alpha-quantile; the grid extends to three times that rank.
      const std::size_t top = std::min(n, static_cast<std::size_t>(3.0 * alpha * n));
      double best = -INFINITY;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < top; ++k) {
        const double v = oracle::ru_functional(w, alpha, grid[k]);
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      bracketed = bracketed && arg + 1 < top;
      const double got = empirical_cvar(w, alpha).cvar;
      worst = std::max(worst, std::abs(got - best) / std::abs(best));
    }
  }
  o.check(bracketed, "grid maximum interior on every sample");
  o.check(worst <= 1e-8, "worst relative gap over 50 samples x 2 levels " + fmt("%.3e", worst));
  return o;
}

// ---------------------------------------------------------------------------
// 6. invariants

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome invariants() {
  Outcome o;
  {
    const NetTopology topo{2, 2, 8, 5};
    auto rng = Xoshiro256::stream(9, 9);
    std::vector<double> theta(topo.parameter_count());
    for (auto& v : theta) v = 30.0 * (2.0 * rng.uniform() - 1.0);
    PolicyNetwork net(topo, FeatureScaling::for_horizon(5.0, 1000.0), theta);
    double worst = 0.0;
    bool nonneg = true;
    for (int k = 0; k < 10000; ++k) {
      const auto p = net.forward(5.0 * rng.uniform(), 1e5 * (rng.uniform() - 0.1)).weights;
      double s = 0.0;
      for (double v : p) {
        s += v;
        nonneg = nonneg && v >= 0.0;
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
    o.check(nonneg && worst <= 1e-12, "simplex outputs, 10^4 probes: max |sum - 1| " + fmt("%.2e", worst));
  }
  {
    const NetTopology topo{2, 2, 6, 3};
    std::vector<double> ones(200 * 10 * 3, 1.0);
    const ReturnPathSet paths(200, 10, 3, 0.5, {"a", "b", "c"}, Provenance::loaded, ones);
    const InvestmentHorizon h{5.0, 10, 1000.0, {}};
    double worst = 0.0;
    for (std::uint64_t s = 1; s <= 10; ++s) {
      const auto net = init_parameters(topo, s, FeatureScaling::for_horizon(5.0, 1000.0));
      for (double w : terminal_wealth(net, h, paths)) worst = std::max(worst, std::abs(w - 1000.0));
    }
    o.check(worst <= 1e-9, "wealth conservation under Y = 1: max |W(T) - w0| " + fmt("%.2e", worst));
  }
  {
    const double lam = 0.25;
    double worst = 0.0;
    for (int k = -100000; k <= 100000; ++k) {
      const double x = 2.0 * lam * k / 100000.0;
      worst = std::max(worst, std::abs(smooth_max(x, lam) - std::max(x, 0.0)));
    }
    o.check(std::abs(worst - lam / 4.0) <= 1e-12, "smooth_max sup error " + fmt("%.6f", worst) + " = lambda/4 " +
                                                      fmt("%.6f", lam / 4.0));
  }
  {
    HistoricalReturns hist;
    hist.asset_labels = {"x"};
    for (int t = 0; t < 600; ++t) {
      hist.dates.push_back(std::to_string(t));
      hist.monthly_gross_returns.push_back(1.0 + 1e-4 * t);
    }
    const double b = 6.0;
    const std::size_t n_paths = 20, months = 6000;
    std::vector<std::size_t> rows;
    stationary_block_bootstrap(hist, b, n_paths, months, 1, 31, &rows);
    std::size_t blocks = 0;
    for (std::size_t j = 0; j < n_paths; ++j) {
      ++blocks;
      for (std::size_t k = 1; k < months; ++k)
        if (rows[j * months + k] != (rows[j * months + k - 1] + 1) % 600) ++blocks;
    }
    const double mean_len = static_cast<double>(n_paths * months) / static_cast<double>(blocks);
    o.check(std::abs(mean_len / b - 1.0) <= 0.02, relative("bootstrap mean block length", mean_len, b, 0.02));
  }
  {
    const fs::path root = fs::temp_directory_path() / "dynalloc_acceptance_rerun";
    fs::remove_all(root);
    auto cfg = recipe_experiment("mcv-ground-truth", RecipeOptions{});
    cfg.data.n_paths = 4000;
    cfg.test_data->n_paths = 2000;
    cfg.train.max_steps = 200;
    cfg.train.batch_size = 500;
    cfg.heatmap_t_points = 5;
    cfg.heatmap_w_points = 5;
    cfg.outputs = root / "a";
    run_experiment(cfg);
    cfg.outputs = root / "b";
    run_experiment(cfg);
    bool same = true;
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(root / "a")) {
      ++files;
      same = same && slurp(e.path()) == slurp(root / "b" / e.path().filename());
    }
    o.check(same && files > 0, "byte-identical reruns over " + std::to_string(files) + " artifact files");
    fs::remove_all(root);
  }
  {
    bool ok = true;
    for (std::size_t L = 1; L <= 4; ++L)
      for (std::size_t hw = 1; hw <= 8; ++hw)
        for (std::size_t na = 2; na <= 6; ++na) {
          const NetTopology t{2, L, hw, na};
          const std::size_t expect = 3 * hw + (L - 1) * (hw + 1) * hw + (hw + 1) * na;
          ok = ok && t.parameter_count() == expect && PolicyNetwork(t).parameter_count() == expect;
        }
    o.check(ok, "parameter count (N_f+1)h + (L-1)(h+1)h + (h+1)N_a");
  }
  {
    auto rng = Xoshiro256::stream(4, 4);
    bool ok = true;
    for (int s = 0; s < 200; ++s) {
      std::vector<double> w(1 + static_cast<std::size_t>(rng.uniform() * 300));
      for (auto& x : w) x = std::floor(10.0 * rng.uniform()) + (s % 2 ? 1e-13 * rng.uniform() : 0.0);
      const auto sm = summarize(w);
      for (std::size_t i = 1; i < sm.percentiles.size(); ++i) ok = ok && sm.percentiles[i] >= sm.percentiles[i - 1];
    }
    o.check(ok, "percentile monotonicity, 200 samples with ties");
  }
  return o;
}

// ---------------------------------------------------------------------------
// 7. MSemiV vs OSQ

Outcome msemiv_vs_osq() {
  Outcome o;
  RecipeOptions opts;
  opts.write_artifacts = false;
  const auto r = run_msemiv_vs_osq(opts);
  o.notes.push_back("     OSQ gamma " + fmt("%.2f", r.gamma_osq) + ", MSemiV rho " + fmt("%.6g", r.rho_msv) + " after " +
                    std::to_string(r.rho_evaluations) + " trainings");
  o.notes.push_back("     means: OSQ " + fmt("%.3f", r.osq.mean) + ", MSemiV " + fmt("%.3f", r.msv.mean) + " (rel gap " +
                    fmt("%.3e", std::abs(r.msv.mean / r.osq.mean - 1.0)) + ")");
  o.check(r.msv.percentile(5) >= r.osq.percentile(5), "5th percentile: MSemiV " + fmt("%.3f", r.msv.percentile(5)) +
                                                          " >= OSQ " + fmt("%.3f", r.osq.percentile(5)));
  monotone_trend(o, "OSQ training", r.osq_history);
  monotone_trend(o, "MSemiV training", r.msv_history);
  return o;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient oracle suite", gradient_suite},
      {2, "DSQ ground truth", dsq_ground_truth},
      {3, "MCV ground truth", mcv_ground_truth},
      {4, "MV/DSQ embedding", embedding},
      {5, "CVaR oracle equivalence", cvar_oracle},
      {6, "invariant suites", invariants},
      {7, "MSemiV vs OSQ downside", msemiv_vs_osq},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.notes.push_back(std::string("FAIL exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.id, c.title, secs);
    for (const auto& n : out.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failures += out.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
