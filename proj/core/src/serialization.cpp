#include "dynalloc/serialization.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json_fields.hpp"

namespace dynalloc {

using detail::Fields;
using detail::json;

namespace {

constexpr const char* kPolicyFormat = "dynalloc-policy/1";
constexpr const char* kCheckpointFormat = "dynalloc-checkpoint/1";

json policy_node(const PolicyNetwork& net, std::optional<double> xi) {
  const auto& topo = net.topology();
  json j;
  j["format"] = kPolicyFormat;
  j["topology"] = {{"n_features", topo.n_features},
                   {"hidden_layers", topo.hidden_layers},
                   {"hidden_width", topo.hidden_width},
                   {"n_assets", topo.n_assets}};
  j["feature_offset"] = net.scaling().offset;
  j["feature_scale"] = net.scaling().scale;
  j["theta"] = std::vector<double>(net.theta().begin(), net.theta().end());
  j["xi"] = xi ? json(*xi) : json(nullptr);
  return j;
}

StoredPolicy policy_from_node(const json& j, const std::string& where) {
  Fields f(j, where);
  if (f.has("format") && f.string("format") != kPolicyFormat)
    throw ValidationError(where + ": unsupported policy format");
  const Fields t = f.object("topology");
  NetTopology topo;
  topo.n_features = t.count("n_features");
  topo.hidden_layers = t.count("hidden_layers");
  topo.hidden_width = t.count("hidden_width");
  topo.n_assets = t.count("n_assets");
  FeatureScaling scaling{f.numbers("feature_offset"), f.numbers("feature_scale")};
  StoredPolicy out{PolicyNetwork(topo, std::move(scaling), f.numbers("theta")), std::nullopt};
  if (f.has("xi")) out.xi = f.number("xi");
  return out;
}

json objective_node(const ObjectiveSpec& s) {
  json j;
  j["kind"] = std::string(to_string(s.kind));
  switch (s.kind) {
    case ObjectiveKind::DSQ: j["gamma"] = s.gamma; break;
    case ObjectiveKind::OSQ:
      j["gamma"] = s.gamma;
      j["epsilon"] = s.epsilon;
      break;
    case ObjectiveKind::MV:
    case ObjectiveKind::MSemiV: j["rho"] = s.rho; break;
    case ObjectiveKind::MCV:
      j["rho"] = s.rho;
      j["alpha"] = s.alpha;
      j["lambda_smooth"] = s.lambda_smooth;
      break;
  }
  return j;
}

json model_node(const MarketModel& m) {
  json assets = json::array();
  for (std::size_t i = 0; i < m.n_assets(); ++i) {
    const auto& a = m.assets[i];
    json e;
    e["label"] = i < m.labels.size() ? m.labels[i] : "asset" + std::to_string(i + 1);
    e["risk_free"] = !m.risk_free.empty() && m.risk_free[i];
    e["mu"] = a.mu;
    e["sigma"] = a.sigma;
    e["jump_intensity"] = a.jump_intensity;
    e["up_prob"] = a.up_prob;
    e["zeta1"] = a.zeta1;
    e["zeta2"] = a.zeta2;
    assets.push_back(e);
  }
  json j;
  j["assets"] = assets;
  if (!m.brownian_corr.empty()) j["brownian_corr"] = m.brownian_corr;
  return j;
}

json summary_node(const DistributionSummary& s) {
  json j;
  j["mean"] = s.mean;
  j["stdev"] = s.stdev;
  json p = json::object();
  for (std::size_t i = 0; i < kSummaryPercentiles.size(); ++i)
    p["p" + std::to_string(kSummaryPercentiles[i])] = s.percentiles[i];
  j["percentiles"] = p;
  return j;
}

}  // namespace

namespace detail {

ObjectiveSpec objective_from_fields(const Fields& f) {
  ObjectiveSpec s;
  const std::string kind = f.string("kind");
  try {
    s.kind = parse_objective_kind(kind);
  } catch (const ValidationError&) {
    Fields::fail(f.path().empty() ? "kind" : f.path() + ".kind",
                 "must be one of DSQ, OSQ, MV, MCV, MSemiV");
  }
  switch (s.kind) {
    case ObjectiveKind::DSQ: s.gamma = f.number("gamma"); break;
    case ObjectiveKind::OSQ:
      s.gamma = f.number("gamma");
      s.epsilon = f.number_or("epsilon", s.epsilon);
      break;
    case ObjectiveKind::MV:
    case ObjectiveKind::MSemiV: s.rho = f.number("rho"); break;
    case ObjectiveKind::MCV:
      s.rho = f.number("rho");
      s.alpha = f.number_or("alpha", s.alpha);
      s.lambda_smooth = f.number_or("lambda_smooth", s.lambda_smooth);
      break;
  }
  s.validate();
  return s;
}

MarketModel model_from_fields(const Fields& f) {
  MarketModel m;
  for (const Fields& a : f.objects("assets")) {
    KouAssetParams p;
    const bool rf = a.boolean_or("risk_free", false);
    p.mu = a.number("mu");
    p.sigma = a.number_or("sigma", 0.0);
    p.jump_intensity = a.number_or("jump_intensity", 0.0);
    p.up_prob = a.number_or("up_prob", p.up_prob);
    p.zeta1 = a.number_or("zeta1", p.zeta1);
    p.zeta2 = a.number_or("zeta2", p.zeta2);
    m.assets.push_back(p);
    m.risk_free.push_back(rf);
    m.labels.push_back(a.string_or("label", "asset" + std::to_string(m.assets.size())));
  }
  if (f.has("brownian_corr")) m.brownian_corr = f.numbers("brownian_corr");
  m.validate();
  return m;
}

}  // namespace detail

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string policy_to_json(const PolicyNetwork& net, std::optional<double> xi) {
  return policy_node(net, xi).dump(2) + "\n";
}

StoredPolicy policy_from_json(const std::string& text) {
  return policy_from_node(detail::parse_json(text, "policy"), "");
}

void save_policy(const std::filesystem::path& path, const PolicyNetwork& net,
                 std::optional<double> xi) {
  write_text_file(path, policy_to_json(net, xi));
}

StoredPolicy load_policy(const std::filesystem::path& path) {
  return policy_from_json(read_text_file(path));
}

void save_checkpoint(const std::filesystem::path& path, const PolicyNetwork& net,
                     std::optional<double> xi, const AdamState& adam) {
  json j;
  j["format"] = kCheckpointFormat;
  j["policy"] = policy_node(net, xi);
  j["adam"] = {{"step", adam.step}, {"m", adam.m}, {"v", adam.v}};
  write_text_file(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const json j = detail::parse_json(read_text_file(path), "checkpoint");
  Fields f(j, "");
  if (f.string("format") != kCheckpointFormat)
    throw ValidationError("checkpoint: unsupported format");
  Checkpoint c{policy_from_node(f.raw("policy"), "policy"), AdamState{}};
  const Fields a = f.object("adam");
  c.adam.step = a.count("step");
  c.adam.m = a.numbers("m");
  c.adam.v = a.numbers("v");
  const std::size_t dim = c.policy.net.parameter_count() + (c.policy.xi ? 1 : 0);
  if (c.adam.m.size() != dim || c.adam.v.size() != dim)
    throw ValidationError("checkpoint: Adam state does not match the policy");
  return c;
}

std::string objective_to_json(const ObjectiveSpec& spec) { return objective_node(spec).dump(2) + "\n"; }

ObjectiveSpec objective_from_json(const std::string& text) {
  const json j = detail::parse_json(text, "objective");
  return detail::objective_from_fields(Fields(j, ""));
}

std::string model_to_json(const MarketModel& model) { return model_node(model).dump(2) + "\n"; }

MarketModel model_from_json(const std::string& text) {
  const json j = detail::parse_json(text, "model");
  return detail::model_from_fields(Fields(j, ""));
}

std::string summary_csv(std::span<const SummaryRow> rows) {
  std::ostringstream os;
  os << "label,mean,stdev";
  for (int p : kSummaryPercentiles) os << ",p" << p;
  os << "\n";
  for (const auto& r : rows) {
    os << r.label << "," << format_double(r.summary.mean) << "," << format_double(r.summary.stdev);
    for (double v : r.summary.percentiles) os << "," << format_double(v);
    os << "\n";
  }
  return os.str();
}

std::string summary_json(std::span<const SummaryRow> rows) {
  json j = json::object();
  for (const auto& r : rows) j[r.label] = summary_node(r.summary);
  return j.dump(2) + "\n";
}

void write_terminal_wealth_csv(const std::filesystem::path& path, std::span<const double> wealth) {
  std::string text = "terminal_wealth\n";
  text.reserve(wealth.size() * 20);
  for (double w : wealth) {
    text += format_double(w);
    text += '\n';
  }
  write_text_file(path, text);
}

std::vector<double> read_terminal_wealth_csv(const std::filesystem::path& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  std::vector<double> out;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    double v = 0.0;
    const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc{})
      throw ValidationError("invalid value at line " + std::to_string(line_no));
    out.push_back(v);
  }
  return out;
}

void write_training_log_csv(const std::filesystem::path& path,
                            std::span<const TrainLogEntry> history) {
  std::ostringstream os;
  os << "step,batch_objective,grad_norm\n";
  for (const auto& e : history)
    os << e.step << "," << format_double(e.batch_objective) << "," << format_double(e.grad_norm) << "\n";
  write_text_file(path, os.str());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace dynalloc
