#include "dynalloc/market_data.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dynalloc/error.hpp"
#include "dynalloc/parallel.hpp"
#include "dynalloc/random.hpp"

namespace dynalloc {

namespace {

constexpr std::size_t kPathShard = 512;
constexpr char kCacheMagic[8] = {'D', 'Y', 'N', 'R', 'P', 'S', '0', '1'};

double jump_mean_minus_one(const KouAssetParams& p) {
  return p.up_prob * p.zeta1 / (p.zeta1 - 1.0) +
         (1.0 - p.up_prob) * p.zeta2 / (p.zeta2 + 1.0) - 1.0;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string_view rest(line);
  for (;;) {
    const auto comma = rest.find(',');
    out.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::string next_month_label(const std::string& label) {
  int year = 0, month = 0;
  if (std::sscanf(label.c_str(), "%d-%d", &year, &month) != 2) return label;
  if (++month > 12) {
    month = 1;
    ++year;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

}  // namespace

void KouAssetParams::validate() const {
  if (!std::isfinite(mu)) throw ValidationError("kou: mu must be finite");
  if (!(sigma >= 0.0)) throw ValidationError("kou: sigma must be >= 0");
  if (!(jump_intensity >= 0.0)) throw ValidationError("kou: jump intensity must be >= 0");
  if (jump_intensity > 0.0) {
    if (!(up_prob >= 0.0 && up_prob <= 1.0))
      throw ValidationError("kou: up_prob must lie in [0,1]");
    if (!(zeta1 > 1.0)) throw ValidationError("kou: zeta1 must be > 1");
    if (!(zeta2 > 0.0)) throw ValidationError("kou: zeta2 must be > 0");
  }
}

JumpMoments kou_jump_moments(const KouAssetParams& p) {
  if (!(p.zeta1 > 2.0)) throw ValidationError("second jump moment undefined");
  if (!(p.zeta2 > 0.0) || !(p.up_prob >= 0.0 && p.up_prob <= 1.0))
    throw ValidationError("kou: invalid jump parameters");
  JumpMoments m;
  m.kappa1 = jump_mean_minus_one(p);
  const double second = p.up_prob * p.zeta1 / (p.zeta1 - 2.0) +
                        (1.0 - p.up_prob) * p.zeta2 / (p.zeta2 + 2.0);
  m.kappa2 = second - 2.0 * (m.kappa1 + 1.0) + 1.0;
  return m;
}

double MarketModel::correlation(std::size_t i, std::size_t j) const {
  if (brownian_corr.empty()) return i == j ? 1.0 : 0.0;
  return brownian_corr[i * n_assets() + j];
}

void MarketModel::validate() const {
  const std::size_t n = n_assets();
  if (n == 0) throw ValidationError("market model has no assets");
  for (const auto& a : assets) a.validate();
  if (!risk_free.empty() && risk_free.size() != n)
    throw ValidationError("risk_free flags must match asset count");
  if (!labels.empty() && labels.size() != n)
    throw ValidationError("labels must match asset count");
  for (std::size_t i = 0; i < risk_free.size(); ++i) {
    if (risk_free[i] && (assets[i].sigma != 0.0 || assets[i].jump_intensity != 0.0))
      throw ValidationError("risk-free asset must have sigma = lambda = 0");
  }
  if (!brownian_corr.empty()) {
    if (brownian_corr.size() != n * n)
      throw ValidationError("correlation matrix must be N_a x N_a");
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(correlation(i, i) - 1.0) > 1e-12)
        throw ValidationError("correlation diagonal must be 1");
      for (std::size_t j = 0; j < i; ++j) {
        if (std::abs(correlation(i, j) - correlation(j, i)) > 1e-12)
          throw ValidationError("correlation matrix must be symmetric");
      }
    }
  }
}

const char* to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::simulated: return "simulated";
    case Provenance::bootstrapped: return "bootstrapped";
    case Provenance::loaded: return "loaded";
  }
  return "unknown";
}

ReturnPathSet::ReturnPathSet(std::size_t n_paths, std::size_t n_periods,
                             std::size_t n_assets, double dt,
                             std::vector<std::string> labels, Provenance provenance,
                             std::vector<double> gross_returns)
    : n_paths_(n_paths),
      n_periods_(n_periods),
      n_assets_(n_assets),
      dt_(dt),
      labels_(std::move(labels)),
      provenance_(provenance),
      data_(std::move(gross_returns)) {
  if (data_.size() != n_paths_ * n_periods_ * n_assets_)
    throw ValidationError("return tensor size does not match its shape");
  if (!(dt_ > 0.0)) throw ValidationError("dt must be > 0");
  if (labels_.empty()) {
    for (std::size_t i = 0; i < n_assets_; ++i) labels_.push_back("asset" + std::to_string(i + 1));
  }
  if (labels_.size() != n_assets_) throw ValidationError("label count mismatch");
  for (double y : data_) {
    if (!(std::isfinite(y) && y > 0.0))
      throw ValidationError("gross returns must be finite and > 0");
  }
}

ReturnPathSet ReturnPathSet::subset(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size() * n_periods_ * n_assets_);
  for (std::size_t idx : indices) {
    if (idx >= n_paths_) throw ValidationError("path index out of range");
    const auto p = path(idx);
    out.insert(out.end(), p.begin(), p.end());
  }
  return ReturnPathSet(indices.size(), n_periods_, n_assets_, dt_, labels_, provenance_,
                       std::move(out));
}

void HistoricalReturns::validate() const {
  if (asset_labels.empty()) throw ValidationError("history has no assets");
  if (dates.empty()) throw ValidationError("no data rows");
  if (monthly_gross_returns.size() != dates.size() * asset_labels.size())
    throw ValidationError("history columns have unequal length");
  for (double y : monthly_gross_returns) {
    if (!(std::isfinite(y) && y > 0.0))
      throw ValidationError("history gross returns must be finite and > 0");
  }
}

std::vector<double> correlation_factor(const MarketModel& model) {
  const auto n = static_cast<Eigen::Index>(model.n_assets());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      c(i, j) = model.correlation(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success) throw NumericalError("correlation not factorizable");
  Eigen::VectorXd lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda(i) < -1e-10) throw NumericalError("correlation not factorizable");
    lambda(i) = std::sqrt(std::max(lambda(i), 0.0));
  }
  const Eigen::MatrixXd root =
      eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  std::vector<double> out(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out[static_cast<std::size_t>(i * n + j)] = root(i, j);
  return out;
}

PeriodReturnSampler::PeriodReturnSampler(const MarketModel& model, double dt) {
  if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
  model.validate();
  const std::size_t na = model.n_assets();
  factor_ = correlation_factor(model);
  eps_.resize(na);
  plan_.resize(na);
  for (std::size_t i = 0; i < na; ++i) {
    const auto& a = model.assets[i];
    auto& pl = plan_[i];
    pl.deterministic = (!model.risk_free.empty() && model.risk_free[i]) ||
                       (a.sigma == 0.0 && a.jump_intensity == 0.0);
    const double kappa1 = a.jump_intensity > 0.0 ? jump_mean_minus_one(a) : 0.0;
    pl.drift = pl.deterministic
                   ? a.mu * dt
                   : (a.mu - a.jump_intensity * kappa1 - 0.5 * a.sigma * a.sigma) * dt;
    pl.vol = a.sigma * std::sqrt(dt);
    pl.jump_rate = a.jump_intensity * dt;
    pl.up_prob = a.up_prob;
    if (a.jump_intensity > 0.0) {
      pl.inv_zeta1 = 1.0 / a.zeta1;
      pl.inv_zeta2 = 1.0 / a.zeta2;
      pl.jumps = std::poisson_distribution<int>(pl.jump_rate);
    }
  }
}

void PeriodReturnSampler::reset() {
  normal_.reset();
  for (auto& pl : plan_) pl.jumps.reset();
}

void PeriodReturnSampler::sample(Xoshiro256& rng, std::span<double> gross_out) {
  const std::size_t na = plan_.size();
  for (std::size_t i = 0; i < na; ++i) eps_[i] = normal_(rng);
  for (std::size_t i = 0; i < na; ++i) {
    auto& pl = plan_[i];
    if (pl.deterministic) {
      gross_out[i] = std::exp(pl.drift);
      continue;
    }
    double z = 0.0;
    for (std::size_t k = 0; k < na; ++k) z += factor_[i * na + k] * eps_[k];
    double log_y = pl.drift + pl.vol * z;
    if (pl.jump_rate > 0.0) {
      const int count = pl.jumps(rng);
      for (int k = 0; k < count; ++k) {
        const double e = -std::log1p(-rng.uniform());  // Exp(1)
        log_y += rng.uniform() < pl.up_prob ? e * pl.inv_zeta1 : -e * pl.inv_zeta2;
      }
    }
    gross_out[i] = std::exp(log_y);
  }
}

ReturnPathSet simulate_paths(const MarketModel& model, std::size_t n_paths,
                             std::size_t n_periods, double dt, std::uint64_t seed) {
  if (n_paths == 0) throw ValidationError("n_paths must be >= 1");
  if (n_periods == 0) throw ValidationError("N_rb must be >= 1");
  if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
  const std::size_t na = model.n_assets();
  const PeriodReturnSampler prototype(model, dt);
  std::vector<double> data(n_paths * n_periods * na);
  for_each_shard(n_paths, kPathShard, [&](std::size_t, std::size_t begin, std::size_t end) {
    PeriodReturnSampler sampler = prototype;
    for (std::size_t j = begin; j < end; ++j) {
      auto rng = Xoshiro256::stream(seed, j);
      sampler.reset();
      double* out = data.data() + j * n_periods * na;
      for (std::size_t m = 0; m < n_periods; ++m) sampler.sample(rng, {out + m * na, na});
    }
  });

  std::vector<std::string> labels = model.labels;
  return ReturnPathSet(n_paths, n_periods, na, dt, std::move(labels), Provenance::simulated,
                       std::move(data));
}

ReturnPathSet stationary_block_bootstrap(const HistoricalReturns& hist,
                                         double expected_block_months,
                                         std::size_t n_paths, std::size_t n_periods,
                                         std::size_t months_per_period,
                                         std::uint64_t seed) {
  return stationary_block_bootstrap(hist, expected_block_months, n_paths, n_periods,
                                    months_per_period, seed, nullptr);
}

ReturnPathSet stationary_block_bootstrap(const HistoricalReturns& hist,
                                         double expected_block_months,
                                         std::size_t n_paths, std::size_t n_periods,
                                         std::size_t months_per_period,
                                         std::uint64_t seed,
                                         std::vector<std::size_t>* row_indices) {
  const std::size_t months = n_periods * months_per_period;
  if (months == 0) throw ValidationError("empty horizon");
  if (!(expected_block_months >= 1.0))
    throw ValidationError("expected block length must be >= 1 month");
  if (n_paths == 0) throw ValidationError("n_paths must be >= 1");
  hist.validate();

  const std::size_t na = hist.n_assets();
  const std::size_t t_hist = hist.n_months();
  std::vector<double> data(n_paths * n_periods * na);
  if (row_indices) row_indices->assign(n_paths * months, 0);

  for_each_shard(n_paths, kPathShard, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<std::size_t> rows(months);
    for (std::size_t j = begin; j < end; ++j) {
      auto rng = Xoshiro256::stream(seed, j);
      std::size_t filled = 0;
      while (filled < months) {
        const auto start = static_cast<std::size_t>(rng.uniform() * static_cast<double>(t_hist));
        const std::size_t len = sample_block_length(rng, expected_block_months);
        for (std::size_t k = 0; k < len && filled < months; ++k) {
          rows[filled++] = (std::min(start, t_hist - 1) + k) % t_hist;
        }
      }
      double* out = data.data() + j * n_periods * na;
      for (std::size_t m = 0; m < n_periods; ++m) {
        for (std::size_t i = 0; i < na; ++i) out[m * na + i] = 1.0;
        for (std::size_t k = 0; k < months_per_period; ++k) {
          const auto r = hist.row(rows[m * months_per_period + k]);
          for (std::size_t i = 0; i < na; ++i) out[m * na + i] *= r[i];
        }
      }
      if (row_indices) {
        std::copy(rows.begin(), rows.end(), row_indices->begin() + static_cast<std::ptrdiff_t>(j * months));
      }
    }
  });

  return ReturnPathSet(n_paths, n_periods, na, static_cast<double>(months_per_period) / 12.0,
                       hist.asset_labels, Provenance::bootstrapped, std::move(data));
}

HistoricalReturns parse_returns_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  HistoricalReturns hist;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (!have_header) {
      if (cells.size() < 2) throw ValidationError("header must list a date column and assets");
      hist.asset_labels.assign(cells.begin() + 1, cells.end());
      have_header = true;
      continue;
    }
    if (cells.size() != hist.asset_labels.size() + 1)
      throw ValidationError("column count mismatch at line " + std::to_string(line_no));
    hist.dates.push_back(cells[0]);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      double r = 0.0;
      const auto& s = cells[c];
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), r);
      if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(r) || !(1.0 + r > 0.0))
        throw ValidationError("invalid return at line " + std::to_string(line_no));
      hist.monthly_gross_returns.push_back(1.0 + r);
    }
  }
  if (!have_header) throw ValidationError("missing header row");
  if (hist.dates.empty()) throw ValidationError("no data rows");
  return hist;
}

HistoricalReturns load_returns_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open returns file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_returns_csv(buf.str());
}

void write_returns_csv(const HistoricalReturns& hist, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write returns file " + path.string());
  out << "date";
  for (const auto& l : hist.asset_labels) out << ',' << l;
  out << '\n';
  char buf[64];
  for (std::size_t m = 0; m < hist.n_months(); ++m) {
    out << hist.dates[m];
    for (double g : hist.row(m)) {
      std::snprintf(buf, sizeof buf, "%.17g", g - 1.0);
      out << ',' << buf;
    }
    out << '\n';
  }
}

HistoricalReturns synthetic_history(const MarketModel& model, std::size_t months,
                                    std::uint64_t seed, const std::string& start_label) {
  const auto sim = simulate_paths(model, 1, months, 1.0 / 12.0, seed);
  HistoricalReturns hist;
  hist.asset_labels = sim.labels();
  hist.monthly_gross_returns.assign(sim.data().begin(), sim.data().end());
  std::string label = start_label;
  for (std::size_t m = 0; m < months; ++m) {
    hist.dates.push_back(label);
    label = next_month_label(label);
  }
  return hist;
}

void save_paths(const ReturnPathSet& paths, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "cache format is little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write path cache " + path.string());
  auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  out.write(kCacheMagic, sizeof kCacheMagic);
  put_u64(paths.n_paths());
  put_u64(paths.n_periods());
  put_u64(paths.n_assets());
  const double dt = paths.dt();
  out.write(reinterpret_cast<const char*>(&dt), sizeof dt);
  const auto prov = static_cast<std::uint8_t>(paths.provenance());
  out.write(reinterpret_cast<const char*>(&prov), 1);
  for (const auto& l : paths.labels()) {
    const auto len = static_cast<std::uint32_t>(l.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(l.data(), len);
  }
  const auto d = paths.data();
  out.write(reinterpret_cast<const char*>(d.data()),
            static_cast<std::streamsize>(d.size() * sizeof(double)));
  if (!out) throw ValidationError("failed writing path cache " + path.string());
}

ReturnPathSet load_paths(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open path cache " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kCacheMagic))
    throw ValidationError("not a path cache: " + path.string());
  auto get_u64 = [&] {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  const auto n_paths = get_u64();
  const auto n_periods = get_u64();
  const auto n_assets = get_u64();
  double dt = 0.0;
  in.read(reinterpret_cast<char*>(&dt), sizeof dt);
  std::uint8_t prov = 0;
  in.read(reinterpret_cast<char*>(&prov), 1);
  if (!in || prov > 2 || n_assets > 4096) throw ValidationError("corrupt path cache header");
  std::vector<std::string> labels(n_assets);
  for (auto& l : labels) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len > 4096) throw ValidationError("corrupt path cache labels");
    l.resize(len);
    in.read(l.data(), len);
  }
  std::vector<double> data(n_paths * n_periods * n_assets);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw ValidationError("truncated path cache " + path.string());
  return ReturnPathSet(n_paths, n_periods, n_assets, dt, std::move(labels),
                       static_cast<Provenance>(prov), std::move(data));
}

}  // namespace dynalloc
