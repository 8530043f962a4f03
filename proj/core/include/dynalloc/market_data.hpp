#pragma once

/**
 * @file market_data.hpp
 * @brief Joint asset-return path sets: jump-diffusion simulation, stationary
 * block bootstrap of historical returns, CSV ingest and a binary cache.
 *
 * Every path set stores per-period gross returns Y = 1 + R laid out as
 * [path][period][asset] in one contiguous buffer.
 *
 * Asset dynamics follow the Kou double-exponential jump diffusion
 *
 *   dS/S = (mu - lambda*kappa1) dt + sigma dZ + d(sum_k (theta_k - 1))
 *
 * where log(theta) is +Exp(zeta1) with probability nu and -Exp(zeta2)
 * otherwise. Brownian drivers may be correlated; jump processes are
 * independent across assets.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dynalloc/random.hpp"

namespace dynalloc {

struct KouAssetParams {
  double mu = 0.0;              ///< drift per year
  double sigma = 0.0;           ///< diffusive volatility per sqrt(year)
  double jump_intensity = 0.0;  ///< lambda, jumps per year
  double up_prob = 0.5;         ///< nu, P(up jump | jump)
  double zeta1 = 3.0;           ///< up-jump exponential rate, > 1
  double zeta2 = 3.0;           ///< down-jump exponential rate, > 0

  /// Throws ValidationError on out-of-range fields.
  void validate() const;
};

struct JumpMoments {
  double kappa1 = 0.0;  ///< E[theta - 1]
  double kappa2 = 0.0;  ///< E[(theta - 1)^2]
};

/// Closed-form jump moments. Requires zeta1 > 2 (finite second moment).
JumpMoments kou_jump_moments(const KouAssetParams& p);

struct MarketModel {
  std::vector<KouAssetParams> assets;
  /// Row-major N_a x N_a Brownian correlation, unit diagonal. Empty means
  /// identity.
  std::vector<double> brownian_corr;
  /// true => deterministic growth at mu (sigma and lambda must be zero).
  std::vector<bool> risk_free;
  std::vector<std::string> labels;

  std::size_t n_assets() const noexcept { return assets.size(); }
  double correlation(std::size_t i, std::size_t j) const;
  void validate() const;
};

enum class Provenance : std::uint8_t { simulated = 0, bootstrapped = 1, loaded = 2 };

const char* to_string(Provenance p) noexcept;

/// Immutable set of n independent return paths, [n_paths x n_periods x n_assets].
class ReturnPathSet {
 public:
  ReturnPathSet() = default;
  ReturnPathSet(std::size_t n_paths, std::size_t n_periods, std::size_t n_assets,
                double dt, std::vector<std::string> labels, Provenance provenance,
                std::vector<double> gross_returns);

  std::size_t n_paths() const noexcept { return n_paths_; }
  std::size_t n_periods() const noexcept { return n_periods_; }
  std::size_t n_assets() const noexcept { return n_assets_; }
  double dt() const noexcept { return dt_; }
  Provenance provenance() const noexcept { return provenance_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  /// Gross returns of every asset for (path, period).
  std::span<const double> returns(std::size_t path, std::size_t period) const noexcept {
    return {data_.data() + (path * n_periods_ + period) * n_assets_, n_assets_};
  }
  std::span<const double> path(std::size_t path) const noexcept {
    return {data_.data() + path * n_periods_ * n_assets_, n_periods_ * n_assets_};
  }
  std::span<const double> data() const noexcept { return data_; }

  /// Copies the selected paths into a new set.
  ReturnPathSet subset(std::span<const std::size_t> indices) const;

 private:
  std::size_t n_paths_ = 0;
  std::size_t n_periods_ = 0;
  std::size_t n_assets_ = 0;
  double dt_ = 0.0;
  std::vector<std::string> labels_;
  Provenance provenance_ = Provenance::loaded;
  std::vector<double> data_;
};

/// Monthly gross returns, [T_hist x N_a] row-major.
struct HistoricalReturns {
  std::vector<std::string> asset_labels;
  std::vector<std::string> dates;  ///< one label per row, e.g. "1963-07"
  std::vector<double> monthly_gross_returns;

  std::size_t n_months() const noexcept { return dates.size(); }
  std::size_t n_assets() const noexcept { return asset_labels.size(); }
  std::span<const double> row(std::size_t month) const noexcept {
    return {monthly_gross_returns.data() + month * n_assets(), n_assets()};
  }
  const std::string& start_label() const { return dates.front(); }
  const std::string& end_label() const { return dates.back(); }
  void validate() const;
};

/// Symmetric square root of the Brownian correlation (Q * sqrt(Lambda) * Q^T),
/// row-major. Throws NumericalError("correlation not factorizable") when an
/// eigenvalue is below -1e-10.
std::vector<double> correlation_factor(const MarketModel& model);


/// Draws one period of joint gross returns from the exact solution of the
/// jump-diffusion over an interval of length dt. Holds distribution state;
/// call reset() before starting a new independent stream.
class PeriodReturnSampler {
 public:
  PeriodReturnSampler(const MarketModel& model, double dt);

  void reset();
  void sample(Xoshiro256& rng, std::span<double> gross_out);
  std::size_t n_assets() const noexcept { return plan_.size(); }

 private:
  struct AssetPlan {
    bool deterministic = false;
    double drift = 0.0;  // per-period log drift
    double vol = 0.0;    // sigma * sqrt(dt)
    double jump_rate = 0.0;
    double up_prob = 0.0;
    double inv_zeta1 = 0.0;
    double inv_zeta2 = 0.0;
    std::poisson_distribution<int> jumps;
  };
  std::vector<AssetPlan> plan_;
  std::vector<double> factor_;
  std::vector<double> eps_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Exact per-period sampling of the jump-diffusion solution. Path j draws
/// from stream (seed, j).
ReturnPathSet simulate_paths(const MarketModel& model, std::size_t n_paths,
                             std::size_t n_periods, double dt, std::uint64_t seed);

/// Geometric block length on {1, 2, ...} with the given mean.
template <typename Rng>
std::size_t sample_block_length(Rng& rng, double expected_block);

/// Stationary (Politis-Romano) block bootstrap with circular wrap. Monthly
/// gross returns are compounded into periods of `months_per_period`.
ReturnPathSet stationary_block_bootstrap(const HistoricalReturns& hist,
                                         double expected_block_months,
                                         std::size_t n_paths, std::size_t n_periods,
                                         std::size_t months_per_period,
                                         std::uint64_t seed);

/// Same as above, additionally reporting the history row used for every
/// month of every path ([path][month]).
ReturnPathSet stationary_block_bootstrap(const HistoricalReturns& hist,
                                         double expected_block_months,
                                         std::size_t n_paths, std::size_t n_periods,
                                         std::size_t months_per_period,
                                         std::uint64_t seed,
                                         std::vector<std::size_t>* row_indices);

/// Parses "date,label1,...,labelN" followed by "YYYY-MM,r1,...,rN" rows of
/// simple monthly returns.
HistoricalReturns load_returns_csv(const std::filesystem::path& path);
HistoricalReturns parse_returns_csv(const std::string& text);
void write_returns_csv(const HistoricalReturns& hist, const std::filesystem::path& path);

/// Builds a synthetic monthly history by simulating one long path of the
/// model (used where no empirical data file is supplied).
HistoricalReturns synthetic_history(const MarketModel& model, std::size_t months,
                                    std::uint64_t seed,
                                    const std::string& start_label = "1963-07");

/// Binary cache: magic, {n_paths, n_periods, n_assets, dt, provenance,
/// labels}, then little-endian doubles.
void save_paths(const ReturnPathSet& paths, const std::filesystem::path& path);
ReturnPathSet load_paths(const std::filesystem::path& path);

}  // namespace dynalloc

#include "dynalloc/detail/block_length.hpp"
