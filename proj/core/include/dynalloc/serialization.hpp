#pragma once

// File formats: policy and checkpoint JSON, objective specs, summary tables,
// terminal-wealth and training-log CSVs. Doubles are written so that they
// read back bit-exactly, and identical inputs give identical bytes.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynalloc/analytics.hpp"
#include "dynalloc/market_data.hpp"
#include "dynalloc/objectives.hpp"
#include "dynalloc/policy_net.hpp"
#include "dynalloc/trainer.hpp"

namespace dynalloc {

/// Shortest round-trip decimal form of x.
std::string format_double(double x);

struct StoredPolicy {
  PolicyNetwork net;
  std::optional<double> xi;
};

std::string policy_to_json(const PolicyNetwork& net, std::optional<double> xi = std::nullopt);
StoredPolicy policy_from_json(const std::string& text);
void save_policy(const std::filesystem::path& path, const PolicyNetwork& net,
                 std::optional<double> xi = std::nullopt);
StoredPolicy load_policy(const std::filesystem::path& path);

struct Checkpoint {
  StoredPolicy policy;
  AdamState adam;
};

void save_checkpoint(const std::filesystem::path& path, const PolicyNetwork& net,
                     std::optional<double> xi, const AdamState& adam);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string objective_to_json(const ObjectiveSpec& spec);
ObjectiveSpec objective_from_json(const std::string& text);

std::string model_to_json(const MarketModel& model);
MarketModel model_from_json(const std::string& text);

struct SummaryRow {
  std::string label;
  DistributionSummary summary;
};

/// label, mean, stdev, p5, p20, p25, p50, p75, p80, p95
std::string summary_csv(std::span<const SummaryRow> rows);
std::string summary_json(std::span<const SummaryRow> rows);

void write_terminal_wealth_csv(const std::filesystem::path& path, std::span<const double> wealth);
std::vector<double> read_terminal_wealth_csv(const std::filesystem::path& path);
void write_training_log_csv(const std::filesystem::path& path,
                            std::span<const TrainLogEntry> history);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace dynalloc
