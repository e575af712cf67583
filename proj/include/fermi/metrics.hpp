#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fermi {

/// One episode of logged metrics, averaged over agents and steps.
struct MetricsRow {
  int episode = 0;
  double mean_reward = 0.0;
  double reliability = 0.0;
  double latency = 0.0;          // resolved tasks, all attempts included
  double completion_time = 0.0;  // successful tasks only
  double energy_per_task = 0.0;
  double energy_efficiency = 0.0;  // MB per unit energy
  double spectral_efficiency = 0.0;
  double fairness_hybrid = 0.0;
  double fairness_jain = 0.0;
  double mac_success = 0.0;
  double failure_rate = 0.0;
  double throughput = 0.0;  // MB per simulated second
  double offloading_delay = 0.0;
  double comm_bytes = 0.0;
  double divergence = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

inline constexpr std::size_t kNumMetricColumns = 15;

/// Column names after `episode`, in CSV order.
const std::array<std::string_view, kNumMetricColumns>& metric_names();
double metric_value(const MetricsRow& row, std::size_t column);
double metric_value(const MetricsRow& row, std::string_view name);

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);
std::string to_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(std::string_view text);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Per-column mean and sample standard deviation over rows.
std::array<MeanStd, kNumMetricColumns> summarize(const std::vector<MetricsRow>& rows);

/// Trailing moving average with the given window (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& x, std::size_t window);

std::vector<double> column(const std::vector<MetricsRow>& rows, std::string_view name);

}  // namespace fermi
