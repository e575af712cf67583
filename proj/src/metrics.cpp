#include "fermi/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "fermi/errors.hpp"

namespace fermi {

namespace {

constexpr std::array<std::string_view, kNumMetricColumns> kNames{
    "mean_reward",  "reliability",       "latency",         "completion_time", "energy_per_task",
    "energy_efficiency", "spectral_efficiency", "fairness_hybrid", "fairness_jain", "mac_success",
    "failure_rate", "throughput",        "offloading_delay", "comm_bytes",     "divergence"};

std::array<double MetricsRow::*, kNumMetricColumns> members() {
  return {&MetricsRow::mean_reward,     &MetricsRow::reliability,         &MetricsRow::latency,
          &MetricsRow::completion_time, &MetricsRow::energy_per_task,     &MetricsRow::energy_efficiency,
          &MetricsRow::spectral_efficiency, &MetricsRow::fairness_hybrid, &MetricsRow::fairness_jain,
          &MetricsRow::mac_success,     &MetricsRow::failure_rate,        &MetricsRow::throughput,
          &MetricsRow::offloading_delay, &MetricsRow::comm_bytes,         &MetricsRow::divergence};
}

std::size_t index_of(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return i;
  throw LookupError(fmt::format("unknown metric '{}'", name));
}

}  // namespace

const std::array<std::string_view, kNumMetricColumns>& metric_names() { return kNames; }

double metric_value(const MetricsRow& row, std::size_t c) { return row.*(members().at(c)); }

double metric_value(const MetricsRow& row, std::string_view name) { return metric_value(row, index_of(name)); }

std::string metrics_csv_header() {
  std::string s = "episode";
  for (auto n : kNames) {
    s += ',';
    s += n;
  }
  return s;
}

std::string metrics_csv_line(const MetricsRow& row) {
  std::string s = std::to_string(row.episode);
  for (auto m : members()) s += fmt::format(",{:.17g}", row.*m);
  return s;
}

std::string to_csv(const std::vector<MetricsRow>& rows) {
  std::string s = metrics_csv_header() + "\n";
  for (const auto& r : rows) s += metrics_csv_line(r) + "\n";
  return s;
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header())
    throw ConfigError("metrics file has an unexpected header");
  const auto ms = members();
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != kNumMetricColumns + 1)
      throw ConfigError(fmt::format("metrics row has {} cells, expected {}", cells.size(), kNumMetricColumns + 1));
    MetricsRow r;
    r.episode = std::stoi(cells[0]);
    for (std::size_t c = 0; c < kNumMetricColumns; ++c) r.*ms[c] = std::stod(cells[c + 1]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError(fmt::format("cannot open {}", path.string()));
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_metrics_csv(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::array<MeanStd, kNumMetricColumns> summarize(const std::vector<MetricsRow>& rows) {
  std::array<MeanStd, kNumMetricColumns> out{};
  if (rows.empty()) return out;
  const double n = static_cast<double>(rows.size());
  for (std::size_t c = 0; c < kNumMetricColumns; ++c) {
    double s = 0.0;
    for (const auto& r : rows) s += metric_value(r, c);
    const double mean = s / n;
    double ss = 0.0;
    for (const auto& r : rows) ss += (metric_value(r, c) - mean) * (metric_value(r, c) - mean);
    out[c] = {mean, rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
  }
  return out;
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
  if (window == 0) throw DomainError("smoothing window must be positive");
  std::vector<double> out(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += x[i];
    if (i >= window) acc -= x[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

std::vector<double> column(const std::vector<MetricsRow>& rows, std::string_view name) {
  const auto c = index_of(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(metric_value(r, c));
  return out;
}

}  // namespace fermi
