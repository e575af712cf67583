#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fermi/config.hpp"
#include "fermi/metrics.hpp"

namespace fermi {

/// Everything needed to reproduce a run directory.
struct RunManifest {
  std::string command;
  std::string config_text;  // print_config of the effective config
  std::uint64_t seed = 0;
  std::string policy;
  std::string started_utc;
  std::string finished_utc;
  std::filesystem::path out_dir;
  std::vector<std::pair<std::string, std::string>> checksums;  // relative path, hex SHA-256

  std::string to_text() const;
};

struct RunResult {
  std::vector<MetricsRow> metrics;
  RunManifest manifest;
  int rounds_completed = 0;
  int rounds_skipped = 0;
  int rounds_aborted = 0;
  std::size_t stored_transitions = 0;  // replay occupancy summed over agents at the end
  std::size_t replay_capacity = 0;     // configured capacity summed over agents
};

std::string sha256_hex(const std::filesystem::path& file);

/// Creates `dir` (and parents) unless it already exists with content.
void prepare_out_dir(const std::filesystem::path& dir);

/// Trains and writes metrics.csv, config.txt, manifest.txt, model.drqn and
/// one checkpoints/round_NNNN.drqn per completed federated round.
RunResult run_experiment(const TrainingConfig& cfg, const std::filesystem::path& out_dir);

/// Greedy rollouts from a checkpoint (or from the untrained initialisation
/// when none is given); writes metrics.csv, summary.txt and manifest.txt.
RunResult run_evaluation(const TrainingConfig& cfg, const std::optional<std::filesystem::path>& checkpoint,
                         int episodes, const std::filesystem::path& out_dir);

struct SweepRow {
  int agents = 0;
  int channels = 0;
  int episodes = 0;
  std::array<MeanStd, kNumMetricColumns> summary{};  // over the trailing window
  int rounds_completed = 0;
  int rounds_aborted = 0;
  std::size_t stored_transitions = 0;
  std::size_t replay_capacity = 0;
};

/// ceil(N * 3 / 5)
int scaled_channels(int agents);

/// One training run per agent count with scaled channels; each run gets its
/// own sub-directory `agents_N` under `out_dir`.
std::vector<SweepRow> scalability_sweep(const TrainingConfig& cfg, const std::vector<int>& agent_counts,
                                        const std::filesystem::path& out_dir);
std::string sweep_table(const std::vector<SweepRow>& rows);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct CompareEntry {
  std::string run;
  std::size_t window = 0;
  std::array<MeanStd, kNumMetricColumns> summary{};
};

/// Per-metric mean and std over the last smoothing_window * 5 episodes of
/// each run. Delta columns are relative to the first run.
std::vector<CompareEntry> compare_runs(const std::vector<std::filesystem::path>& run_dirs);
std::string compare_table(const std::vector<CompareEntry>& entries);
std::string compare_csv(const std::vector<CompareEntry>& entries);

}  // namespace fermi
