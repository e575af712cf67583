#include "fermi/experiment.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "fermi/checkpoint.hpp"
#include "fermi/errors.hpp"
#include "fermi/logging.hpp"
#include "fermi/orchestrator.hpp"
#include "fermi/secure_agg.hpp"

namespace fs = std::filesystem;

namespace fermi {

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write {}", path.string()));
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError(fmt::format("write failed for {}", path.string()));
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot open {}", path.string()));
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void add_checksums(RunManifest& m, const std::vector<std::string>& files) {
  for (const auto& rel : files) m.checksums.emplace_back(rel, sha256_hex(m.out_dir / rel));
}

void finish_manifest(RunManifest& m) {
  m.finished_utc = utc_now();
  write_file(m.out_dir / "manifest.txt", m.to_text());
}

DrqnNet global_net(const Trainer& tr) {
  DrqnNet net = tr.agent(0).net();
  net.set_params(tr.global_params());
  return net;
}

}  // namespace

std::string RunManifest::to_text() const {
  std::string s;
  s += fmt::format("command={}\n", command);
  s += fmt::format("seed={}\n", seed);
  s += fmt::format("policy={}\n", policy);
  s += fmt::format("started_utc={}\n", started_utc);
  s += fmt::format("finished_utc={}\n", finished_utc);
  s += fmt::format("out_dir={}\n", out_dir.string());
  for (const auto& [path, sum] : checksums) s += fmt::format("sha256.{}={}\n", path, sum);
  std::istringstream cfg(config_text);
  std::string line;
  while (std::getline(cfg, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') continue;
    s += "config." + line + "\n";
  }
  return s;
}

std::string sha256_hex(const fs::path& file) {
  const auto bytes = read_file(file);
  const auto digest = secagg::sha256({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
  std::string hex;
  for (auto b : digest) hex += fmt::format("{:02x}", b);
  return hex;
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir)) throw IoError(fmt::format("{} exists and is not a directory", dir.string()));
    if (!fs::is_empty(dir)) throw IoError(fmt::format("{} is not empty; refusing to overwrite a run", dir.string()));
    return;
  }
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

RunResult run_experiment(const TrainingConfig& cfg, const fs::path& out_dir) {
  init_logging();
  prepare_out_dir(out_dir);
  RunResult res;
  auto& m = res.manifest;
  m.command = "train";
  m.config_text = print_config(cfg);
  m.seed = cfg.seed;
  m.policy = std::string(to_string(cfg.policy));
  m.started_utc = utc_now();
  m.out_dir = out_dir;
  write_file(out_dir / "config.txt", m.config_text);

  Trainer tr(cfg);
  std::vector<std::string> outputs{"config.txt", "metrics.csv"};
  if (tr.has_learners()) fs::create_directories(out_dir / "checkpoints");
  spdlog::info("training {} agents for {} episodes, policy {}", cfg.env.num_agents, cfg.episodes, m.policy);

  res.metrics = tr.train([&](const EpisodeResult& ep) {
    if (!ep.round) return;
    if (ep.round->aborted) ++res.rounds_aborted;
    else if (ep.round->skipped) ++res.rounds_skipped;
    else {
      ++res.rounds_completed;
      const auto name = fmt::format("checkpoints/round_{:04}.drqn", ep.round->round);
      save_checkpoint(out_dir / name, global_net(tr));
      outputs.push_back(name);
    }
    if (ep.row.episode % 50 == 49 || ep.row.episode + 1 == cfg.episodes)
      spdlog::info("episode {}: reward {:.3f}, reliability {:.3f}", ep.row.episode + 1, ep.row.mean_reward,
                   ep.row.reliability);
  });

  write_file(out_dir / "metrics.csv", to_csv(res.metrics));
  if (tr.has_learners()) {
    save_checkpoint(out_dir / "model.drqn", global_net(tr));
    outputs.push_back("model.drqn");
    for (int i = 0; i < tr.num_agents(); ++i) {
      res.stored_transitions += tr.agent(i).replay().stored_transitions();
      res.replay_capacity += tr.agent(i).replay().capacity_sequences() * static_cast<std::size_t>(cfg.sequence_length);
    }
  }
  add_checksums(m, outputs);
  finish_manifest(m);
  return res;
}

RunResult run_evaluation(const TrainingConfig& cfg, const std::optional<fs::path>& checkpoint, int episodes,
                         const fs::path& out_dir) {
  init_logging();
  if (episodes < 0) throw ConfigError("episodes must be non-negative");
  prepare_out_dir(out_dir);
  RunResult res;
  auto& m = res.manifest;
  m.command = "eval";
  m.config_text = print_config(cfg);
  m.seed = cfg.seed;
  m.policy = std::string(to_string(cfg.policy));
  m.started_utc = utc_now();
  m.out_dir = out_dir;
  write_file(out_dir / "config.txt", m.config_text);

  Trainer tr(cfg);
  if (checkpoint) {
    if (!tr.has_learners()) throw ConfigError("the random policy does not take a checkpoint");
    const DrqnNet net = load_checkpoint(*checkpoint);
    if (!(net.shape() == tr.agent(0).net().shape()))
      throw ConfigError(fmt::format("{} does not match the configured network shape", checkpoint->string()));
    tr.load_global(net.params());
    m.checksums.emplace_back("checkpoint:" + checkpoint->string(), sha256_hex(*checkpoint));
  }
  res.metrics = tr.evaluate(episodes, cfg.seed);
  write_file(out_dir / "metrics.csv", to_csv(res.metrics));

  const auto summary = summarize(res.metrics);
  std::string text = "metric,mean,std\n";
  for (std::size_t c = 0; c < kNumMetricColumns; ++c)
    text += fmt::format("{},{:.17g},{:.17g}\n", metric_names()[c], summary[c].mean, summary[c].std);
  write_file(out_dir / "summary.txt", text);
  add_checksums(m, {"config.txt", "metrics.csv", "summary.txt"});
  finish_manifest(m);
  return res;
}

int scaled_channels(int agents) {
  if (agents < 1) throw ConfigError("agent count must be positive");
  return (agents * 3 + 4) / 5;
}

std::vector<SweepRow> scalability_sweep(const TrainingConfig& cfg, const std::vector<int>& agent_counts,
                                        const fs::path& out_dir) {
  if (agent_counts.empty()) throw ConfigError("sweep needs at least one agent count");
  prepare_out_dir(out_dir);
  std::vector<SweepRow> rows;
  for (int n : agent_counts) {
    TrainingConfig c = cfg;
    c.env.num_agents = n;
    c.env.num_channels = scaled_channels(n);
    c.env.initial_energy.clear();
    c.validate();
    const auto run = run_experiment(c, out_dir / fmt::format("agents_{}", n));
    SweepRow r;
    r.agents = n;
    r.channels = c.env.num_channels;
    r.episodes = c.episodes;
    const std::size_t w = std::min(run.metrics.size(), static_cast<std::size_t>(c.smoothing_window) * 5);
    r.summary = summarize(std::vector<MetricsRow>(run.metrics.end() - static_cast<std::ptrdiff_t>(w), run.metrics.end()));
    r.rounds_completed = run.rounds_completed;
    r.rounds_aborted = run.rounds_aborted;
    r.stored_transitions = run.stored_transitions;
    r.replay_capacity = run.replay_capacity;
    rows.push_back(r);
  }
  write_file(out_dir / "sweep.csv", sweep_csv(rows));
  return rows;
}

namespace {

std::size_t col(std::string_view name) {
  const auto& names = metric_names();
  for (std::size_t c = 0; c < names.size(); ++c)
    if (names[c] == name) return c;
  return 0;
}

}  // namespace

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::string s = fmt::format("{:>7} {:>8} {:>8} {:>18} {:>18} {:>7} {:>14}\n", "agents", "channels", "episodes",
                              "reward", "reliability", "rounds", "replay_used");
  for (const auto& r : rows) {
    const auto& rw = r.summary[col("mean_reward")];
    const auto& rl = r.summary[col("reliability")];
    s += fmt::format("{:>7} {:>8} {:>8} {:>9.3f} ± {:<6.3f} {:>9.3f} ± {:<6.3f} {:>7} {:>7}/{:<7}\n", r.agents,
                     r.channels, r.episodes, rw.mean, rw.std, rl.mean, rl.std, r.rounds_completed,
                     r.stored_transitions, r.replay_capacity);
  }
  return s;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "agents,channels,episodes,rounds_completed,rounds_aborted,stored_transitions,replay_capacity";
  for (auto n : metric_names()) s += fmt::format(",{0}_mean,{0}_std", n);
  s += "\n";
  for (const auto& r : rows) {
    s += fmt::format("{},{},{},{},{},{},{}", r.agents, r.channels, r.episodes, r.rounds_completed, r.rounds_aborted,
                     r.stored_transitions, r.replay_capacity);
    for (const auto& ms : r.summary) s += fmt::format(",{:.17g},{:.17g}", ms.mean, ms.std);
    s += "\n";
  }
  return s;
}

std::vector<CompareEntry> compare_runs(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.size() < 2) throw ConfigError("comparison needs at least two runs");
  std::vector<CompareEntry> out;
  for (const auto& dir : run_dirs) {
    const auto metrics_path = dir / "metrics.csv";
    std::vector<MetricsRow> rows;
    try {
      rows = read_metrics_csv(metrics_path);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("incompatible run schema: {}", e.what()));
    }
    int window = TrainingConfig{}.smoothing_window;
    if (fs::exists(dir / "config.txt")) window = load_config(dir / "config.txt").smoothing_window;
    CompareEntry e;
    e.run = dir.string();
    e.window = std::min(rows.size(), static_cast<std::size_t>(window) * 5);
    e.summary = summarize(std::vector<MetricsRow>(rows.end() - static_cast<std::ptrdiff_t>(e.window), rows.end()));
    out.push_back(std::move(e));
  }
  return out;
}

std::string compare_table(const std::vector<CompareEntry>& entries) {
  std::string s = fmt::format("{:<20}", "metric");
  for (std::size_t j = 0; j < entries.size(); ++j) s += fmt::format(" {:>24}", fmt::format("run{}", j));
  for (std::size_t j = 1; j < entries.size(); ++j) s += fmt::format(" {:>14}", fmt::format("delta{}", j));
  s += "\n";
  for (std::size_t c = 0; c < kNumMetricColumns; ++c) {
    s += fmt::format("{:<20}", metric_names()[c]);
    for (const auto& e : entries) s += fmt::format(" {:>24}", fmt::format("{:.4g} ± {:.3g}", e.summary[c].mean, e.summary[c].std));
    for (std::size_t j = 1; j < entries.size(); ++j)
      s += fmt::format(" {:>14.4g}", entries[j].summary[c].mean - entries[0].summary[c].mean);
    s += "\n";
  }
  for (std::size_t j = 0; j < entries.size(); ++j)
    s += fmt::format("run{}: {} (last {} episodes)\n", j, entries[j].run, entries[j].window);
  return s;
}

std::string compare_csv(const std::vector<CompareEntry>& entries) {
  std::string s = "run,metric,mean,std,delta\n";
  for (const auto& e : entries)
    for (std::size_t c = 0; c < kNumMetricColumns; ++c)
      s += fmt::format("{},{},{:.17g},{:.17g},{:.17g}\n", e.run, metric_names()[c], e.summary[c].mean,
                       e.summary[c].std, e.summary[c].mean - entries.front().summary[c].mean);
  return s;
}

}  // namespace fermi
