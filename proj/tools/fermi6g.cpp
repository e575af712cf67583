#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fermi/config.hpp"
#include "fermi/errors.hpp"
#include "fermi/experiment.hpp"
#include "fermi/logging.hpp"

namespace fs = std::filesystem;
using namespace fermi;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<int> episodes;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool need_out) {
  cmd->add_option("--config", a.config, "key=value config file; missing keys keep their defaults")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_option("--policy", a.policy, "fermi6g | fedmarl_baseline | random");
  cmd->add_option("--episodes", a.episodes, "override the episode count");
  auto* out = cmd->add_option("--out", a.out, "output directory (must be absent or empty)");
  if (need_out) out->required();
}

TrainingConfig effective_config(const CommonArgs& a) {
  TrainingConfig c = a.config.empty() ? TrainingConfig{} : load_config(a.config);
  if (a.seed) c.seed = *a.seed;
  if (a.policy) c.policy = parse_policy(*a.policy);
  if (a.episodes) c.episodes = *a.episodes;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated multi-agent DRQN simulator for 6G edge offloading"};
  app.require_subcommand(1);

  CommonArgs train_args;
  auto* train = app.add_subcommand("train", "train agents and write metrics, checkpoints and a manifest");
  add_common(train, train_args, true);

  CommonArgs eval_args;
  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "greedy rollouts from a checkpoint, no learning");
  add_common(eval, eval_args, true);
  eval->add_option("--checkpoint", checkpoint, "model file written by train")->check(CLI::ExistingFile);

  CommonArgs sweep_args;
  std::vector<int> agent_counts;
  auto* sweep = app.add_subcommand("sweep", "repeat training over agent counts with scaled channels");
  add_common(sweep, sweep_args, true);
  sweep->add_option("--agents", agent_counts, "comma-separated agent counts")->delimiter(',')->required();

  std::vector<std::string> run_dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "mean ± std of every metric over the trailing window");
  compare->add_option("runs", run_dirs, "run directories")->required()->expected(2, -1);
  compare->add_option("--out", compare_out, "also write the comparison as CSV to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    init_logging();
    if (train->parsed()) {
      const auto c = effective_config(train_args);
      const auto res = run_experiment(c, train_args.out);
      if (!res.metrics.empty()) {
        const auto& last = res.metrics.back();
        fmt::print("episodes={} final_reward={:.4f} final_reliability={:.4f} rounds={} out={}\n", res.metrics.size(),
                   last.mean_reward, last.reliability, res.rounds_completed, train_args.out);
      } else {
        fmt::print("episodes=0 out={}\n", train_args.out);
      }
    } else if (eval->parsed()) {
      const auto c = effective_config(eval_args);
      std::optional<fs::path> ck;
      if (!checkpoint.empty()) ck = checkpoint;
      const int episodes = eval_args.episodes.value_or(c.smoothing_window * 5);
      const auto res = run_evaluation(c, ck, episodes, eval_args.out);
      const auto s = summarize(res.metrics);
      for (std::size_t i = 0; i < kNumMetricColumns; ++i)
        fmt::print("{:<20} {:>12.5g} ± {:.4g}\n", metric_names()[i], s[i].mean, s[i].std);
    } else if (sweep->parsed()) {
      const auto c = effective_config(sweep_args);
      const auto rows = scalability_sweep(c, agent_counts, sweep_args.out);
      fmt::print("{}", sweep_table(rows));
    } else if (compare->parsed()) {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      const auto entries = compare_runs(dirs);
      fmt::print("{}", compare_table(entries));
      if (!compare_out.empty()) {
        std::FILE* f = std::fopen(compare_out.c_str(), "wx");
        if (!f) throw IoError(fmt::format("cannot create {} (it may already exist)", compare_out));
        fmt::print(f, "{}", compare_csv(entries));
        std::fclose(f);
      }
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
