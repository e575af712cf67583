#include "fermi/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "fermi/errors.hpp"

namespace fermi {

void EnvConfig::validate() const {
  if (num_agents <= 0) throw ConfigError("NUM_AGENTS must be > 0");
  if (num_channels <= 0) throw ConfigError("NUM_CHANNELS must be > 0");
  if (num_agents > 65535) throw ConfigError("NUM_AGENTS must fit in 16 bits");
  if (steps <= 0) throw ConfigError("STEPS must be > 0");
  if (!(grid_size > 0.0)) throw ConfigError("GRID_SIZE must be > 0");
  for (double c : server_pos)
    if (c < 0.0 || c > grid_size) throw ConfigError("SERVER_POS must lie on the grid");
  if (retry_prob < 0.0 || retry_prob > 1.0) throw ConfigError("RETRY_PROB must be in [0,1]");
  if (noise_std < 0.0) throw ConfigError("NOISE_STD must be >= 0");
  if (tx_delay_s < 0.0) throw ConfigError("TX_DELAY_S must be >= 0");
  if (energy_threshold < 0.0 || energy_threshold > 1.0)
    throw ConfigError("ENERGY_THRESHOLD must be in [0,1]");
  if (queue_max <= 0) throw ConfigError("QUEUE_MAX must be > 0");
  if (channel_capacity <= 0) throw ConfigError("CHANNEL_CAPACITY must be > 0");
  if (!(bandwidth_hz > 0.0)) throw ConfigError("BANDWIDTH_HZ must be > 0");
  if (arrival_prob < 0.0 || arrival_prob > 1.0) throw ConfigError("ARRIVAL_PROB must be in [0,1]");
  if (max_attempts <= 0) throw ConfigError("MAX_ATTEMPTS must be > 0");
  if (!(min_speed > 0.0) || max_speed < min_speed)
    throw ConfigError("speed range must satisfy 0 < MIN_SPEED <= MAX_SPEED");
  if (heading_noise < 0.0) throw ConfigError("HEADING_NOISE must be >= 0");
  if (!(step_s > 0.0)) throw ConfigError("STEP_S must be > 0");
  for (auto [agent, e] : initial_energy) {
    if (agent < 0 || agent >= num_agents) throw ConfigError("initial energy override for unknown agent");
    if (e < 0.0 || e > 1.0) throw ConfigError("initial energy override outside [0,1]");
  }
}

void TrainingConfig::validate() const {
  env.validate();
  weights.validate();
  if (episodes < 0) throw ConfigError("EPISODES must be >= 0");
  if (buffer <= 0) throw ConfigError("BUFFER must be > 0");
  if (batch <= 0) throw ConfigError("BATCH must be > 0");
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("GAMMA must be in [0,1)");
  if (lr < 0.0) throw ConfigError("LR must be >= 0");
  if (eps_start < 0.0 || eps_start > 1.0) throw ConfigError("EPS_START must be in [0,1]");
  if (eps_end < 0.0 || eps_end > eps_start) throw ConfigError("EPS_END must be in [0,EPS_START]");
  if (eps_decay <= 0.0 || eps_decay > 1.0) throw ConfigError("EPS_DECAY must be in (0,1]");
  if (sync_freq <= 0) throw ConfigError("SYNC_FREQ must be > 0");
  if (sequence_length <= 0) throw ConfigError("SEQUENCE_LENGTH must be > 0");
  if (sequence_length > env.steps) throw ConfigError("SEQUENCE_LENGTH must be <= STEPS");
  if (sequence_length > buffer) throw ConfigError("SEQUENCE_LENGTH must be <= BUFFER");
  if (!(clip_norm > 0.0)) throw ConfigError("CLIP_NORM must be > 0");
  if (smoothing_window <= 0) throw ConfigError("SMOOTHING_WINDOW must be > 0");
  if (agg_interval <= 0) throw ConfigError("AGG_INTERVAL must be > 0");
  if (hidden <= 0) throw ConfigError("HIDDEN_SIZE must be > 0");
  if (!(reward_scale > 0.0)) throw ConfigError("REWARD_SCALE must be > 0");
  if (per_alpha < 0.0) throw ConfigError("PER_ALPHA must be >= 0");
  if (per_beta_start < 0.0 || per_beta_start > 1.0) throw ConfigError("PER_BETA must be in [0,1]");
  if (priority_eta < 0.0) throw ConfigError("PRIORITY_ETA must be >= 0");
}

std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::Fermi6G: return "fermi6g";
    case PolicyKind::FedMarlBaseline: return "fedmarl_baseline";
    case PolicyKind::Random: return "random";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view name) {
  if (name == "fermi6g") return PolicyKind::Fermi6G;
  if (name == "fedmarl_baseline") return PolicyKind::FedMarlBaseline;
  if (name == "random") return PolicyKind::Random;
  throw ConfigError(fmt::format("POLICY: unknown policy '{}'", name));
}

std::string_view to_string(OptimizerKind o) { return o == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError(fmt::format("OPTIMIZER: unknown optimizer '{}'", name));
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, v));
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw ConfigError(fmt::format("{}: value must be finite", key));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  std::string u = upper(v);
  if (u == "1" || u == "TRUE" || u == "ON" || u == "YES") return true;
  if (u == "0" || u == "FALSE" || u == "OFF" || u == "NO") return false;
  throw ConfigError(fmt::format("{}: expected a boolean, got '{}'", key, v));
}

struct Field {
  std::function<void(TrainingConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const TrainingConfig&)> get;
};

template <typename T>
Field int_field(T TrainingConfig::*m) {
  return {[m](TrainingConfig& c, const std::string& k, const std::string& v) {
            c.*m = parse_number<T>(k, v);
          },
          [m](const TrainingConfig& c) { return std::to_string(c.*m); }};
}

Field real_field(double TrainingConfig::*m) {
  return {[m](TrainingConfig& c, const std::string& k, const std::string& v) {
            c.*m = parse_number<double>(k, v);
          },
          [m](const TrainingConfig& c) { return fmt_double(c.*m); }};
}

template <typename T>
Field env_int(T EnvConfig::*m) {
  return {[m](TrainingConfig& c, const std::string& k, const std::string& v) {
            c.env.*m = parse_number<T>(k, v);
          },
          [m](const TrainingConfig& c) { return std::to_string(c.env.*m); }};
}

Field env_real(double EnvConfig::*m) {
  return {[m](TrainingConfig& c, const std::string& k, const std::string& v) {
            c.env.*m = parse_number<double>(k, v);
          },
          [m](const TrainingConfig& c) { return fmt_double(c.env.*m); }};
}

Field weight(double RewardWeights::*m) {
  return {[m](TrainingConfig& c, const std::string& k, const std::string& v) {
            c.weights.*m = parse_number<double>(k, v);
          },
          [m](const TrainingConfig& c) { return fmt_double(c.weights.*m); }};
}

using FieldList = std::vector<std::pair<std::string, Field>>;

const FieldList& main_fields() {
  static const FieldList fields = {
      {"NUM_AGENTS", env_int(&EnvConfig::num_agents)},
      {"NUM_CHANNELS", env_int(&EnvConfig::num_channels)},
      {"STEPS", env_int(&EnvConfig::steps)},
      {"GRID_SIZE", env_real(&EnvConfig::grid_size)},
      {"SERVER_POS",
       {[](TrainingConfig& c, const std::string& k, const std::string& v) {
          auto comma = v.find(',');
          if (comma == std::string::npos) throw ConfigError(k + ": expected 'x,y'");
          c.env.server_pos = {parse_number<double>(k, trim(v.substr(0, comma))),
                              parse_number<double>(k, trim(v.substr(comma + 1)))};
        },
        [](const TrainingConfig& c) {
          return fmt_double(c.env.server_pos[0]) + "," + fmt_double(c.env.server_pos[1]);
        }}},
      {"RETRY_PROB", env_real(&EnvConfig::retry_prob)},
      {"NOISE_STD", env_real(&EnvConfig::noise_std)},
      {"TX_DELAY_S", env_real(&EnvConfig::tx_delay_s)},
      {"ENERGY_THRESHOLD", env_real(&EnvConfig::energy_threshold)},
      {"QUEUE_MAX", env_int(&EnvConfig::queue_max)},
      {"CHANNEL_CAPACITY", env_int(&EnvConfig::channel_capacity)},
      {"BANDWIDTH_HZ", env_real(&EnvConfig::bandwidth_hz)},
      {"ARRIVAL_PROB", env_real(&EnvConfig::arrival_prob)},
      {"MAX_ATTEMPTS", env_int(&EnvConfig::max_attempts)},
      {"MIN_SPEED", env_real(&EnvConfig::min_speed)},
      {"MAX_SPEED", env_real(&EnvConfig::max_speed)},
      {"HEADING_NOISE", env_real(&EnvConfig::heading_noise)},
      {"STEP_S", env_real(&EnvConfig::step_s)},
      {"POLICY",
       {[](TrainingConfig& c, const std::string&, const std::string& v) { c.policy = parse_policy(v); },
        [](const TrainingConfig& c) { return std::string(to_string(c.policy)); }}},
      {"EPISODES", int_field(&TrainingConfig::episodes)},
      {"BUFFER", int_field(&TrainingConfig::buffer)},
      {"BATCH", int_field(&TrainingConfig::batch)},
      {"GAMMA", real_field(&TrainingConfig::gamma)},
      {"LR", real_field(&TrainingConfig::lr)},
      {"EPS_START", real_field(&TrainingConfig::eps_start)},
      {"EPS_END", real_field(&TrainingConfig::eps_end)},
      {"EPS_DECAY", real_field(&TrainingConfig::eps_decay)},
      {"SYNC_FREQ", int_field(&TrainingConfig::sync_freq)},
      {"SEQUENCE_LENGTH", int_field(&TrainingConfig::sequence_length)},
      {"CLIP_NORM", real_field(&TrainingConfig::clip_norm)},
      {"SMOOTHING_WINDOW", int_field(&TrainingConfig::smoothing_window)},
      {"AGG_INTERVAL", int_field(&TrainingConfig::agg_interval)},
      {"REWARD_ADAPTATION",
       {[](TrainingConfig& c, const std::string& k, const std::string& v) {
          c.reward_adaptation = parse_bool(k, v);
        },
        [](const TrainingConfig& c) { return std::string(c.reward_adaptation ? "true" : "false"); }}},
      {"SEED", int_field(&TrainingConfig::seed)},
      {"HIDDEN_SIZE", int_field(&TrainingConfig::hidden)},
      {"OPTIMIZER",
       {[](TrainingConfig& c, const std::string&, const std::string& v) {
          c.optimizer = parse_optimizer(v);
        },
        [](const TrainingConfig& c) { return std::string(to_string(c.optimizer)); }}},
      {"REWARD_SCALE", real_field(&TrainingConfig::reward_scale)},
      {"PER_ALPHA", real_field(&TrainingConfig::per_alpha)},
      {"PER_BETA", real_field(&TrainingConfig::per_beta_start)},
      {"PRIORITY_ETA", real_field(&TrainingConfig::priority_eta)},
      {"SECURE_AGGREGATION",
       {[](TrainingConfig& c, const std::string& k, const std::string& v) {
          c.secure_aggregation = parse_bool(k, v);
        },
        [](const TrainingConfig& c) { return std::string(c.secure_aggregation ? "true" : "false"); }}},
  };
  return fields;
}

const FieldList& reward_fields() {
  static const FieldList fields = {
      {"W_L", weight(&RewardWeights::w_latency)},
      {"W_E", weight(&RewardWeights::w_energy)},
      {"W_F", weight(&RewardWeights::w_fairness)},
      {"W_SE", weight(&RewardWeights::w_spectral)},
      {"W_R", weight(&RewardWeights::w_reliability)},
      {"W_EE", weight(&RewardWeights::w_energy_eff)},
      {"W_MAC", weight(&RewardWeights::w_mac)},
      {"BETA_JAIN", weight(&RewardWeights::beta_jain)},
      {"BETA_ENTROPY", weight(&RewardWeights::beta_entropy)},
      {"LAMBDA_EXTRA", weight(&RewardWeights::lambda_extra)},
  };
  return fields;
}

const Field* find_field(const FieldList& list, const std::string& key) {
  for (const auto& [name, f] : list)
    if (name == key) return &f;
  return nullptr;
}

}  // namespace

TrainingConfig parse_config(std::string_view text) {
  TrainingConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  bool in_reward = false;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(fmt::format("line {}: malformed section header", line_no));
      std::string section = upper(trim(std::string_view(line).substr(1, line.size() - 2)));
      if (section == "REWARD") {
        in_reward = true;
      } else if (section == "ENV" || section == "TRAINING" || section == "GENERAL") {
        in_reward = false;
      } else {
        throw ConfigError(fmt::format("line {}: unknown section [{}]", line_no, section));
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("line {}: expected KEY = value, got '{}'", line_no, line));
    std::string key = upper(trim(std::string_view(line).substr(0, eq)));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no));
    if (value.empty()) throw ConfigError(fmt::format("{}: missing value", key));
    const Field* f = find_field(in_reward ? reward_fields() : main_fields(), key);
    if (!f) throw ConfigError(fmt::format("{}: unknown key", key));
    f->set(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

TrainingConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string print_config(const TrainingConfig& c) {
  std::string out;
  for (const auto& [name, f] : main_fields()) out += fmt::format("{} = {}\n", name, f.get(c));
  out += "\n[reward]\n";
  for (const auto& [name, f] : reward_fields()) out += fmt::format("{} = {}\n", name, f.get(c));
  return out;
}

}  // namespace fermi
