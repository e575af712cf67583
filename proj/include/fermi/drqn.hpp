#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fermi/env.hpp"
#include "fermi/rng.hpp"

namespace fermi {

inline constexpr int kNumHeads = 3;
enum class Head : int { App = 0, Mac = 1, Cpu = 2 };

/// Dimensions of the recurrent Q-network.
struct NetShape {
  int obs_dim = static_cast<int>(kObsDim);
  int hidden = 32;
  std::array<int, kNumHeads> heads{2, 3, kNumCpuLevels};

  std::size_t param_count() const;
  bool operator==(const NetShape&) const = default;
};

/// Offsets of each parameter block in the flat vector. All matrices are
/// stored row-major, in this order:
///   W_in (H x obs), b_in (H),
///   W_x (4H x H), W_h (4H x H), b_gates (4H)   gates ordered i, f, g, o
///   for each head: W (n x H), b (n)            heads ordered app, mac, cpu
struct ParamLayout {
  std::size_t w_in, b_in, w_x, w_h, b_gates;
  std::array<std::size_t, kNumHeads> w_head, b_head;
  std::size_t total;
  explicit ParamLayout(const NetShape& s);
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct HiddenState {
  Eigen::MatrixXd h;  // hidden x batch
  Eigen::MatrixXd c;
};

struct QValues {
  std::array<std::vector<double>, kNumHeads> heads;
  const std::vector<double>& app() const { return heads[0]; }
  const std::vector<double>& mac() const { return heads[1]; }
  const std::vector<double>& cpu() const { return heads[2]; }
};

struct SequenceOutput {
  std::vector<QValues> q;  // one per step
  HiddenState hidden_out;
};

/// Input projection, gated recurrent cell with forget/input/output gates,
/// and three linear Q heads.
class DrqnNet {
 public:
  DrqnNet() = default;
  explicit DrqnNet(NetShape shape);

  /// Weights uniform in +-1/sqrt(H), biases zero except forget gate bias 1.
  void init(Rng& rng);

  const NetShape& shape() const { return shape_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<const double> params() const { return {params_.data(), static_cast<std::size_t>(params_.size())}; }
  std::span<double> params() { return {params_.data(), static_cast<std::size_t>(params_.size())}; }
  const Eigen::VectorXd& param_vector() const { return params_; }
  Eigen::VectorXd& param_vector() { return params_; }
  void set_params(std::span<const double> p);

  HiddenState zero_state(int batch = 1) const;

  /// One recurrent step for a single observation; updates `state` in place.
  QValues step(std::span<const double> obs, HiddenState& state) const;

  /// Runs a whole observation sequence from `hidden_in`.
  SequenceOutput forward(std::span<const Observation> obs_seq, const HiddenState& hidden_in) const;

 private:
  NetShape shape_;
  ParamLayout layout_{NetShape{}};
  Eigen::VectorXd params_;
};

/// Minibatch of stored episodes, time-major. `obs` holds T+1 observations
/// per sequence so the target network sees the successor of the last step.
struct TrainBatch {
  int steps = 0;  // T (longest sequence)
  int size = 0;   // B
  std::vector<Eigen::MatrixXd> obs;                       // T+1 entries, obs_dim x B
  std::vector<std::vector<std::array<int, kNumHeads>>> actions;  // [t][b]
  Eigen::MatrixXd rewards;   // T x B
  Eigen::MatrixXd done;      // T x B, 1 at terminal steps
  std::vector<int> lengths;  // per sequence
  std::vector<double> is_weights;
  std::vector<double> delay_norm;    // per sequence, for priorities
  std::vector<double> interference;  // per sequence, for priorities
};

struct TdOptions {
  double gamma = 0.99;
  double reward_scale = 1.0;
  std::array<bool, kNumHeads> train_heads{true, true, true};
  double priority_eta = 0.5;
  double priority_eps = 1e-3;
};

struct TdDiagnostics {
  std::vector<double> mean_abs_td;  // per sequence
};

/// Importance-weighted squared TD loss, summed over heads and averaged over
/// steps and sequences. Writes dLoss/dparams into `grad` when non-null.
/// Targets come from `target` and are treated as constants.
double td_loss(const DrqnNet& net, const DrqnNet& target, const TrainBatch& batch,
               const TdOptions& opt, Eigen::VectorXd* grad, TdDiagnostics* diag = nullptr);

/// Plain gradient descent or Adam over a flat parameter vector.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, std::size_t dim);
  void apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
  void reset();
  OptimizerKind kind() const { return kind_; }

 private:
  OptimizerKind kind_ = OptimizerKind::Sgd;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

struct TdResult {
  double loss = 0.0;
  double grad_norm = 0.0;
  bool applied = false;
  bool fault = false;
  std::vector<double> new_priorities;
};

/// One learner update: TD loss, BPTT gradient, global-norm clipping, step.
/// A non-finite loss or gradient leaves the parameters untouched.
TdResult td_update(DrqnNet& net, const DrqnNet& target, const TrainBatch& batch,
                   const TdOptions& opt, double lr, double clip_norm, Optimizer& optimizer);

/// Scales `grad` in place so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_by_global_norm(Eigen::VectorXd& grad, double max_norm);

}  // namespace fermi
