#include "fermi/drqn.hpp"

#include <cmath>

#include <fmt/format.h>

#include "fermi/errors.hpp"

namespace fermi {

namespace {

using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& a) {
  return (1.0 + (-a.array()).exp()).inverse().matrix();
}

struct View {
  ConstRowMap w_in, w_x, w_h;
  ConstVecMap b_in, b_gates;
  std::array<ConstRowMap, kNumHeads> w_head;
  std::array<ConstVecMap, kNumHeads> b_head;

  View(const Eigen::VectorXd& p, const NetShape& s, const ParamLayout& l)
      : w_in(p.data() + l.w_in, s.hidden, s.obs_dim),
        w_x(p.data() + l.w_x, 4 * s.hidden, s.hidden),
        w_h(p.data() + l.w_h, 4 * s.hidden, s.hidden),
        b_in(p.data() + l.b_in, s.hidden),
        b_gates(p.data() + l.b_gates, 4 * s.hidden),
        w_head{ConstRowMap(p.data() + l.w_head[0], s.heads[0], s.hidden),
               ConstRowMap(p.data() + l.w_head[1], s.heads[1], s.hidden),
               ConstRowMap(p.data() + l.w_head[2], s.heads[2], s.hidden)},
        b_head{ConstVecMap(p.data() + l.b_head[0], s.heads[0]),
               ConstVecMap(p.data() + l.b_head[1], s.heads[1]),
               ConstVecMap(p.data() + l.b_head[2], s.heads[2])} {}
};

struct GradView {
  RowMap w_in, w_x, w_h;
  VecMap b_in, b_gates;
  std::array<RowMap, kNumHeads> w_head;
  std::array<VecMap, kNumHeads> b_head;

  GradView(Eigen::VectorXd& p, const NetShape& s, const ParamLayout& l)
      : w_in(p.data() + l.w_in, s.hidden, s.obs_dim),
        w_x(p.data() + l.w_x, 4 * s.hidden, s.hidden),
        w_h(p.data() + l.w_h, 4 * s.hidden, s.hidden),
        b_in(p.data() + l.b_in, s.hidden),
        b_gates(p.data() + l.b_gates, 4 * s.hidden),
        w_head{RowMap(p.data() + l.w_head[0], s.heads[0], s.hidden),
               RowMap(p.data() + l.w_head[1], s.heads[1], s.hidden),
               RowMap(p.data() + l.w_head[2], s.heads[2], s.hidden)},
        b_head{VecMap(p.data() + l.b_head[0], s.heads[0]), VecMap(p.data() + l.b_head[1], s.heads[1]),
               VecMap(p.data() + l.b_head[2], s.heads[2])} {}
};

// Per-step activations kept for backpropagation.
struct StepCache {
  Eigen::MatrixXd x, z, i, f, g, o, c, tc, h;
  std::array<Eigen::MatrixXd, kNumHeads> q;
};

void cell_forward(const View& v, int hidden, const Eigen::MatrixXd& x, const Eigen::MatrixXd& h_prev,
                  const Eigen::MatrixXd& c_prev, StepCache& s) {
  const int H = hidden;
  s.x = x;
  s.z = ((v.w_in * x).colwise() + v.b_in).array().tanh().matrix();
  Eigen::MatrixXd a = (v.w_x * s.z + v.w_h * h_prev).colwise() + v.b_gates;
  s.i = sigmoid(a.middleRows(0, H));
  s.f = sigmoid(a.middleRows(H, H));
  s.g = a.middleRows(2 * H, H).array().tanh().matrix();
  s.o = sigmoid(a.middleRows(3 * H, H));
  s.c = (s.f.array() * c_prev.array() + s.i.array() * s.g.array()).matrix();
  s.tc = s.c.array().tanh().matrix();
  s.h = (s.o.array() * s.tc.array()).matrix();
  for (int k = 0; k < kNumHeads; ++k) s.q[k] = (v.w_head[k] * s.h).colwise() + v.b_head[k];
}

std::vector<StepCache> run_sequence(const View& v, int hidden, const std::vector<Eigen::MatrixXd>& obs,
                                    int steps, int batch) {
  std::vector<StepCache> cache(static_cast<std::size_t>(steps));
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hidden, batch);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(hidden, batch);
  for (int t = 0; t < steps; ++t) {
    cell_forward(v, hidden, obs[static_cast<std::size_t>(t)], h, c, cache[static_cast<std::size_t>(t)]);
    h = cache[static_cast<std::size_t>(t)].h;
    c = cache[static_cast<std::size_t>(t)].c;
  }
  return cache;
}

}  // namespace

std::size_t NetShape::param_count() const { return ParamLayout(*this).total; }

ParamLayout::ParamLayout(const NetShape& s) {
  const auto H = static_cast<std::size_t>(s.hidden);
  const auto D = static_cast<std::size_t>(s.obs_dim);
  std::size_t off = 0;
  w_in = off;
  off += H * D;
  b_in = off;
  off += H;
  w_x = off;
  off += 4 * H * H;
  w_h = off;
  off += 4 * H * H;
  b_gates = off;
  off += 4 * H;
  for (int k = 0; k < kNumHeads; ++k) {
    const auto n = static_cast<std::size_t>(s.heads[static_cast<std::size_t>(k)]);
    w_head[static_cast<std::size_t>(k)] = off;
    off += n * H;
    b_head[static_cast<std::size_t>(k)] = off;
    off += n;
  }
  total = off;
}

DrqnNet::DrqnNet(NetShape shape) : shape_(shape), layout_(shape) {
  if (shape.obs_dim <= 0 || shape.hidden <= 0) throw ShapeError("network dimensions must be positive");
  for (int n : shape.heads)
    if (n <= 0) throw ShapeError("head widths must be positive");
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.total));
}

void DrqnNet::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(shape_.hidden));
  std::uniform_real_distribution<double> u(-bound, bound);
  params_.setZero();
  auto fill = [&](std::size_t off, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) params_[static_cast<Eigen::Index>(off + j)] = u(rng);
  };
  const auto H = static_cast<std::size_t>(shape_.hidden);
  fill(layout_.w_in, H * static_cast<std::size_t>(shape_.obs_dim));
  fill(layout_.w_x, 4 * H * H);
  fill(layout_.w_h, 4 * H * H);
  for (int k = 0; k < kNumHeads; ++k)
    fill(layout_.w_head[static_cast<std::size_t>(k)], static_cast<std::size_t>(shape_.heads[static_cast<std::size_t>(k)]) * H);
  for (std::size_t j = 0; j < H; ++j) params_[static_cast<Eigen::Index>(layout_.b_gates + H + j)] = 1.0;
}

void DrqnNet::set_params(std::span<const double> p) {
  if (p.size() != layout_.total)
    throw ShapeError(fmt::format("parameter vector has {} entries, expected {}", p.size(), layout_.total));
  params_ = ConstVecMap(p.data(), static_cast<Eigen::Index>(p.size()));
}

HiddenState DrqnNet::zero_state(int batch) const {
  return {Eigen::MatrixXd::Zero(shape_.hidden, batch), Eigen::MatrixXd::Zero(shape_.hidden, batch)};
}

QValues DrqnNet::step(std::span<const double> obs, HiddenState& state) const {
  if (obs.size() != static_cast<std::size_t>(shape_.obs_dim))
    throw ShapeError(fmt::format("observation has {} features, expected {}", obs.size(), shape_.obs_dim));
  if (state.h.rows() != shape_.hidden || state.h.cols() != 1 || state.c.rows() != shape_.hidden ||
      state.c.cols() != 1)
    throw ShapeError("hidden state does not match the network");
  const View v(params_, shape_, layout_);
  Eigen::MatrixXd x = ConstVecMap(obs.data(), shape_.obs_dim);
  StepCache s;
  cell_forward(v, shape_.hidden, x, state.h, state.c, s);
  state.h = s.h;
  state.c = s.c;
  QValues q;
  for (int k = 0; k < kNumHeads; ++k)
    q.heads[static_cast<std::size_t>(k)].assign(s.q[k].data(), s.q[k].data() + s.q[k].size());
  return q;
}

SequenceOutput DrqnNet::forward(std::span<const Observation> obs_seq, const HiddenState& hidden_in) const {
  SequenceOutput out;
  out.hidden_out = hidden_in;
  out.q.reserve(obs_seq.size());
  for (const auto& o : obs_seq) out.q.push_back(step(o.features, out.hidden_out));
  return out;
}

double td_loss(const DrqnNet& net, const DrqnNet& target, const TrainBatch& batch, const TdOptions& opt,
               Eigen::VectorXd* grad, TdDiagnostics* diag) {
  const NetShape& s = net.shape();
  if (!(target.shape() == s)) throw ShapeError("online and target networks differ in shape");
  const int T = batch.steps;
  const int B = batch.size;
  if (T <= 0 || B <= 0) throw ShapeError("empty training batch");
  if (batch.obs.size() != static_cast<std::size_t>(T + 1)) throw ShapeError("batch needs T+1 observations");
  for (const auto& o : batch.obs)
    if (o.rows() != s.obs_dim || o.cols() != B) throw ShapeError("batch observation has the wrong shape");
  if (batch.lengths.size() != static_cast<std::size_t>(B) || batch.is_weights.size() != static_cast<std::size_t>(B))
    throw ShapeError("batch metadata size mismatch");

  const View online(net.param_vector(), s, net.layout());
  const View tgt(target.param_vector(), s, target.layout());
  const auto cache = run_sequence(online, s.hidden, batch.obs, T, B);
  const auto tcache = run_sequence(tgt, s.hidden, batch.obs, T + 1, B);

  std::array<std::vector<Eigen::MatrixXd>, kNumHeads> dq;
  for (int k = 0; k < kNumHeads; ++k)
    dq[k].assign(static_cast<std::size_t>(T), Eigen::MatrixXd::Zero(s.heads[static_cast<std::size_t>(k)], B));

  if (diag) diag->mean_abs_td.assign(static_cast<std::size_t>(B), 0.0);
  int active_heads = 0;
  for (bool on : opt.train_heads) active_heads += on ? 1 : 0;

  double loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const int len = batch.lengths[static_cast<std::size_t>(b)];
    if (len <= 0 || len > T) throw ShapeError("sequence length out of range");
    const double coef = batch.is_weights[static_cast<std::size_t>(b)] / (static_cast<double>(len) * B);
    double abs_sum = 0.0;
    for (int t = 0; t < len; ++t) {
      const auto& act = batch.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)];
      const double r = batch.rewards(t, b) * opt.reward_scale;
      const double cont = 1.0 - batch.done(t, b);
      for (int k = 0; k < kNumHeads; ++k) {
        if (!opt.train_heads[static_cast<std::size_t>(k)]) continue;
        const double next_max = tcache[static_cast<std::size_t>(t + 1)].q[k].col(b).maxCoeff();
        const double y = r + opt.gamma * cont * next_max;
        const int a = act[static_cast<std::size_t>(k)];
        if (a < 0 || a >= s.heads[static_cast<std::size_t>(k)]) throw ShapeError("stored action out of range");
        const double delta = y - cache[static_cast<std::size_t>(t)].q[k](a, b);
        loss += coef * delta * delta;
        dq[k][static_cast<std::size_t>(t)](a, b) = -2.0 * coef * delta;
        abs_sum += std::abs(delta);
      }
    }
    if (diag && active_heads > 0)
      diag->mean_abs_td[static_cast<std::size_t>(b)] = abs_sum / (static_cast<double>(len) * active_heads);
  }

  if (!grad) return loss;

  grad->setZero(static_cast<Eigen::Index>(net.layout().total));
  GradView g(*grad, s, net.layout());
  const int H = s.hidden;
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(H, B);
  Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(H, B);
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(H, B);
  Eigen::MatrixXd da(4 * H, B);

  for (int t = T - 1; t >= 0; --t) {
    const auto& c = cache[static_cast<std::size_t>(t)];
    const Eigen::MatrixXd& h_prev = t > 0 ? cache[static_cast<std::size_t>(t - 1)].h : zeros;
    const Eigen::MatrixXd& c_prev = t > 0 ? cache[static_cast<std::size_t>(t - 1)].c : zeros;

    Eigen::MatrixXd dh = dh_next;
    for (int k = 0; k < kNumHeads; ++k) {
      const auto& d = dq[k][static_cast<std::size_t>(t)];
      g.w_head[k].noalias() += d * c.h.transpose();
      g.b_head[k] += d.rowwise().sum();
      dh.noalias() += online.w_head[k].transpose() * d;
    }
    const Eigen::ArrayXXd dO = dh.array() * c.tc.array();
    const Eigen::ArrayXXd dC = dh.array() * c.o.array() * (1.0 - c.tc.array().square()) + dc_next.array();
    const Eigen::ArrayXXd dF = dC * c_prev.array();
    const Eigen::ArrayXXd dI = dC * c.g.array();
    const Eigen::ArrayXXd dG = dC * c.i.array();
    dc_next = (dC * c.f.array()).matrix();

    da.middleRows(0, H) = (dI * c.i.array() * (1.0 - c.i.array())).matrix();
    da.middleRows(H, H) = (dF * c.f.array() * (1.0 - c.f.array())).matrix();
    da.middleRows(2 * H, H) = (dG * (1.0 - c.g.array().square())).matrix();
    da.middleRows(3 * H, H) = (dO * c.o.array() * (1.0 - c.o.array())).matrix();

    g.w_x.noalias() += da * c.z.transpose();
    g.w_h.noalias() += da * h_prev.transpose();
    g.b_gates += da.rowwise().sum();
    dh_next.noalias() = online.w_h.transpose() * da;

    const Eigen::MatrixXd dz = online.w_x.transpose() * da;
    const Eigen::MatrixXd dpre = (dz.array() * (1.0 - c.z.array().square())).matrix();
    g.w_in.noalias() += dpre * c.x.transpose();
    g.b_in += dpre.rowwise().sum();
  }
  return loss;
}

double clip_by_global_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm && norm > 0.0) grad *= max_norm / norm;
  return norm;
}

Optimizer::Optimizer(OptimizerKind kind, std::size_t dim) : kind_(kind) {
  if (kind_ == OptimizerKind::Adam) {
    m_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    v_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  }
}

void Optimizer::reset() {
  t_ = 0;
  if (kind_ == OptimizerKind::Adam) {
    m_.setZero();
    v_.setZero();
  }
}

void Optimizer::apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (kind_ == OptimizerKind::Sgd) {
    params -= lr * grad;
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

TdResult td_update(DrqnNet& net, const DrqnNet& target, const TrainBatch& batch, const TdOptions& opt,
                   double lr, double clip_norm, Optimizer& optimizer) {
  TdResult r;
  Eigen::VectorXd grad;
  TdDiagnostics diag;
  r.loss = td_loss(net, target, batch, opt, &grad, &diag);
  if (!std::isfinite(r.loss) || !grad.allFinite()) {
    r.fault = true;
    return r;
  }
  r.grad_norm = clip_by_global_norm(grad, clip_norm);
  optimizer.apply(net.param_vector(), grad, lr);
  r.applied = true;
  r.new_priorities.resize(static_cast<std::size_t>(batch.size));
  for (int b = 0; b < batch.size; ++b) {
    const auto i = static_cast<std::size_t>(b);
    const double side = (i < batch.delay_norm.size() ? batch.delay_norm[i] : 0.0) +
                        (i < batch.interference.size() ? batch.interference[i] : 0.0);
    r.new_priorities[i] = diag.mean_abs_td[i] + opt.priority_eta * side + opt.priority_eps;
  }
  return r;
}

}  // namespace fermi
