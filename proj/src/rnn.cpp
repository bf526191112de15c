#include "mixctc/rnn.hpp"

#include <algorithm>
#include <stdexcept>

namespace mixctc::rnn {

LstmParams LstmParams::init(int input_dim, int n, Rng& rng) {
  LstmParams p;
  const int64_t cols = input_dim + n;
  p.W_i = ad::init_param({n, cols}, rng);
  p.W_f = ad::init_param({n, cols}, rng);
  p.W_c = ad::init_param({n, cols}, rng);
  p.W_o = ad::init_param({n, cols}, rng);
  p.b_i = ad::init_param({n}, rng);
  p.b_f = ad::init_param({n}, rng);
  p.b_c = ad::init_param({n}, rng);
  p.b_o = ad::init_param({n}, rng);
  return p;
}

LstmParams LstmParams::zeros(int input_dim, int n) {
  LstmParams p;
  const int64_t cols = input_dim + n;
  p.W_i = ad::leaf(Tensor::zeros({n, cols}));
  p.W_f = ad::leaf(Tensor::zeros({n, cols}));
  p.W_c = ad::leaf(Tensor::zeros({n, cols}));
  p.W_o = ad::leaf(Tensor::zeros({n, cols}));
  p.b_i = ad::leaf(Tensor::zeros({n}));
  p.b_f = ad::leaf(Tensor::zeros({n}));
  p.b_c = ad::leaf(Tensor::zeros({n}));
  p.b_o = ad::leaf(Tensor::zeros({n}));
  return p;
}

void LstmParams::for_each_param(const std::string& prefix, const ParamVisitor& visit) const {
  visit(prefix + "/W_i", W_i);
  visit(prefix + "/W_f", W_f);
  visit(prefix + "/W_c", W_c);
  visit(prefix + "/W_o", W_o);
  visit(prefix + "/b_i", b_i);
  visit(prefix + "/b_f", b_f);
  visit(prefix + "/b_c", b_c);
  visit(prefix + "/b_o", b_o);
}

LstmState LstmState::zeros(int n) {
  return {ad::leaf(Tensor::zeros({n})), ad::leaf(Tensor::zeros({n}))};
}

void StackConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("StackConfig: layers must be >= 1");
  if (cells_per_direction < 1) throw std::invalid_argument("StackConfig: cells must be >= 1");
  if (projection_dim < 1) throw std::invalid_argument("StackConfig: projection_dim must be >= 1");
  if (frame_stack < 1) throw std::invalid_argument("StackConfig: frame_stack must be >= 1");
  if (frame_skip < 1) throw std::invalid_argument("StackConfig: frame_skip must be >= 1");
}

Tensor stack_and_skip(const Tensor& features, int frame_stack, int frame_skip) {
  if (features.rank() != 2) {
    throw std::invalid_argument("stack_and_skip: expected T x m features, got " +
                                features.shape_str());
  }
  const int64_t T = features.extent(0);
  const int64_t m = features.extent(1);
  if (T == 0) throw std::invalid_argument("stack_and_skip: empty input");
  if (frame_stack < 1 || frame_skip < 1) {
    throw std::invalid_argument("stack_and_skip: stack and skip must be >= 1");
  }
  const int64_t T_out = (T + frame_skip - 1) / frame_skip;
  Tensor out({T_out, m * frame_stack});
  for (int64_t t = 0; t < T_out; ++t) {
    for (int64_t s = 0; s < frame_stack; ++s) {
      const int64_t src = std::min<int64_t>(t * frame_skip + s, T - 1);  // tail repeats last frame
      for (int64_t j = 0; j < m; ++j) out.at(t, s * m + j) = features.at(src, j);
    }
  }
  return out;
}

LstmState lstm_step(const ad::NodePtr& x, const LstmState& prev, const LstmParams& params) {
  auto xh = ad::concat({x, prev.h});
  auto gate_i = ad::sigmoid(ad::add(ad::matmul(params.W_i, xh), params.b_i));
  auto gate_f = ad::sigmoid(ad::add(ad::matmul(params.W_f, xh), params.b_f));
  auto cand = ad::tanh(ad::add(ad::matmul(params.W_c, xh), params.b_c));
  auto gate_o = ad::sigmoid(ad::add(ad::matmul(params.W_o, xh), params.b_o));
  LstmState next;
  next.c = ad::add(ad::hadamard(gate_f, prev.c), ad::hadamard(gate_i, cand));
  next.h = ad::hadamard(gate_o, ad::tanh(next.c));
  return next;
}

Projection Projection::init(int in_dim, int out_dim, Rng& rng) {
  Projection p;
  p.W = ad::init_param({out_dim, in_dim}, rng);
  p.b = ad::init_param({out_dim}, rng);
  return p;
}

void Projection::for_each_param(const std::string& prefix, const ParamVisitor& visit) const {
  visit(prefix + "/W", W);
  visit(prefix + "/b", b);
}

StackParams StackParams::init(const StackConfig& cfg, int feature_dim, Rng& rng) {
  cfg.validate();
  StackParams p;
  const int n = cfg.cells_per_direction;
  const int width = cfg.bidirectional ? 2 * n : n;
  int in_dim = feature_dim * cfg.frame_stack;
  for (int l = 0; l < cfg.layers; ++l) {
    StackParams::Layer layer;
    layer.fwd = LstmParams::init(in_dim, n, rng);
    if (cfg.bidirectional) layer.bwd = LstmParams::init(in_dim, n, rng);
    p.layers.push_back(std::move(layer));
    if (cfg.project_per_layer) {
      p.projections.push_back(Projection::init(width, cfg.projection_dim, rng));
      in_dim = cfg.projection_dim;
    } else {
      in_dim = width;
    }
  }
  if (!cfg.project_per_layer) {
    p.projections.push_back(Projection::init(width, cfg.projection_dim, rng));
  }
  return p;
}

void StackParams::for_each_param(const std::string& prefix, const ParamVisitor& visit) const {
  for (size_t l = 0; l < layers.size(); ++l) {
    const std::string base = prefix + "/layer" + std::to_string(l);
    layers[l].fwd.for_each_param(base + "/fwd", visit);
    if (layers[l].bwd) layers[l].bwd->for_each_param(base + "/bwd", visit);
  }
  for (size_t i = 0; i < projections.size(); ++i) {
    projections[i].for_each_param(prefix + "/proj" + std::to_string(i), visit);
  }
}

std::vector<ad::NodePtr> run_layer(const std::vector<ad::NodePtr>& inputs,
                                   const StackParams::Layer& layer) {
  const int n = layer.fwd.cells();
  const size_t T = inputs.size();
  std::vector<ad::NodePtr> fwd(T);
  LstmState state = LstmState::zeros(n);
  for (size_t t = 0; t < T; ++t) {
    state = lstm_step(inputs[t], state, layer.fwd);
    fwd[t] = state.h;
  }
  if (!layer.bwd) return fwd;
  std::vector<ad::NodePtr> bwd(T);
  state = LstmState::zeros(n);
  for (size_t t = T; t-- > 0;) {
    state = lstm_step(inputs[t], state, *layer.bwd);
    bwd[t] = state.h;
  }
  std::vector<ad::NodePtr> out(T);
  for (size_t t = 0; t < T; ++t) out[t] = ad::concat({fwd[t], bwd[t]});
  return out;
}

std::vector<ad::NodePtr> apply_projection(const std::vector<ad::NodePtr>& inputs,
                                          const Projection& proj) {
  std::vector<ad::NodePtr> out(inputs.size());
  for (size_t t = 0; t < inputs.size(); ++t) {
    out[t] = ad::add(ad::matmul(proj.W, inputs[t]), proj.b);
  }
  return out;
}

std::vector<ad::NodePtr> run_stack(const Tensor& features, const StackConfig& cfg,
                                   const StackParams& params) {
  cfg.validate();
  Tensor stacked = stack_and_skip(features, cfg.frame_stack, cfg.frame_skip);
  const int64_t T = stacked.extent(0);
  const int64_t m = stacked.extent(1);
  std::vector<ad::NodePtr> seq(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) {
    Tensor frame({m});
    for (int64_t j = 0; j < m; ++j) frame[j] = stacked.at(t, j);
    seq[static_cast<size_t>(t)] = ad::leaf(std::move(frame));
  }
  for (size_t l = 0; l < params.layers.size(); ++l) {
    seq = run_layer(seq, params.layers[l]);
    if (cfg.project_per_layer) seq = apply_projection(seq, params.projections[l]);
  }
  if (!cfg.project_per_layer) seq = apply_projection(seq, params.projections.back());
  return seq;
}

}  // namespace mixctc::rnn
