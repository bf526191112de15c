#include "mixctc/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace mixctc::attn {

namespace {

// Shared scorer pre-activations: tanh(U z + W g_t [+ V f_t] + b) per window
// position.  f is the location-feature vector (one channel), only consulted
// in hybrid mode.
std::vector<ad::NodePtr> score_preactivations(const ad::NodePtr& z, const ad::NodePtr& f,
                                              const std::vector<ad::NodePtr>& g,
                                              const AttentionParams& p, ScoreMode mode) {
  auto uz = ad::matmul(p.U, z);
  std::vector<ad::NodePtr> e;
  e.reserve(g.size());
  for (size_t t = 0; t < g.size(); ++t) {
    auto pre = ad::add(ad::add(uz, ad::matmul(p.W, g[t])), p.b);
    if (mode == ScoreMode::hybrid) {
      auto f_t = ad::slice(f, static_cast<int64_t>(t), 1);
      pre = ad::add(pre, ad::matmul(p.V, f_t));
    }
    e.push_back(ad::tanh(pre));
  }
  return e;
}

void check_hybrid_params(const AttentionParams& p, ScoreMode mode, const std::string& op) {
  if (mode == ScoreMode::hybrid && (!p.V || !p.F)) {
    throw std::invalid_argument(op + ": hybrid mode requires the V and F location parameters");
  }
}

}  // namespace

AttentionParams AttentionParams::init(const AttentionConfig& cfg, int n, int num_labels,
                                      Rng& rng) {
  AttentionParams p;
  const int C = cfg.window();
  p.kernels.reserve(static_cast<size_t>(C));
  // The center (zero-offset) kernel starts at identity so the initial
  // context is the current hidden vector plus a small window mix; a plain
  // uniform init blurs the window and stalls early training.
  for (int i = 0; i < C; ++i) {
    auto kernel = ad::init_param({n, n}, rng);
    if (i == cfg.tau) {
      for (int d = 0; d < n; ++d) kernel->value.at(d, d) += 1.0;
    }
    p.kernels.push_back(kernel);
  }
  const int z_dim = cfg.plm ? n : num_labels;
  p.U = ad::init_param({n, z_dim}, rng);
  p.W = ad::init_param({n, n}, rng);
  p.V = ad::init_param({n, 1}, rng);
  p.F = ad::init_param({cfg.location_kernel_width}, rng);
  p.b = ad::init_param({n}, rng);
  p.v = ad::init_param({n}, rng);
  p.W_soft = ad::init_param({num_labels, n}, rng);
  p.b_soft = ad::init_param({num_labels}, rng);
  return p;
}

void AttentionParams::for_each_param(const std::string& prefix,
                                     const rnn::ParamVisitor& visit) const {
  for (size_t i = 0; i < kernels.size(); ++i) {
    visit(prefix + "/kernel" + std::to_string(i), kernels[i]);
  }
  visit(prefix + "/U", U);
  visit(prefix + "/W", W);
  if (V) visit(prefix + "/V", V);
  if (F) visit(prefix + "/F", F);
  visit(prefix + "/b", b);
  visit(prefix + "/v", v);
  visit(prefix + "/W_soft", W_soft);
  visit(prefix + "/b_soft", b_soft);
}

PlmState PlmState::init(int num_labels, int n, Rng& rng) {
  PlmState s;
  s.cell = rnn::LstmParams::init(num_labels + n, n, rng);
  s.state = rnn::LstmState::zeros(n);
  return s;
}

void PlmState::for_each_param(const std::string& prefix, const rnn::ParamVisitor& visit) const {
  cell.for_each_param(prefix, visit);
}

TimeConv time_convolution(const std::vector<ad::NodePtr>& window,
                          const std::vector<ad::NodePtr>& kernels) {
  if (window.size() != kernels.size()) {
    throw std::invalid_argument("time_convolution: window has " + std::to_string(window.size()) +
                                " frames but there are " + std::to_string(kernels.size()) +
                                " kernels");
  }
  TimeConv out;
  const size_t C = window.size();
  out.filtered.reserve(C);
  // Window position j holds frame t = u - tau + j, so the offset u - t is
  // tau - j and kernel index (u - t) + tau = C - 1 - j.
  for (size_t j = 0; j < C; ++j) {
    out.filtered.push_back(ad::matmul(kernels[C - 1 - j], window[j]));
  }
  out.uniform_context = out.filtered[0];
  for (size_t j = 1; j < C; ++j) {
    out.uniform_context = ad::add(out.uniform_context, out.filtered[j]);
  }
  return out;
}

ad::NodePtr location_features(const ad::NodePtr& alpha_prev, const ad::NodePtr& kernel) {
  return ad::conv1d(alpha_prev, kernel);
}

ad::NodePtr attend(const ad::NodePtr& z, const ad::NodePtr& alpha_prev,
                   const std::vector<ad::NodePtr>& g, const AttentionParams& params,
                   ScoreMode mode) {
  check_hybrid_params(params, mode, "attend");
  ad::NodePtr f;
  if (mode == ScoreMode::hybrid) f = location_features(alpha_prev, params.F);
  auto pre = score_preactivations(z, f, g, params, mode);
  std::vector<ad::NodePtr> scores;
  scores.reserve(pre.size());
  for (const auto& e : pre) scores.push_back(ad::matmul(params.v, e));
  return ad::softmax(ad::concat(scores));
}

ad::NodePtr context(const ad::NodePtr& alpha, const std::vector<ad::NodePtr>& g, double gamma) {
  if (alpha->value.numel() != static_cast<int64_t>(g.size())) {
    throw std::invalid_argument("context: alpha length " + alpha->value.shape_str() +
                                " does not match window size " + std::to_string(g.size()));
  }
  ad::NodePtr acc;
  for (size_t t = 0; t < g.size(); ++t) {
    auto term = ad::smul(ad::slice(alpha, static_cast<int64_t>(t), 1), g[t]);
    acc = acc ? ad::add(acc, term) : term;
  }
  return ad::scale(acc, gamma);
}

HeadOut output_head(const ad::NodePtr& c, const ad::NodePtr& W_soft, const ad::NodePtr& b_soft) {
  HeadOut out;
  out.logits = ad::add(ad::matmul(W_soft, c), b_soft);
  out.log_probs = ad::log_softmax(out.logits);
  return out;
}

ad::NodePtr plm_step(const ad::NodePtr& z_prev, const ad::NodePtr& c_prev, PlmState& state) {
  auto x = ad::concat({z_prev, c_prev});
  state.state = rnn::lstm_step(x, state.state, state.cell);
  return state.state.h;
}

ComaOut coma(const ad::NodePtr& z, const ad::NodePtr& alpha_prev,
             const std::vector<ad::NodePtr>& g, const AttentionParams& params, ScoreMode mode,
             double gamma) {
  check_hybrid_params(params, mode, "coma");
  ad::NodePtr f;
  if (mode == ScoreMode::hybrid) f = location_features(alpha_prev, params.F);
  auto pre = score_preactivations(z, f, g, params, mode);
  ComaOut out;
  out.weights = ad::softmax_rows(ad::stack_cols(pre));  // normalize across t, row fixed
  ad::NodePtr acc;
  for (size_t t = 0; t < g.size(); ++t) {
    auto term = ad::hadamard(ad::col(out.weights, static_cast<int64_t>(t)), g[t]);
    acc = acc ? ad::add(acc, term) : term;
  }
  out.context = ad::scale(acc, gamma);
  return out;
}

SelfAttentionParams SelfAttentionParams::init(int n, int d_model, int heads, int num_labels,
                                              Rng& rng) {
  if (heads < 1 || d_model % heads != 0) {
    throw std::invalid_argument("self_attention: head count " + std::to_string(heads) +
                                " must divide d_k = d_v = " + std::to_string(d_model));
  }
  SelfAttentionParams p;
  p.W_p = ad::init_param({d_model, n}, rng);
  p.Wq = ad::init_param({d_model, d_model}, rng);
  p.Wk = ad::init_param({d_model, d_model}, rng);
  p.Wv = ad::init_param({d_model, d_model}, rng);
  p.heads = heads;
  p.ln1_gain = ad::leaf(Tensor::full({d_model}, 1.0));
  p.ln1_bias = ad::leaf(Tensor::zeros({d_model}));
  p.ln2_gain = ad::leaf(Tensor::full({d_model}, 1.0));
  p.ln2_bias = ad::leaf(Tensor::zeros({d_model}));
  p.ff_W1 = ad::init_param({4 * d_model, d_model}, rng);
  p.ff_b1 = ad::init_param({4 * d_model}, rng);
  p.ff_W2 = ad::init_param({d_model, 4 * d_model}, rng);
  p.ff_b2 = ad::init_param({d_model}, rng);
  p.W_soft = ad::init_param({num_labels, d_model}, rng);
  p.b_soft = ad::init_param({num_labels}, rng);
  return p;
}

void SelfAttentionParams::for_each_param(const std::string& prefix,
                                         const rnn::ParamVisitor& visit) const {
  visit(prefix + "/W_p", W_p);
  visit(prefix + "/Wq", Wq);
  visit(prefix + "/Wk", Wk);
  visit(prefix + "/Wv", Wv);
  visit(prefix + "/ln1_gain", ln1_gain);
  visit(prefix + "/ln1_bias", ln1_bias);
  visit(prefix + "/ln2_gain", ln2_gain);
  visit(prefix + "/ln2_bias", ln2_bias);
  visit(prefix + "/ff_W1", ff_W1);
  visit(prefix + "/ff_b1", ff_b1);
  visit(prefix + "/ff_W2", ff_W2);
  visit(prefix + "/ff_b2", ff_b2);
  visit(prefix + "/W_soft", W_soft);
  visit(prefix + "/b_soft", b_soft);
}

SelfAttentionOut self_attention_block(const std::vector<ad::NodePtr>& window,
                                      const SelfAttentionParams& params) {
  const size_t C = window.size();
  if (C % 2 == 0) throw std::invalid_argument("self_attention: window size must be odd");
  const int dk = params.d_k();
  const int dv = params.d_v();
  if (params.heads < 1 || dk % params.heads != 0 || dv % params.heads != 0) {
    throw std::invalid_argument("self_attention: head count " + std::to_string(params.heads) +
                                " must divide d_k = " + std::to_string(dk) +
                                " and d_v = " + std::to_string(dv));
  }
  const size_t center = C / 2;

  std::vector<ad::NodePtr> proj(C), keys(C), values(C);
  for (size_t t = 0; t < C; ++t) {
    proj[t] = ad::matmul(params.W_p, window[t]);
    keys[t] = ad::matmul(params.Wk, proj[t]);
    values[t] = ad::matmul(params.Wv, proj[t]);
  }
  auto query = ad::matmul(params.Wq, proj[center]);

  SelfAttentionOut out;
  const int dk_h = dk / params.heads;
  const int dv_h = dv / params.heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk_h));
  std::vector<ad::NodePtr> head_contexts;
  for (int h = 0; h < params.heads; ++h) {
    auto q_h = ad::slice(query, static_cast<int64_t>(h) * dk_h, dk_h);
    std::vector<ad::NodePtr> scores;
    scores.reserve(C);
    for (size_t t = 0; t < C; ++t) {
      auto k_h = ad::slice(keys[t], static_cast<int64_t>(h) * dk_h, dk_h);
      scores.push_back(ad::scale(ad::matmul(q_h, k_h), inv_scale));
    }
    auto alpha = ad::softmax(ad::concat(scores));
    out.head_weights.push_back(alpha);
    ad::NodePtr ctx;
    for (size_t t = 0; t < C; ++t) {
      auto v_h = ad::slice(values[t], static_cast<int64_t>(h) * dv_h, dv_h);
      auto term = ad::smul(ad::slice(alpha, static_cast<int64_t>(t), 1), v_h);
      ctx = ctx ? ad::add(ctx, term) : term;
    }
    head_contexts.push_back(ctx);
  }
  auto context_u = head_contexts.size() == 1 ? head_contexts[0] : ad::concat(head_contexts);

  auto x = ad::layer_norm(ad::add(context_u, proj[center]), params.ln1_gain, params.ln1_bias);
  auto hidden = ad::tanh(ad::add(ad::matmul(params.ff_W1, x), params.ff_b1));
  auto ff = ad::add(ad::matmul(params.ff_W2, hidden), params.ff_b2);
  out.output = ad::layer_norm(ad::add(ff, x), params.ln2_gain, params.ln2_bias);
  return out;
}

SequenceOut run_attention_head(const std::vector<ad::NodePtr>& hidden,
                               const AttentionConfig& cfg, const AttentionParams& params,
                               PlmState* plm) {
  if (hidden.empty()) throw std::invalid_argument("run_attention_head: empty hidden sequence");
  const int C = cfg.window();
  const int n = static_cast<int>(hidden[0]->value.numel());
  const int K = static_cast<int>(params.b_soft->value.numel());
  const double gamma = cfg.gamma_value();
  const int T = static_cast<int>(hidden.size());

  auto zero_h = ad::leaf(Tensor::zeros({n}));
  auto z_prev = ad::leaf(Tensor::zeros({K}));
  auto c_prev = ad::leaf(Tensor::zeros({n}));
  auto alpha_prev = ad::leaf(Tensor::full({C}, 1.0 / C));
  if (cfg.plm && plm) plm->reset(n);

  SequenceOut out;
  out.logits.reserve(static_cast<size_t>(T));
  out.log_probs.reserve(static_cast<size_t>(T));
  std::vector<ad::NodePtr> window(static_cast<size_t>(C));
  for (int u = 0; u < T; ++u) {
    for (int j = 0; j < C; ++j) {
      const int t = u - cfg.tau + j;
      window[static_cast<size_t>(j)] = (t >= 0 && t < T) ? hidden[static_cast<size_t>(t)] : zero_h;
    }
    TimeConv tc = time_convolution(window, params.kernels);
    ad::NodePtr z_in = z_prev;
    if (cfg.plm) {
      if (!plm) throw std::invalid_argument("run_attention_head: PLM enabled without state");
      z_in = plm_step(z_prev, c_prev, *plm);
    }
    ad::NodePtr c_u;
    if (cfg.coma) {
      ComaOut co = coma(z_in, alpha_prev, tc.filtered, params, cfg.mode, gamma);
      c_u = co.context;
      // Feedback vector for the next step's location features: per-component
      // rows averaged, still a distribution over the window.
      alpha_prev = ad::scale(ad::sum_axis(co.weights, 0), 1.0 / n);
    } else {
      auto alpha = attend(z_in, alpha_prev, tc.filtered, params, cfg.mode);
      c_u = context(alpha, tc.filtered, gamma);
      alpha_prev = alpha;
    }
    HeadOut head = output_head(c_u, params.W_soft, params.b_soft);
    out.logits.push_back(head.logits);
    out.log_probs.push_back(head.log_probs);
    z_prev = head.logits;
    c_prev = c_u;
  }
  return out;
}

SequenceOut run_self_attention_head(const std::vector<ad::NodePtr>& hidden, int tau,
                                    const SelfAttentionParams& params) {
  if (hidden.empty()) throw std::invalid_argument("run_self_attention_head: empty sequence");
  const int C = 2 * tau + 1;
  const int n = static_cast<int>(hidden[0]->value.numel());
  const int T = static_cast<int>(hidden.size());
  auto zero_h = ad::leaf(Tensor::zeros({n}));

  SequenceOut out;
  std::vector<ad::NodePtr> window(static_cast<size_t>(C));
  for (int u = 0; u < T; ++u) {
    for (int j = 0; j < C; ++j) {
      const int t = u - tau + j;
      window[static_cast<size_t>(j)] = (t >= 0 && t < T) ? hidden[static_cast<size_t>(t)] : zero_h;
    }
    SelfAttentionOut block = self_attention_block(window, params);
    HeadOut head = output_head(block.output, params.W_soft, params.b_soft);
    out.logits.push_back(head.logits);
    out.log_probs.push_back(head.log_probs);
  }
  return out;
}

}  // namespace mixctc::attn
