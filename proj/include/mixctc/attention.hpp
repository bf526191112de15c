#pragma once

#include <string>
#include <vector>

#include "mixctc/autodiff.hpp"
#include "mixctc/rnn.hpp"

namespace mixctc::attn {

enum class ScoreMode { content, hybrid };

/// Window geometry and mode flags for the attention-augmented CTC head.
struct AttentionConfig {
  int tau = 4;          // one-sided window length
  double gamma = 0.0;   // context scale; 0 means "use C = 2*tau + 1"
  ScoreMode mode = ScoreMode::content;
  bool plm = false;     // pseudo language model recurrence
  bool coma = false;    // component (per-dimension) attention weights
  int location_kernel_width = 3;

  int window() const { return 2 * tau + 1; }
  double gamma_value() const { return gamma == 0.0 ? static_cast<double>(window()) : gamma; }
};

/// Parameters of the attention scorer and output head.  U acts on the
/// previous logit (n x K) in content feedback, or on the PLM output (n x n)
/// when the PLM is enabled; it is sized for whichever is active.
struct AttentionParams {
  std::vector<ad::NodePtr> kernels;  // C time-convolution kernels, index i <-> offset i - tau
  ad::NodePtr U;                     // n x K or n x n
  ad::NodePtr W;                     // n x n
  ad::NodePtr V;                     // n x 1 (single location channel); hybrid mode only
  ad::NodePtr F;                     // 1-D location kernel over alpha
  ad::NodePtr b;                     // n
  ad::NodePtr v;                     // n
  ad::NodePtr W_soft, b_soft;        // K x n, K

  static AttentionParams init(const AttentionConfig& cfg, int n, int num_labels, Rng& rng);
  void for_each_param(const std::string& prefix, const rnn::ParamVisitor& visit) const;
};

/// PLM recurrence state: one LSTM cell with input dim K + n and n cells.
struct PlmState {
  rnn::LstmParams cell;
  rnn::LstmState state;

  static PlmState init(int num_labels, int n, Rng& rng);
  void reset(int n) { state = rnn::LstmState::zeros(n); }
  void for_each_param(const std::string& prefix, const rnn::ParamVisitor& visit) const;
};

struct TimeConv {
  std::vector<ad::NodePtr> filtered;  // g_t, one per window position
  ad::NodePtr uniform_context;        // sum of the filtered vectors
};

/// Applies the per-offset kernels to the window: g_t = W'_{u-t} h_t.  The
/// plain sum of the g_t is the uniform-attention context.
TimeConv time_convolution(const std::vector<ad::NodePtr>& window,
                          const std::vector<ad::NodePtr>& kernels);

/// Same-length 1-D convolution of the previous attention weights with the
/// location kernel (zero boundary, single channel).
ad::NodePtr location_features(const ad::NodePtr& alpha_prev, const ad::NodePtr& kernel);

/// Scoring network followed by softmax over the window:
/// e_t = v' tanh(U z + W g_t [+ V f_t] + b).
ad::NodePtr attend(const ad::NodePtr& z, const ad::NodePtr& alpha_prev,
                   const std::vector<ad::NodePtr>& g, const AttentionParams& params,
                   ScoreMode mode);

/// Weighted context c = gamma * sum_t alpha_t g_t.
ad::NodePtr context(const ad::NodePtr& alpha, const std::vector<ad::NodePtr>& g, double gamma);

struct HeadOut {
  ad::NodePtr logits;     // z_u = W_soft c + b_soft
  ad::NodePtr log_probs;  // log softmax of z_u
};
HeadOut output_head(const ad::NodePtr& c, const ad::NodePtr& W_soft, const ad::NodePtr& b_soft);

/// One PLM step: stacks [z_prev (+) c_prev], advances the LSTM, returns its
/// hidden output (fed to attend in place of the raw logit).
ad::NodePtr plm_step(const ad::NodePtr& z_prev, const ad::NodePtr& c_prev, PlmState& state);

struct ComaOut {
  ad::NodePtr weights;  // n x C; every row is a distribution over the window
  ad::NodePtr context;  // gamma * sum_t A[:,t] (.) g_t
};

/// Component attention: vector-valued scores (no inner product with v),
/// normalized per component across the window.
ComaOut coma(const ad::NodePtr& z, const ad::NodePtr& alpha_prev,
             const std::vector<ad::NodePtr>& g, const AttentionParams& params, ScoreMode mode,
             double gamma);

struct SelfAttentionParams {
  ad::NodePtr W_p;          // d_model x n input projection
  ad::NodePtr Wq, Wk, Wv;   // d_k x d_model, d_k x d_model, d_v x d_model
  int heads = 1;
  ad::NodePtr ln1_gain, ln1_bias;
  ad::NodePtr ln2_gain, ln2_bias;
  ad::NodePtr ff_W1, ff_b1;  // hidden = 4 x d_model, tanh
  ad::NodePtr ff_W2, ff_b2;
  ad::NodePtr W_soft, b_soft;

  int d_k() const { return static_cast<int>(Wq->value.extent(0)); }
  int d_v() const { return static_cast<int>(Wv->value.extent(0)); }
  int d_model() const { return static_cast<int>(W_p->value.extent(0)); }

  static SelfAttentionParams init(int n, int d_model, int heads, int num_labels, Rng& rng);
  void for_each_param(const std::string& prefix, const rnn::ParamVisitor& visit) const;
};

struct SelfAttentionOut {
  ad::NodePtr output;                      // d_model, feeds the output head
  std::vector<ad::NodePtr> head_weights;   // per head, distribution over the window
};

/// Scaled dot-product attention over the window centered at the middle
/// frame, multi-head, followed by residual + layer norm, a one-hidden-layer
/// feed-forward, and a second residual + layer norm.
SelfAttentionOut self_attention_block(const std::vector<ad::NodePtr>& window,
                                      const SelfAttentionParams& params);

/// Drives the attention head over a hidden sequence: time convolution,
/// content/hybrid scoring (optionally PLM, optionally COMA), context, output
/// head, with the u-recurrence on z, alpha, and the PLM state.  Frames
/// outside the sequence contribute zero vectors.
struct SequenceOut {
  std::vector<ad::NodePtr> logits;
  std::vector<ad::NodePtr> log_probs;
};

SequenceOut run_attention_head(const std::vector<ad::NodePtr>& hidden,
                               const AttentionConfig& cfg, const AttentionParams& params,
                               PlmState* plm);

SequenceOut run_self_attention_head(const std::vector<ad::NodePtr>& hidden, int tau,
                                    const SelfAttentionParams& params);

}  // namespace mixctc::attn
