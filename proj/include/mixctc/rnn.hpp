#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mixctc/autodiff.hpp"
#include "mixctc/tensor.hpp"

namespace mixctc::rnn {

using ParamVisitor = std::function<void(const std::string&, const ad::NodePtr&)>;

/// LSTM cell parameters.  Each gate weight acts on [x (+) h_prev]; no
/// peephole connections.
struct LstmParams {
  ad::NodePtr W_i, W_f, W_c, W_o;  // each n x (input_dim + n)
  ad::NodePtr b_i, b_f, b_c, b_o;  // each n

  int cells() const { return static_cast<int>(b_i->value.numel()); }
  int input_dim() const { return static_cast<int>(W_i->value.extent(1)) - cells(); }

  static LstmParams init(int input_dim, int n, Rng& rng);
  static LstmParams zeros(int input_dim, int n);
  void for_each_param(const std::string& prefix, const ParamVisitor& visit) const;
};

struct LstmState {
  ad::NodePtr h, c;
  static LstmState zeros(int n);
};

struct StackConfig {
  int layers = 2;
  int cells_per_direction = 32;
  bool bidirectional = false;
  int projection_dim = 32;
  int frame_stack = 1;
  int frame_skip = 1;
  // The projection is applied after the top layer only by default; setting
  // this projects after every layer instead.
  bool project_per_layer = false;

  void validate() const;
};

/// Frame stacking and skipping.  Output row t' concatenates input rows
/// [t'*skip, t'*skip + stack), repeating the final frame past the tail;
/// output length is ceil(T / skip).
Tensor stack_and_skip(const Tensor& features, int frame_stack, int frame_skip);

/// One LSTM step: standard input/forget/cell/output gating.
LstmState lstm_step(const ad::NodePtr& x, const LstmState& prev, const LstmParams& params);

struct Projection {
  ad::NodePtr W, b;
  static Projection init(int in_dim, int out_dim, Rng& rng);
  void for_each_param(const std::string& prefix, const ParamVisitor& visit) const;
};

struct StackParams {
  struct Layer {
    LstmParams fwd;
    std::optional<LstmParams> bwd;
  };
  std::vector<Layer> layers;
  std::vector<Projection> projections;  // one (top-only) or one per layer

  static StackParams init(const StackConfig& cfg, int feature_dim, Rng& rng);
  void for_each_param(const std::string& prefix, const ParamVisitor& visit) const;
};

/// Runs one (optionally bidirectional) LSTM layer over a node sequence.
/// Bidirectional outputs are [h_fwd (+) h_bwd] per frame.
std::vector<ad::NodePtr> run_layer(const std::vector<ad::NodePtr>& inputs,
                                   const StackParams::Layer& layer);

std::vector<ad::NodePtr> apply_projection(const std::vector<ad::NodePtr>& inputs,
                                          const Projection& proj);

/// Full stack: stack_and_skip, then the configured layers, then the affine
/// projection(s).  Output length is ceil(T / frame_skip).
std::vector<ad::NodePtr> run_stack(const Tensor& features, const StackConfig& cfg,
                                   const StackParams& params);

}  // namespace mixctc::rnn
