#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mixctc/attention.hpp"
#include "mixctc/checkpoint.hpp"
#include "mixctc/ctc.hpp"
#include "mixctc/rnn.hpp"
#include "mixctc/vocab.hpp"

namespace mixctc::harness {

enum class HeadKind { plain, attention, self_attention };

HeadKind head_kind_from_string(const std::string& name);
std::string to_string(HeadKind kind);

struct HeadSpec {
  HeadKind kind = HeadKind::plain;
  attn::AttentionConfig attention;  // attention head settings (tau also used by SA)
  int sa_heads = 1;
  int sa_dim = 32;  // d_model = d_k = d_v
};

struct ModelConfig {
  rnn::StackConfig stack;
  HeadSpec head;
  bool hybrid = false;     // adds the letter branch (one LSTM layer + head)
  HeadSpec aux_head;
  uint64_t seed = 1;
};

/// Parameters of one CTC output head.
struct HeadParams {
  HeadKind kind = HeadKind::plain;
  ad::NodePtr W_soft, b_soft;                       // plain head
  std::optional<attn::AttentionParams> attention;
  std::optional<attn::PlmState> plm;
  std::optional<attn::SelfAttentionParams> sa;

  static HeadParams init(const HeadSpec& spec, int hidden_dim, int num_labels, Rng& rng);
  void for_each_param(const std::string& prefix, const rnn::ParamVisitor& visit) const;
};

/// A full transduction model: LSTM stack, main CTC head, and (for hybrid
/// word+letter models) a letter branch of one extra LSTM layer plus its own
/// projection and head hanging off the shared trunk.
class Model {
 public:
  Model(ModelConfig config, int feature_dim, vocab::TokenVocabulary main_vocab,
        std::optional<vocab::TokenVocabulary> aux_vocab = std::nullopt);

  struct SeqOut {
    std::vector<ad::NodePtr> logits;
    std::vector<ad::NodePtr> log_probs;
  };
  struct DualOut {
    SeqOut main, aux;
  };

  SeqOut forward(const Tensor& features) const;
  SeqOut forward_aux(const Tensor& features) const;
  DualOut forward_dual(const Tensor& features) const;

  /// Output frames produced for an input of `frames` rows.
  int64_t output_length(int64_t frames) const;

  void for_each_param(const rnn::ParamVisitor& visit) const;
  std::vector<ad::NodePtr> trainable_main() const;  // stack + main head
  std::vector<ad::NodePtr> trainable_aux() const;   // letter branch only

  const ModelConfig& config() const { return config_; }
  int feature_dim() const { return feature_dim_; }
  const vocab::TokenVocabulary& main_vocab() const { return main_vocab_; }
  const vocab::TokenVocabulary& aux_vocab() const;

  Checkpoint to_checkpoint() const;
  static Model from_checkpoint(const Checkpoint& ckpt);

 private:
  struct Trunk {
    std::vector<ad::NodePtr> trunk_out;  // after the first L-1 layers
    std::vector<ad::NodePtr> top_out;    // after all layers + projection
  };
  Trunk run_trunk(const Tensor& features) const;
  SeqOut run_head(const HeadSpec& spec, const HeadParams& params,
                  const std::vector<ad::NodePtr>& hidden) const;

  ModelConfig config_;
  int feature_dim_;
  vocab::TokenVocabulary main_vocab_;
  std::optional<vocab::TokenVocabulary> aux_vocab_;

  rnn::StackParams stack_;
  HeadParams head_;
  // hybrid letter branch
  std::optional<rnn::StackParams::Layer> aux_layer_;
  std::optional<rnn::Projection> aux_proj_;
  std::optional<HeadParams> aux_head_;
};

/// Lattice from a forward pass (values of the per-frame log-probabilities).
ctc::PosteriorLattice lattice_of(const Model::SeqOut& out);

enum class DecodeMode { word, letters, hybrid, mixed };
DecodeMode decode_mode_from_string(const std::string& name);

/// Greedy decoding composed with the scheme's word reconstruction:
/// word      -> unit strings (the OOV token may appear; silence is dropped)
/// letters   -> separator merge (end-of-word merge for wordpiece models)
/// mixed     -> separator merge
/// hybrid    -> word side with OOVs replaced from the letter side by
///              largest time overlap
std::vector<std::string> decode_utterance(const Model& model, const Tensor& features,
                                          DecodeMode mode);

std::string serialize_model_config(const ModelConfig& cfg, int feature_dim,
                                   const vocab::TokenVocabulary& main_vocab,
                                   const std::optional<vocab::TokenVocabulary>& aux_vocab);

}  // namespace mixctc::harness
