#include "mixctc/model.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace mixctc::harness {

HeadKind head_kind_from_string(const std::string& name) {
  if (name == "plain") return HeadKind::plain;
  if (name == "attention") return HeadKind::attention;
  if (name == "self-attention" || name == "self_attention") return HeadKind::self_attention;
  throw std::invalid_argument("unknown head kind '" + name + "'");
}

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::plain: return "plain";
    case HeadKind::attention: return "attention";
    case HeadKind::self_attention: return "self-attention";
  }
  return "?";
}

HeadParams HeadParams::init(const HeadSpec& spec, int hidden_dim, int num_labels, Rng& rng) {
  HeadParams p;
  p.kind = spec.kind;
  switch (spec.kind) {
    case HeadKind::plain:
      p.W_soft = ad::init_param({num_labels, hidden_dim}, rng);
      p.b_soft = ad::init_param({num_labels}, rng);
      break;
    case HeadKind::attention:
      p.attention = attn::AttentionParams::init(spec.attention, hidden_dim, num_labels, rng);
      if (spec.attention.plm) p.plm = attn::PlmState::init(num_labels, hidden_dim, rng);
      break;
    case HeadKind::self_attention:
      p.sa = attn::SelfAttentionParams::init(hidden_dim, spec.sa_dim, spec.sa_heads, num_labels,
                                             rng);
      break;
  }
  return p;
}

void HeadParams::for_each_param(const std::string& prefix, const rnn::ParamVisitor& visit) const {
  switch (kind) {
    case HeadKind::plain:
      visit(prefix + "/W_soft", W_soft);
      visit(prefix + "/b_soft", b_soft);
      break;
    case HeadKind::attention:
      attention->for_each_param(prefix + "/attn", visit);
      if (plm) plm->for_each_param(prefix + "/plm", visit);
      break;
    case HeadKind::self_attention:
      sa->for_each_param(prefix + "/sa", visit);
      break;
  }
}

Model::Model(ModelConfig config, int feature_dim, vocab::TokenVocabulary main_vocab,
             std::optional<vocab::TokenVocabulary> aux_vocab)
    : config_(std::move(config)), feature_dim_(feature_dim), main_vocab_(std::move(main_vocab)),
      aux_vocab_(std::move(aux_vocab)) {
  config_.stack.validate();
  Rng rng(hash_seed(config_.seed, "model_init"));
  stack_ = rnn::StackParams::init(config_.stack, feature_dim_, rng);
  head_ = HeadParams::init(config_.head, config_.stack.projection_dim, main_vocab_.size(), rng);
  if (config_.hybrid) {
    if (!aux_vocab_) throw std::invalid_argument("hybrid model requires a letter vocabulary");
    const int n = config_.stack.cells_per_direction;
    const int trunk_width = config_.stack.layers > 1
                                ? (config_.stack.bidirectional ? 2 * n : n)
                                : feature_dim_ * config_.stack.frame_stack;
    rnn::StackParams::Layer layer;
    layer.fwd = rnn::LstmParams::init(trunk_width, n, rng);
    if (config_.stack.bidirectional) layer.bwd = rnn::LstmParams::init(trunk_width, n, rng);
    aux_layer_ = std::move(layer);
    aux_proj_ = rnn::Projection::init(config_.stack.bidirectional ? 2 * n : n,
                                      config_.stack.projection_dim, rng);
    aux_head_ = HeadParams::init(config_.aux_head, config_.stack.projection_dim,
                                 aux_vocab_->size(), rng);
  }
}

const vocab::TokenVocabulary& Model::aux_vocab() const {
  if (!aux_vocab_) throw std::logic_error("model has no letter-side vocabulary");
  return *aux_vocab_;
}

int64_t Model::output_length(int64_t frames) const {
  return (frames + config_.stack.frame_skip - 1) / config_.stack.frame_skip;
}

Model::Trunk Model::run_trunk(const Tensor& features) const {
  Tensor stacked = rnn::stack_and_skip(features, config_.stack.frame_stack,
                                       config_.stack.frame_skip);
  const int64_t T = stacked.extent(0);
  const int64_t m = stacked.extent(1);
  std::vector<ad::NodePtr> seq(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) {
    Tensor frame({m});
    for (int64_t j = 0; j < m; ++j) frame[j] = stacked.at(t, j);
    seq[static_cast<size_t>(t)] = ad::leaf(std::move(frame));
  }
  Trunk out;
  out.trunk_out = seq;  // input itself when the stack has a single layer
  for (size_t l = 0; l < stack_.layers.size(); ++l) {
    seq = rnn::run_layer(seq, stack_.layers[l]);
    if (config_.stack.project_per_layer) seq = rnn::apply_projection(seq, stack_.projections[l]);
    if (l + 2 == stack_.layers.size()) out.trunk_out = seq;  // after the first L-1 layers
  }
  if (!config_.stack.project_per_layer) {
    seq = rnn::apply_projection(seq, stack_.projections.back());
  }
  out.top_out = std::move(seq);
  return out;
}

Model::SeqOut Model::run_head(const HeadSpec& spec, const HeadParams& params,
                              const std::vector<ad::NodePtr>& hidden) const {
  SeqOut out;
  switch (params.kind) {
    case HeadKind::plain:
      for (const auto& h : hidden) {
        attn::HeadOut ho = attn::output_head(h, params.W_soft, params.b_soft);
        out.logits.push_back(ho.logits);
        out.log_probs.push_back(ho.log_probs);
      }
      break;
    case HeadKind::attention: {
      // The PLM recurrence state is per-utterance; copy so the shared cell
      // parameters stay while h/c restart from zero.
      attn::PlmState plm_copy;
      attn::PlmState* plm_ptr = nullptr;
      if (params.plm) {
        plm_copy = *params.plm;
        plm_ptr = &plm_copy;
      }
      attn::SequenceOut seq = attn::run_attention_head(hidden, spec.attention, *params.attention,
                                                       plm_ptr);
      out.logits = std::move(seq.logits);
      out.log_probs = std::move(seq.log_probs);
      break;
    }
    case HeadKind::self_attention: {
      attn::SequenceOut seq = attn::run_self_attention_head(hidden, spec.attention.tau,
                                                            *params.sa);
      out.logits = std::move(seq.logits);
      out.log_probs = std::move(seq.log_probs);
      break;
    }
  }
  return out;
}

Model::SeqOut Model::forward(const Tensor& features) const {
  Trunk trunk = run_trunk(features);
  return run_head(config_.head, head_, trunk.top_out);
}

Model::SeqOut Model::forward_aux(const Tensor& features) const {
  return forward_dual(features).aux;
}

Model::DualOut Model::forward_dual(const Tensor& features) const {
  if (!config_.hybrid) throw std::logic_error("forward_dual: model has no letter branch");
  Trunk trunk = run_trunk(features);
  DualOut out;
  out.main = run_head(config_.head, head_, trunk.top_out);
  std::vector<ad::NodePtr> aux_seq = rnn::run_layer(trunk.trunk_out, *aux_layer_);
  aux_seq = rnn::apply_projection(aux_seq, *aux_proj_);
  out.aux = run_head(config_.aux_head, *aux_head_, aux_seq);
  return out;
}

void Model::for_each_param(const rnn::ParamVisitor& visit) const {
  stack_.for_each_param("rnn", visit);
  head_.for_each_param("head", visit);
  if (aux_layer_) {
    aux_layer_->fwd.for_each_param("aux/layer/fwd", visit);
    if (aux_layer_->bwd) aux_layer_->bwd->for_each_param("aux/layer/bwd", visit);
    aux_proj_->for_each_param("aux/proj", visit);
    aux_head_->for_each_param("aux/head", visit);
  }
}

std::vector<ad::NodePtr> Model::trainable_main() const {
  std::vector<ad::NodePtr> out;
  stack_.for_each_param("rnn", [&](const std::string&, const ad::NodePtr& p) { out.push_back(p); });
  head_.for_each_param("head", [&](const std::string&, const ad::NodePtr& p) { out.push_back(p); });
  return out;
}

std::vector<ad::NodePtr> Model::trainable_aux() const {
  std::vector<ad::NodePtr> out;
  if (!aux_layer_) return out;
  auto take = [&](const std::string&, const ad::NodePtr& p) { out.push_back(p); };
  aux_layer_->fwd.for_each_param("", take);
  if (aux_layer_->bwd) aux_layer_->bwd->for_each_param("", take);
  aux_proj_->for_each_param("", take);
  aux_head_->for_each_param("", take);
  return out;
}

ctc::PosteriorLattice lattice_of(const Model::SeqOut& out) {
  if (out.log_probs.empty()) throw std::invalid_argument("lattice_of: empty forward output");
  const int T = static_cast<int>(out.log_probs.size());
  const int K = static_cast<int>(out.log_probs[0]->value.numel());
  ctc::PosteriorLattice lat(T, K);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) lat.log_prob(t, k) = out.log_probs[static_cast<size_t>(t)]->value[k];
  }
  return lat;
}

DecodeMode decode_mode_from_string(const std::string& name) {
  if (name == "word") return DecodeMode::word;
  if (name == "letters") return DecodeMode::letters;
  if (name == "hybrid") return DecodeMode::hybrid;
  if (name == "mixed") return DecodeMode::mixed;
  throw std::invalid_argument("unknown decode mode '" + name + "'");
}

namespace {

std::vector<std::string> units_of(const ctc::Hypothesis& hyp, const vocab::TokenVocabulary& v) {
  std::vector<std::string> units;
  units.reserve(hyp.tokens.size());
  for (int id : hyp.tokens) units.push_back(v.unit(id));
  return units;
}

}  // namespace

std::vector<std::string> decode_utterance(const Model& model, const Tensor& features,
                                          DecodeMode mode) {
  const vocab::Scheme scheme = model.main_vocab().scheme;
  switch (mode) {
    case DecodeMode::word: {
      if (scheme != vocab::Scheme::word_oov) {
        throw std::invalid_argument("decode mode 'word' requires a word-oov vocabulary, got " +
                                    vocab::to_string(scheme));
      }
      ctc::Hypothesis hyp = ctc::greedy_decode(lattice_of(model.forward(features)));
      std::vector<std::string> words;
      for (const auto& u : units_of(hyp, model.main_vocab())) {
        if (u != vocab::kSilenceUnit) words.push_back(u);
      }
      return words;
    }
    case DecodeMode::letters:
    case DecodeMode::mixed: {
      const bool ok = mode == DecodeMode::letters
                          ? (vocab::is_letter(scheme) || scheme == vocab::Scheme::wordpiece)
                          : vocab::is_mixed(scheme);
      if (!ok) {
        throw std::invalid_argument("decode mode does not match vocabulary scheme " +
                                    vocab::to_string(scheme));
      }
      ctc::Hypothesis hyp = ctc::greedy_decode(lattice_of(model.forward(features)));
      auto units = units_of(hyp, model.main_vocab());
      return scheme == vocab::Scheme::wordpiece ? vocab::merge_wordpiece_tokens(units)
                                                : vocab::merge_mixed_tokens(units);
    }
    case DecodeMode::hybrid: {
      if (scheme != vocab::Scheme::word_oov) {
        throw std::invalid_argument("decode mode 'hybrid' requires a word-oov main vocabulary");
      }
      Model::DualOut out = model.forward_dual(features);
      ctc::Hypothesis word_hyp = ctc::greedy_decode(lattice_of(out.main));
      ctc::Hypothesis letter_hyp = ctc::greedy_decode(lattice_of(out.aux));
      vocab::SegmentedHypothesis segmented;
      for (size_t i = 0; i < word_hyp.tokens.size(); ++i) {
        const std::string& u = model.main_vocab().unit(word_hyp.tokens[i]);
        if (u == vocab::kSilenceUnit) continue;
        segmented.words.push_back(u);
        segmented.segments.push_back(word_hyp.segments[i]);
      }
      vocab::HybridMergeResult merged = vocab::hybrid_replace_oov(
          segmented, units_of(letter_hyp, model.aux_vocab()), letter_hyp.segments);
      std::vector<std::string> words;
      for (auto& w : merged.words) {
        if (!w.empty()) words.push_back(std::move(w));
      }
      return words;
    }
  }
  throw std::logic_error("decode_utterance: unreachable");
}

// ---- checkpoint round-trip --------------------------------------------------

namespace {

std::string bool_str(bool b) { return b ? "1" : "0"; }

void write_head_spec(std::ostringstream& os, const std::string& prefix, const HeadSpec& h) {
  os << prefix << ".kind = " << to_string(h.kind) << '\n';
  os << prefix << ".tau = " << h.attention.tau << '\n';
  os << prefix << ".gamma = " << h.attention.gamma << '\n';
  os << prefix << ".mode = " << (h.attention.mode == attn::ScoreMode::hybrid ? "hybrid" : "content")
     << '\n';
  os << prefix << ".plm = " << bool_str(h.attention.plm) << '\n';
  os << prefix << ".coma = " << bool_str(h.attention.coma) << '\n';
  os << prefix << ".location_kernel_width = " << h.attention.location_kernel_width << '\n';
  os << prefix << ".sa_heads = " << h.sa_heads << '\n';
  os << prefix << ".sa_dim = " << h.sa_dim << '\n';
}

class ConfigMap {
 public:
  explicit ConfigMap(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      map_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
  }
  std::string str(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) throw std::runtime_error("checkpoint config: missing key " + key);
    return it->second;
  }
  int integer(const std::string& key) const { return std::stoi(str(key)); }
  double real(const std::string& key) const { return std::stod(str(key)); }
  bool boolean(const std::string& key) const { return str(key) == "1" || str(key) == "true"; }
  uint64_t u64(const std::string& key) const { return std::stoull(str(key)); }
  bool has(const std::string& key) const { return map_.count(key) != 0; }

 private:
  std::map<std::string, std::string> map_;
};

HeadSpec read_head_spec(const ConfigMap& cfg, const std::string& prefix) {
  HeadSpec h;
  h.kind = head_kind_from_string(cfg.str(prefix + ".kind"));
  h.attention.tau = cfg.integer(prefix + ".tau");
  h.attention.gamma = cfg.real(prefix + ".gamma");
  h.attention.mode = cfg.str(prefix + ".mode") == "hybrid" ? attn::ScoreMode::hybrid
                                                           : attn::ScoreMode::content;
  h.attention.plm = cfg.boolean(prefix + ".plm");
  h.attention.coma = cfg.boolean(prefix + ".coma");
  h.attention.location_kernel_width = cfg.integer(prefix + ".location_kernel_width");
  h.sa_heads = cfg.integer(prefix + ".sa_heads");
  h.sa_dim = cfg.integer(prefix + ".sa_dim");
  return h;
}

}  // namespace

std::string serialize_model_config(const ModelConfig& cfg, int feature_dim,
                                   const vocab::TokenVocabulary& main_vocab,
                                   const std::optional<vocab::TokenVocabulary>& aux_vocab) {
  std::ostringstream os;
  os << "feature_dim = " << feature_dim << '\n';
  os << "stack.layers = " << cfg.stack.layers << '\n';
  os << "stack.cells = " << cfg.stack.cells_per_direction << '\n';
  os << "stack.bidirectional = " << bool_str(cfg.stack.bidirectional) << '\n';
  os << "stack.projection_dim = " << cfg.stack.projection_dim << '\n';
  os << "stack.frame_stack = " << cfg.stack.frame_stack << '\n';
  os << "stack.frame_skip = " << cfg.stack.frame_skip << '\n';
  os << "stack.project_per_layer = " << bool_str(cfg.stack.project_per_layer) << '\n';
  write_head_spec(os, "head", cfg.head);
  os << "hybrid = " << bool_str(cfg.hybrid) << '\n';
  write_head_spec(os, "aux", cfg.aux_head);
  os << "seed = " << cfg.seed << '\n';
  os << "vocab.scheme = " << vocab::to_string(main_vocab.scheme) << '\n';
  os << "vocab.min_count = " << main_vocab.min_count << '\n';
  if (aux_vocab) {
    os << "aux_vocab.scheme = " << vocab::to_string(aux_vocab->scheme) << '\n';
    os << "aux_vocab.min_count = " << aux_vocab->min_count << '\n';
  }
  return os.str();
}

Checkpoint Model::to_checkpoint() const {
  Checkpoint ckpt;
  {
    std::ostringstream os;
    main_vocab_.write(os);
    ckpt.vocab_text = os.str();
  }
  if (aux_vocab_) {
    std::ostringstream os;
    aux_vocab_->write(os);
    ckpt.aux_vocab_text = os.str();
  }
  for_each_param([&](const std::string& name, const ad::NodePtr& p) {
    ckpt.tensors.emplace_back(name, p->value);
  });
  ckpt.config_text = serialize_model_config(config_, feature_dim_, main_vocab_, aux_vocab_);
  return ckpt;
}

Model Model::from_checkpoint(const Checkpoint& ckpt) {
  ConfigMap cfg(ckpt.config_text);
  ModelConfig mc;
  mc.stack.layers = cfg.integer("stack.layers");
  mc.stack.cells_per_direction = cfg.integer("stack.cells");
  mc.stack.bidirectional = cfg.boolean("stack.bidirectional");
  mc.stack.projection_dim = cfg.integer("stack.projection_dim");
  mc.stack.frame_stack = cfg.integer("stack.frame_stack");
  mc.stack.frame_skip = cfg.integer("stack.frame_skip");
  mc.stack.project_per_layer = cfg.boolean("stack.project_per_layer");
  mc.head = read_head_spec(cfg, "head");
  mc.hybrid = cfg.boolean("hybrid");
  mc.aux_head = read_head_spec(cfg, "aux");
  mc.seed = cfg.u64("seed");

  const int feature_dim = cfg.integer("feature_dim");
  std::istringstream vs(ckpt.vocab_text);
  vocab::TokenVocabulary main_vocab = vocab::TokenVocabulary::read(
      vs, vocab::scheme_from_string(cfg.str("vocab.scheme")), cfg.integer("vocab.min_count"));
  std::optional<vocab::TokenVocabulary> aux_vocab;
  if (cfg.has("aux_vocab.scheme")) {
    std::istringstream as(ckpt.aux_vocab_text);
    aux_vocab = vocab::TokenVocabulary::read(
        as, vocab::scheme_from_string(cfg.str("aux_vocab.scheme")),
        cfg.integer("aux_vocab.min_count"));
  }

  Model model(mc, feature_dim, std::move(main_vocab), std::move(aux_vocab));
  std::map<std::string, Tensor> by_name(ckpt.tensors.begin(), ckpt.tensors.end());
  model.for_each_param([&](const std::string& name, const ad::NodePtr& p) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint is missing tensor '" + name + "'");
    }
    if (!(it->second.shape() == p->value.shape())) {
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " +
                               it->second.shape_str() + ", expected " + p->value.shape_str());
    }
    p->value = it->second;
  });
  return model;
}

}  // namespace mixctc::harness
