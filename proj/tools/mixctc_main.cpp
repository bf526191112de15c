// Command-line front end: vocabulary construction, synthetic data
// generation, training, greedy decoding, and WER scoring.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "mixctc/data.hpp"
#include "mixctc/model.hpp"
#include "mixctc/train.hpp"
#include "mixctc/vocab.hpp"
#include "mixctc/wer.hpp"

using namespace mixctc;

namespace {

std::vector<std::vector<std::string>> read_sentences(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<std::string> words;
    std::string w;
    while (ls >> w) words.push_back(w);
    out.push_back(std::move(words));
  }
  return out;
}

struct Options {
  // shared
  uint64_t seed = 1;
  std::string mode = "letters";
  std::string scheme = "single";
  std::string out;
  std::string data_path;
  std::string vocab_path;
  std::string model_path;

  // vocab build
  std::string corpus_path;
  int min_count = 10;
  int wp_size = 200;

  // data gen
  int count = 100;
  int frequent = 40;
  int rare = 8;
  double rare_rate = 0.02;
  int dim = 8;
  int frames_min = 2;
  int frames_max = 4;
  double noise = 0.1;
  int basis = 0;
  int words_min = 2;
  int words_max = 5;

  // model topology
  int layers = 2;
  int cells = 32;
  bool bidi = false;
  int proj = 32;
  int frame_stack = 1;
  int frame_skip = 1;
  std::string head = "plain";
  int tau = 4;
  double gamma = 0.0;
  std::string attn_mode = "content";
  std::string plm = "off";
  std::string coma = "off";
  int heads = 1;
  int sa_dim = 32;
  std::string letter_vocab_path;
  std::string letter_scheme = "single";

  // optimization
  double lr = 0.1;
  double momentum = 0.9;
  double clip = 5.0;
  int batch = 8;
  int epochs = 50;
  int aux_epochs = 0;
  bool verbose = false;

  // eval
  std::string ref_path;
  std::string hyp_path;
};

harness::ModelConfig model_config_from(const Options& opt) {
  harness::ModelConfig mc;
  mc.stack.layers = opt.layers;
  mc.stack.cells_per_direction = opt.cells;
  mc.stack.bidirectional = opt.bidi;
  mc.stack.projection_dim = opt.proj;
  mc.stack.frame_stack = opt.frame_stack;
  mc.stack.frame_skip = opt.frame_skip;
  mc.head.kind = harness::head_kind_from_string(opt.head);
  mc.head.attention.tau = opt.tau;
  mc.head.attention.gamma = opt.gamma;
  mc.head.attention.mode = opt.attn_mode == "hybrid" ? attn::ScoreMode::hybrid
                                                     : attn::ScoreMode::content;
  mc.head.attention.plm = opt.plm == "on";
  mc.head.attention.coma = opt.coma == "on";
  mc.head.sa_heads = opt.heads;
  mc.head.sa_dim = opt.sa_dim;
  mc.hybrid = opt.mode == "hybrid";
  mc.aux_head.kind = harness::HeadKind::plain;
  mc.aux_head.attention.tau = opt.tau;
  mc.seed = opt.seed;
  return mc;
}

int run_vocab_build(const Options& opt) {
  auto corpus = read_sentences(opt.corpus_path);
  auto scheme = vocab::scheme_from_string(opt.scheme);
  auto v = vocab::build_frequent_vocab(corpus, opt.min_count, scheme, opt.wp_size);
  v.save(opt.out);
  std::cout << "wrote " << v.size() << " units (" << v.frequent_words.size()
            << " frequent words) to " << opt.out << "\n";
  return 0;
}

int run_data_gen(const Options& opt) {
  harness::SyntheticSpec spec;
  spec.frequent_words = harness::random_word_pool(opt.frequent, 3, 7, opt.seed);
  spec.rare_words = harness::random_word_pool(opt.rare, 3, 7, opt.seed + 1);
  spec.rare_rate = opt.rare_rate;
  spec.feature_dim = opt.dim;
  spec.template_frames_min = opt.frames_min;
  spec.template_frames_max = opt.frames_max;
  spec.noise_std = opt.noise;
  spec.template_basis = opt.basis;
  spec.words_min = opt.words_min;
  spec.words_max = opt.words_max;
  spec.seed = opt.seed;
  auto data = harness::generate_dataset(spec, opt.count);
  harness::save_dataset(opt.out, data);
  std::ofstream text(opt.out + "/text.txt");
  for (const auto& utt : data) {
    for (size_t i = 0; i < utt.words.size(); ++i) text << (i ? " " : "") << utt.words[i];
    text << '\n';
  }
  std::cout << "wrote " << data.size() << " utterances to " << opt.out << "\n";
  return 0;
}

int run_train(const Options& opt) {
  auto data = harness::load_dataset(opt.data_path);
  auto scheme = vocab::scheme_from_string(opt.scheme);
  auto main_vocab = vocab::TokenVocabulary::load(opt.vocab_path, scheme, opt.min_count);
  std::optional<vocab::TokenVocabulary> letter_vocab;
  harness::ModelConfig mc = model_config_from(opt);
  if (mc.hybrid) {
    if (opt.letter_vocab_path.empty()) {
      throw std::runtime_error("--mode hybrid requires --letter-vocab");
    }
    letter_vocab = vocab::TokenVocabulary::load(
        opt.letter_vocab_path, vocab::scheme_from_string(opt.letter_scheme), opt.min_count);
  }
  const int feature_dim = static_cast<int>(data.at(0).features.extent(1));
  harness::Model model(mc, feature_dim, std::move(main_vocab), std::move(letter_vocab));

  harness::TrainConfig tc;
  tc.learning_rate = opt.lr;
  tc.momentum = opt.momentum;
  tc.clip_norm = opt.clip;
  tc.batch_size = opt.batch;
  tc.epochs = opt.epochs;
  tc.aux_epochs = opt.aux_epochs;
  tc.seed = opt.seed;
  tc.verbose = opt.verbose;
  harness::TrainResult result = harness::train(model, tc, data);
  if (!result.epoch_losses.empty()) {
    std::cout << "final mean loss " << result.epoch_losses.back() << " after "
              << result.epoch_losses.size() << " epochs";
    if (!result.aux_epoch_losses.empty()) {
      std::cout << "; letter stage final loss " << result.aux_epoch_losses.back();
    }
    std::cout << "\n";
  }
  if (result.skipped_utterances > 0) {
    std::cout << "skipped " << result.skipped_utterances << " infeasible utterances\n";
  }
  harness::save_checkpoint(model.to_checkpoint(), opt.out);
  std::cout << "wrote checkpoint " << opt.out << "\n";
  return 0;
}

int run_decode(const Options& opt) {
  harness::Model model = harness::Model::from_checkpoint(harness::load_checkpoint(opt.model_path));
  auto data = harness::load_dataset(opt.data_path);
  const auto mode = harness::decode_mode_from_string(opt.mode);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!opt.out.empty()) {
    file.open(opt.out);
    if (!file) throw std::runtime_error("cannot write " + opt.out);
    os = &file;
  }
  for (const auto& utt : data) {
    auto words = harness::decode_utterance(model, utt.features, mode);
    for (size_t i = 0; i < words.size(); ++i) (*os) << (i ? " " : "") << words[i];
    (*os) << '\n';
  }
  if (!opt.out.empty()) std::cout << "wrote " << data.size() << " hypotheses to " << opt.out << "\n";
  return 0;
}

int run_eval(const Options& opt) {
  auto refs = read_sentences(opt.ref_path);
  auto hyps = read_sentences(opt.hyp_path);
  const double wer = harness::evaluate_wer(refs, hyps);
  std::cout << "WER = " << wer << "%\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CTC sequence transduction toolkit: attention-augmented CTC heads, "
               "hybrid word+letter decoding, and mixed-unit vocabularies"};
  app.fallthrough();
  app.set_config("--config", "", "Read options from a key = value file");

  Options opt;
  app.add_option("--seed", opt.seed, "Random seed");
  app.add_option("--mode", opt.mode, "word|letters|hybrid|mixed");
  app.add_option("--scheme", opt.scheme,
                 "single|double|triple|oov-single|mixed-single|mixed-double|mixed-triple|"
                 "wordpiece|word-oov");
  app.add_option("--out", opt.out, "Output path");
  app.add_option("--data", opt.data_path, "Dataset manifest (data.tsv)");
  app.add_option("--vocab", opt.vocab_path, "Vocabulary file");
  app.add_option("--model", opt.model_path, "Checkpoint path");
  app.add_option("--corpus", opt.corpus_path, "Corpus text file, one sentence per line");
  app.add_option("--min-count", opt.min_count, "Frequent-word threshold");
  app.add_option("--wp-size", opt.wp_size, "Wordpiece inventory size");
  app.add_option("--count", opt.count, "Utterances to generate");
  app.add_option("--frequent", opt.frequent, "Frequent-word pool size");
  app.add_option("--rare", opt.rare, "Rare-word pool size");
  app.add_option("--rare-rate", opt.rare_rate, "Rare-word sampling rate");
  app.add_option("--dim", opt.dim, "Feature dimension");
  app.add_option("--frames-min", opt.frames_min, "Min template frames per token");
  app.add_option("--frames-max", opt.frames_max, "Max template frames per token");
  app.add_option("--noise", opt.noise, "Feature noise std");
  app.add_option("--basis", opt.basis, "Template basis pool size (0 = independent frames)");
  app.add_option("--words-min", opt.words_min, "Min words per utterance");
  app.add_option("--words-max", opt.words_max, "Max words per utterance");
  app.add_option("--layers", opt.layers, "LSTM layers");
  app.add_option("--cells", opt.cells, "LSTM cells per direction");
  app.add_flag("--bidi", opt.bidi, "Bidirectional stack");
  app.add_option("--proj", opt.proj, "Projection dimension");
  app.add_option("--frame-stack", opt.frame_stack, "Frames stacked per step");
  app.add_option("--frame-skip", opt.frame_skip, "Frame skip rate");
  app.add_option("--head", opt.head, "plain|attention|self-attention");
  app.add_option("--tau", opt.tau, "One-sided attention window");
  app.add_option("--gamma", opt.gamma, "Context scale (0 = window size)");
  app.add_option("--attn-mode", opt.attn_mode, "content|hybrid scoring");
  app.add_option("--plm", opt.plm, "on|off pseudo language model");
  app.add_option("--coma", opt.coma, "on|off component attention");
  app.add_option("--heads", opt.heads, "Self-attention heads");
  app.add_option("--sa-dim", opt.sa_dim, "Self-attention key/value width");
  app.add_option("--letter-vocab", opt.letter_vocab_path, "Letter vocabulary (hybrid)");
  app.add_option("--letter-scheme", opt.letter_scheme, "Letter-side scheme (hybrid)");
  app.add_option("--lr", opt.lr, "Learning rate");
  app.add_option("--momentum", opt.momentum, "SGD momentum");
  app.add_option("--clip", opt.clip, "Global gradient-norm clip");
  app.add_option("--batch", opt.batch, "Batch size");
  app.add_option("--epochs", opt.epochs, "Training epochs");
  app.add_option("--aux-epochs", opt.aux_epochs, "Letter-stage epochs (hybrid)");
  app.add_flag("--verbose", opt.verbose, "Per-epoch loss on stderr");
  app.add_option("--ref", opt.ref_path, "Reference text file");
  app.add_option("--hyp", opt.hyp_path, "Hypothesis text file");

  auto* vocab_cmd = app.add_subcommand("vocab", "Vocabulary operations");
  vocab_cmd->fallthrough();
  auto* vocab_build = vocab_cmd->add_subcommand("build", "Build a vocabulary from a corpus");
  vocab_build->fallthrough();
  auto* data_cmd = app.add_subcommand("data", "Dataset operations");
  data_cmd->fallthrough();
  auto* data_gen = data_cmd->add_subcommand("gen", "Generate a synthetic dataset");
  data_gen->fallthrough();
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->fallthrough();
  auto* decode_cmd = app.add_subcommand("decode", "Greedy-decode a dataset");
  decode_cmd->fallthrough();
  auto* eval_cmd = app.add_subcommand("eval", "Score hypotheses against references");
  eval_cmd->fallthrough();
  app.require_subcommand(0, 1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*vocab_build || *data_gen || *train_cmd || *decode_cmd || *eval_cmd) {
      // the resolved configuration, defaults included
      std::cout << "# resolved configuration\n" << app.config_to_str(true, false) << "# ---\n";
    }
    if (*vocab_build) return run_vocab_build(opt);
    if (*data_gen) return run_data_gen(opt);
    if (*train_cmd) return run_train(opt);
    if (*decode_cmd) return run_decode(opt);
    if (*eval_cmd) return run_eval(opt);
    std::cout << app.help();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
