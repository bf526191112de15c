#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixctc/rng.hpp"
#include "mixctc/tensor.hpp"

namespace mixctc::harness {

/// Synthetic feature generator.  Every character (plus the word separator)
/// gets a fixed random template of a few frames; an utterance's features are
/// the concatenation of its tokens' templates plus Gaussian noise.
struct SyntheticSpec {
  std::vector<std::string> frequent_words;
  std::vector<std::string> rare_words;
  double rare_rate = 0.02;  // probability a word slot draws from rare_words
  int feature_dim = 8;
  int template_frames_min = 2;
  int template_frames_max = 4;
  double noise_std = 0.1;
  int words_min = 2;
  int words_max = 5;
  // 0: every template frame is an independent random vector.  > 0: frames
  // are drawn from a shared pool of that many basis vectors, so a single
  // frame is ambiguous across tokens and only the local frame sequence
  // identifies the token.  Distinct tokens still get distinct templates.
  int template_basis = 0;
  uint64_t seed = 1;
};

struct Utterance {
  Tensor features;  // T x feature_dim
  std::vector<std::string> words;
};

/// Template for one token (a single character or the separator), fixed given
/// the spec seed; distinct tokens get distinct templates.
Tensor token_template(const SyntheticSpec& spec, const std::string& token);

/// Deterministic dataset: word sequences drawn from the pools, features
/// assembled as separator + word characters + separator + ... + separator.
std::vector<Utterance> generate_dataset(const SyntheticSpec& spec, int count);

/// Deterministic pool of random lowercase words.
std::vector<std::string> random_word_pool(int count, int len_min, int len_max, uint64_t seed);

/// Dataset on disk: a manifest with one utterance per line
/// ("<feature path>\t<space-separated words>") plus one binary feature block
/// per utterance (frame count, dim, then doubles, all little-endian).
void save_dataset(const std::string& dir, const std::vector<Utterance>& utterances);
std::vector<Utterance> load_dataset(const std::string& manifest_path);

}  // namespace mixctc::harness
