#include "mixctc/data.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mixctc/vocab.hpp"

namespace mixctc::harness {

namespace fs = std::filesystem;

namespace {

// Canonical token order: separator, apostrophe, asterisk, a..z.
int token_index(const std::string& token) {
  if (token == vocab::kSeparatorUnit) return 0;
  if (token == "'") return 1;
  if (token == "*") return 2;
  if (token.size() == 1 && token[0] >= 'a' && token[0] <= 'z') return 3 + token[0] - 'a';
  throw std::invalid_argument("token_template: unsupported token '" + token + "'");
}

std::vector<double> basis_vector(const SyntheticSpec& spec, int id) {
  Rng rng(hash_seed(spec.seed, "basis:" + std::to_string(id)));
  std::vector<double> v(static_cast<size_t>(spec.feature_dim));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Per-position bijection over basis ids, so the digit layout is randomized
// while distinct tokens keep distinct basis-id sequences.
std::vector<int> position_permutation(const SyntheticSpec& spec, int position) {
  std::vector<int> perm(static_cast<size_t>(spec.template_basis));
  for (int i = 0; i < spec.template_basis; ++i) perm[static_cast<size_t>(i)] = i;
  Rng rng(hash_seed(spec.seed, "perm:" + std::to_string(position)));
  for (size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
  }
  return perm;
}

}  // namespace

Tensor token_template(const SyntheticSpec& spec, const std::string& token) {
  Rng rng(hash_seed(spec.seed, "template:" + token));
  const int frames =
      static_cast<int>(rng.uniform_int(spec.template_frames_min, spec.template_frames_max));
  Tensor t({frames, spec.feature_dim});
  if (spec.template_basis <= 0) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
  }
  const int B = spec.template_basis;
  if (static_cast<double>(B) * B < 29.0) {
    throw std::invalid_argument("token_template: basis too small to keep 29 tokens distinct");
  }
  // Frame i encodes digit i of the token index in base B, permuted per
  // position; tokens therefore collide on single frames but never on the
  // whole sequence.
  int idx = token_index(token);
  for (int i = 0; i < frames; ++i) {
    const int digit = idx % B;
    idx /= B;
    const int id = position_permutation(spec, i)[static_cast<size_t>(digit)];
    const std::vector<double> v = basis_vector(spec, id);
    for (int64_t j = 0; j < spec.feature_dim; ++j) t.at(i, j) = v[static_cast<size_t>(j)];
  }
  return t;
}

std::vector<std::string> random_word_pool(int count, int len_min, int len_max, uint64_t seed) {
  Rng rng(hash_seed(seed, "word_pool"));
  std::vector<std::string> pool;
  std::unordered_map<std::string, bool> seen;
  while (static_cast<int>(pool.size()) < count) {
    const int len = static_cast<int>(rng.uniform_int(len_min, len_max));
    std::string w;
    for (int i = 0; i < len; ++i) w.push_back(static_cast<char>('a' + rng.uniform_int(0, 25)));
    if (!seen[w]) {
      seen[w] = true;
      pool.push_back(std::move(w));
    }
  }
  return pool;
}

std::vector<Utterance> generate_dataset(const SyntheticSpec& spec, int count) {
  if (spec.frequent_words.empty()) {
    throw std::invalid_argument("generate_dataset: no frequent words in spec");
  }
  Rng rng(hash_seed(spec.seed, "dataset"));
  std::vector<Utterance> out;
  out.reserve(static_cast<size_t>(count));
  for (int u = 0; u < count; ++u) {
    Utterance utt;
    const int n_words = static_cast<int>(rng.uniform_int(spec.words_min, spec.words_max));
    for (int i = 0; i < n_words; ++i) {
      const bool rare = !spec.rare_words.empty() && rng.uniform01() < spec.rare_rate;
      const auto& pool = rare ? spec.rare_words : spec.frequent_words;
      utt.words.push_back(pool[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))]);
    }
    // separator + chars(w1) + separator + chars(w2) + ... + separator
    std::vector<Tensor> pieces;
    pieces.push_back(token_template(spec, vocab::kSeparatorUnit));
    for (const auto& w : utt.words) {
      for (char c : w) pieces.push_back(token_template(spec, std::string(1, c)));
      pieces.push_back(token_template(spec, vocab::kSeparatorUnit));
    }
    int64_t total = 0;
    for (const auto& p : pieces) total += p.extent(0);
    utt.features = Tensor({total, spec.feature_dim});
    int64_t row = 0;
    for (const auto& p : pieces) {
      for (int64_t i = 0; i < p.extent(0); ++i, ++row) {
        for (int64_t j = 0; j < spec.feature_dim; ++j) {
          utt.features.at(row, j) = p.at(i, j) + (spec.noise_std > 0.0
                                                      ? rng.normal(0.0, spec.noise_std)
                                                      : 0.0);
        }
      }
    }
    out.push_back(std::move(utt));
  }
  return out;
}

namespace {

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw std::runtime_error("dataset: truncated binary block");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_dataset(const std::string& dir, const std::vector<Utterance>& utterances) {
  fs::create_directories(fs::path(dir) / "feat");
  std::ofstream manifest(fs::path(dir) / "data.tsv");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir);
  for (size_t i = 0; i < utterances.size(); ++i) {
    std::ostringstream name;
    name << "feat/utt" << i << ".bin";
    const fs::path feat_path = fs::path(dir) / name.str();
    std::ofstream fb(feat_path, std::ios::binary);
    if (!fb) throw std::runtime_error("cannot write " + feat_path.string());
    const Tensor& f = utterances[i].features;
    write_u64(fb, static_cast<uint64_t>(f.extent(0)));
    write_u64(fb, static_cast<uint64_t>(f.extent(1)));
    fb.write(reinterpret_cast<const char*>(f.data().data()),
             static_cast<std::streamsize>(f.numel() * sizeof(double)));
    manifest << name.str() << '\t';
    for (size_t wi = 0; wi < utterances[i].words.size(); ++wi) {
      if (wi) manifest << ' ';
      manifest << utterances[i].words[wi];
    }
    manifest << '\n';
  }
}

std::vector<Utterance> load_dataset(const std::string& manifest_path) {
  std::ifstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot read manifest " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<Utterance> out;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("dataset: bad manifest line: " + line);
    Utterance utt;
    const std::string feat_rel = line.substr(0, tab);
    std::istringstream ws(line.substr(tab + 1));
    std::string w;
    while (ws >> w) utt.words.push_back(w);
    fs::path feat_path = fs::path(feat_rel);
    if (feat_path.is_relative()) feat_path = base / feat_path;
    std::ifstream fb(feat_path, std::ios::binary);
    if (!fb) throw std::runtime_error("cannot read feature block " + feat_path.string());
    const auto frames = static_cast<int64_t>(read_u64(fb));
    const auto dim = static_cast<int64_t>(read_u64(fb));
    utt.features = Tensor({frames, dim});
    fb.read(reinterpret_cast<char*>(utt.features.data().data()),
            static_cast<std::streamsize>(utt.features.numel() * sizeof(double)));
    if (!fb) throw std::runtime_error("dataset: truncated feature block " + feat_path.string());
    out.push_back(std::move(utt));
  }
  return out;
}

}  // namespace mixctc::harness
