#include "mixctc/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mixctc::vocab {

namespace {

// Frequent words shorter than this are never extracted from inside an OOV
// (blocks spurious one/two-letter matches).
constexpr size_t kMinEmbeddedMatch = 3;

void check_word(const std::string& word) {
  if (word.empty()) throw std::invalid_argument("decompose_word: empty word");
  for (char c : word) {
    if (!((c >= 'a' && c <= 'z') || c == '\'' || c == '*')) {
      throw std::invalid_argument("decompose_word: '" + word +
                                  "' contains characters outside [a-z'*]");
    }
  }
}

std::vector<std::string> chunk_word(const std::string& word, int n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < word.size(); i += static_cast<size_t>(n)) {
    out.push_back(word.substr(i, static_cast<size_t>(n)));
  }
  return out;
}

// Greedy left-to-right longest-match of frequent words inside an OOV; the
// unmatched remainders are chunked into n-grams.
std::vector<std::string> mixed_decompose(const std::string& word, int gram,
                                         const std::unordered_set<std::string>& frequent) {
  std::vector<std::string> out;
  std::string pending;
  auto flush = [&]() {
    if (pending.empty()) return;
    for (auto& u : chunk_word(pending, gram)) out.push_back(std::move(u));
    pending.clear();
  };
  size_t i = 0;
  while (i < word.size()) {
    size_t best_len = 0;
    for (size_t len = word.size() - i; len >= kMinEmbeddedMatch; --len) {
      if (frequent.count(word.substr(i, len))) {
        best_len = len;
        break;
      }
    }
    if (best_len > 0) {
      flush();
      out.push_back(word.substr(i, best_len));
      i += best_len;
    } else {
      pending.push_back(word[i]);
      ++i;
    }
  }
  flush();
  return out;
}

std::vector<std::string> decompose_raw(const std::string& word, Scheme scheme,
                                       const std::unordered_set<std::string>& frequent,
                                       const WordpieceModel* wp) {
  check_word(word);
  switch (scheme) {
    case Scheme::single_letter:
      return chunk_word(word, 1);
    case Scheme::double_letter:
      return chunk_word(word, 2);
    case Scheme::triple_letter:
      return chunk_word(word, 3);
    case Scheme::word_oov:
      return {frequent.count(word) ? word : std::string(kOovUnit)};
    case Scheme::oov_single_letter:
      if (frequent.count(word)) return {word};
      return chunk_word(word, 1);
    case Scheme::mixed_single:
    case Scheme::mixed_double:
    case Scheme::mixed_triple:
      if (frequent.count(word)) return {word};
      return mixed_decompose(word, gram_size(scheme), frequent);
    case Scheme::wordpiece:
      if (!wp) throw std::invalid_argument("decompose_word: wordpiece scheme without merges");
      return wordpiece_segment(word, *wp);
  }
  throw std::invalid_argument("decompose_word: unknown scheme");
}

}  // namespace

Scheme scheme_from_string(const std::string& name) {
  if (name == "word-oov") return Scheme::word_oov;
  if (name == "single") return Scheme::single_letter;
  if (name == "double") return Scheme::double_letter;
  if (name == "triple") return Scheme::triple_letter;
  if (name == "oov-single") return Scheme::oov_single_letter;
  if (name == "mixed-single") return Scheme::mixed_single;
  if (name == "mixed-double") return Scheme::mixed_double;
  if (name == "mixed-triple") return Scheme::mixed_triple;
  if (name == "wordpiece") return Scheme::wordpiece;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::word_oov: return "word-oov";
    case Scheme::single_letter: return "single";
    case Scheme::double_letter: return "double";
    case Scheme::triple_letter: return "triple";
    case Scheme::oov_single_letter: return "oov-single";
    case Scheme::mixed_single: return "mixed-single";
    case Scheme::mixed_double: return "mixed-double";
    case Scheme::mixed_triple: return "mixed-triple";
    case Scheme::wordpiece: return "wordpiece";
  }
  return "?";
}

bool is_mixed(Scheme s) {
  return s == Scheme::mixed_single || s == Scheme::mixed_double || s == Scheme::mixed_triple ||
         s == Scheme::oov_single_letter;
}

bool is_letter(Scheme s) {
  return s == Scheme::single_letter || s == Scheme::double_letter || s == Scheme::triple_letter;
}

int gram_size(Scheme s) {
  switch (s) {
    case Scheme::single_letter:
    case Scheme::oov_single_letter:
    case Scheme::mixed_single:
      return 1;
    case Scheme::double_letter:
    case Scheme::mixed_double:
      return 2;
    case Scheme::triple_letter:
    case Scheme::mixed_triple:
      return 3;
    default:
      throw std::invalid_argument("gram_size: scheme has no gram width");
  }
}

std::string to_string(UnitKind kind) {
  switch (kind) {
    case UnitKind::blank: return "blank";
    case UnitKind::letterkgram: return "letterkgram";
    case UnitKind::word: return "word";
    case UnitKind::separator: return "separator";
    case UnitKind::oov: return "oov";
    case UnitKind::wordpiece: return "wordpiece";
    case UnitKind::unknown: return "unknown";
  }
  return "?";
}

UnitKind unit_kind_from_string(const std::string& name) {
  if (name == "blank") return UnitKind::blank;
  if (name == "letterkgram") return UnitKind::letterkgram;
  if (name == "word") return UnitKind::word;
  if (name == "separator") return UnitKind::separator;
  if (name == "oov") return UnitKind::oov;
  if (name == "wordpiece") return UnitKind::wordpiece;
  if (name == "unknown") return UnitKind::unknown;
  throw std::invalid_argument("unknown unit kind '" + name + "'");
}

int TokenVocabulary::id_of(const std::string& u) const {
  auto it = unit_ids.find(u);
  return it == unit_ids.end() ? -1 : it->second;
}

int TokenVocabulary::id_or_unknown(const std::string& u) const {
  const int id = id_of(u);
  if (id >= 0) return id;
  const int unk = id_of(kUnknownUnit);
  if (unk < 0) {
    throw std::invalid_argument("vocabulary has no entry (and no unknown unit) for '" + u + "'");
  }
  return unk;
}

ctc::LabelSet TokenVocabulary::label_set() const {
  ctc::LabelSet ls;
  ls.num_labels = size();
  ls.blank_index = ctc::kBlankIndex;
  ls.names.reserve(entries.size());
  for (const auto& e : entries) ls.names.push_back(e.unit);
  return ls;
}

void TokenVocabulary::finalize() {
  std::stable_sort(entries.begin(), entries.end(), [](const VocabEntry& a, const VocabEntry& b) {
    const bool ab = a.kind == UnitKind::blank;
    const bool bb = b.kind == UnitKind::blank;
    if (ab != bb) return ab;  // blank first
    return a.unit < b.unit;
  });
  unit_ids.clear();
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!unit_ids.emplace(entries[i].unit, static_cast<int>(i)).second) {
      throw std::invalid_argument("vocabulary: duplicate unit '" + entries[i].unit + "'");
    }
  }
}

void TokenVocabulary::write(std::ostream& os) const {
  for (size_t i = 0; i < entries.size(); ++i) {
    os << i << '\t' << entries[i].unit << '\t' << to_string(entries[i].kind) << '\n';
  }
  if (scheme == Scheme::wordpiece) {
    os << "#merges\n";
    for (const auto& [l, r] : wordpieces.merges) os << l << ' ' << r << '\n';
  }
}

TokenVocabulary TokenVocabulary::read(std::istream& is, Scheme scheme, int min_count) {
  TokenVocabulary v;
  v.scheme = scheme;
  v.min_count = min_count;
  std::string line;
  bool in_merges = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line == "#merges") {
      in_merges = true;
      continue;
    }
    if (in_merges) {
      const auto sp = line.find(' ');
      if (sp == std::string::npos) throw std::invalid_argument("vocab: bad merge line: " + line);
      v.wordpieces.merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
      continue;
    }
    std::istringstream ls(line);
    std::string id_str, unit, kind_str;
    if (!std::getline(ls, id_str, '\t') || !std::getline(ls, unit, '\t') ||
        !std::getline(ls, kind_str)) {
      throw std::invalid_argument("vocab: bad record line: " + line);
    }
    v.entries.push_back({unit, unit_kind_from_string(kind_str)});
  }
  v.finalize();
  for (const auto& e : v.entries) {
    if (e.kind == UnitKind::word && e.unit != kSilenceUnit) v.frequent_words.insert(e.unit);
    if (e.kind == UnitKind::wordpiece || e.kind == UnitKind::separator) {
      v.wordpieces.inventory.push_back(e.unit);
    }
  }
  return v;
}

void TokenVocabulary::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write vocabulary file: " + path);
  write(os);
}

TokenVocabulary TokenVocabulary::load(const std::string& path, Scheme scheme, int min_count) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read vocabulary file: " + path);
  return read(is, scheme, min_count);
}

TokenVocabulary build_frequent_vocab(const std::vector<std::vector<std::string>>& corpus,
                                     int min_count, Scheme scheme, int wordpiece_target) {
  if (corpus.empty()) throw std::invalid_argument("build_frequent_vocab: empty corpus");
  TokenVocabulary v;
  v.scheme = scheme;
  v.min_count = min_count;

  std::map<std::string, long> counts;
  for (const auto& sentence : corpus) {
    for (const auto& w : sentence) ++counts[w];
  }
  for (const auto& [word, count] : counts) {
    if (count >= min_count) v.frequent_words.insert(word);
  }

  if (scheme == Scheme::wordpiece) {
    v.wordpieces = train_wordpieces(corpus, wordpiece_target);
  }

  std::set<std::string> units;
  for (const auto& [word, count] : counts) {
    for (auto& u : decompose_raw(word, scheme, v.frequent_words, &v.wordpieces)) {
      units.insert(std::move(u));
    }
  }
  if (scheme == Scheme::single_letter || scheme == Scheme::oov_single_letter ||
      scheme == Scheme::mixed_single) {
    // Seed the base alphabet so single-letter inventories cover unseen words.
    for (char c = 'a'; c <= 'z'; ++c) units.insert(std::string(1, c));
    units.insert("'");
    units.insert("*");
  }

  v.entries.push_back({kBlankUnit, UnitKind::blank});
  if (scheme == Scheme::word_oov) {
    v.entries.push_back({kOovUnit, UnitKind::oov});
    v.entries.push_back({kSilenceUnit, UnitKind::word});
    for (const auto& w : std::set<std::string>(v.frequent_words.begin(), v.frequent_words.end())) {
      v.entries.push_back({w, UnitKind::word});
    }
  } else if (scheme == Scheme::wordpiece) {
    v.entries.push_back({kUnknownUnit, UnitKind::unknown});
    v.entries.push_back({kWordEnd, UnitKind::separator});
    for (const auto& u : units) {
      if (u != kWordEnd) v.entries.push_back({u, UnitKind::wordpiece});
    }
  } else {
    v.entries.push_back({std::string(kSeparatorUnit), UnitKind::separator});
    v.entries.push_back({kUnknownUnit, UnitKind::unknown});
    for (const auto& u : units) {
      const bool word_unit = is_mixed(scheme) && v.frequent_words.count(u) != 0;
      v.entries.push_back({u, word_unit ? UnitKind::word : UnitKind::letterkgram});
    }
  }
  v.finalize();
  return v;
}

std::vector<std::string> decompose_word(const std::string& word, Scheme scheme,
                                        const TokenVocabulary& vocab) {
  auto units = decompose_raw(word, scheme, vocab.frequent_words, &vocab.wordpieces);
  for (auto& u : units) {
    if (vocab.id_of(u) < 0) u = kUnknownUnit;
  }
  return units;
}

std::vector<std::string> encode_sentence(const std::vector<std::string>& words,
                                         const TokenVocabulary& vocab) {
  if (!is_mixed(vocab.scheme) && !is_letter(vocab.scheme)) {
    throw std::invalid_argument("encode_sentence: scheme " + to_string(vocab.scheme) +
                                " has no separator encoding");
  }
  std::vector<std::string> out;
  for (const auto& w : words) {
    out.push_back(kSeparatorUnit);
    for (auto& u : decompose_word(w, vocab.scheme, vocab)) out.push_back(std::move(u));
  }
  out.push_back(kSeparatorUnit);
  return out;
}

std::vector<std::string> merge_mixed_tokens(const std::vector<std::string>& tokens) {
  std::vector<std::string> words;
  std::string current;
  for (const auto& tok : tokens) {
    if (tok == kSeparatorUnit) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current += tok;
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<std::string> merge_wordpiece_tokens(const std::vector<std::string>& tokens) {
  std::vector<std::string> words;
  std::string current;
  for (const auto& tok : tokens) {
    if (tok == kWordEnd) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current += tok;
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

WordpieceModel train_wordpieces(const std::vector<std::vector<std::string>>& corpus,
                                int target_inventory) {
  if (corpus.empty()) throw std::invalid_argument("train_wordpieces: empty corpus");
  std::map<std::string, long> counts;
  for (const auto& sentence : corpus) {
    for (const auto& w : sentence) {
      check_word(w);
      ++counts[w];
    }
  }

  std::set<std::string> inventory;
  inventory.insert(kWordEnd);
  std::vector<std::pair<std::vector<std::string>, long>> words;
  for (const auto& [word, count] : counts) {
    std::vector<std::string> symbols;
    for (char c : word) {
      symbols.emplace_back(1, c);
      inventory.insert(std::string(1, c));
    }
    symbols.push_back(kWordEnd);
    words.emplace_back(std::move(symbols), count);
  }
  const size_t base_chars = inventory.size() - 1;  // excluding the end-of-word symbol
  if (target_inventory < static_cast<int>(base_chars)) {
    throw std::invalid_argument("train_wordpieces: target " + std::to_string(target_inventory) +
                                " below base character count " + std::to_string(base_chars));
  }

  WordpieceModel model;
  while (static_cast<int>(inventory.size()) < target_inventory) {
    std::map<std::pair<std::string, std::string>, long> pair_counts;
    for (const auto& [symbols, count] : words) {
      for (size_t i = 0; i + 1 < symbols.size(); ++i) {
        if (symbols[i] == kWordEnd || symbols[i + 1] == kWordEnd) continue;
        pair_counts[{symbols[i], symbols[i + 1]}] += count;
      }
    }
    if (pair_counts.empty()) break;
    // Highest count; the ordered map makes a plain > keep the
    // lexicographically smallest pair on ties.
    auto best = pair_counts.begin();
    for (auto it = std::next(pair_counts.begin()); it != pair_counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged = left + right;
    for (auto& [symbols, count] : words) {
      std::vector<std::string> next;
      next.reserve(symbols.size());
      for (size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(symbols[i]);
        }
      }
      symbols = std::move(next);
    }
    inventory.insert(merged);
    model.merges.emplace_back(left, right);
  }
  model.inventory.assign(inventory.begin(), inventory.end());
  return model;
}

std::vector<std::string> wordpiece_segment(const std::string& word, const WordpieceModel& model) {
  check_word(word);
  std::map<std::pair<std::string, std::string>, size_t> rank;
  for (size_t i = 0; i < model.merges.size(); ++i) rank.emplace(model.merges[i], i);
  std::vector<std::string> symbols;
  for (char c : word) symbols.emplace_back(1, c);
  symbols.push_back(kWordEnd);
  while (true) {
    size_t best_rank = model.merges.size();
    for (size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank.find({symbols[i], symbols[i + 1]});
      if (it != rank.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == model.merges.size()) break;
    const auto& [left, right] = model.merges[best_rank];
    const std::string merged = left + right;
    std::vector<std::string> next;
    next.reserve(symbols.size());
    for (size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        next.push_back(merged);
        ++i;
      } else {
        next.push_back(symbols[i]);
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

std::vector<int> encode_to_ids(const std::vector<std::string>& words,
                               const TokenVocabulary& vocab) {
  std::vector<int> ids;
  if (vocab.scheme == Scheme::word_oov) {
    for (const auto& w : words) {
      ids.push_back(vocab.is_frequent(w) ? vocab.id_or_unknown(w) : vocab.id_of(kOovUnit));
    }
    return ids;
  }
  if (vocab.scheme == Scheme::wordpiece) {
    for (const auto& w : words) {
      for (const auto& u : decompose_word(w, vocab.scheme, vocab)) {
        ids.push_back(vocab.id_or_unknown(u));
      }
    }
    return ids;
  }
  for (const auto& u : encode_sentence(words, vocab)) ids.push_back(vocab.id_or_unknown(u));
  return ids;
}

int interval_overlap(ctc::Segment a, ctc::Segment b) {
  const int lo = std::max(a.begin, b.begin);
  const int hi = std::min(a.end, b.end);
  return hi < lo ? 0 : hi - lo + 1;
}

HybridMergeResult hybrid_replace_oov(const SegmentedHypothesis& word_hyp,
                                     const std::vector<std::string>& letter_units,
                                     const std::vector<ctc::Segment>& letter_segments) {
  if (letter_units.size() != letter_segments.size()) {
    throw std::invalid_argument("hybrid_replace_oov: letter units and segments differ in length");
  }
  // Group letter units into words at separator boundaries; a group's
  // interval spans its first through last unit.
  struct LetterWord {
    std::string word;
    ctc::Segment span;
  };
  std::vector<LetterWord> letter_words;
  std::string current;
  ctc::Segment span{0, 0};
  for (size_t i = 0; i < letter_units.size(); ++i) {
    if (letter_units[i] == kSeparatorUnit) {
      if (!current.empty()) letter_words.push_back({current, span});
      current.clear();
    } else {
      if (current.empty()) span.begin = letter_segments[i].begin;
      span.end = letter_segments[i].end;
      current += letter_units[i];
    }
  }
  if (!current.empty()) letter_words.push_back({current, span});

  HybridMergeResult result;
  result.words.reserve(word_hyp.words.size());
  for (size_t i = 0; i < word_hyp.words.size(); ++i) {
    if (word_hyp.words[i] != kOovUnit) {
      result.words.push_back(word_hyp.words[i]);
      continue;
    }
    if (letter_words.empty()) {
      result.words.emplace_back();
      result.used_empty_replacement = true;
      continue;
    }
    size_t best = 0;
    int best_overlap = -1;
    for (size_t j = 0; j < letter_words.size(); ++j) {
      const int ov = interval_overlap(word_hyp.segments[i], letter_words[j].span);
      if (ov > best_overlap) {  // strict: ties keep the earlier letter word
        best_overlap = ov;
        best = j;
      }
    }
    result.words.push_back(letter_words[best].word);
  }
  return result;
}

}  // namespace mixctc::vocab
