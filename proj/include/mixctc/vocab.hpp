#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mixctc/ctc.hpp"

namespace mixctc::vocab {

/// Output-unit schemes.  The letter schemes chunk every word; the mixed
/// schemes keep frequent words whole and decompose only the infrequent
/// ones.  oov_single_letter decomposes infrequent words into bare letters
/// without extracting embedded frequent words.
enum class Scheme {
  word_oov,
  single_letter,
  double_letter,
  triple_letter,
  oov_single_letter,
  mixed_single,
  mixed_double,
  mixed_triple,
  wordpiece,
};

Scheme scheme_from_string(const std::string& name);
std::string to_string(Scheme scheme);
bool is_mixed(Scheme scheme);
bool is_letter(Scheme scheme);
int gram_size(Scheme scheme);  // chunk width for letter/mixed schemes

enum class UnitKind { blank, letterkgram, word, separator, oov, wordpiece, unknown };

std::string to_string(UnitKind kind);
UnitKind unit_kind_from_string(const std::string& name);

inline const char* kBlankUnit = "<blank>";
inline const char* kSeparatorUnit = "$";
inline const char* kOovUnit = "OOV";
inline const char* kUnknownUnit = "<unk>";
inline const char* kSilenceUnit = "<sil>";
inline const char* kWordEnd = "</w>";  // wordpiece end-of-word marker

struct VocabEntry {
  std::string unit;
  UnitKind kind;
};

struct WordpieceModel {
  std::vector<std::pair<std::string, std::string>> merges;  // in merge order
  std::vector<std::string> inventory;
};

/// Label inventory for one scheme: blank at id 0, every other unit in
/// lexicographic order, plus the frequent-word table driving decomposition.
class TokenVocabulary {
 public:
  Scheme scheme = Scheme::word_oov;
  int min_count = 10;
  std::vector<VocabEntry> entries;                    // blank first, then lexicographic
  std::unordered_map<std::string, int> unit_ids;
  std::unordered_set<std::string> frequent_words;
  WordpieceModel wordpieces;                          // wordpiece scheme only

  int size() const { return static_cast<int>(entries.size()); }
  int id_of(const std::string& unit) const;           // -1 when absent
  int id_or_unknown(const std::string& unit) const;
  const std::string& unit(int id) const { return entries[static_cast<size_t>(id)].unit; }
  UnitKind kind(int id) const { return entries[static_cast<size_t>(id)].kind; }
  bool is_frequent(const std::string& word) const {
    return frequent_words.count(word) != 0;
  }
  ctc::LabelSet label_set() const;

  /// Rebuilds unit_ids and sorts entries (blank first, then lexicographic).
  void finalize();

  void write(std::ostream& os) const;
  static TokenVocabulary read(std::istream& is, Scheme scheme, int min_count);
  void save(const std::string& path) const;
  static TokenVocabulary load(const std::string& path, Scheme scheme, int min_count = 10);
};

/// Counts words, marks those with count >= min_count as frequent, and closes
/// the unit inventory over decompose_word on the whole corpus.
/// wordpiece_target is the inventory size for the wordpiece scheme.
TokenVocabulary build_frequent_vocab(const std::vector<std::vector<std::string>>& corpus,
                                     int min_count, Scheme scheme, int wordpiece_target = 0);

/// Decomposes one word under the scheme.  Units missing from the inventory
/// (possible on test data) come back as the reserved unknown unit.
std::vector<std::string> decompose_word(const std::string& word, Scheme scheme,
                                        const TokenVocabulary& vocab);

/// Mixed and letter schemes: a separator before every word and one at the
/// end ("$ have $ you $ ... $").
std::vector<std::string> encode_sentence(const std::vector<std::string>& words,
                                         const TokenVocabulary& vocab);

/// Splits on the separator, concatenating the units of each group into one
/// word.  Missing leading/trailing separators are tolerated; empty groups
/// are dropped.
std::vector<std::string> merge_mixed_tokens(const std::vector<std::string>& tokens);

/// Joins wordpiece units at end-of-word markers.
std::vector<std::string> merge_wordpiece_tokens(const std::vector<std::string>& tokens);

/// Byte-pair encoding over characters plus an end-of-word symbol.  The
/// end-of-word symbol never participates in merges; ties go to the
/// lexicographically smallest pair.  Deterministic given corpus and target.
WordpieceModel train_wordpieces(const std::vector<std::vector<std::string>>& corpus,
                                int target_inventory);

/// Applies the merge list to one word (lowest merge index first).
std::vector<std::string> wordpiece_segment(const std::string& word, const WordpieceModel& model);

/// Target label ids for a sentence under the vocabulary's scheme.
std::vector<int> encode_to_ids(const std::vector<std::string>& words,
                               const TokenVocabulary& vocab);

struct SegmentedHypothesis {
  std::vector<std::string> words;
  std::vector<ctc::Segment> segments;
};

struct HybridMergeResult {
  std::vector<std::string> words;            // same length as the word hypothesis
  bool used_empty_replacement = false;       // no letter word was available for some OOV
};

/// Replaces each OOV in the word hypothesis with the letter-side word whose
/// frame interval overlaps it the most (ties toward the earlier word).
/// Letter tokens are grouped into words at separator units; a group's
/// interval spans its first through last unit.
HybridMergeResult hybrid_replace_oov(const SegmentedHypothesis& word_hyp,
                                     const std::vector<std::string>& letter_units,
                                     const std::vector<ctc::Segment>& letter_segments);

/// Inclusive frame-interval intersection size, clamped at zero.
int interval_overlap(ctc::Segment a, ctc::Segment b);

}  // namespace mixctc::vocab
