#include <doctest.h>

#include <sstream>

#include "mixctc/rng.hpp"
#include "mixctc/vocab.hpp"

using namespace mixctc;
using vocab::Scheme;

namespace {

// "newyork" frequent (11 occurrences), "newyorkabc" an OOV seen once.
std::vector<std::vector<std::string>> fixture_corpus() {
  std::vector<std::vector<std::string>> corpus;
  for (int i = 0; i < 11; ++i) corpus.push_back({"have", "you", "been", "to", "newyork"});
  corpus.push_back({"have", "you", "been", "to", "newyorkabc"});
  return corpus;
}

std::vector<std::string> decomp(Scheme scheme, const std::string& word) {
  auto v = vocab::build_frequent_vocab(fixture_corpus(), 10, scheme);
  return vocab::decompose_word(word, scheme, v);
}

}  // namespace

TEST_CASE("word decompositions for every output-unit scheme") {
  using V = std::vector<std::string>;
  CHECK(decomp(Scheme::single_letter, "newyork") == V{"n", "e", "w", "y", "o", "r", "k"});
  CHECK(decomp(Scheme::single_letter, "newyorkabc") ==
        V{"n", "e", "w", "y", "o", "r", "k", "a", "b", "c"});
  CHECK(decomp(Scheme::double_letter, "newyork") == V{"ne", "wy", "or", "k"});
  CHECK(decomp(Scheme::double_letter, "newyorkabc") == V{"ne", "wy", "or", "ka", "bc"});
  CHECK(decomp(Scheme::triple_letter, "newyork") == V{"new", "yor", "k"});
  CHECK(decomp(Scheme::triple_letter, "newyorkabc") == V{"new", "yor", "kab", "c"});
  CHECK(decomp(Scheme::word_oov, "newyork") == V{"newyork"});
  CHECK(decomp(Scheme::word_oov, "newyorkabc") == V{"OOV"});
  CHECK(decomp(Scheme::oov_single_letter, "newyork") == V{"newyork"});
  CHECK(decomp(Scheme::oov_single_letter, "newyorkabc") ==
        V{"n", "e", "w", "y", "o", "r", "k", "a", "b", "c"});
  CHECK(decomp(Scheme::mixed_single, "newyork") == V{"newyork"});
  CHECK(decomp(Scheme::mixed_single, "newyorkabc") == V{"newyork", "a", "b", "c"});
  CHECK(decomp(Scheme::mixed_triple, "newyork") == V{"newyork"});
  CHECK(decomp(Scheme::mixed_triple, "newyorkabc") == V{"newyork", "abc"});
}

TEST_CASE("greedy matching inside OOVs") {
  auto corpus = fixture_corpus();
  corpus.push_back({"xxnewyorkyy"});
  auto v = vocab::build_frequent_vocab(corpus, 10, Scheme::mixed_double);
  using V = std::vector<std::string>;
  // embedded frequent word extracted, remainders chunked around it
  CHECK(vocab::decompose_word("xxnewyorkyy", Scheme::mixed_double, v) ==
        V{"xx", "newyork", "yy"});
  // short frequent words are not matched inside OOVs; "tops" falls back to
  // plain chunking, and "ps" was never seen in the corpus
  CHECK(v.is_frequent("to"));
  CHECK(vocab::decompose_word("tops", Scheme::mixed_double, v) ==
        V{"to", vocab::kUnknownUnit});
}

TEST_CASE("frequency threshold is inclusive") {
  std::vector<std::vector<std::string>> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back({"exact"});
  for (int i = 0; i < 9; ++i) corpus.push_back({"below"});
  auto v = vocab::build_frequent_vocab(corpus, 10, Scheme::word_oov);
  CHECK(v.is_frequent("exact"));
  CHECK_FALSE(v.is_frequent("below"));
  CHECK(vocab::encode_to_ids({"exact"}, v)[0] == v.id_of("exact"));
  CHECK(vocab::encode_to_ids({"below"}, v)[0] == v.id_of(vocab::kOovUnit));
  // default threshold
  CHECK(vocab::TokenVocabulary().min_count == 10);
}

TEST_CASE("encode_sentence interleaves separators") {
  auto v = vocab::build_frequent_vocab(fixture_corpus(), 10, Scheme::mixed_triple);
  using V = std::vector<std::string>;
  CHECK(vocab::encode_sentence({"have", "you", "been", "to", "newyorkabc"}, v) ==
        V{"$", "have", "$", "you", "$", "been", "$", "to", "$", "newyork", "abc", "$"});
  CHECK(vocab::encode_sentence({}, v) == V{"$"});
  CHECK(vocab::encode_sentence({"newyork"}, v) == V{"$", "newyork", "$"});

  auto w = vocab::build_frequent_vocab(fixture_corpus(), 10, Scheme::word_oov);
  CHECK_THROWS_AS(vocab::encode_sentence({"have"}, w), std::invalid_argument);
}

TEST_CASE("merge_mixed_tokens") {
  using V = std::vector<std::string>;
  CHECK(vocab::merge_mixed_tokens({"$", "play", "$", "artist", "$", "rat", "at", "at", "$"}) ==
        V{"play", "artist", "ratatat"});
  CHECK(vocab::merge_mixed_tokens({"a", "b", "c"}) == V{"abc"});
  CHECK(vocab::merge_mixed_tokens({"$", "$", "x", "$"}) == V{"x"});
  CHECK(vocab::merge_mixed_tokens({}) == V{});
}

TEST_CASE("encode then merge is the identity on corpus sentences") {
  Rng rng(404);
  auto corpus = fixture_corpus();
  corpus.push_back({"play", "artist", "ratatat"});
  for (const auto scheme : {Scheme::single_letter, Scheme::double_letter, Scheme::triple_letter,
                            Scheme::mixed_single, Scheme::mixed_double, Scheme::mixed_triple}) {
    auto v = vocab::build_frequent_vocab(corpus, 10, scheme);
    std::vector<std::string> pool = {"have", "you", "been", "to", "newyork", "newyorkabc",
                                     "play", "artist", "ratatat"};
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<std::string> sentence;
      const int len = static_cast<int>(rng.uniform_int(1, 6));
      for (int i = 0; i < len; ++i) {
        sentence.push_back(pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))]);
      }
      CHECK(vocab::merge_mixed_tokens(vocab::encode_sentence(sentence, v)) == sentence);
    }
  }
}

TEST_CASE("inventory closure over the training corpus") {
  auto corpus = fixture_corpus();
  corpus.push_back({"play", "artist", "ratatat"});
  for (const auto scheme :
       {Scheme::single_letter, Scheme::double_letter, Scheme::triple_letter, Scheme::word_oov,
        Scheme::oov_single_letter, Scheme::mixed_single, Scheme::mixed_double,
        Scheme::mixed_triple}) {
    auto v = vocab::build_frequent_vocab(corpus, 10, scheme);
    for (const auto& sentence : corpus) {
      for (const auto& word : sentence) {
        for (const auto& unit : vocab::decompose_word(word, scheme, v)) {
          CHECK(v.id_of(unit) >= 0);
          CHECK(unit != vocab::kUnknownUnit);
        }
      }
    }
  }
}

TEST_CASE("unseen units map to the reserved unknown token") {
  auto v = vocab::build_frequent_vocab(fixture_corpus(), 10, Scheme::triple_letter);
  auto units = vocab::decompose_word("zzz", Scheme::triple_letter, v);
  REQUIRE(units.size() == 1);
  CHECK(units[0] == vocab::kUnknownUnit);
  CHECK_THROWS_AS(vocab::decompose_word("Zz9", Scheme::triple_letter, v), std::invalid_argument);
  CHECK_THROWS_AS(vocab::decompose_word("", Scheme::triple_letter, v), std::invalid_argument);
}

TEST_CASE("vocabulary ordering and file round-trip") {
  auto v = vocab::build_frequent_vocab(fixture_corpus(), 10, Scheme::mixed_triple);
  CHECK(v.entries[0].unit == vocab::kBlankUnit);
  CHECK(v.entries[0].kind == vocab::UnitKind::blank);
  for (size_t i = 2; i < v.entries.size(); ++i) CHECK(v.entries[i - 1].unit < v.entries[i].unit);

  std::ostringstream os;
  v.write(os);
  std::istringstream is(os.str());
  auto loaded = vocab::TokenVocabulary::read(is, Scheme::mixed_triple, 10);
  REQUIRE(loaded.size() == v.size());
  for (int i = 0; i < v.size(); ++i) {
    CHECK(loaded.unit(i) == v.unit(i));
    CHECK(loaded.kind(i) == v.kind(i));
  }
  CHECK(loaded.is_frequent("newyork"));
  CHECK_FALSE(loaded.is_frequent("newyorkabc"));
  using V = std::vector<std::string>;
  CHECK(vocab::decompose_word("newyorkabc", Scheme::mixed_triple, loaded) == V{"newyork", "abc"});
}

TEST_CASE("wordpiece training") {
  SUBCASE("single candidate pair") {
    auto model = vocab::train_wordpieces({{"aa", "aa"}}, 3);
    REQUIRE(model.merges.size() == 1);
    CHECK(model.merges[0].first == "a");
    CHECK(model.merges[0].second == "a");
  }
  SUBCASE("pair frequencies decide the merge order") {
    auto model = vocab::train_wordpieces({{"ab", "ab", "ac"}}, 6);
    REQUIRE(model.merges.size() == 2);
    CHECK(model.merges[0] == std::make_pair(std::string("a"), std::string("b")));
    CHECK(model.merges[1] == std::make_pair(std::string("a"), std::string("c")));
  }
  SUBCASE("deterministic across runs") {
    std::vector<std::vector<std::string>> corpus = {
        {"the", "cat", "sat", "on", "the", "mat"}, {"the", "bat", "and", "the", "rat"}};
    auto a = vocab::train_wordpieces(corpus, 20);
    auto b = vocab::train_wordpieces(corpus, 20);
    CHECK(a.merges == b.merges);
    CHECK(a.inventory == b.inventory);
  }
  SUBCASE("every training word stays segmentable") {
    std::vector<std::vector<std::string>> corpus = {{"banana", "bandana", "cabana"}};
    auto model = vocab::train_wordpieces(corpus, 12);
    for (const auto& w : corpus[0]) {
      auto segs = vocab::wordpiece_segment(w, model);
      std::string joined;
      for (const auto& s : segs) {
        if (s != vocab::kWordEnd) joined += s;
      }
      CHECK(joined == w);
      CHECK(segs.back() == vocab::kWordEnd);
    }
  }
  SUBCASE("target below the base character count is rejected") {
    CHECK_THROWS_AS(vocab::train_wordpieces({{"abcdef"}}, 3), std::invalid_argument);
  }
}

TEST_CASE("wordpiece vocabulary end to end") {
  std::vector<std::vector<std::string>> corpus = {
      {"play", "the", "song"}, {"play", "the", "game"}, {"play", "it"}};
  auto v = vocab::build_frequent_vocab(corpus, 2, Scheme::wordpiece, 24);
  auto ids = vocab::encode_to_ids({"play", "the", "song"}, v);
  std::vector<std::string> units;
  for (int id : ids) units.push_back(v.unit(id));
  CHECK(vocab::merge_wordpiece_tokens(units) ==
        std::vector<std::string>{"play", "the", "song"});

  std::ostringstream os;
  v.write(os);
  std::istringstream is(os.str());
  auto loaded = vocab::TokenVocabulary::read(is, Scheme::wordpiece, 2);
  CHECK(loaded.wordpieces.merges == v.wordpieces.merges);
  CHECK(vocab::encode_to_ids({"play", "the", "song"}, loaded) == ids);
}

TEST_CASE("interval_overlap") {
  CHECK(vocab::interval_overlap({0, 2}, {3, 5}) == 0);
  CHECK(vocab::interval_overlap({0, 5}, {0, 5}) == 6);
  CHECK(vocab::interval_overlap({2, 6}, {4, 9}) == 3);
  CHECK(vocab::interval_overlap({4, 9}, {2, 6}) == 3);
}

TEST_CASE("hybrid_replace_oov") {
  SUBCASE("replaces the OOV with the maximally overlapping letter word") {
    vocab::SegmentedHypothesis word_hyp;
    word_hyp.words = {"play", "artist", "OOV"};
    word_hyp.segments = {{0, 3}, {4, 8}, {9, 15}};
    std::vector<std::string> letters;
    std::vector<ctc::Segment> segs;
    auto push_word = [&](const std::string& w, int begin) {
      letters.push_back("$");
      segs.push_back({begin, begin});
      int f = begin + 1;
      for (char ch : w) {
        letters.push_back(std::string(1, ch));
        segs.push_back({f, f});
        ++f;
      }
    };
    push_word("play", 0);      // letters span [1,4]
    push_word("artist", 4);    // span [5,10] -- deliberately offset
    push_word("ratatat", 11);  // span [12,18], overlaps the OOV segment most
    letters.push_back("$");
    segs.push_back({19, 19});
    auto result = vocab::hybrid_replace_oov(word_hyp, letters, segs);
    CHECK(result.words == std::vector<std::string>{"play", "artist", "ratatat"});
    CHECK_FALSE(result.used_empty_replacement);
  }
  SUBCASE("without an OOV the letter side is ignored") {
    vocab::SegmentedHypothesis word_hyp;
    word_hyp.words = {"play", "artist"};
    word_hyp.segments = {{0, 3}, {4, 8}};
    auto result = vocab::hybrid_replace_oov(word_hyp, {"$", "x", "$"},
                                            {{0, 0}, {1, 1}, {2, 2}});
    CHECK(result.words == std::vector<std::string>{"play", "artist"});
  }
  SUBCASE("overlap arithmetic picks the later word when the earlier misses") {
    vocab::SegmentedHypothesis word_hyp;
    word_hyp.words = {"OOV"};
    word_hyp.segments = {{4, 6}};
    // letter words at [0,2] and [5,9]
    std::vector<std::string> letters = {"a", "b", "$", "c", "d"};
    std::vector<ctc::Segment> segs = {{0, 1}, {2, 2}, {3, 4}, {5, 7}, {8, 9}};
    auto result = vocab::hybrid_replace_oov(word_hyp, letters, segs);
    CHECK(result.words == std::vector<std::string>{"cd"});
  }
  SUBCASE("empty letter side flags the replacement") {
    vocab::SegmentedHypothesis word_hyp;
    word_hyp.words = {"play", "OOV"};
    word_hyp.segments = {{0, 3}, {4, 8}};
    auto result = vocab::hybrid_replace_oov(word_hyp, {}, {});
    REQUIRE(result.words.size() == 2);
    CHECK(result.words[0] == "play");
    CHECK(result.words[1].empty());
    CHECK(result.used_empty_replacement);
  }
  SUBCASE("output length always matches the word hypothesis") {
    vocab::SegmentedHypothesis word_hyp;
    word_hyp.words = {"OOV", "x", "OOV", "OOV"};
    word_hyp.segments = {{0, 1}, {2, 3}, {4, 5}, {6, 9}};
    auto result = vocab::hybrid_replace_oov(word_hyp, {"q", "$", "r"},
                                            {{0, 3}, {4, 4}, {5, 9}});
    CHECK(result.words.size() == word_hyp.words.size());
  }
}
