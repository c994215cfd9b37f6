#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "prembed/corpus.hpp"
#include "prembed/error.hpp"
#include "prembed/vocab.hpp"

using namespace prembed;

namespace {

PairCorpus from_tsv(const std::string& text) {
  std::istringstream in(text);
  return parse_pairs(in, PairFormat::Tsv, "inline");
}

PairCorpus corpus_of(std::vector<std::pair<std::string, std::string>> pairs) {
  PairCorpus c;
  for (auto& [p, r] : pairs) c.pairs.push_back({tokenize(p), tokenize(r)});
  return c;
}

}  // namespace

TEST(Tokenize, DetachesQuestionMark) {
  EXPECT_EQ(tokenize("Where are you from?"), (Tokens{"where", "are", "you", "from", "?"}));
}

TEST(Tokenize, EmptyString) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, ApostropheAndPeriod) {
  EXPECT_EQ(tokenize("I'm ok."), (Tokens{"i", "'", "m", "ok", "."}));
}

TEST(Tokenize, CollapsesWhitespaceAndCommas) {
  EXPECT_EQ(tokenize("  Hi,\tthere!!  "), (Tokens{"hi", ",", "there", "!", "!"}));
}

TEST(LoadPairs, WhereAreYouFromLine) {
  auto c = from_tsv("where are you from\ti am from alabama\n");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.pairs[0].post.size(), 4u);
  EXPECT_EQ(c.pairs[0].reply.size(), 4u);
  EXPECT_TRUE(c.skipped.empty());
}

TEST(LoadPairs, EmptyInput) {
  auto c = from_tsv("");
  EXPECT_EQ(c.size(), 0u);
  EXPECT_TRUE(c.skipped.empty());
}

TEST(LoadPairs, EmptyReplyIsSkipped) {
  auto c = from_tsv("hello\t\n");
  EXPECT_EQ(c.size(), 0u);
  ASSERT_EQ(c.skipped.size(), 1u);
  EXPECT_EQ(c.skipped[0].line, 1u);
}

TEST(LoadPairs, MalformedLinesRecordLineNumbers) {
  auto c = from_tsv("a\tb\nno tab here\nx\ty\tz\nc\td\r\n");
  ASSERT_EQ(c.size(), 2u);
  ASSERT_EQ(c.skipped.size(), 2u);
  EXPECT_EQ(c.skipped[0].line, 2u);
  EXPECT_EQ(c.skipped[1].line, 3u);
  EXPECT_EQ(c.pairs[1].reply, (Tokens{"d"}));
}

TEST(LoadPairs, Jsonl) {
  std::istringstream in(
      "{\"post\": \"Why?\", \"reply\": \"Because.\"}\n"
      "{\"post\": 3, \"reply\": \"x\"}\n"
      "not json\n"
      "{\"post\": \"a\"}\n");
  auto c = parse_pairs(in, PairFormat::Jsonl);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.pairs[0].post, (Tokens{"why", "?"}));
  EXPECT_EQ(c.skipped.size(), 3u);
}

TEST(LoadPairs, UnreadableFileThrows) {
  EXPECT_THROW(load_pairs("/nonexistent/pairs.tsv", PairFormat::Tsv), IoError);
}

TEST(LoadPairs, TsvRoundTripProperty) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> alphabet{"a", "b", "why", "?", ".", ",", "'", "!", "x1", "don"};
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(1, 7), n(0, 12);
  for (int trial = 0; trial < 50; ++trial) {
    PairCorpus c;
    const std::size_t pairs = n(rng);
    for (std::size_t p = 0; p < pairs; ++p) {
      ConversationPair pair;
      for (std::size_t i = len(rng); i > 0; --i) pair.post.push_back(alphabet[pick(rng)]);
      for (std::size_t i = len(rng); i > 0; --i) pair.reply.push_back(alphabet[pick(rng)]);
      c.pairs.push_back(pair);
    }
    std::stringstream buf;
    write_tsv(c, buf);
    auto back = parse_pairs(buf, PairFormat::Tsv);
    EXPECT_EQ(back.pairs, c.pairs);
    EXPECT_TRUE(back.skipped.empty());
  }
}

TEST(BuildVocab, MinCountFilter) {
  auto c = corpus_of({{"hello", "x"}, {"hello", "x"}, {"hello hi", "x"}});
  VocabConfig cfg;
  cfg.min_count = 2;
  auto v = build_vocab(c, cfg);
  EXPECT_EQ(v.space_size(Space::Post), 3u);
  EXPECT_EQ(v.token(0), kUnkToken);
  EXPECT_EQ(v.token(1), kPadToken);
  EXPECT_EQ(v.token(2), "hello");
  EXPECT_FALSE(v.find("hi", Space::Post));
  EXPECT_EQ(v.index("hi", Space::Post), v.unk(Space::Post));
  EXPECT_EQ(v.count(v.unk(Space::Post)), 1u);
}

TEST(BuildVocab, PerSideCounting) {
  auto c = corpus_of({{"why", "because"}});
  VocabConfig cfg;
  cfg.min_count = 1;
  auto v = build_vocab(c, cfg);
  EXPECT_TRUE(v.find("why", Space::Post));
  EXPECT_FALSE(v.find("why", Space::Reply));
  EXPECT_TRUE(v.find("because", Space::Reply));
  EXPECT_FALSE(v.find("because", Space::Post));
}

TEST(BuildVocab, SameTokenGetsOneIndexPerSpace) {
  auto c = corpus_of({{"good", "good"}});
  VocabConfig cfg;
  cfg.min_count = 1;
  auto v = build_vocab(c, cfg);
  const Index p = *v.find("good", Space::Post);
  const Index r = *v.find("good", Space::Reply);
  EXPECT_NE(p, r);
  EXPECT_EQ(v.owner(p), Space::Post);
  EXPECT_EQ(v.owner(r), Space::Reply);
  EXPECT_EQ(v.display(p), "P_good");
  EXPECT_EQ(v.display(r), "R_good");
}

TEST(BuildVocab, EmptyCorpusThrows) { EXPECT_THROW(build_vocab(PairCorpus{}), DataError); }

TEST(BuildVocab, MaxSizeTiesLexicographic) {
  auto c = corpus_of({{"b a c c", "x"}});
  VocabConfig cfg;
  cfg.min_count = 1;
  cfg.max_size = 2;
  auto v = build_vocab(c, cfg);
  EXPECT_EQ(v.space_size(Space::Post), 4u);
  EXPECT_EQ(v.token(2), "c");
  EXPECT_EQ(v.token(3), "a");
}

TEST(BuildVocab, SingleModeSharesIndices) {
  auto c = corpus_of({{"good day", "good"}});
  VocabConfig cfg;
  cfg.min_count = 1;
  cfg.mode = SpaceMode::Single;
  auto v = build_vocab(c, cfg);
  EXPECT_EQ(v.find("good", Space::Post), v.find("good", Space::Reply));
  EXPECT_EQ(v.count(*v.find("good", Space::Post)), 2u);
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.display(*v.find("good", Space::Post)), "good");
}

TEST(BuildVocab, DisjointRangesAndDeterminism) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = oracle::random_corpus(rng, 8, 6, 9);
    VocabConfig cfg;
    cfg.min_count = 1;
    auto v = build_vocab(c, cfg);
    EXPECT_EQ(v, build_vocab(c, cfg));
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto idx = static_cast<Index>(i);
      const Space s = v.owner(idx);
      EXPECT_GE(idx, v.offset(s));
      EXPECT_LT(idx, v.offset(s) + static_cast<Index>(v.space_size(s)));
      if (!v.is_special(idx)) EXPECT_EQ(v.find(v.token(idx), s), idx);
    }
    EXPECT_EQ(v.offset(Space::Reply), static_cast<Index>(v.space_size(Space::Post)));
  }
}

TEST(VocabDump, RoundTrip) {
  auto c = corpus_of({{"why not", "because"}, {"why", "ok ok"}});
  for (auto mode : {SpaceMode::Dual, SpaceMode::Single}) {
    VocabConfig cfg;
    cfg.min_count = 1;
    cfg.mode = mode;
    auto v = build_vocab(c, cfg);
    std::stringstream buf;
    write_vocab(v, buf);
    EXPECT_EQ(read_vocab(buf), v);
  }
}

TEST(VocabDump, LineFormat) {
  auto v = build_vocab(corpus_of({{"why", "because"}}), {1, 0, SpaceMode::Dual});
  std::stringstream buf;
  write_vocab(v, buf);
  EXPECT_EQ(buf.str(),
            "<unk>\tpost\t0\t0\n<pad>\tpost\t1\t0\nwhy\tpost\t2\t1\n"
            "<unk>\treply\t3\t0\n<pad>\treply\t4\t0\nbecause\treply\t5\t1\n");
}

TEST(VocabDump, RejectsMalformedRows) {
  std::istringstream bad("<unk>\tpost\t0\n");
  EXPECT_THROW(read_vocab(bad), ParseError);
  std::istringstream gap("<unk>\tpost\t0\t0\n<pad>\tpost\t5\t0\n");
  EXPECT_THROW(read_vocab(gap), ParseError);
}
