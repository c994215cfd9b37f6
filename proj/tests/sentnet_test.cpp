#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "prembed/error.hpp"
#include "prembed/linalg.hpp"
#include "prembed/sentnet.hpp"

using namespace prembed;

namespace {

PairCorpus small_corpus() {
  PairCorpus c;
  c.pairs.push_back({tokenize("why are you here ?"), tokenize("because i like it")});
  c.pairs.push_back({tokenize("where are you from ?"), tokenize("from alabama , you ?")});
  c.pairs.push_back({tokenize("thanks a lot"), tokenize("you are welcome")});
  return c;
}

EmbeddingTable random_table(const DualVocab& vocab, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbeddingTable t{vocab, RowMatrix(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(dim))};
  for (Eigen::Index k = 0; k < t.vectors.size(); ++k) t.vectors.data()[k] = normal(rng);
  t.vectors.row(vocab.pad(Space::Post)).setZero();
  t.vectors.row(vocab.pad(Space::Reply)).setZero();
  return t;
}

MatchClassifier classifier(MatcherShape shape, std::uint64_t seed = 5, std::size_t dim = 4) {
  const auto vocab = build_vocab(small_corpus(), {1, 0, SpaceMode::Dual});
  return make_classifier(random_table(vocab, dim, seed), shape, seed);
}

void zero_network(MatchClassifier& m) {
  m.conv_weight.setZero();
  m.conv_bias.setZero();
  m.out_weight.setZero();
  m.out_bias = 0.0;
}

}  // namespace

TEST(MatcherShape, Validation) {
  EXPECT_NO_THROW((MatcherShape{3, 2, 5, 5}.validate()));
  EXPECT_THROW((MatcherShape{6, 2, 5, 5}.validate()), DataError);
  EXPECT_THROW((MatcherShape{0, 2, 5, 5}.validate()), DataError);
  EXPECT_THROW((MatcherShape{1, 0, 5, 5}.validate()), DataError);
}

TEST(MakeClassifier, ShapesAndGlorotRange) {
  const MatcherShape shape{3, 7, 6, 5};
  auto m = classifier(shape);
  EXPECT_EQ(m.conv_weight.rows(), 7);
  EXPECT_EQ(m.conv_weight.cols(), 15);
  EXPECT_EQ(m.conv_bias.size(), 7);
  EXPECT_EQ(m.out_weight.size(), 7);
  EXPECT_LE(m.conv_weight.cwiseAbs().maxCoeff(), std::sqrt(6.0 / (15 + 7)));
  EXPECT_TRUE(m.conv_bias.isZero());
  auto again = classifier(shape);
  EXPECT_EQ(again.conv_weight, m.conv_weight);
}

TEST(MatchMatrix, CosineEntriesAndPadMasking) {
  auto m = classifier({1, 1, 3, 3});
  const Index why = *m.vocab.find("why", Space::Post);
  const Index because = *m.vocab.find("because", Space::Reply);
  const Index like = *m.vocab.find("like", Space::Reply);
  m.embeddings.row(why) << 1, 0, 0, 0;
  m.embeddings.row(because) << 2, 0, 0, 0;
  m.embeddings.row(like) << 0, 3, 0, 0;
  // PAD rows hold junk; masking must hide it.
  m.embeddings.row(m.vocab.pad(Space::Post)).setConstant(1.0);
  m.embeddings.row(m.vocab.pad(Space::Reply)).setConstant(1.0);

  auto mm = match_matrix(Tokens{"why"}, Tokens{"because", "like"}, m);
  EXPECT_DOUBLE_EQ(mm.values(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(mm.values(0, 1), 0.0);
  EXPECT_EQ(mm.values(0, 2), 0.0);
  EXPECT_TRUE(mm.values.row(1).isZero());
  EXPECT_TRUE(mm.values.row(2).isZero());
  EXPECT_TRUE(mm.post_valid(0));
  EXPECT_FALSE(mm.post_valid(1));
  EXPECT_FALSE(mm.reply_valid(2));
  EXPECT_LE(mm.values.cwiseAbs().maxCoeff(), 1.0);
}

TEST(MatchMatrix, OovMapsToUnkAndLongInputTruncates) {
  auto m = classifier({1, 1, 2, 2});
  auto mm = match_matrix(tokenize("zebra why are you"), tokenize("qux"), m);
  EXPECT_EQ(mm.post, (std::vector<Index>{m.vocab.unk(Space::Post), *m.vocab.find("why", Space::Post)}));
  EXPECT_EQ(mm.reply, (std::vector<Index>{m.vocab.unk(Space::Reply), m.vocab.pad(Space::Reply)}));
}

TEST(Forward, ZeroNetworkGivesHalf) {
  auto m = classifier({2, 3, 5, 5});
  zero_network(m);
  EXPECT_DOUBLE_EQ(forward(match_matrix(small_corpus().pairs[0].post, small_corpus().pairs[0].reply, m), m), 0.5);
}

TEST(Forward, SingleFilterClosedForm) {
  auto m = classifier({2, 1, 5, 5});
  zero_network(m);
  m.conv_bias(0) = 3.0;
  m.out_weight(0) = 1.5;
  m.out_bias = -0.25;
  const auto c = small_corpus();
  const double g = forward(match_matrix(c.pairs[1].post, c.pairs[1].reply, m), m);
  EXPECT_NEAR(g, 1.0 / (1.0 + std::exp(-(1.5 * std::tanh(3.0) - 0.25))), 1e-15);
}

TEST(Forward, WindowOnePermutationInvariance) {
  std::mt19937_64 rng(3);
  auto m = classifier({1, 4, 6, 5});
  const auto c = small_corpus();
  auto mm = match_matrix(c.pairs[1].post, c.pairs[1].reply, m);
  const double g = forward(mm, m);
  std::vector<int> perm{0, 1, 2, 3, 4, 5};
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    MatchMatrix shuffled = mm;
    for (int i = 0; i < 6; ++i) shuffled.values.row(i) = mm.values.row(perm[i]);
    EXPECT_NEAR(forward(shuffled, m), g, 1e-15);
  }
}

TEST(Forward, InvariantToPadEmbeddings) {
  auto m = classifier({2, 5, 7, 7});
  const auto c = small_corpus();
  const double g = forward(match_matrix(c.pairs[0].post, c.pairs[0].reply, m), m);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int trial = 0; trial < 5; ++trial) {
    for (Space s : {Space::Post, Space::Reply})
      for (Eigen::Index k = 0; k < m.embeddings.cols(); ++k) m.embeddings(m.vocab.pad(s), k) = normal(rng);
    EXPECT_EQ(forward(match_matrix(c.pairs[0].post, c.pairs[0].reply, m), m), g);
  }
}

TEST(Forward, MonotoneInMatchEntriesForNonNegativeWeights) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = classifier({2, 4, 5, 5}, 100 + trial);
    m.conv_weight = m.conv_weight.cwiseAbs();
    m.out_weight = m.out_weight.cwiseAbs();
    const auto c = small_corpus();
    auto mm = match_matrix(c.pairs[trial % 3].post, c.pairs[trial % 3].reply, m);
    double prev = forward(mm, m);
    for (int step = 0; step < 5; ++step) {
      const double t = unit(rng);
      mm.values = mm.values + t * (RowMatrix::Ones(5, 5) - mm.values);
      const double g = forward(mm, m);
      EXPECT_GE(g, prev - 1e-15);
      prev = g;
    }
  }
}

TEST(LossAndGrads, HalfScoreGivesLnTwo) {
  auto m = classifier({2, 3, 5, 5});
  zero_network(m);
  const auto c = small_corpus();
  auto g = loss_and_grads(c.pairs[0].post, c.pairs[0].reply, 1, m);
  EXPECT_DOUBLE_EQ(g.score, 0.5);
  EXPECT_NEAR(g.loss, 0.693147180559945, 1e-12);
  EXPECT_NEAR(loss_and_grads(c.pairs[0].post, c.pairs[0].reply, 0, m).loss, std::log(2.0), 1e-12);
}

TEST(LossAndGrads, ConfidentPositiveLossVanishes) {
  auto m = classifier({2, 1, 5, 5});
  zero_network(m);
  const auto c = small_corpus();
  double prev = 1.0;
  for (double b : {2.0, 5.0, 10.0, 15.0}) {
    m.out_bias = b;
    const double loss = loss_and_grads(c.pairs[0].post, c.pairs[0].reply, 1, m).loss;
    EXPECT_LT(loss, prev);
    prev = loss;
  }
  EXPECT_LT(prev, 1e-6);
  m.out_bias = 40.0;
  const auto clamped = loss_and_grads(c.pairs[0].post, c.pairs[0].reply, 1, m);
  EXPECT_NEAR(clamped.loss, -std::log(1.0 - kScoreClamp), 1e-12);
  EXPECT_EQ(clamped.out_bias, 0.0);
}

TEST(LossAndGrads, RejectsBadLabel) {
  auto m = classifier({2, 1, 5, 5});
  const auto c = small_corpus();
  EXPECT_THROW(loss_and_grads(c.pairs[0].post, c.pairs[0].reply, 2, m), DataError);
}

TEST(LossAndGrads, MatchFiniteDifferences) {
  const auto corpus = small_corpus();
  double worst = 0.0;
  for (int trial = 0; trial < 24; ++trial) {
    const MatcherShape shape{static_cast<std::size_t>(1 + trial % 3), static_cast<std::size_t>(2 + trial % 4), 6, 5};
    auto m = classifier(shape, 1000 + trial, 3 + trial % 3);
    std::mt19937_64 rng(static_cast<std::uint64_t>(trial));
    std::normal_distribution<double> small(0.0, 0.3);
    for (Eigen::Index k = 0; k < m.conv_bias.size(); ++k) m.conv_bias(k) = small(rng);
    m.out_bias = small(rng);
    const auto& pair = corpus.pairs[trial % 3];
    const Tokens& reply = trial % 2 ? pair.reply : corpus.pairs[(trial + 1) % 3].reply;
    const int label = trial % 2;

    const auto g = loss_and_grads(pair.post, reply, label, m);
    std::vector<double*> params;
    std::vector<double> analytic;
    for (Eigen::Index r = 0; r < m.conv_weight.rows(); ++r)
      for (Eigen::Index k = 0; k < m.conv_weight.cols(); ++k) {
        params.push_back(&m.conv_weight(r, k));
        analytic.push_back(g.conv_weight(r, k));
      }
    for (Eigen::Index k = 0; k < m.conv_bias.size(); ++k) {
      params.push_back(&m.conv_bias(k));
      analytic.push_back(g.conv_bias(k));
      params.push_back(&m.out_weight(k));
      analytic.push_back(g.out_weight(k));
    }
    params.push_back(&m.out_bias);
    analytic.push_back(g.out_bias);
    ASSERT_FALSE(g.embedding_rows.empty());
    for (const auto& [row, grad] : g.embedding_rows)
      for (Eigen::Index k = 0; k < grad.size(); ++k) {
        params.push_back(&m.embeddings(row, k));
        analytic.push_back(grad(k));
      }

    const auto numeric = oracle::numeric_gradient(
        params, [&] { return loss_and_grads(pair.post, reply, label, m).loss; });
    for (std::size_t p = 0; p < params.size(); ++p)
      worst = std::max(worst, oracle::relative_error(analytic[p], numeric[p]));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(LossAndGrads, UntouchedRowsHaveNoGradient) {
  auto m = classifier({2, 3, 5, 5});
  const auto c = small_corpus();
  const auto g = loss_and_grads(c.pairs[2].post, c.pairs[2].reply, 1, m);
  EXPECT_FALSE(g.embedding_rows.contains(*m.vocab.find("why", Space::Post)));
  EXPECT_FALSE(g.embedding_rows.contains(m.vocab.pad(Space::Post)));
  EXPECT_TRUE(g.embedding_rows.contains(*m.vocab.find("thanks", Space::Post)));
  EXPECT_TRUE(g.embedding_rows.contains(*m.vocab.find("welcome", Space::Reply)));
}

namespace {

PairCorpus topical_corpus(std::size_t n) {
  PairCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string t = std::to_string(i);
    c.pairs.push_back({{"q" + t, "is", "it", "k" + t}, {"a" + t, "yes", "b" + t}});
  }
  return c;
}

MatchClassifier toy_classifier(const PairCorpus& c, std::uint64_t seed) {
  const auto vocab = build_vocab(c, {1, 0, SpaceMode::Dual});
  return make_classifier(random_table(vocab, 8, seed), {2, 8, 5, 4}, seed);
}

}  // namespace

TEST(TrainSentenceLevel, SeparableToyReachesHighAccuracy) {
  const auto c = topical_corpus(20);
  auto m = toy_classifier(c, 2);
  SentenceTrainConfig cfg;
  cfg.negatives = 1;
  cfg.epochs = 30;
  // Embeddings start random here, so the step is larger than the default.
  cfg.learning_rate = 0.3;
  const auto trace = train_sentence_level(c, m, cfg);
  ASSERT_EQ(trace.size(), 30u);
  EXPECT_GE(trace.back().accuracy, 0.95);
  EXPECT_LT(trace.back().mean_loss, trace.front().mean_loss);
}

TEST(TrainSentenceLevel, ZeroEpochsIsNoOp) {
  const auto c = topical_corpus(5);
  auto m = toy_classifier(c, 3);
  const auto before = m;
  SentenceTrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_TRUE(train_sentence_level(c, m, cfg).empty());
  EXPECT_EQ(m.embeddings, before.embeddings);
  EXPECT_EQ(m.conv_weight, before.conv_weight);
  EXPECT_EQ(m.out_bias, before.out_bias);
}

TEST(TrainSentenceLevel, Deterministic) {
  const auto c = topical_corpus(8);
  SentenceTrainConfig cfg;
  cfg.epochs = 3;
  cfg.negatives = 2;
  auto a = toy_classifier(c, 4);
  auto b = toy_classifier(c, 4);
  const auto ta = train_sentence_level(c, a, cfg);
  const auto tb = train_sentence_level(c, b, cfg);
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_EQ(a.conv_weight, b.conv_weight);
  EXPECT_EQ(a.out_weight, b.out_weight);
  EXPECT_EQ(ta.back().mean_loss, tb.back().mean_loss);
}

TEST(TrainSentenceLevel, NeedsTwoPairs) {
  const auto c = topical_corpus(1);
  auto m = toy_classifier(c, 1);
  EXPECT_THROW(train_sentence_level(c, m, SentenceTrainConfig{}), DataError);
  PairCorpus empty;
  EXPECT_THROW(train_sentence_level(empty, m, SentenceTrainConfig{}), DataError);
}

TEST(Checkpoint, RoundTrip) {
  auto m = classifier({2, 3, 5, 4});
  const auto dir = std::filesystem::temp_directory_path() / "prembed_sentnet_ckpt";
  std::filesystem::create_directories(dir);
  save_checkpoint(m, dir / "classifier.json", dir / "emb.txt");
  auto back = load_checkpoint(dir / "classifier.json");
  EXPECT_EQ(back.shape.window, 2u);
  EXPECT_EQ(back.shape.reply_len, 4u);
  EXPECT_EQ(back.conv_weight, m.conv_weight);
  EXPECT_EQ(back.out_bias, m.out_bias);
  ASSERT_EQ(back.vocab.size(), m.vocab.size());
  for (std::size_t i = 0; i < m.vocab.size(); ++i)
    EXPECT_EQ(back.vocab.display(static_cast<Index>(i)), m.vocab.display(static_cast<Index>(i)));
  EXPECT_LE((back.embeddings - m.embeddings).cwiseAbs().maxCoeff(), 1e-6);
  const auto c = small_corpus();
  EXPECT_NEAR(forward(match_matrix(c.pairs[0].post, c.pairs[0].reply, back), back),
              forward(match_matrix(c.pairs[0].post, c.pairs[0].reply, m), m), 1e-5);
  std::filesystem::remove_all(dir);
}
