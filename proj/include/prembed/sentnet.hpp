#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "prembed/corpus.hpp"
#include "prembed/embed.hpp"
#include "prembed/vocab.hpp"

namespace prembed {

struct MatcherShape {
  std::size_t window = 3;      // h, rows of the match matrix per filter
  std::size_t filters = 50;    // F
  std::size_t post_len = 20;   // L_p
  std::size_t reply_len = 20;  // L_r

  void validate() const;
  std::size_t positions() const noexcept { return post_len - window + 1; }
  std::size_t fan_in() const noexcept { return window * reply_len; }
};

/// CNN matcher over the cosine match matrix of a (post, reply) pair, with the
/// embedding table itself as a trainable parameter. Post tokens read the post
/// rows of `embeddings`, reply tokens the reply rows.
struct MatchClassifier {
  DualVocab vocab;
  RowMatrix embeddings;
  MatcherShape shape;
  Eigen::MatrixXd conv_weight;  // F x (h * L_r)
  Vector conv_bias;             // F
  Vector out_weight;            // F
  double out_bias = 0.0;
};

/// Glorot-uniform conv/output weights from `seed`, zero biases; embeddings
/// copied from `table`.
MatchClassifier make_classifier(const EmbeddingTable& table, const MatcherShape& shape,
                                std::uint64_t seed);

EmbeddingTable embedding_table(const MatchClassifier& model);

struct MatchMatrix {
  RowMatrix values;  // L_p x L_r
  std::vector<Index> post;
  std::vector<Index> reply;

  bool post_valid(std::size_t i) const noexcept { return valid_post_[i]; }
  bool reply_valid(std::size_t j) const noexcept { return valid_reply_[j]; }

 private:
  friend MatchMatrix match_matrix(std::span<const Index>, std::span<const Index>,
                                  const MatchClassifier&);
  std::vector<bool> valid_post_;
  std::vector<bool> valid_reply_;
};

/// Index sequences must already be padded/truncated to L_p and L_r.
MatchMatrix match_matrix(std::span<const Index> post, std::span<const Index> reply,
                         const MatchClassifier& model);
/// Tokenized input; OOV maps to UNK, then pad/truncate.
MatchMatrix match_matrix(const Tokens& post, const Tokens& reply, const MatchClassifier& model);

/// Sigmoid score g in (0, 1).
double forward(const MatchMatrix& match, const MatchClassifier& model);

inline constexpr double kScoreClamp = 1e-7;

struct MatcherGradients {
  double loss = 0.0;
  double score = 0.0;
  Eigen::MatrixXd conv_weight;
  Vector conv_bias;
  Vector out_weight;
  double out_bias = 0.0;
  /// Only rows touched by the pair.
  std::map<Index, Vector> embedding_rows;
};

/// Binary cross-entropy with g clamped to [1e-7, 1 - 1e-7] and its gradient
/// with respect to every parameter. Max-pool routes to the first argmax.
MatcherGradients loss_and_grads(const MatchMatrix& match, int label, const MatchClassifier& model);
MatcherGradients loss_and_grads(const Tokens& post, const Tokens& reply, int label,
                                const MatchClassifier& model);

struct SentenceTrainConfig {
  std::size_t negatives = 1;
  double learning_rate = 0.01;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  double initial_accumulator = 0.1;
};

struct SentenceEpoch {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

/// Each epoch visits the pairs in a seeded shuffled order; every pair yields
/// its positive followed by `negatives` replies drawn uniformly from other
/// pairs (never equal to the true reply). AdaGrad on all parameters.
/// Throws DataError for a corpus with fewer than 2 pairs.
std::vector<SentenceEpoch> train_sentence_level(const PairCorpus& corpus, MatchClassifier& model,
                                                const SentenceTrainConfig& config);

/// JSON with shapes and flat row-major arrays; the embeddings go to
/// `embedding_file` (module embed format), referenced by file name.
void save_checkpoint(const MatchClassifier& model, const std::filesystem::path& json_file,
                     const std::filesystem::path& embedding_file);
MatchClassifier load_checkpoint(const std::filesystem::path& json_file);

}  // namespace prembed
