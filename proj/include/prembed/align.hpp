#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "prembed/corpus.hpp"
#include "prembed/vocab.hpp"

namespace prembed {

enum class Direction : std::uint8_t { PostToReply, ReplyToPost };

inline Space source_space(Direction d) { return d == Direction::PostToReply ? Space::Post : Space::Reply; }
inline Space target_space(Direction d) { return d == Direction::PostToReply ? Space::Reply : Space::Post; }

/// Lexical translation probabilities t(target | source) over co-paired
/// (source, target) index pairs. Unseen pairs have probability 0.
class TranslationTable {
 public:
  using Key = std::pair<Index, Index>;

  TranslationTable() = default;
  TranslationTable(Direction direction, std::size_t vocab_size, std::vector<Key> keys,
                   std::vector<double> probs);

  Direction direction() const noexcept { return direction_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t size() const noexcept { return keys_.size(); }

  double prob(Index source, Index target) const;

  /// (source, target) pairs sorted ascending; parallel to probs().
  const std::vector<Key>& keys() const noexcept { return keys_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::vector<double>& probs() noexcept { return probs_; }

  /// Total corpus log-likelihood after initialization and after each EM pass.
  std::vector<double> log_likelihood;

 private:
  friend TranslationTable train_model1(const PairCorpus&, const DualVocab&, Direction,
                                       std::size_t, std::size_t);
  std::size_t slot(Index source, Index target) const;

  Direction direction_ = Direction::PostToReply;
  std::size_t vocab_size_ = 0;
  std::vector<Key> keys_;
  std::vector<double> probs_;
  std::unordered_map<std::uint64_t, std::size_t> slots_;
};

inline constexpr double kProbFloor = 1e-12;

/// IBM Model 1 EM without a NULL source word. t is initialized uniformly
/// over each source's co-paired targets. With `threads > 1` the E-step runs
/// over contiguous shards whose counts are merged in shard order.
TranslationTable train_model1(const PairCorpus& corpus, const DualVocab& vocab,
                              Direction direction, std::size_t iterations = 5,
                              std::size_t threads = 1);

/// sum over pairs and target words of log((1/m) * sum_i t(target_j | source_i)).
double model1_log_likelihood(const PairCorpus& corpus, const DualVocab& vocab,
                             const TranslationTable& table);

/// For each word, the position of its most probable partner on the other side.
struct PairAlignment {
  std::vector<std::size_t> post_to_reply;
  std::vector<std::size_t> reply_to_post;
};

/// Argmax alignment in both directions; ties go to the smallest position.
PairAlignment best_alignment(std::span<const Index> post, std::span<const Index> reply,
                             const TranslationTable& forward, const TranslationTable& reverse);

PairAlignment best_alignment(const ConversationPair& pair, const DualVocab& vocab,
                             const TranslationTable& forward, const TranslationTable& reverse);

/// `source<TAB>target<TAB>prob`, sorted by source index then descending prob.
void write_table(const TranslationTable& table, const DualVocab& vocab, std::ostream& out);
TranslationTable read_table(std::istream& in, const DualVocab& vocab, Direction direction);

}  // namespace prembed
