#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "prembed/align.hpp"
#include "prembed/corpus.hpp"
#include "prembed/vocab.hpp"

namespace prembed {

struct CoocEntry {
  Index row;
  Index col;
  double weight;

  friend bool operator==(const CoocEntry&, const CoocEntry&) = default;
};

struct WindowConfig {
  /// Intra-sentence radius; a neighbour at distance d contributes 1/d.
  std::size_t intra_window = 5;
  /// Cross-sentence window size centred on the aligned word; the word at
  /// offset o from the centre contributes 1/(o+1). 0 disables cross windows.
  std::size_t cross_window = 3;
};

/// Each alignment direction contributes this fraction of its window weights,
/// so a pair aligned both ways counts once.
inline constexpr double kCrossDirectionScale = 0.5;

/// Sparse symmetric co-occurrence counts over the joint vocabulary, stored as
/// (row, col)-sorted entries with strictly positive weight.
class CoocMatrix {
 public:
  CoocMatrix() = default;
  /// Sums duplicate coordinates in the order given, then sorts.
  CoocMatrix(std::size_t vocab_size, SpaceMode mode, WindowConfig config,
             std::span<const CoocEntry> contributions);

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  SpaceMode mode() const noexcept { return mode_; }
  const WindowConfig& config() const noexcept { return config_; }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<CoocEntry>& entries() const noexcept { return entries_; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  /// 0 when the coordinate is not stored.
  double weight(Index row, Index col) const;
  bool is_symmetric() const;

 private:
  std::size_t vocab_size_ = 0;
  SpaceMode mode_ = SpaceMode::Dual;
  WindowConfig config_;
  std::vector<CoocEntry> entries_;
};

/// Every ordered position pair (a, b) with 0 < |a - b| <= window emits
/// (tokens[a], tokens[b], 1/|a - b|), scanned a-major then b ascending.
std::vector<CoocEntry> intra_windows(std::span<const Index> tokens, std::size_t window);

/// For each post word i aligned to reply position j, every reply position j'
/// with |j' - j| <= window/2 emits (post[i], reply[j'], 1/(|j' - j| + 1))
/// followed by its mirror; then the same from reply words into the post.
std::vector<CoocEntry> cross_windows(std::span<const Index> post, std::span<const Index> reply,
                                     const PairAlignment& alignment, std::size_t window);

/// Sums, per pair in corpus order: intra windows of the post, of the reply,
/// then both cross directions scaled by kCrossDirectionScale. The space mode
/// follows the vocabulary. Throws DataError if the tables do not match the
/// vocabulary or are not a forward/reverse pair.
CoocMatrix accumulate(const PairCorpus& corpus, const DualVocab& vocab,
                      const TranslationTable& forward, const TranslationTable& reverse,
                      const WindowConfig& config = {}, std::size_t threads = 1);

/// `row<TAB>col<TAB>weight` lines.
void write_cooc(const CoocMatrix& matrix, std::ostream& out);
/// JSON sidecar echoing the configuration.
void write_cooc_sidecar(const CoocMatrix& matrix, std::ostream& out);
CoocMatrix read_cooc(std::istream& triples, std::istream& sidecar);

}  // namespace prembed
