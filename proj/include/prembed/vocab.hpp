#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prembed/corpus.hpp"

namespace prembed {

/// Row index into the joint (post + reply) vocabulary.
using Index = std::int32_t;

enum class Space : std::uint8_t { Post, Reply };

/// Dual keeps separate post and reply spaces. Single folds both sides into
/// one space (the single-space ablation).
enum class SpaceMode : std::uint8_t { Dual, Single };

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kPadToken = "<pad>";

std::string_view to_string(Space space);
std::string_view to_string(SpaceMode mode);
std::optional<Space> parse_space(std::string_view name);

struct VocabConfig {
  std::size_t min_count = 2;
  /// Maximum number of regular tokens per space; 0 means unlimited.
  std::size_t max_size = 0;
  SpaceMode mode = SpaceMode::Dual;
};

/// Two token->index maps over one joint index range. Post tokens occupy
/// [0, s_p), reply tokens [s_p, s_p + s_r). Each space starts with UNK, PAD.
/// In single mode both spaces alias the same range [0, s).
class DualVocab {
 public:
  DualVocab() = default;

  /// Builds a vocabulary from explicit token lists. UNK and PAD are inserted
  /// at the front of each space if absent. `post_counts` / `reply_counts` may
  /// be empty (all zero).
  static DualVocab from_tokens(SpaceMode mode, const std::vector<std::string>& post,
                               const std::vector<std::string>& reply = {},
                               const std::vector<std::uint64_t>& post_counts = {},
                               const std::vector<std::uint64_t>& reply_counts = {});

  SpaceMode mode() const noexcept { return mode_; }
  bool shared() const noexcept { return mode_ == SpaceMode::Single; }

  /// Number of rows in the joint index range.
  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t space_size(Space space) const noexcept;
  Index offset(Space space) const noexcept;

  std::optional<Index> find(std::string_view token, Space space) const;
  /// OOV maps to UNK of the space.
  Index index(std::string_view token, Space space) const;
  Index unk(Space space) const noexcept { return offset(space); }
  Index pad(Space space) const noexcept { return offset(space) + 1; }
  bool is_special(Index i) const noexcept;

  Space owner(Index i) const noexcept;
  const std::string& token(Index i) const { return tokens_.at(static_cast<std::size_t>(i)); }
  std::uint64_t count(Index i) const { return counts_.at(static_cast<std::size_t>(i)); }

  /// `P_token` / `R_token` in dual mode, the bare token in single mode.
  std::string display(Index i) const;

  std::vector<Index> encode(const Tokens& tokens, Space space) const;
  /// Pads with PAD or truncates the tail to exactly `length` entries.
  std::vector<Index> encode_fixed(const Tokens& tokens, Space space, std::size_t length) const;

  friend bool operator==(const DualVocab& a, const DualVocab& b) {
    return a.mode_ == b.mode_ && a.post_size_ == b.post_size_ && a.tokens_ == b.tokens_ &&
           a.counts_ == b.counts_;
  }

 private:
  SpaceMode mode_ = SpaceMode::Dual;
  std::size_t post_size_ = 0;
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::map<std::string, Index, std::less<>> post_lookup_;
  std::map<std::string, Index, std::less<>> reply_lookup_;
};

/// Post-side counts come from posts only and reply-side counts from replies
/// only (in single mode both feed one space). Tokens below `min_count` are
/// dropped; with `max_size` the most frequent survive, ties broken
/// lexicographically. Throws DataError on an empty corpus.
DualVocab build_vocab(const PairCorpus& corpus, const VocabConfig& config = {});

/// `token<TAB>space<TAB>index<TAB>count`, one line per joint index.
void write_vocab(const DualVocab& vocab, std::ostream& out);
DualVocab read_vocab(std::istream& in);

}  // namespace prembed
