#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prembed {

using Tokens = std::vector<std::string>;

/// One <post, reply> exchange. Both sides are non-empty after tokenization.
struct ConversationPair {
  Tokens post;
  Tokens reply;

  friend bool operator==(const ConversationPair&, const ConversationPair&) = default;
};

struct SkippedLine {
  std::size_t line;
  std::string reason;
};

/// Pairs in file order, plus the lines that were rejected while loading.
struct PairCorpus {
  std::vector<ConversationPair> pairs;
  std::string source_path;
  std::vector<SkippedLine> skipped;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  auto begin() const noexcept { return pairs.begin(); }
  auto end() const noexcept { return pairs.end(); }
};

enum class PairFormat { Tsv, Jsonl };

std::optional<PairFormat> parse_pair_format(std::string_view name);

/// Lowercases, detaches the marks . , ! ? ' into their own tokens, then
/// splits on whitespace.
Tokens tokenize(std::string_view text);

std::string join_tokens(const Tokens& tokens);

PairCorpus parse_pairs(std::istream& in, PairFormat format, std::string source = {});

/// Throws IoError if the file cannot be opened. Malformed lines and pairs
/// with an empty side are recorded in `skipped` and do not abort the load.
PairCorpus load_pairs(const std::filesystem::path& path, PairFormat format);

void write_tsv(const PairCorpus& corpus, std::ostream& out);

}  // namespace prembed
