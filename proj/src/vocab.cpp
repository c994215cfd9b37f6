#include "prembed/vocab.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "prembed/error.hpp"

namespace prembed {

std::string_view to_string(Space space) { return space == Space::Post ? "post" : "reply"; }

std::string_view to_string(SpaceMode mode) { return mode == SpaceMode::Dual ? "dual" : "single"; }

std::optional<Space> parse_space(std::string_view name) {
  if (name == "post") return Space::Post;
  if (name == "reply") return Space::Reply;
  return std::nullopt;
}

namespace {

std::vector<std::string> with_specials(const std::vector<std::string>& tokens,
                                       const std::vector<std::uint64_t>& counts,
                                       std::vector<std::uint64_t>& counts_out) {
  std::vector<std::string> out{std::string(kUnkToken), std::string(kPadToken)};
  counts_out.assign(2, 0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::uint64_t c = i < counts.size() ? counts[i] : 0;
    if (tokens[i] == kUnkToken) {
      counts_out[0] = c;
    } else if (tokens[i] == kPadToken) {
      counts_out[1] = c;
    } else {
      out.push_back(tokens[i]);
      counts_out.push_back(c);
    }
  }
  return out;
}

}  // namespace

DualVocab DualVocab::from_tokens(SpaceMode mode, const std::vector<std::string>& post,
                                 const std::vector<std::string>& reply,
                                 const std::vector<std::uint64_t>& post_counts,
                                 const std::vector<std::uint64_t>& reply_counts) {
  DualVocab v;
  v.mode_ = mode;
  std::vector<std::uint64_t> pc;
  auto p = with_specials(post, post_counts, pc);
  v.post_size_ = p.size();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!v.post_lookup_.emplace(p[i], static_cast<Index>(i)).second)
      throw DataError("duplicate post token: " + p[i]);
  }
  v.tokens_ = std::move(p);
  v.counts_ = std::move(pc);

  if (mode == SpaceMode::Single) {
    if (!reply.empty()) throw DataError("single-space vocabulary takes one token list");
    v.reply_lookup_ = v.post_lookup_;
    return v;
  }

  std::vector<std::uint64_t> rc;
  auto r = with_specials(reply, reply_counts, rc);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!v.reply_lookup_.emplace(r[i], static_cast<Index>(v.post_size_ + i)).second)
      throw DataError("duplicate reply token: " + r[i]);
  }
  v.tokens_.insert(v.tokens_.end(), r.begin(), r.end());
  v.counts_.insert(v.counts_.end(), rc.begin(), rc.end());
  return v;
}

std::size_t DualVocab::space_size(Space space) const noexcept {
  if (shared() || space == Space::Post) return post_size_;
  return tokens_.size() - post_size_;
}

Index DualVocab::offset(Space space) const noexcept {
  if (shared() || space == Space::Post) return 0;
  return static_cast<Index>(post_size_);
}

std::optional<Index> DualVocab::find(std::string_view token, Space space) const {
  const auto& lookup = space == Space::Post ? post_lookup_ : reply_lookup_;
  auto it = lookup.find(token);
  if (it == lookup.end()) return std::nullopt;
  return it->second;
}

Index DualVocab::index(std::string_view token, Space space) const {
  return find(token, space).value_or(unk(space));
}

bool DualVocab::is_special(Index i) const noexcept {
  return i == unk(Space::Post) || i == pad(Space::Post) || i == unk(Space::Reply) ||
         i == pad(Space::Reply);
}

Space DualVocab::owner(Index i) const noexcept {
  if (shared() || static_cast<std::size_t>(i) < post_size_) return Space::Post;
  return Space::Reply;
}

std::string DualVocab::display(Index i) const {
  if (shared()) return token(i);
  return (owner(i) == Space::Post ? "P_" : "R_") + token(i);
}

std::vector<Index> DualVocab::encode(const Tokens& tokens, Space space) const {
  std::vector<Index> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index(t, space));
  return out;
}

std::vector<Index> DualVocab::encode_fixed(const Tokens& tokens, Space space,
                                           std::size_t length) const {
  std::vector<Index> out(length, pad(space));
  const std::size_t n = std::min(length, tokens.size());
  for (std::size_t i = 0; i < n; ++i) out[i] = index(tokens[i], space);
  return out;
}

namespace {

using CountMap = std::unordered_map<std::string, std::uint64_t>;

void count_into(const Tokens& tokens, CountMap& counts) {
  for (const auto& t : tokens) ++counts[t];
}

// Sorted by descending count, then lexicographically. Returns kept tokens and
// their counts; the count of everything dropped is added to `dropped`.
std::vector<std::pair<std::string, std::uint64_t>> select(const CountMap& counts,
                                                          const VocabConfig& config,
                                                          std::uint64_t& dropped) {
  std::vector<std::pair<std::string, std::uint64_t>> items;
  std::uint64_t unk_count = 0;
  for (const auto& [tok, c] : counts) {
    if (tok == kUnkToken) {
      unk_count += c;
    } else if (tok == kPadToken) {
      continue;
    } else {
      items.emplace_back(tok, c);
    }
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  dropped = unk_count;
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& item : items) {
    const bool under = item.second < config.min_count;
    const bool full = config.max_size != 0 && kept.size() >= config.max_size;
    if (under || full) {
      dropped += item.second;
    } else {
      kept.push_back(std::move(item));
    }
  }
  return kept;
}

}  // namespace

DualVocab build_vocab(const PairCorpus& corpus, const VocabConfig& config) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  if (config.min_count < 1) throw DataError("min_count must be >= 1");

  auto unzip = [](std::vector<std::pair<std::string, std::uint64_t>> kept, std::uint64_t dropped,
                  std::vector<std::string>& toks, std::vector<std::uint64_t>& counts) {
    toks = {std::string(kUnkToken), std::string(kPadToken)};
    counts = {dropped, 0};
    for (auto& [t, c] : kept) {
      toks.push_back(std::move(t));
      counts.push_back(c);
    }
  };

  CountMap post_counts;
  CountMap reply_counts;
  for (const auto& pair : corpus) {
    count_into(pair.post, post_counts);
    count_into(pair.reply, config.mode == SpaceMode::Single ? post_counts : reply_counts);
  }

  std::vector<std::string> post_toks;
  std::vector<std::uint64_t> post_c;
  std::uint64_t dropped = 0;
  auto post_kept = select(post_counts, config, dropped);
  unzip(std::move(post_kept), dropped, post_toks, post_c);
  if (config.mode == SpaceMode::Single)
    return DualVocab::from_tokens(SpaceMode::Single, post_toks, {}, post_c);

  std::vector<std::string> reply_toks;
  std::vector<std::uint64_t> reply_c;
  auto reply_kept = select(reply_counts, config, dropped);
  unzip(std::move(reply_kept), dropped, reply_toks, reply_c);
  return DualVocab::from_tokens(SpaceMode::Dual, post_toks, reply_toks, post_c, reply_c);
}

void write_vocab(const DualVocab& vocab, std::ostream& out) {
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto idx = static_cast<Index>(i);
    const std::string_view space = vocab.shared() ? "shared" : to_string(vocab.owner(idx));
    out << vocab.token(idx) << '\t' << space << '\t' << i << '\t' << vocab.count(idx) << '\n';
  }
}

namespace {

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError("bad number '" + std::string(field) + "'", line_no);
  return value;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

DualVocab read_vocab(std::istream& in) {
  std::vector<std::string> post, reply;
  std::vector<std::uint64_t> post_c, reply_c;
  std::optional<SpaceMode> mode;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.empty()) continue;
    auto fields = split_tabs(raw);
    if (fields.size() != 4) throw ParseError("expected 4 tab-separated fields", line_no);
    const auto index = parse_number<std::size_t>(fields[2], line_no);
    const auto count = parse_number<std::uint64_t>(fields[3], line_no);
    const SpaceMode line_mode = fields[1] == "shared" ? SpaceMode::Single : SpaceMode::Dual;
    if (mode && *mode != line_mode) throw ParseError("mixed shared and dual rows", line_no);
    mode = line_mode;
    if (index != post.size() + reply.size()) throw ParseError("indices must be consecutive", line_no);
    if (fields[1] == "post" || fields[1] == "shared") {
      if (!reply.empty()) throw ParseError("post row after reply rows", line_no);
      post.emplace_back(fields[0]);
      post_c.push_back(count);
    } else if (fields[1] == "reply") {
      reply.emplace_back(fields[0]);
      reply_c.push_back(count);
    } else {
      throw ParseError("unknown space '" + std::string(fields[1]) + "'", line_no);
    }
  }
  if (!mode) throw DataError("vocabulary file is empty");
  auto v = DualVocab::from_tokens(*mode, post, reply, post_c, reply_c);
  std::vector<std::string> file_order = post;
  file_order.insert(file_order.end(), reply.begin(), reply.end());
  bool same = v.size() == file_order.size();
  for (std::size_t i = 0; same && i < file_order.size(); ++i)
    same = v.token(static_cast<Index>(i)) == file_order[i];
  if (!same) throw DataError("vocabulary file must start each space with <unk>, <pad>");
  return v;
}

}  // namespace prembed
