#include "prembed/cooc.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "prembed/error.hpp"

namespace prembed {

namespace {

std::uint64_t pack(Index row, Index col) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(row)) << 32) |
         static_cast<std::uint32_t>(col);
}

std::size_t distance(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

class Accumulator {
 public:
  void add(const CoocEntry& e) {
    auto [it, inserted] = slots_.try_emplace(pack(e.row, e.col), entries_.size());
    if (inserted) {
      entries_.push_back(e);
    } else {
      entries_[it->second].weight += e.weight;
    }
  }

  void add_scaled(const std::vector<CoocEntry>& es, double scale) {
    for (auto e : es) {
      e.weight *= scale;
      add(e);
    }
  }

  std::vector<CoocEntry>& entries() { return entries_; }

 private:
  std::unordered_map<std::uint64_t, std::size_t> slots_;
  std::vector<CoocEntry> entries_;
};

}  // namespace

CoocMatrix::CoocMatrix(std::size_t vocab_size, SpaceMode mode, WindowConfig config,
                       std::span<const CoocEntry> contributions)
    : vocab_size_(vocab_size), mode_(mode), config_(config) {
  Accumulator acc;
  for (const auto& e : contributions) {
    if (e.row < 0 || e.col < 0 || static_cast<std::size_t>(e.row) >= vocab_size ||
        static_cast<std::size_t>(e.col) >= vocab_size)
      throw DataError("co-occurrence index out of range");
    acc.add(e);
  }
  entries_ = std::move(acc.entries());
  std::erase_if(entries_, [](const CoocEntry& e) { return !(e.weight > 0.0); });
  std::sort(entries_.begin(), entries_.end(), [](const CoocEntry& a, const CoocEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
}

double CoocMatrix::weight(Index row, Index col) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{row, col},
                             [](const CoocEntry& e, const std::pair<Index, Index>& key) {
                               return e.row != key.first ? e.row < key.first : e.col < key.second;
                             });
  return it != entries_.end() && it->row == row && it->col == col ? it->weight : 0.0;
}

bool CoocMatrix::is_symmetric() const {
  for (const auto& e : entries_)
    if (weight(e.col, e.row) != e.weight) return false;
  return true;
}

std::vector<CoocEntry> intra_windows(std::span<const Index> tokens, std::size_t window) {
  std::vector<CoocEntry> out;
  const std::size_t n = tokens.size();
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t lo = a > window ? a - window : 0;
    const std::size_t hi = std::min(n, a + window + 1);
    for (std::size_t b = lo; b < hi; ++b) {
      if (b == a) continue;
      out.push_back({tokens[a], tokens[b], 1.0 / static_cast<double>(distance(a, b))});
    }
  }
  return out;
}

namespace {

void emit_cross(std::span<const Index> from, std::span<const Index> to,
                const std::vector<std::size_t>& aligned, std::size_t radius,
                std::vector<CoocEntry>& out) {
  for (std::size_t i = 0; i < from.size(); ++i) {
    const std::size_t centre = aligned.at(i);
    if (centre >= to.size()) throw DataError("alignment target out of range");
    const std::size_t lo = centre > radius ? centre - radius : 0;
    const std::size_t hi = std::min(to.size(), centre + radius + 1);
    for (std::size_t j = lo; j < hi; ++j) {
      const double w = 1.0 / static_cast<double>(distance(j, centre) + 1);
      out.push_back({from[i], to[j], w});
      out.push_back({to[j], from[i], w});
    }
  }
}

}  // namespace

std::vector<CoocEntry> cross_windows(std::span<const Index> post, std::span<const Index> reply,
                                     const PairAlignment& alignment, std::size_t window) {
  if (alignment.post_to_reply.size() != post.size() ||
      alignment.reply_to_post.size() != reply.size())
    throw DataError("alignment does not match the pair");
  std::vector<CoocEntry> out;
  const std::size_t radius = window / 2;
  emit_cross(post, reply, alignment.post_to_reply, radius, out);
  emit_cross(reply, post, alignment.reply_to_post, radius, out);
  return out;
}

CoocMatrix accumulate(const PairCorpus& corpus, const DualVocab& vocab,
                      const TranslationTable& forward, const TranslationTable& reverse,
                      const WindowConfig& config, std::size_t threads) {
  if (forward.direction() != Direction::PostToReply || reverse.direction() != Direction::ReplyToPost)
    throw DataError("expected a post->reply table and a reply->post table");
  if (forward.vocab_size() != vocab.size() || reverse.vocab_size() != vocab.size())
    throw DataError("translation tables were trained over a different vocabulary");
  if (config.intra_window < 1) throw DataError("intra window must be >= 1");

  threads = std::max<std::size_t>(threads, 1);
  const std::size_t n_shards = std::max<std::size_t>(1, std::min(threads, corpus.size()));
  const std::size_t shard_len = corpus.empty() ? 0 : (corpus.size() + n_shards - 1) / n_shards;
  std::vector<Accumulator> shards(n_shards);

  auto work = [&](std::size_t s) {
    const std::size_t lo = s * shard_len;
    const std::size_t hi = std::min(corpus.size(), lo + shard_len);
    auto& acc = shards[s];
    for (std::size_t p = lo; p < hi; ++p) {
      const auto& pair = corpus.pairs[p];
      const auto post = vocab.encode(pair.post, Space::Post);
      const auto reply = vocab.encode(pair.reply, Space::Reply);
      acc.add_scaled(intra_windows(post, config.intra_window), 1.0);
      acc.add_scaled(intra_windows(reply, config.intra_window), 1.0);
      if (config.cross_window > 0) {
        const auto alignment = best_alignment(post, reply, forward, reverse);
        acc.add_scaled(cross_windows(post, reply, alignment, config.cross_window),
                       kCrossDirectionScale);
      }
    }
  };
  if (n_shards == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t s = 0; s < n_shards; ++s) pool.emplace_back(work, s);
  }

  // Every emission has an equal-weight mirror, so only the upper triangle is
  // summed and the lower one is copied from it; symmetry is then exact.
  std::vector<CoocEntry> all;
  for (auto& shard : shards)
    for (const auto& e : shard.entries())
      if (e.row <= e.col) all.push_back(e);
  const std::size_t upper = all.size();
  for (std::size_t i = 0; i < upper; ++i)
    if (all[i].row != all[i].col) all.push_back({all[i].col, all[i].row, all[i].weight});
  return CoocMatrix(vocab.size(), vocab.mode(), config, all);
}

void write_cooc(const CoocMatrix& matrix, std::ostream& out) {
  char buf[64];
  for (const auto& e : matrix) {
    std::snprintf(buf, sizeof buf, "%.17g", e.weight);
    out << e.row << '\t' << e.col << '\t' << buf << '\n';
  }
}

void write_cooc_sidecar(const CoocMatrix& matrix, std::ostream& out) {
  nlohmann::ordered_json j;
  j["vocab_size"] = matrix.vocab_size();
  j["mode"] = to_string(matrix.mode());
  j["intra_window"] = matrix.config().intra_window;
  j["intra_weighting"] = "harmonic 1/d";
  j["cross_window"] = matrix.config().cross_window;
  j["cross_weighting"] = "1/(offset+1)";
  j["cross_direction_scale"] = kCrossDirectionScale;
  j["entries"] = matrix.size();
  out << j.dump(2) << '\n';
}

CoocMatrix read_cooc(std::istream& triples, std::istream& sidecar) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(sidecar);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("co-occurrence sidecar: ") + e.what(), 0);
  }
  WindowConfig config;
  std::size_t vocab_size = 0;
  SpaceMode mode = SpaceMode::Dual;
  try {
    vocab_size = meta.at("vocab_size").get<std::size_t>();
    config.intra_window = meta.at("intra_window").get<std::size_t>();
    config.cross_window = meta.at("cross_window").get<std::size_t>();
    mode = meta.at("mode").get<std::string>() == "single" ? SpaceMode::Single : SpaceMode::Dual;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("co-occurrence sidecar: ") + e.what(), 0);
  }

  std::vector<CoocEntry> entries;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(triples, raw)) {
    ++line_no;
    if (raw.empty()) continue;
    long row = 0, col = 0;
    double w = 0.0;
    int consumed = 0;
    if (std::sscanf(raw.c_str(), "%ld\t%ld\t%lf%n", &row, &col, &w, &consumed) != 3 ||
        static_cast<std::size_t>(consumed) != raw.size() || !(w > 0.0))
      throw ParseError("expected row<TAB>col<TAB>weight", line_no);
    entries.push_back({static_cast<Index>(row), static_cast<Index>(col), w});
  }
  CoocMatrix m(vocab_size, mode, config, entries);
  if (m.size() != entries.size()) throw DataError("duplicate co-occurrence coordinates");
  return m;
}

}  // namespace prembed
