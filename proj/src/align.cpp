#include "prembed/align.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <thread>

#include "prembed/error.hpp"

namespace prembed {

namespace {

std::uint64_t pack(Index source, Index target) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(source)) << 32) |
         static_cast<std::uint32_t>(target);
}

struct EncodedPair {
  std::vector<Index> source;
  std::vector<Index> target;
  // slot of (source[i], target[j]) stored row-major by target: j * m + i
  std::vector<std::size_t> slots;
};

// Accumulates expected counts for one shard of pairs and returns the shard's
// log-likelihood under the current table.
double expect(std::span<const EncodedPair> shard, const std::vector<double>& t,
              std::vector<double>& counts) {
  double ll = 0.0;
  std::vector<double> scratch;
  for (const auto& pair : shard) {
    const std::size_t m = pair.source.size();
    scratch.resize(m);
    for (std::size_t j = 0; j < pair.target.size(); ++j) {
      const std::size_t* row = pair.slots.data() + j * m;
      double denom = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        scratch[i] = t[row[i]];
        denom += scratch[i];
      }
      ll += std::log(std::max(denom, kProbFloor) / static_cast<double>(m));
      denom = std::max(denom, kProbFloor);
      for (std::size_t i = 0; i < m; ++i) counts[row[i]] += scratch[i] / denom;
    }
  }
  return ll;
}

}  // namespace

TranslationTable::TranslationTable(Direction direction, std::size_t vocab_size,
                                   std::vector<Key> keys, std::vector<double> probs)
    : direction_(direction), vocab_size_(vocab_size), keys_(std::move(keys)), probs_(std::move(probs)) {
  if (keys_.size() != probs_.size()) throw DataError("translation table keys/probs size mismatch");
  slots_.reserve(keys_.size());
  for (std::size_t s = 0; s < keys_.size(); ++s) slots_.emplace(pack(keys_[s].first, keys_[s].second), s);
}

std::size_t TranslationTable::slot(Index source, Index target) const {
  auto it = slots_.find(pack(source, target));
  return it == slots_.end() ? keys_.size() : it->second;
}

double TranslationTable::prob(Index source, Index target) const {
  const auto s = slot(source, target);
  return s == keys_.size() ? 0.0 : probs_[s];
}

TranslationTable train_model1(const PairCorpus& corpus, const DualVocab& vocab,
                              Direction direction, std::size_t iterations, std::size_t threads) {
  if (corpus.empty()) throw DataError("cannot train an alignment model on an empty corpus");
  if (iterations < 1) throw DataError("alignment iterations must be >= 1");
  threads = std::max<std::size_t>(threads, 1);

  const Space src_space = source_space(direction);
  const Space tgt_space = target_space(direction);

  std::vector<EncodedPair> encoded;
  encoded.reserve(corpus.size());
  std::vector<TranslationTable::Key> keys;
  for (const auto& pair : corpus) {
    EncodedPair e;
    const auto& src = src_space == Space::Post ? pair.post : pair.reply;
    const auto& tgt = tgt_space == Space::Post ? pair.post : pair.reply;
    e.source = vocab.encode(src, src_space);
    e.target = vocab.encode(tgt, tgt_space);
    for (Index s : e.source)
      for (Index t : e.target) keys.emplace_back(s, t);
    encoded.push_back(std::move(e));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  // Uniform over each source's co-paired targets.
  std::vector<double> probs(keys.size());
  for (std::size_t begin = 0; begin < keys.size();) {
    std::size_t end = begin;
    while (end < keys.size() && keys[end].first == keys[begin].first) ++end;
    const double u = 1.0 / static_cast<double>(end - begin);
    std::fill(probs.begin() + static_cast<std::ptrdiff_t>(begin),
              probs.begin() + static_cast<std::ptrdiff_t>(end), u);
    begin = end;
  }

  TranslationTable table(direction, vocab.size(), std::move(keys), std::move(probs));
  for (auto& e : encoded) {
    e.slots.resize(e.source.size() * e.target.size());
    for (std::size_t j = 0; j < e.target.size(); ++j)
      for (std::size_t i = 0; i < e.source.size(); ++i)
        e.slots[j * e.source.size() + i] = table.slot(e.source[i], e.target[j]);
  }

  const std::size_t n_slots = table.keys_.size();
  const std::size_t n_shards = std::min(threads, encoded.size());
  const std::size_t shard_len = (encoded.size() + n_shards - 1) / n_shards;
  std::vector<std::vector<double>> shard_counts(n_shards, std::vector<double>(n_slots));
  std::vector<double> shard_ll(n_shards);
  std::vector<double> totals;

  auto run_estep = [&] {
    auto work = [&](std::size_t s) {
      std::fill(shard_counts[s].begin(), shard_counts[s].end(), 0.0);
      const std::size_t lo = s * shard_len;
      const std::size_t hi = std::min(encoded.size(), lo + shard_len);
      shard_ll[s] = expect(std::span(encoded).subspan(lo, hi - lo), table.probs_, shard_counts[s]);
    };
    if (n_shards == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t s = 0; s < n_shards; ++s) pool.emplace_back(work, s);
    }
    for (std::size_t s = 1; s < n_shards; ++s)
      for (std::size_t k = 0; k < n_slots; ++k) shard_counts[0][k] += shard_counts[s][k];
    double ll = 0.0;
    for (double v : shard_ll) ll += v;
    return ll;
  };

  for (std::size_t iter = 0; iter < iterations; ++iter) {
    table.log_likelihood.push_back(run_estep());
    const auto& counts = shard_counts[0];
    // M-step: renormalize per source. Keys are sorted, so each source is a run.
    const auto& ks = table.keys_;
    for (std::size_t begin = 0; begin < ks.size();) {
      std::size_t end = begin;
      double total = 0.0;
      while (end < ks.size() && ks[end].first == ks[begin].first) total += counts[end++];
      total = std::max(total, kProbFloor);
      for (std::size_t k = begin; k < end; ++k) table.probs_[k] = counts[k] / total;
      begin = end;
    }
  }
  table.log_likelihood.push_back(model1_log_likelihood(corpus, vocab, table));
  return table;
}

double model1_log_likelihood(const PairCorpus& corpus, const DualVocab& vocab,
                             const TranslationTable& table) {
  const Space src_space = source_space(table.direction());
  const Space tgt_space = target_space(table.direction());
  double ll = 0.0;
  for (const auto& pair : corpus) {
    const auto src = vocab.encode(src_space == Space::Post ? pair.post : pair.reply, src_space);
    const auto tgt = vocab.encode(tgt_space == Space::Post ? pair.post : pair.reply, tgt_space);
    for (Index t : tgt) {
      double denom = 0.0;
      for (Index s : src) denom += table.prob(s, t);
      ll += std::log(std::max(denom, kProbFloor) / static_cast<double>(src.size()));
    }
  }
  return ll;
}

PairAlignment best_alignment(std::span<const Index> post, std::span<const Index> reply,
                             const TranslationTable& forward, const TranslationTable& reverse) {
  auto argmax = [](std::span<const Index> from, std::span<const Index> to,
                   const TranslationTable& table) {
    std::vector<std::size_t> out(from.size(), 0);
    for (std::size_t i = 0; i < from.size(); ++i) {
      double best = -1.0;
      for (std::size_t j = 0; j < to.size(); ++j) {
        const double p = table.prob(from[i], to[j]);
        if (p > best) {
          best = p;
          out[i] = j;
        }
      }
    }
    return out;
  };
  return {argmax(post, reply, forward), argmax(reply, post, reverse)};
}

PairAlignment best_alignment(const ConversationPair& pair, const DualVocab& vocab,
                             const TranslationTable& forward, const TranslationTable& reverse) {
  const auto post = vocab.encode(pair.post, Space::Post);
  const auto reply = vocab.encode(pair.reply, Space::Reply);
  return best_alignment(post, reply, forward, reverse);
}

void write_table(const TranslationTable& table, const DualVocab& vocab, std::ostream& out) {
  std::vector<std::size_t> order(table.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  const auto& keys = table.keys();
  const auto& probs = table.probs();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a].first != keys[b].first) return keys[a].first < keys[b].first;
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return keys[a].second < keys[b].second;
  });
  char buf[64];
  for (std::size_t k : order) {
    std::snprintf(buf, sizeof buf, "%.17g", probs[k]);
    out << vocab.token(keys[k].first) << '\t' << vocab.token(keys[k].second) << '\t' << buf << '\n';
  }
}

TranslationTable read_table(std::istream& in, const DualVocab& vocab, Direction direction) {
  std::vector<std::pair<TranslationTable::Key, double>> rows;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.empty()) continue;
    const auto t1 = raw.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : raw.find('\t', t1 + 1);
    if (t2 == std::string::npos || raw.find('\t', t2 + 1) != std::string::npos)
      throw ParseError("expected source<TAB>target<TAB>prob", line_no);
    const std::string_view view(raw);
    auto src = vocab.find(view.substr(0, t1), source_space(direction));
    auto tgt = vocab.find(view.substr(t1 + 1, t2 - t1 - 1), target_space(direction));
    if (!src || !tgt) throw ParseError("token not in vocabulary", line_no);
    const std::string prob_text(view.substr(t2 + 1));
    char* end = nullptr;
    const double p = std::strtod(prob_text.c_str(), &end);
    if (end == prob_text.c_str() || *end != '\0' || !(p >= 0.0 && p <= 1.0))
      throw ParseError("bad probability '" + prob_text + "'", line_no);
    rows.push_back({{*src, *tgt}, p});
  }
  std::sort(rows.begin(), rows.end());
  std::vector<TranslationTable::Key> keys;
  std::vector<double> probs;
  for (const auto& [k, p] : rows) {
    if (!keys.empty() && keys.back() == k) throw DataError("duplicate translation table entry");
    keys.push_back(k);
    probs.push_back(p);
  }
  return TranslationTable(direction, vocab.size(), std::move(keys), std::move(probs));
}

}  // namespace prembed
