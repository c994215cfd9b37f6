// Independent reference implementations used only by the tests. None of
// these call into the code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "prembed/align.hpp"
#include "prembed/corpus.hpp"
#include "prembed/vocab.hpp"

namespace prembed::oracle {

using Table = std::map<std::pair<std::string, std::string>, double>;

/// Model 1 EM over raw token strings, written directly from the E/M
/// definitions with ordered maps. t(target | source).
inline Table model1(const std::vector<std::pair<Tokens, Tokens>>& pairs, int iterations) {
  Table t;
  std::map<std::string, std::vector<std::string>> targets_of;
  for (const auto& [src, tgt] : pairs)
    for (const auto& s : src)
      for (const auto& w : tgt) t[{s, w}] = 0.0;
  std::map<std::string, int> fan;
  for (const auto& [key, v] : t) ++fan[key.first];
  for (auto& [key, v] : t) v = 1.0 / fan[key.first];

  for (int it = 0; it < iterations; ++it) {
    Table count;
    for (const auto& [src, tgt] : pairs) {
      for (const auto& w : tgt) {
        double z = 0.0;
        for (const auto& s : src) z += t[{s, w}];
        for (const auto& s : src) count[{s, w}] += t[{s, w}] / z;
      }
    }
    std::map<std::string, double> total;
    for (const auto& [key, c] : count) total[key.first] += c;
    for (auto& [key, v] : t) v = count[key] / total[key.first];
  }
  return t;
}

inline double model1_loglik(const std::vector<std::pair<Tokens, Tokens>>& pairs, const Table& t) {
  double ll = 0.0;
  for (const auto& [src, tgt] : pairs) {
    for (const auto& w : tgt) {
      double z = 0.0;
      for (const auto& s : src) {
        auto it = t.find({s, w});
        z += it == t.end() ? 0.0 : it->second;
      }
      ll += std::log(z / static_cast<double>(src.size()));
    }
  }
  return ll;
}

using Cooc = std::map<std::pair<Index, Index>, double>;

/// Enumerates every position pair of every sentence and of every post x reply
/// combination and keeps the ones that fall in a window. Alignment is the
/// first argmax of the given tables, recomputed here.
inline Cooc cooc(const PairCorpus& corpus, const DualVocab& vocab, const TranslationTable& fwd,
                 const TranslationTable& rev, std::size_t intra, std::size_t cross) {
  Cooc x;
  auto intra_block = [&](const std::vector<Index>& s) {
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = 0; b < s.size(); ++b) {
        const auto d = static_cast<std::size_t>(std::llabs(static_cast<long long>(a) - static_cast<long long>(b)));
        if (d >= 1 && d <= intra) x[{s[a], s[b]}] += 1.0 / static_cast<double>(d);
      }
  };
  auto argmax = [](Index from, const std::vector<Index>& to, const TranslationTable& t) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < to.size(); ++j)
      if (t.prob(from, to[j]) > t.prob(from, to[best])) best = j;
    return best;
  };
  auto cross_block = [&](const std::vector<Index>& from, const std::vector<Index>& to,
                         const TranslationTable& t) {
    const long long radius = static_cast<long long>(cross / 2);
    for (std::size_t i = 0; i < from.size(); ++i) {
      const auto centre = static_cast<long long>(argmax(from[i], to, t));
      for (std::size_t j = 0; j < to.size(); ++j) {
        const long long off = std::llabs(static_cast<long long>(j) - centre);
        if (off > radius) continue;
        const double w = 1.0 / static_cast<double>(off + 1);
        x[{from[i], to[j]}] += w * 0.5;
        x[{to[j], from[i]}] += w * 0.5;
      }
    }
  };
  for (const auto& pair : corpus) {
    std::vector<Index> p, r;
    for (const auto& tok : pair.post) p.push_back(vocab.index(tok, Space::Post));
    for (const auto& tok : pair.reply) r.push_back(vocab.index(tok, Space::Reply));
    intra_block(p);
    intra_block(r);
    if (cross > 0) {
      cross_block(p, r, fwd);
      cross_block(r, p, rev);
    }
  }
  return x;
}

/// hits@k by locating the true candidate's rank directly from scores:
/// rank = 1 + #candidates scoring strictly higher + #earlier candidates tied.
inline double hits(const std::vector<std::vector<double>>& scores,
                   const std::vector<std::vector<int>>& grades, std::size_t k) {
  std::size_t hit = 0;
  for (std::size_t q = 0; q < scores.size(); ++q) {
    const auto t = static_cast<std::size_t>(std::find(grades[q].begin(), grades[q].end(), 1) - grades[q].begin());
    std::size_t rank = 1;
    for (std::size_t c = 0; c < scores[q].size(); ++c)
      if (scores[q][c] > scores[q][t] || (scores[q][c] == scores[q][t] && c < t)) ++rank;
    hit += rank <= k;
  }
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

/// NDCG with the ideal DCG found by trying every permutation (n <= 8).
inline double ndcg(const std::vector<int>& ranked, std::size_t cutoff) {
  auto dcg = [&](const std::vector<int>& g) {
    double s = 0.0;
    for (std::size_t r = 0; r < g.size() && r < cutoff; ++r)
      s += (std::pow(2.0, g[r]) - 1.0) / (std::log(static_cast<double>(r) + 2.0) / std::log(2.0));
    return s;
  };
  std::vector<int> perm = ranked;
  std::sort(perm.begin(), perm.end());
  double best = 0.0;
  do {
    best = std::max(best, dcg(perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best == 0.0 ? 0.0 : dcg(ranked) / best;
}

/// Top candidate is the argmax score (first index on ties).
inline double p_at_1(const std::vector<std::vector<double>>& scores,
                     const std::vector<std::vector<int>>& grades, bool strict) {
  std::size_t good = 0;
  for (std::size_t q = 0; q < scores.size(); ++q) {
    std::size_t top = 0;
    for (std::size_t c = 1; c < scores[q].size(); ++c)
      if (scores[q][c] > scores[q][top]) top = c;
    const int g = grades[q][top];
    good += strict ? g == 2 : g >= 1;
  }
  return static_cast<double>(good) / static_cast<double>(scores.size());
}

/// Central differences of f at x along every coordinate of `params`.
template <typename F>
std::vector<double> numeric_gradient(std::vector<double*> params, F&& f, double h = 1e-5) {
  std::vector<double> out;
  for (double* p : params) {
    const double saved = *p;
    *p = saved + h;
    const double up = f();
    *p = saved - h;
    const double down = f();
    *p = saved;
    out.push_back((up - down) / (2.0 * h));
  }
  return out;
}

/// |a - n| / max(|a|, |n|), falling back to the absolute error when both
/// are below `floor`.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  const double diff = std::abs(analytic - numeric);
  return scale < floor ? diff : diff / scale;
}

inline Tokens random_sentence(std::mt19937_64& rng, std::size_t max_len, std::size_t alphabet,
                              const std::string& prefix) {
  std::uniform_int_distribution<std::size_t> len(1, max_len), tok(0, alphabet - 1);
  Tokens s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s.push_back(prefix + std::to_string(tok(rng)));
  return s;
}

inline PairCorpus random_corpus(std::mt19937_64& rng, std::size_t max_pairs, std::size_t max_len,
                                std::size_t alphabet) {
  std::uniform_int_distribution<std::size_t> n(1, max_pairs);
  PairCorpus c;
  const std::size_t pairs = n(rng);
  for (std::size_t i = 0; i < pairs; ++i)
    c.pairs.push_back({random_sentence(rng, max_len, alphabet, "w"), random_sentence(rng, max_len, alphabet, "w")});
  return c;
}

}  // namespace prembed::oracle
