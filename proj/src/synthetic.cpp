#include "prembed/synthetic.hpp"

#include <algorithm>
#include <array>

#include "prembed/error.hpp"

namespace prembed {

namespace {

// splitmix64; small, portable and identical on every platform.
std::uint64_t next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t below(std::uint64_t& state, std::size_t n) { return static_cast<std::size_t>(next(state) % n); }

constexpr std::array<std::pair<const char*, const char*>, 12> kKeywords{{
    {"why", "because"},
    {"thanks", "welcome"},
    {"congratulations", "appreciate"},
    {"hello", "hi"},
    {"sorry", "okay"},
    {"where", "alabama"},
    {"when", "tomorrow"},
    {"who", "mother"},
    {"how", "fine"},
    {"what", "pizza"},
    {"which", "blue"},
    {"whose", "mine"},
}};

}  // namespace

std::vector<IntentFamily> intent_families(const SyntheticConfig& config) {
  if (config.families > kKeywords.size())
    throw DataError("at most " + std::to_string(kKeywords.size()) + " synthetic families");
  std::vector<IntentFamily> out;
  for (std::size_t f = 0; f < config.families; ++f) {
    IntentFamily fam{kKeywords[f].first, kKeywords[f].second, {}, {}};
    for (std::size_t k = 0; k < config.fillers_per_side; ++k) {
      fam.post_fillers.push_back("f" + std::to_string(f) + "p" + std::to_string(k));
      fam.reply_fillers.push_back("f" + std::to_string(f) + "r" + std::to_string(k));
    }
    out.push_back(std::move(fam));
  }
  return out;
}

ConversationPair sample_pair(const IntentFamily& family, std::size_t fillers, std::uint64_t& state) {
  auto sentence = [&](const std::string& keyword, const std::vector<std::string>& pool) {
    Tokens t;
    for (std::size_t k = 0; k < fillers; ++k) t.push_back(pool[below(state, pool.size())]);
    t.insert(t.begin() + static_cast<std::ptrdiff_t>(below(state, fillers + 1)), keyword);
    return t;
  };
  ConversationPair p;
  p.post = sentence(family.post_keyword, family.post_fillers);
  p.reply = sentence(family.reply_keyword, family.reply_fillers);
  return p;
}

PairCorpus synthetic_corpus(const std::vector<IntentFamily>& families, std::size_t pairs,
                            std::uint64_t seed, const SyntheticConfig& config) {
  if (families.empty()) throw DataError("no families");
  PairCorpus corpus;
  corpus.source_path = "synthetic:" + std::to_string(seed);
  std::uint64_t state = seed;
  for (std::size_t i = 0; i < pairs; ++i)
    corpus.pairs.push_back(sample_pair(families[i % families.size()], config.fillers_per_sentence, state));
  return corpus;
}

std::vector<CandidateSet> synthetic_candidate_sets(const std::vector<IntentFamily>& families,
                                                   std::size_t sets, std::size_t candidates,
                                                   std::uint64_t seed,
                                                   const SyntheticConfig& config) {
  if (families.size() < 2) throw DataError("candidate sets need at least 2 families");
  if (candidates < 3) throw DataError("candidate sets need at least 3 candidates");
  std::uint64_t state = seed;
  std::vector<CandidateSet> out;
  for (std::size_t s = 0; s < sets; ++s) {
    const std::size_t fam = s % families.size();
    const auto truth = sample_pair(families[fam], config.fillers_per_sentence, state);
    CandidateSet set;
    set.query = truth.post;
    set.candidates.push_back({truth.reply, 1});
    set.candidates.push_back({truth.post, 0});
    while (set.candidates.size() < candidates) {
      std::size_t other = below(state, families.size() - 1);
      if (other >= fam) ++other;
      set.candidates.push_back({sample_pair(families[other], config.fillers_per_sentence, state).reply, 0});
    }
    // Shuffle so the true reply's position carries no signal.
    for (std::size_t i = set.candidates.size() - 1; i > 0; --i)
      std::swap(set.candidates[i], set.candidates[below(state, i + 1)]);
    out.push_back(std::move(set));
  }
  return out;
}

}  // namespace prembed
