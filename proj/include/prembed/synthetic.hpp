#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "prembed/corpus.hpp"
#include "prembed/eval.hpp"

namespace prembed {

/// One intent family: a post keyword that is always answered by a reply
/// keyword, each surrounded by family-specific filler words.
struct IntentFamily {
  std::string post_keyword;
  std::string reply_keyword;
  std::vector<std::string> post_fillers;
  std::vector<std::string> reply_fillers;
};

struct SyntheticConfig {
  std::size_t families = 10;
  std::size_t fillers_per_side = 6;
  std::size_t fillers_per_sentence = 3;
};

/// Families with pairwise disjoint vocabularies (why/because, thanks/welcome, ...).
std::vector<IntentFamily> intent_families(const SyntheticConfig& config = {});

ConversationPair sample_pair(const IntentFamily& family, std::size_t fillers, std::uint64_t& state);

/// `pairs` pairs, families assigned round-robin.
PairCorpus synthetic_corpus(const std::vector<IntentFamily>& families, std::size_t pairs,
                            std::uint64_t seed, const SyntheticConfig& config = {});

/// Binary 20-candidate style sets: one fresh reply from the query's family
/// (grade 1), one echo of the query text, and replies from other families.
std::vector<CandidateSet> synthetic_candidate_sets(const std::vector<IntentFamily>& families,
                                                   std::size_t sets, std::size_t candidates,
                                                   std::uint64_t seed,
                                                   const SyntheticConfig& config = {});

}  // namespace prembed
