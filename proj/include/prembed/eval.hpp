#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prembed/corpus.hpp"
#include "prembed/embed.hpp"
#include "prembed/sentnet.hpp"

namespace prembed {

enum class GradeScheme { Binary, Graded };

struct Candidate {
  Tokens text;
  int grade = 0;  // binary 0/1, graded bad=0 middle=1 good=2
};

struct CandidateSet {
  Tokens query;
  std::vector<Candidate> candidates;
};

/// JSONL: {"query": "...", "candidates": [{"text": "...", "grade": 0|1|2}, ...]}
std::vector<CandidateSet> parse_candidate_sets(std::istream& in);
std::vector<CandidateSet> load_candidate_sets(const std::filesystem::path& path);
void write_candidate_sets(std::span<const CandidateSet> sets, std::ostream& out);

/// Binary when every set has exactly one grade-1 candidate and no grade 2.
GradeScheme detect_scheme(std::span<const CandidateSet> sets);

/// Mean of the space's vectors over the tokens (OOV -> UNK, PAD skipped).
/// Zero vector for empty input.
Vector bow_vector(const Tokens& tokens, Space space, const EmbeddingTable& table);

/// Higher is better.
using PairScorer = std::function<double(const Tokens& query, const Tokens& candidate)>;

/// cosine(bow(query, post space), bow(candidate, reply space)).
PairScorer bow_cosine_scorer(const EmbeddingTable& table);
/// g(P, R) of the matcher.
PairScorer sll_scorer(const MatchClassifier& model);

/// Candidate indices sorted by descending score; ties keep the lower index first.
std::vector<std::size_t> rank_by_scores(std::span<const double> scores);
std::vector<std::size_t> rank_candidates(const CandidateSet& set, const PairScorer& scorer);

/// Grades of one query's candidates in ranked order.
using RankedGrades = std::vector<int>;

/// Fraction of queries whose grade-1 candidate is in the top k.
/// Throws DataError on grades outside {0, 1}.
double hits_at_k(std::span<const RankedGrades> queries, std::size_t k);

/// DCG with gain 2^g - 1 and discount log2(rank + 1), normalized by the ideal
/// ordering; 0 when the ideal DCG is 0. No cutoff means the full list.
double ndcg(std::span<const int> ranked, std::optional<std::size_t> cutoff = std::nullopt);
double mean_ndcg(std::span<const RankedGrades> queries,
                 std::optional<std::size_t> cutoff = std::nullopt);

/// Top candidate has grade >= 1 (lenient) or == 2 (strict).
double p_at_1(std::span<const RankedGrades> queries, bool strict);

struct Neighbor {
  std::string token;
  double cosine = 0.0;
};

/// Cosine of `token` (looked up in `source`) against every regular token of
/// `target`, best first, ties lexicographic. Throws DataError for an unknown
/// token.
std::vector<Neighbor> nearest_neighbors(std::string_view token, Space source, Space target,
                                        std::size_t k, const EmbeddingTable& table);

struct EvalReport {
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::vector<std::size_t>> rankings;
  nlohmann::ordered_json config;

  std::optional<double> metric(std::string_view name) const;
};

EvalReport evaluate(std::span<const CandidateSet> sets, const PairScorer& scorer,
                    nlohmann::ordered_json config = {});

std::string report_json(const EvalReport& report);
void print_report(const EvalReport& report, std::ostream& out);

}  // namespace prembed
