#include "prembed/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "prembed/error.hpp"
#include "prembed/linalg.hpp"

namespace prembed {

std::vector<CandidateSet> parse_candidate_sets(std::istream& in) {
  std::vector<CandidateSet> sets;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(raw);
      CandidateSet set;
      set.query = tokenize(j.at("query").get<std::string>());
      for (const auto& c : j.at("candidates")) {
        const int grade = c.at("grade").get<int>();
        if (grade < 0 || grade > 2) throw ParseError("grade must be 0, 1 or 2", line_no);
        set.candidates.push_back({tokenize(c.at("text").get<std::string>()), grade});
      }
      if (set.candidates.size() < 2) throw ParseError("a candidate set needs >= 2 candidates", line_no);
      sets.push_back(std::move(set));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return sets;
}

std::vector<CandidateSet> load_candidate_sets(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open candidate file " + path.string());
  return parse_candidate_sets(in);
}

void write_candidate_sets(std::span<const CandidateSet> sets, std::ostream& out) {
  for (const auto& set : sets) {
    nlohmann::ordered_json j;
    j["query"] = join_tokens(set.query);
    j["candidates"] = nlohmann::ordered_json::array();
    for (const auto& c : set.candidates)
      j["candidates"].push_back({{"text", join_tokens(c.text)}, {"grade", c.grade}});
    out << j.dump() << '\n';
  }
}

GradeScheme detect_scheme(std::span<const CandidateSet> sets) {
  for (const auto& set : sets) {
    std::size_t ones = 0;
    for (const auto& c : set.candidates) {
      if (c.grade > 1) return GradeScheme::Graded;
      ones += c.grade == 1;
    }
    if (ones != 1) return GradeScheme::Graded;
  }
  return GradeScheme::Binary;
}

Vector bow_vector(const Tokens& tokens, Space space, const EmbeddingTable& table) {
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(table.dim()));
  std::size_t n = 0;
  const Index pad = table.vocab.pad(space);
  for (const auto& t : tokens) {
    const Index i = table.vocab.index(t, space);
    if (i == pad) continue;
    sum += table.vectors.row(i).transpose();
    ++n;
  }
  if (n) sum /= static_cast<double>(n);
  return sum;
}

PairScorer bow_cosine_scorer(const EmbeddingTable& table) {
  return [&table](const Tokens& query, const Tokens& candidate) {
    return cosine(bow_vector(query, Space::Post, table), bow_vector(candidate, Space::Reply, table));
  };
}

PairScorer sll_scorer(const MatchClassifier& model) {
  return [&model](const Tokens& query, const Tokens& candidate) {
    return forward(match_matrix(query, candidate, model), model);
  };
}

std::vector<std::size_t> rank_by_scores(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<std::size_t> rank_candidates(const CandidateSet& set, const PairScorer& scorer) {
  std::vector<double> scores;
  scores.reserve(set.candidates.size());
  for (const auto& c : set.candidates) scores.push_back(scorer(set.query, c.text));
  return rank_by_scores(scores);
}

double hits_at_k(std::span<const RankedGrades> queries, std::size_t k) {
  if (queries.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& q : queries) {
    for (std::size_t r = 0; r < q.size(); ++r) {
      if (q[r] != 0 && q[r] != 1) throw DataError("hits@k requires binary grades");
      if (q[r] == 1 && r < k) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

namespace {

double dcg(std::span<const int> grades, std::size_t cutoff) {
  double total = 0.0;
  for (std::size_t r = 0; r < std::min(cutoff, grades.size()); ++r)
    total += (std::exp2(grades[r]) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
  return total;
}

}  // namespace

double ndcg(std::span<const int> ranked, std::optional<std::size_t> cutoff) {
  const std::size_t n = cutoff.value_or(ranked.size());
  std::vector<int> ideal(ranked.begin(), ranked.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double best = dcg(ideal, n);
  return best > 0.0 ? dcg(ranked, n) / best : 0.0;
}

double mean_ndcg(std::span<const RankedGrades> queries, std::optional<std::size_t> cutoff) {
  if (queries.empty()) return 0.0;
  double total = 0.0;
  for (const auto& q : queries) total += ndcg(q, cutoff);
  return total / static_cast<double>(queries.size());
}

double p_at_1(std::span<const RankedGrades> queries, bool strict) {
  if (queries.empty()) return 0.0;
  std::size_t good = 0;
  for (const auto& q : queries)
    if (!q.empty() && (strict ? q.front() == 2 : q.front() >= 1)) ++good;
  return static_cast<double>(good) / static_cast<double>(queries.size());
}

std::vector<Neighbor> nearest_neighbors(std::string_view token, Space source, Space target,
                                        std::size_t k, const EmbeddingTable& table) {
  const auto& vocab = table.vocab;
  const auto query = vocab.find(token, source);
  if (!query || vocab.is_special(*query))
    throw DataError("unknown " + std::string(to_string(source)) + " token '" + std::string(token) + "'");
  const auto u = table.vectors.row(*query);

  std::vector<Neighbor> all;
  const Index lo = vocab.offset(target);
  const Index hi = lo + static_cast<Index>(vocab.space_size(target));
  for (Index i = lo; i < hi; ++i) {
    if (vocab.is_special(i)) continue;
    all.push_back({vocab.token(i), cosine(u, table.vectors.row(i))});
  }
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      return a.cosine != b.cosine ? a.cosine > b.cosine : a.token < b.token;
                    });
  all.resize(k);
  return all;
}

std::optional<double> EvalReport::metric(std::string_view name) const {
  for (const auto& [n, v] : metrics)
    if (n == name) return v;
  return std::nullopt;
}

EvalReport evaluate(std::span<const CandidateSet> sets, const PairScorer& scorer,
                    nlohmann::ordered_json config) {
  if (sets.empty()) throw DataError("no candidate sets to evaluate");
  EvalReport report;
  std::vector<RankedGrades> graded;
  for (const auto& set : sets) {
    auto order = rank_candidates(set, scorer);
    RankedGrades g;
    for (std::size_t idx : order) g.push_back(set.candidates[idx].grade);
    graded.push_back(std::move(g));
    report.rankings.push_back(std::move(order));
  }
  const GradeScheme scheme = detect_scheme(sets);
  if (scheme == GradeScheme::Binary) {
    for (std::size_t k : {1, 5, 10}) report.metrics.emplace_back("hits@" + std::to_string(k), hits_at_k(graded, k));
  } else {
    report.metrics.emplace_back("ndcg", mean_ndcg(graded));
    report.metrics.emplace_back("ndcg@5", mean_ndcg(graded, 5));
    report.metrics.emplace_back("p@1", p_at_1(graded, false));
    report.metrics.emplace_back("p@1(s)", p_at_1(graded, true));
  }
  config["scheme"] = scheme == GradeScheme::Binary ? "binary" : "graded";
  config["queries"] = sets.size();
  report.config = std::move(config);
  return report;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["config"] = report.config;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : report.metrics) j["metrics"][name] = value;
  j["rankings"] = report.rankings;
  return j.dump(1) + "\n";
}

void print_report(const EvalReport& report, std::ostream& out) {
  char buf[64];
  out << "metric      value\n";
  for (const auto& [name, value] : report.metrics) {
    std::snprintf(buf, sizeof buf, "%-10s  %6.2f\n", name.c_str(), 100.0 * value);
    out << buf;
  }
  out << "queries: " << report.rankings.size() << '\n';
}

}  // namespace prembed
