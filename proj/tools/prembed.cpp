// Command-line driver: one subcommand per pipeline stage.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "prembed/pipeline.hpp"
#include "prembed/synthetic.hpp"

namespace fs = std::filesystem;
using namespace prembed;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct Overrides {
  std::string config;
  std::optional<std::string> workdir, corpus, format, eval_set, embeddings, scorer;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  bool single_space = false;
  bool no_sll = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON pipeline configuration");
  cmd->add_option("--workdir", o.workdir, "Directory holding stage artifacts");
  cmd->add_option("--corpus", o.corpus, "Pair file (tsv or jsonl)");
  cmd->add_option("--format", o.format, "Pair file format")->check(CLI::IsMember({"tsv", "jsonl"}));
  cmd->add_option("--eval-set", o.eval_set, "Candidate-set JSONL file");
  cmd->add_option("--threads", o.threads, "Worker threads; 1 is deterministic")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_flag("--single-space", o.single_space, "Single vector space (w/o-PR ablation)");
  cmd->add_flag("--no-sll", o.no_sll, "Skip sentence-level learning (w/o-SLL ablation)");
  cmd->add_option("--embeddings", o.embeddings, "Embedding file to use instead of the pipeline output");
  cmd->add_option("--scorer", o.scorer, "Ranking scorer")->check(CLI::IsMember({"bow", "sll"}));
}

PipelineConfig resolve(const Overrides& o) {
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : PipelineConfig::load(o.config);
  if (o.workdir) c.workdir = *o.workdir;
  if (o.corpus) c.corpus = *o.corpus;
  if (o.format) c.format = *parse_pair_format(*o.format);
  if (o.eval_set) c.eval_set = *o.eval_set;
  if (o.embeddings) c.embeddings = *o.embeddings;
  if (o.scorer) c.scorer = *o.scorer;
  if (o.threads) c.threads = *o.threads;
  if (o.seed) c.seed = *o.seed;
  if (o.single_space) c.single_space = true;
  if (o.no_sll) c.no_sll = true;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post/reply dual-space word embeddings"};
  app.require_subcommand(1);
  Overrides o;

  auto* vocab = app.add_subcommand("vocab", "Build the dual vocabulary");
  auto* align = app.add_subcommand("align", "Train post->reply and reply->post alignment tables");
  auto* cooc = app.add_subcommand("cooc", "Accumulate intra- and cross-sentence co-occurrence");
  auto* train = app.add_subcommand("train", "Train word-level embeddings with AdaGrad");
  auto* sll = app.add_subcommand("sll", "Sentence-level fine-tuning with the CNN matcher");
  auto* eval = app.add_subcommand("eval", "Rank candidate replies and report metrics");
  auto* run = app.add_subcommand("run", "Run every stage in order");
  for (auto* cmd : {vocab, align, cooc, train, sll, eval, run}) add_common(cmd, o);

  auto* nn = app.add_subcommand("nn", "Nearest tokens of a word in a space");
  add_common(nn, o);
  std::string token, source = "post", target = "reply";
  std::size_t k = 4;
  bool coords = false;
  nn->add_option("--token", token, "Query token")->required();
  nn->add_option("--source", source, "Space of the query token")->check(CLI::IsMember({"post", "reply"}));
  nn->add_option("--target", target, "Space searched for neighbours")->check(CLI::IsMember({"post", "reply"}));
  nn->add_option("--k", k, "Number of neighbours")->check(CLI::PositiveNumber);
  nn->add_flag("--coords", coords, "Also print raw vector coordinates");

  auto* exp = app.add_subcommand("export", "Write the final embeddings to a file");
  add_common(exp, o);
  std::string out_path;
  exp->add_option("--out", out_path, "Destination file")->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic intent-family corpus and eval set");
  std::size_t synth_pairs = 500, synth_sets = 100, synth_candidates = 20, synth_families = 10;
  std::uint64_t synth_seed = 7;
  std::string synth_corpus, synth_eval;
  synth->add_option("--pairs", synth_pairs, "Training pairs");
  synth->add_option("--sets", synth_sets, "Held-out candidate sets");
  synth->add_option("--candidates", synth_candidates, "Candidates per set");
  synth->add_option("--families", synth_families, "Intent families");
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--out-corpus", synth_corpus, "Pair TSV to write")->required();
  synth->add_option("--out-eval", synth_eval, "Candidate JSONL to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (synth->parsed()) {
      SyntheticConfig sc;
      sc.families = synth_families;
      const auto fams = intent_families(sc);
      std::ofstream corpus_out(synth_corpus, std::ios::binary);
      if (!corpus_out) throw IoError("cannot write " + synth_corpus);
      write_tsv(synthetic_corpus(fams, synth_pairs, synth_seed, sc), corpus_out);
      if (!synth_eval.empty()) {
        std::ofstream eval_out(synth_eval, std::ios::binary);
        if (!eval_out) throw IoError("cannot write " + synth_eval);
        write_candidate_sets(synthetic_candidate_sets(fams, synth_sets, synth_candidates, synth_seed + 1, sc),
                             eval_out);
      }
      return 0;
    }

    const PipelineConfig config = resolve(o);
    if (vocab->parsed()) run_vocab(config, std::cerr);
    if (align->parsed()) run_align(config, std::cerr);
    if (cooc->parsed()) run_cooc(config, std::cerr);
    if (train->parsed()) run_train(config, std::cerr);
    if (sll->parsed()) run_sll(config, std::cerr);
    if (eval->parsed()) run_eval(config, std::cout);
    if (run->parsed()) {
      run_all(config, std::cerr);
    }
    if (nn->parsed()) {
      const auto table = final_embeddings(config);
      const Space src = *parse_space(source), tgt = *parse_space(target);
      const auto neighbours = nearest_neighbors(token, src, tgt, k, table);
      auto print_coords = [&](Index i) {
        for (Eigen::Index d = 0; d < table.vectors.cols(); ++d) std::printf(" %.6f", table.vectors(i, d));
      };
      std::printf("%s%s", src == Space::Post ? "P_" : "R_", token.c_str());
      if (coords) print_coords(*table.vocab.find(token, src));
      std::printf("\n");
      for (const auto& n : neighbours) {
        std::printf("  %s%s\t%.6f", tgt == Space::Post ? "P_" : "R_", n.token.c_str(), n.cosine);
        if (coords) print_coords(*table.vocab.find(n.token, tgt));
        std::printf("\n");
      }
    }
    if (exp->parsed()) {
      const auto table = final_embeddings(config);
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw IoError("cannot write " + out_path);
      export_embeddings(table, out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return 0;
}
