#include "prembed/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "prembed/align.hpp"

namespace prembed {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path in_workdir(const PipelineConfig& c, const char* name) { return c.workdir / name; }

std::ifstream open_input(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) throw MissingArtifactError(path, producer);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

fs::path manifest_path(const PipelineConfig& c, const std::string& stage) {
  return c.workdir / (stage + ".manifest.json");
}

// Warns when an upstream artifact was produced under different settings.
void check_upstream(const PipelineConfig& c, const std::string& stage, std::ostream& log) {
  const auto path = manifest_path(c, stage);
  if (!fs::exists(path)) return;
  std::ifstream in(path, std::ios::binary);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("config_hash")) return;
  if (j["config_hash"] != c.stage_hash(stage))
    log << "warning: '" << stage << "' artifacts were built with a different configuration; "
        << "rerun '" << stage << "' to refresh them\n";
}

void write_manifest(const PipelineConfig& c, const std::string& stage,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                    const std::string& started) {
  ojson j;
  j["stage"] = stage;
  j["config_hash"] = c.stage_hash(stage);
  j["config"] = c.to_json();
  j["inputs"] = ojson::object();
  for (const auto& p : inputs) j["inputs"][p.string()] = file_hash(p);
  j["outputs"] = ojson::object();
  for (const auto& p : outputs) j["outputs"][p.filename().string()] = file_hash(p);
  j["started"] = started;
  j["finished"] = utc_now();
  auto out = open_output(manifest_path(c, stage));
  out << j.dump(2) << '\n';
}

DualVocab load_vocab(const PipelineConfig& c) {
  auto in = open_input(in_workdir(c, artifact::kVocab), "vocab");
  return read_vocab(in);
}

PairCorpus load_corpus(const PipelineConfig& c) {
  if (c.corpus.empty()) throw DataError("no corpus configured (set \"corpus\" or --corpus)");
  return load_pairs(c.corpus, c.format);
}

void write_trace(const fs::path& path, const std::string& header, const std::vector<double>& values) {
  auto out = open_output(path);
  out << header << '\n';
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, values[i]);
    out << buf;
  }
}

EmbeddingTable read_embedding_file(const fs::path& path, const std::string& producer,
                                   bool duplicate_unprefixed) {
  auto in = open_input(path, producer);
  ImportOptions opts;
  opts.duplicate_unprefixed = duplicate_unprefixed;
  return import_embeddings(in, opts);
}

}  // namespace

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex(fnv1a(ss.str()));
}

ojson PipelineConfig::to_json() const {
  ojson j;
  j["corpus"] = corpus.string();
  j["format"] = format == PairFormat::Tsv ? "tsv" : "jsonl";
  j["workdir"] = workdir.string();
  j["eval_set"] = eval_set.string();
  j["embeddings"] = embeddings.string();
  j["seed"] = seed;
  j["threads"] = threads;
  j["single_space"] = single_space;
  j["no_sll"] = no_sll;
  j["vocab"] = {{"min_count", vocab.min_count}, {"max_size", vocab.max_size}};
  j["align"] = {{"iterations", align_iterations}};
  j["cooc"] = {{"intra_window", windows.intra_window}, {"cross_window", windows.cross_window}};
  j["embed"] = {{"dim", embed.dim},         {"learning_rate", embed.learning_rate},
                {"epochs", embed.epochs},   {"x_max", embed.x_max},
                {"alpha", embed.alpha}};
  j["sll"] = {{"negatives", sentence.negatives}, {"learning_rate", sentence.learning_rate},
              {"epochs", sentence.epochs},       {"filters", matcher.filters},
              {"window", matcher.window},        {"post_len", matcher.post_len},
              {"reply_len", matcher.reply_len}};
  j["eval"] = {{"scorer", scorer}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  auto get = [](const nlohmann::json& obj, const char* key, auto& field) {
    if (obj.contains(key)) field = obj.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  try {
    std::string s;
    if (j.contains("corpus")) c.corpus = j.at("corpus").get<std::string>();
    if (j.contains("workdir")) c.workdir = j.at("workdir").get<std::string>();
    if (j.contains("eval_set")) c.eval_set = j.at("eval_set").get<std::string>();
    if (j.contains("embeddings")) c.embeddings = j.at("embeddings").get<std::string>();
    if (j.contains("format")) {
      auto f = parse_pair_format(j.at("format").get<std::string>());
      if (!f) throw DataError("format must be tsv or jsonl");
      c.format = *f;
    }
    get(j, "seed", c.seed);
    get(j, "threads", c.threads);
    get(j, "single_space", c.single_space);
    get(j, "no_sll", c.no_sll);
    if (j.contains("vocab")) {
      get(j["vocab"], "min_count", c.vocab.min_count);
      get(j["vocab"], "max_size", c.vocab.max_size);
    }
    if (j.contains("align")) get(j["align"], "iterations", c.align_iterations);
    if (j.contains("cooc")) {
      get(j["cooc"], "intra_window", c.windows.intra_window);
      get(j["cooc"], "cross_window", c.windows.cross_window);
    }
    if (j.contains("embed")) {
      const auto& e = j["embed"];
      get(e, "dim", c.embed.dim);
      get(e, "learning_rate", c.embed.learning_rate);
      get(e, "epochs", c.embed.epochs);
      get(e, "x_max", c.embed.x_max);
      get(e, "alpha", c.embed.alpha);
    }
    if (j.contains("sll")) {
      const auto& e = j["sll"];
      get(e, "negatives", c.sentence.negatives);
      get(e, "learning_rate", c.sentence.learning_rate);
      get(e, "epochs", c.sentence.epochs);
      get(e, "filters", c.matcher.filters);
      get(e, "window", c.matcher.window);
      get(e, "post_len", c.matcher.post_len);
      get(e, "reply_len", c.matcher.reply_len);
    }
    if (j.contains("eval")) get(j["eval"], "scorer", c.scorer);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  if (c.scorer != "bow" && c.scorer != "sll") throw DataError("scorer must be bow or sll");
  c.embed.validate();
  c.matcher.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("config " + path.string() + " is not a JSON object");
  return from_json(j);
}

std::string PipelineConfig::stage_hash(const std::string& stage) const {
  const auto j = to_json();
  ojson part;
  if (stage == "vocab") {
    part = {{"format", j["format"]}, {"vocab", j["vocab"]}, {"single_space", single_space}};
  } else if (stage == "align") {
    part = j["align"];
  } else if (stage == "cooc") {
    part = j["cooc"];
  } else if (stage == "train") {
    part = {{"embed", j["embed"]}, {"seed", seed}};
  } else if (stage == "sll") {
    part = {{"sll", j["sll"]}, {"seed", seed}, {"no_sll", no_sll}};
  } else {
    part = {{"eval", j["eval"]}, {"embeddings", j["embeddings"]}, {"no_sll", no_sll}};
  }
  return hex(fnv1a(part.dump()));
}

void run_vocab(const PipelineConfig& c, std::ostream& log) {
  const auto started = utc_now();
  const auto corpus = load_corpus(c);
  for (const auto& s : corpus.skipped)
    log << "skipped " << c.corpus.string() << ":" << s.line << ": " << s.reason << '\n';
  VocabConfig vc = c.vocab;
  vc.mode = c.single_space ? SpaceMode::Single : SpaceMode::Dual;
  const auto vocab = build_vocab(corpus, vc);
  fs::create_directories(c.workdir);
  const auto out_path = in_workdir(c, artifact::kVocab);
  {
    auto out = open_output(out_path);
    write_vocab(vocab, out);
  }
  log << "vocab: " << corpus.size() << " pairs (" << corpus.skipped.size() << " skipped), "
      << vocab.space_size(Space::Post) << " post / " << vocab.space_size(Space::Reply)
      << " reply tokens, mode " << to_string(vocab.mode()) << '\n';
  write_manifest(c, "vocab", {c.corpus}, {out_path}, started);
}

void run_align(const PipelineConfig& c, std::ostream& log) {
  const auto started = utc_now();
  check_upstream(c, "vocab", log);
  const auto vocab = load_vocab(c);
  const auto corpus = load_corpus(c);
  const auto fwd = train_model1(corpus, vocab, Direction::PostToReply, c.align_iterations, c.threads);
  const auto rev = train_model1(corpus, vocab, Direction::ReplyToPost, c.align_iterations, c.threads);
  const auto fwd_path = in_workdir(c, artifact::kForwardTable);
  const auto rev_path = in_workdir(c, artifact::kReverseTable);
  const auto trace_path = in_workdir(c, artifact::kAlignTrace);
  {
    auto out = open_output(fwd_path);
    write_table(fwd, vocab, out);
  }
  {
    auto out = open_output(rev_path);
    write_table(rev, vocab, out);
  }
  {
    auto out = open_output(trace_path);
    out << "iteration,loglik_post_to_reply,loglik_reply_to_post\n";
    char buf[96];
    for (std::size_t i = 0; i < fwd.log_likelihood.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, fwd.log_likelihood[i], rev.log_likelihood[i]);
      out << buf;
    }
  }
  log << "align: " << fwd.size() << " / " << rev.size() << " table entries after "
      << c.align_iterations << " EM iterations\n";
  write_manifest(c, "align", {c.corpus, in_workdir(c, artifact::kVocab)},
                 {fwd_path, rev_path, trace_path}, started);
}

void run_cooc(const PipelineConfig& c, std::ostream& log) {
  const auto started = utc_now();
  check_upstream(c, "vocab", log);
  check_upstream(c, "align", log);
  const auto vocab = load_vocab(c);
  const auto corpus = load_corpus(c);
  auto fwd_in = open_input(in_workdir(c, artifact::kForwardTable), "align");
  auto rev_in = open_input(in_workdir(c, artifact::kReverseTable), "align");
  const auto fwd = read_table(fwd_in, vocab, Direction::PostToReply);
  const auto rev = read_table(rev_in, vocab, Direction::ReplyToPost);
  const auto matrix = accumulate(corpus, vocab, fwd, rev, c.windows, c.threads);
  const auto triples = in_workdir(c, artifact::kCooc);
  const auto sidecar = in_workdir(c, artifact::kCoocSidecar);
  {
    auto out = open_output(triples);
    write_cooc(matrix, out);
  }
  {
    auto out = open_output(sidecar);
    write_cooc_sidecar(matrix, out);
  }
  log << "cooc: " << matrix.size() << " nonzero entries\n";
  write_manifest(c, "cooc",
                 {c.corpus, in_workdir(c, artifact::kVocab), in_workdir(c, artifact::kForwardTable),
                  in_workdir(c, artifact::kReverseTable)},
                 {triples, sidecar}, started);
}

void run_train(const PipelineConfig& c, std::ostream& log) {
  const auto started = utc_now();
  check_upstream(c, "cooc", log);
  const auto vocab = load_vocab(c);
  auto triples = open_input(in_workdir(c, artifact::kCooc), "cooc");
  auto sidecar = open_input(in_workdir(c, artifact::kCoocSidecar), "cooc");
  const auto matrix = read_cooc(triples, sidecar);
  TrainConfig tc = c.embed;
  tc.seed = c.seed;
  tc.threads = c.threads;
  auto result = train(matrix, init_embeddings(vocab, tc), tc);
  const EmbeddingTable table{vocab, compose_vectors(result.model)};
  const auto emb_path = in_workdir(c, artifact::kEmbeddings);
  const auto loss_path = in_workdir(c, artifact::kLossTrace);
  {
    auto out = open_output(emb_path);
    export_embeddings(table, out);
  }
  write_trace(loss_path, "epoch,mean_loss", result.epoch_loss);
  if (!result.epoch_loss.empty())
    log << "train: mean loss " << result.epoch_loss.front() << " -> " << result.epoch_loss.back()
        << " over " << result.epoch_loss.size() << " epochs\n";
  write_manifest(c, "train",
                 {in_workdir(c, artifact::kVocab), in_workdir(c, artifact::kCooc),
                  in_workdir(c, artifact::kCoocSidecar)},
                 {emb_path, loss_path}, started);
}

void run_sll(const PipelineConfig& c, std::ostream& log) {
  if (c.no_sll) {
    log << "sll: sentence-level learning disabled, word-level embeddings are final\n";
    return;
  }
  const auto started = utc_now();
  check_upstream(c, "train", log);
  const auto corpus = load_corpus(c);
  const auto emb_path = in_workdir(c, artifact::kEmbeddings);
  const auto table = read_embedding_file(emb_path, "train", !c.single_space);
  auto model = make_classifier(table, c.matcher, c.seed);
  SentenceTrainConfig sc = c.sentence;
  sc.seed = c.seed;
  const auto history = train_sentence_level(corpus, model, sc);

  const auto ckpt = in_workdir(c, artifact::kClassifier);
  const auto sll_emb = in_workdir(c, artifact::kSllEmbeddings);
  const auto trace = in_workdir(c, artifact::kSllTrace);
  save_checkpoint(model, ckpt, sll_emb);
  {
    auto out = open_output(trace);
    out << "epoch,mean_loss,accuracy\n";
    char buf[96];
    for (std::size_t i = 0; i < history.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, history[i].mean_loss, history[i].accuracy);
      out << buf;
    }
  }
  if (!history.empty())
    log << "sll: loss " << history.back().mean_loss << ", training accuracy "
        << history.back().accuracy << " after " << history.size() << " epochs\n";
  write_manifest(c, "sll", {c.corpus, emb_path}, {ckpt, sll_emb, trace}, started);
}

EmbeddingTable final_embeddings(const PipelineConfig& c) {
  if (!c.embeddings.empty()) return read_embedding_file(c.embeddings, "train", true);
  if (c.no_sll) return read_embedding_file(in_workdir(c, artifact::kEmbeddings), "train", true);
  return read_embedding_file(in_workdir(c, artifact::kSllEmbeddings), "sll", true);
}

EvalReport run_eval(const PipelineConfig& c, std::ostream& out) {
  const auto started = utc_now();
  if (c.eval_set.empty()) throw DataError("no eval set configured (set \"eval_set\")");
  const auto sets = load_candidate_sets(c.eval_set);
  ojson echo;
  echo["scorer"] = c.scorer;
  EvalReport report;
  std::vector<fs::path> inputs{c.eval_set};
  if (c.scorer == "sll") {
    if (c.no_sll) throw DataError("the sll scorer needs sentence-level learning enabled");
    const auto ckpt = in_workdir(c, artifact::kClassifier);
    if (!fs::exists(ckpt)) throw MissingArtifactError(ckpt, "sll");
    check_upstream(c, "sll", out);
    const auto model = load_checkpoint(ckpt);
    echo["embeddings"] = artifact::kClassifier;
    inputs.push_back(ckpt);
    report = evaluate(sets, sll_scorer(model), echo);
  } else {
    const fs::path source = !c.embeddings.empty() ? c.embeddings
                            : c.no_sll            ? in_workdir(c, artifact::kEmbeddings)
                                                  : in_workdir(c, artifact::kSllEmbeddings);
    const auto table = final_embeddings(c);
    // Workdir artifacts are echoed by name so reports do not depend on the workdir.
    echo["embeddings"] = c.embeddings.empty() ? source.filename().string() : source.string();
    inputs.push_back(source);
    report = evaluate(sets, bow_cosine_scorer(table), echo);
  }
  fs::create_directories(c.workdir);
  const auto report_path = in_workdir(c, artifact::kReport);
  {
    auto f = open_output(report_path);
    f << report_json(report);
  }
  print_report(report, out);
  write_manifest(c, "eval", inputs, {report_path}, started);
  return report;
}

void run_all(const PipelineConfig& c, std::ostream& log) {
  run_vocab(c, log);
  run_align(c, log);
  run_cooc(c, log);
  run_train(c, log);
  run_sll(c, log);
  if (!c.eval_set.empty()) run_eval(c, log);
}

}  // namespace prembed
