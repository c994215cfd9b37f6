#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "prembed/cooc.hpp"
#include "prembed/corpus.hpp"
#include "prembed/embed.hpp"
#include "prembed/error.hpp"
#include "prembed/eval.hpp"
#include "prembed/sentnet.hpp"
#include "prembed/vocab.hpp"

namespace prembed {

/// Raised when a stage runs before the stage that produces its inputs.
class MissingArtifactError : public DataError {
 public:
  MissingArtifactError(const std::filesystem::path& file, const std::string& stage)
      : DataError("missing " + file.string() + "; run the '" + stage + "' stage first"),
        stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::filesystem::path corpus;
  PairFormat format = PairFormat::Tsv;
  std::filesystem::path workdir = "work";
  std::filesystem::path eval_set;
  /// External or explicit embedding file for eval / nn / export.
  std::filesystem::path embeddings;

  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool single_space = false;
  bool no_sll = false;

  VocabConfig vocab;
  std::size_t align_iterations = 5;
  WindowConfig windows;
  TrainConfig embed;
  MatcherShape matcher;
  SentenceTrainConfig sentence;
  std::string scorer = "bow";

  nlohmann::ordered_json to_json() const;
  /// Missing keys keep their defaults. Throws DataError on bad values.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);

  /// Hash of the settings that determine a stage's outputs.
  std::string stage_hash(const std::string& stage) const;
};

/// Artifact names inside the work directory.
namespace artifact {
inline constexpr const char* kVocab = "vocab.tsv";
inline constexpr const char* kForwardTable = "align.fwd.tsv";
inline constexpr const char* kReverseTable = "align.rev.tsv";
inline constexpr const char* kAlignTrace = "align.loglik.csv";
inline constexpr const char* kCooc = "cooc.tsv";
inline constexpr const char* kCoocSidecar = "cooc.json";
inline constexpr const char* kEmbeddings = "embeddings.txt";
inline constexpr const char* kLossTrace = "loss.csv";
inline constexpr const char* kClassifier = "classifier.json";
inline constexpr const char* kSllEmbeddings = "embeddings_sll.txt";
inline constexpr const char* kSllTrace = "sll.csv";
inline constexpr const char* kReport = "report.json";
}  // namespace artifact

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

void run_vocab(const PipelineConfig& config, std::ostream& log);
void run_align(const PipelineConfig& config, std::ostream& log);
void run_cooc(const PipelineConfig& config, std::ostream& log);
void run_train(const PipelineConfig& config, std::ostream& log);
void run_sll(const PipelineConfig& config, std::ostream& log);
/// Writes report.json and prints the metric table to `out`.
EvalReport run_eval(const PipelineConfig& config, std::ostream& out);
/// Every stage from vocab through eval (eval only when an eval set is set).
void run_all(const PipelineConfig& config, std::ostream& log);

/// The embedding table eval/nn/export use: the explicit file if given, else
/// the SLL output, else the word-level output.
EmbeddingTable final_embeddings(const PipelineConfig& config);

}  // namespace prembed
