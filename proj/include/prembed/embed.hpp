#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "prembed/cooc.hpp"
#include "prembed/vocab.hpp"

namespace prembed {

template <typename Scalar>
using RowMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrix = RowMatrixT<double>;
using Vector = Eigen::VectorXd;

struct TrainConfig {
  std::size_t dim = 100;
  double learning_rate = 0.05;
  std::size_t epochs = 25;
  double x_max = 100.0;
  double alpha = 0.75;
  std::uint64_t seed = 1;
  /// 1 is the deterministic path. More threads run unsynchronized
  /// (hogwild) updates over shards of each epoch.
  std::size_t threads = 1;

  void validate() const;
};

/// Main and context vectors with biases for every joint index, plus the
/// AdaGrad squared-gradient accumulators for each parameter.
struct EmbeddingModel {
  RowMatrix main;
  RowMatrix context;
  Vector bias;
  Vector context_bias;

  RowMatrix main_sq;
  RowMatrix context_sq;
  Vector bias_sq;
  Vector context_bias_sq;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(main.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(main.cols()); }
};

inline constexpr double kAdagradInit = 1.0;

/// Vectors uniform in (-0.5/d, 0.5/d), zero biases, accumulators at 1.
EmbeddingModel init_embeddings(std::size_t rows, const TrainConfig& config);
inline EmbeddingModel init_embeddings(const DualVocab& vocab, const TrainConfig& config) {
  return init_embeddings(vocab.size(), config);
}

/// (x / x_max)^alpha below x_max, 1 above. Throws DataError for x <= 0.
double weighting(double x, double x_max, double alpha);

/// Loss f(X) * diff^2 of one entry, diff = w_i . c_k + b_i + c_b_k - ln X.
double entry_loss(const CoocEntry& entry, const EmbeddingModel& model, const TrainConfig& config);

struct EntryGradient {
  double loss = 0.0;
  Vector main;     // d loss / d w_i
  Vector context;  // d loss / d c_k
  double bias = 0.0;
  double context_bias = 0.0;
};

EntryGradient entry_gradient(const CoocEntry& entry, const EmbeddingModel& model,
                             const TrainConfig& config);

/// One AdaGrad step on w_i, c_k, b_i, c_b_k. Returns the pre-update loss.
/// Throws NumericError if anything becomes non-finite.
double glove_step(const CoocEntry& entry, EmbeddingModel& model, const TrainConfig& config);

struct TrainResult {
  EmbeddingModel model;
  std::vector<double> epoch_loss;
};

/// Runs `config.epochs` passes over the entries in a seeded shuffled order.
/// Throws DataError on an empty matrix or a row-count mismatch.
TrainResult train(const CoocMatrix& cooc, EmbeddingModel model, const TrainConfig& config);

/// w + c, row by row.
RowMatrix compose_vectors(const EmbeddingModel& model);

/// Final vectors keyed by a vocabulary, one row per joint index.
struct EmbeddingTable {
  DualVocab vocab;
  RowMatrix vectors;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors.cols()); }
  auto row(Index i) const { return vectors.row(i); }
};

/// Header `count dim`, then one `P_token v1 .. vd` / `R_token ...` row per
/// joint index with 6 decimals. Single-space tables are written unprefixed.
void export_embeddings(const EmbeddingTable& table, std::ostream& out);

struct ImportOptions {
  /// Unprefixed files become dual tables with every row copied into both
  /// spaces. When false they load as a single-space table.
  bool duplicate_unprefixed = true;
};

/// Accepts P_/R_ prefixed files and plain single-space files (external
/// embeddings). Missing <unk>/<pad> rows are added as zero vectors.
EmbeddingTable import_embeddings(std::istream& in, const ImportOptions& options = {});

}  // namespace prembed
