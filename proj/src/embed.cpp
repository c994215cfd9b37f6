#include "prembed/embed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "prembed/error.hpp"

namespace prembed {

void TrainConfig::validate() const {
  if (dim < 1) throw DataError("dim must be >= 1");
  if (!(learning_rate > 0.0)) throw DataError("learning rate must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DataError("alpha must be in (0, 1]");
  if (!(x_max > 0.0)) throw DataError("x_max must be > 0");
}

EmbeddingModel init_embeddings(std::size_t rows, const TrainConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(rows);
  const auto d = static_cast<Eigen::Index>(config.dim);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = 1.0 / static_cast<double>(config.dim);
  auto draw = [&] { return (unit(rng) - 0.5) * scale; };

  EmbeddingModel m;
  m.main.resize(n, d);
  m.context.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) m.main(i, k) = draw();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) m.context(i, k) = draw();
  m.bias = Vector::Zero(n);
  m.context_bias = Vector::Zero(n);
  m.main_sq = RowMatrix::Constant(n, d, kAdagradInit);
  m.context_sq = RowMatrix::Constant(n, d, kAdagradInit);
  m.bias_sq = Vector::Constant(n, kAdagradInit);
  m.context_bias_sq = Vector::Constant(n, kAdagradInit);
  return m;
}

double weighting(double x, double x_max, double alpha) {
  if (!(x > 0.0)) throw DataError("co-occurrence weight must be > 0");
  return x < x_max ? std::pow(x / x_max, alpha) : 1.0;
}

namespace {

double residual(const CoocEntry& e, const EmbeddingModel& m) {
  return m.main.row(e.row).dot(m.context.row(e.col)) + m.bias(e.row) + m.context_bias(e.col) -
         std::log(e.weight);
}

}  // namespace

double entry_loss(const CoocEntry& entry, const EmbeddingModel& model, const TrainConfig& config) {
  const double diff = residual(entry, model);
  return weighting(entry.weight, config.x_max, config.alpha) * diff * diff;
}

EntryGradient entry_gradient(const CoocEntry& entry, const EmbeddingModel& model,
                             const TrainConfig& config) {
  const double f = weighting(entry.weight, config.x_max, config.alpha);
  const double diff = residual(entry, model);
  const double g = 2.0 * f * diff;
  EntryGradient out;
  out.loss = f * diff * diff;
  out.main = g * model.context.row(entry.col).transpose();
  out.context = g * model.main.row(entry.row).transpose();
  out.bias = g;
  out.context_bias = g;
  return out;
}

double glove_step(const CoocEntry& entry, EmbeddingModel& m, const TrainConfig& config) {
  const EntryGradient grad = entry_gradient(entry, m, config);
  if (!std::isfinite(grad.loss) || !grad.main.allFinite() || !grad.context.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite gradient at entry (" << entry.row << ", " << entry.col << ", "
        << entry.weight << "): loss " << grad.loss;
    throw NumericError(msg.str());
  }
  const double lr = config.learning_rate;
  auto w = m.main.row(entry.row);
  auto c = m.context.row(entry.col);
  auto w_sq = m.main_sq.row(entry.row);
  auto c_sq = m.context_sq.row(entry.col);

  w_sq += grad.main.transpose().cwiseAbs2();
  c_sq += grad.context.transpose().cwiseAbs2();
  w -= lr * grad.main.transpose().cwiseQuotient(w_sq.cwiseSqrt());
  c -= lr * grad.context.transpose().cwiseQuotient(c_sq.cwiseSqrt());

  m.bias_sq(entry.row) += grad.bias * grad.bias;
  m.context_bias_sq(entry.col) += grad.context_bias * grad.context_bias;
  m.bias(entry.row) -= lr * grad.bias / std::sqrt(m.bias_sq(entry.row));
  m.context_bias(entry.col) -= lr * grad.context_bias / std::sqrt(m.context_bias_sq(entry.col));
  return grad.loss;
}

namespace {

// Same update as glove_step, but every parameter is read and written through
// relaxed atomics so concurrent shards race without undefined behaviour.
double shared_step(const CoocEntry& e, EmbeddingModel& m, const TrainConfig& config) {
  using Ref = std::atomic_ref<double>;
  const auto d = m.main.cols();
  auto load = [](double& x) { return Ref(x).load(std::memory_order_relaxed); };
  auto store = [](double& x, double v) { Ref(x).store(v, std::memory_order_relaxed); };

  Vector w(d), c(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    w(k) = load(m.main(e.row, k));
    c(k) = load(m.context(e.col, k));
  }
  const double diff = w.dot(c) + load(m.bias(e.row)) + load(m.context_bias(e.col)) - std::log(e.weight);
  const double f = weighting(e.weight, config.x_max, config.alpha);
  const double g = 2.0 * f * diff;
  if (!std::isfinite(g)) throw NumericError("non-finite gradient in parallel training");
  const double lr = config.learning_rate;
  auto adagrad = [&](double& param, double& sq, double grad) {
    const double s = load(sq) + grad * grad;
    store(sq, s);
    store(param, load(param) - lr * grad / std::sqrt(s));
  };
  for (Eigen::Index k = 0; k < d; ++k) {
    adagrad(m.main(e.row, k), m.main_sq(e.row, k), g * c(k));
    adagrad(m.context(e.col, k), m.context_sq(e.col, k), g * w(k));
  }
  adagrad(m.bias(e.row), m.bias_sq(e.row), g);
  adagrad(m.context_bias(e.col), m.context_bias_sq(e.col), g);
  return f * diff * diff;
}

}  // namespace

TrainResult train(const CoocMatrix& cooc, EmbeddingModel model, const TrainConfig& config) {
  config.validate();
  if (cooc.empty()) throw DataError("cannot train on an empty co-occurrence matrix");
  if (cooc.vocab_size() != model.rows())
    throw DataError("co-occurrence matrix and model disagree on the vocabulary size");

  TrainResult result;
  const auto& entries = cooc.entries();
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, entries.size()));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    if (threads == 1) {
      for (std::size_t idx : order) total += glove_step(entries[idx], model, config);
    } else {
      std::vector<double> partial(threads, 0.0);
      const std::size_t len = (order.size() + threads - 1) / threads;
      {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
          pool.emplace_back([&, t] {
            const std::size_t lo = t * len;
            const std::size_t hi = std::min(order.size(), lo + len);
            for (std::size_t p = lo; p < hi; ++p)
              partial[t] += shared_step(entries[order[p]], model, config);
          });
        }
      }
      for (double v : partial) total += v;
    }
    result.epoch_loss.push_back(total / static_cast<double>(entries.size()));
  }
  result.model = std::move(model);
  return result;
}

RowMatrix compose_vectors(const EmbeddingModel& model) { return model.main + model.context; }

void export_embeddings(const EmbeddingTable& table, std::ostream& out) {
  if (static_cast<std::size_t>(table.vectors.rows()) != table.vocab.size())
    throw DataError("embedding table rows do not match the vocabulary");
  out << table.vectors.rows() << ' ' << table.vectors.cols() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < table.vectors.rows(); ++i) {
    out << table.vocab.display(static_cast<Index>(i));
    for (Eigen::Index k = 0; k < table.vectors.cols(); ++k) {
      std::snprintf(buf, sizeof buf, " %.6f", table.vectors(i, k));
      out << buf;
    }
    out << '\n';
  }
}

namespace {

struct RawRow {
  std::string token;
  std::vector<double> values;
};

}  // namespace

EmbeddingTable import_embeddings(std::istream& in, const ImportOptions& options) {
  std::string raw;
  std::size_t line_no = 1;
  if (!std::getline(in, raw)) throw ParseError("missing header", 1);
  std::istringstream header(raw);
  long long count = -1, dim = -1;
  std::string extra;
  if (!(header >> count >> dim) || (header >> extra) || count < 0 || dim < 1)
    throw ParseError("header must be 'count dim'", 1);

  std::vector<RawRow> rows;
  rows.reserve(static_cast<std::size_t>(count));
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.empty() || raw == "\r") continue;
    std::istringstream ls(raw);
    RawRow row;
    if (!(ls >> row.token)) throw ParseError("missing token", line_no);
    std::string field;
    while (ls >> field) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0' || !std::isfinite(v))
        throw ParseError("bad value '" + field + "'", line_no);
      row.values.push_back(v);
    }
    if (static_cast<long long>(row.values.size()) != dim)
      throw ParseError("expected " + std::to_string(dim) + " values, found " +
                           std::to_string(row.values.size()),
                       line_no);
    rows.push_back(std::move(row));
  }
  if (static_cast<long long>(rows.size()) != count)
    throw ParseError("header declares " + std::to_string(count) + " rows but file has " +
                         std::to_string(rows.size()),
                     0);

  const bool prefixed =
      !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const RawRow& r) {
        return r.token.size() > 2 && (r.token.starts_with("P_") || r.token.starts_with("R_"));
      });

  std::vector<std::string> post, reply;
  std::vector<const RawRow*> post_rows, reply_rows;
  for (const auto& r : rows) {
    if (prefixed && r.token.starts_with("R_")) {
      reply.push_back(r.token.substr(2));
      reply_rows.push_back(&r);
    } else {
      post.push_back(prefixed ? r.token.substr(2) : r.token);
      post_rows.push_back(&r);
    }
  }

  EmbeddingTable table;
  if (prefixed) {
    table.vocab = DualVocab::from_tokens(SpaceMode::Dual, post, reply);
  } else if (options.duplicate_unprefixed) {
    table.vocab = DualVocab::from_tokens(SpaceMode::Dual, post, post);
    reply_rows = post_rows;
    reply = post;
  } else {
    table.vocab = DualVocab::from_tokens(SpaceMode::Single, post);
  }

  table.vectors = RowMatrix::Zero(static_cast<Eigen::Index>(table.vocab.size()), dim);
  auto fill = [&](const std::vector<std::string>& toks, const std::vector<const RawRow*>& src,
                  Space space) {
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const Index idx = *table.vocab.find(toks[i], space);
      table.vectors.row(idx) =
          Eigen::Map<const Eigen::RowVectorXd>(src[i]->values.data(), static_cast<Eigen::Index>(dim));
    }
  };
  fill(post, post_rows, Space::Post);
  if (!table.vocab.shared()) fill(reply, reply_rows, Space::Reply);
  return table;
}

}  // namespace prembed
