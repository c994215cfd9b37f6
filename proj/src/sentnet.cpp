#include "prembed/sentnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "prembed/error.hpp"
#include "prembed/linalg.hpp"

namespace prembed {

void MatcherShape::validate() const {
  if (window < 1 || filters < 1 || post_len < 1 || reply_len < 1)
    throw DataError("matcher dimensions must be >= 1");
  if (window > post_len) throw DataError("filter window exceeds the post length");
}

MatchClassifier make_classifier(const EmbeddingTable& table, const MatcherShape& shape,
                                std::uint64_t seed) {
  shape.validate();
  MatchClassifier m;
  m.vocab = table.vocab;
  m.embeddings = table.vectors;
  m.shape = shape;
  std::mt19937_64 rng(seed);
  const auto F = static_cast<Eigen::Index>(shape.filters);
  const auto fan_in = static_cast<Eigen::Index>(shape.fan_in());
  std::uniform_real_distribution<double> conv(-1.0, 1.0);
  const double conv_limit = std::sqrt(6.0 / static_cast<double>(fan_in + F));
  m.conv_weight.resize(F, fan_in);
  for (Eigen::Index f = 0; f < F; ++f)
    for (Eigen::Index k = 0; k < fan_in; ++k) m.conv_weight(f, k) = conv_limit * conv(rng);
  m.conv_bias = Vector::Zero(F);
  const double out_limit = std::sqrt(6.0 / static_cast<double>(F + 1));
  m.out_weight.resize(F);
  for (Eigen::Index f = 0; f < F; ++f) m.out_weight(f) = out_limit * conv(rng);
  m.out_bias = 0.0;
  return m;
}

EmbeddingTable embedding_table(const MatchClassifier& model) {
  return {model.vocab, model.embeddings};
}

MatchMatrix match_matrix(std::span<const Index> post, std::span<const Index> reply,
                         const MatchClassifier& model) {
  const auto& s = model.shape;
  if (post.size() != s.post_len || reply.size() != s.reply_len)
    throw DataError("index sequences must be padded to the matcher lengths");
  MatchMatrix out;
  out.post.assign(post.begin(), post.end());
  out.reply.assign(reply.begin(), reply.end());
  out.valid_post_.resize(post.size());
  out.valid_reply_.resize(reply.size());
  const Index pad_p = model.vocab.pad(Space::Post);
  const Index pad_r = model.vocab.pad(Space::Reply);
  for (std::size_t i = 0; i < post.size(); ++i) out.valid_post_[i] = post[i] != pad_p;
  for (std::size_t j = 0; j < reply.size(); ++j) out.valid_reply_[j] = reply[j] != pad_r;

  out.values = RowMatrix::Zero(static_cast<Eigen::Index>(s.post_len),
                               static_cast<Eigen::Index>(s.reply_len));
  for (std::size_t i = 0; i < post.size(); ++i) {
    if (!out.valid_post_[i]) continue;
    const auto u = model.embeddings.row(post[i]);
    for (std::size_t j = 0; j < reply.size(); ++j) {
      if (!out.valid_reply_[j]) continue;
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cosine(u, model.embeddings.row(reply[j]));
    }
  }
  return out;
}

MatchMatrix match_matrix(const Tokens& post, const Tokens& reply, const MatchClassifier& model) {
  const auto p = model.vocab.encode_fixed(post, Space::Post, model.shape.post_len);
  const auto r = model.vocab.encode_fixed(reply, Space::Reply, model.shape.reply_len);
  return match_matrix(p, r, model);
}

namespace {

struct ForwardPass {
  Eigen::MatrixXd windows;      // positions x (h * L_r)
  Eigen::MatrixXd activations;  // positions x F
  std::vector<Eigen::Index> argmax;
  Vector pooled;
  double score = 0.0;
};

ForwardPass run_forward(const MatchMatrix& match, const MatchClassifier& model) {
  const auto& s = model.shape;
  const auto positions = static_cast<Eigen::Index>(s.positions());
  const auto fan_in = static_cast<Eigen::Index>(s.fan_in());
  const auto F = static_cast<Eigen::Index>(s.filters);
  if (match.values.rows() != static_cast<Eigen::Index>(s.post_len) ||
      match.values.cols() != static_cast<Eigen::Index>(s.reply_len))
    throw DataError("match matrix shape does not fit the classifier");

  ForwardPass fp;
  fp.windows.resize(positions, fan_in);
  // Rows i .. i+h-1 of a row-major matrix are one contiguous block.
  for (Eigen::Index i = 0; i < positions; ++i)
    fp.windows.row(i) =
        Eigen::Map<const Eigen::RowVectorXd>(match.values.data() + i * match.values.cols(), fan_in);
  fp.activations =
      ((fp.windows * model.conv_weight.transpose()).rowwise() + model.conv_bias.transpose())
          .array()
          .tanh()
          .matrix();

  fp.argmax.assign(static_cast<std::size_t>(F), 0);
  fp.pooled.resize(F);
  for (Eigen::Index f = 0; f < F; ++f) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < positions; ++i)
      if (fp.activations(i, f) > fp.activations(best, f)) best = i;
    fp.argmax[static_cast<std::size_t>(f)] = best;
    fp.pooled(f) = fp.activations(best, f);
  }
  fp.score = sigmoid(model.out_weight.dot(fp.pooled) + model.out_bias);
  return fp;
}

}  // namespace

double forward(const MatchMatrix& match, const MatchClassifier& model) {
  return run_forward(match, model).score;
}

MatcherGradients loss_and_grads(const MatchMatrix& match, int label, const MatchClassifier& model) {
  if (label != 0 && label != 1) throw DataError("label must be 0 or 1");
  const ForwardPass fp = run_forward(match, model);
  const auto& s = model.shape;
  const double y = label;
  const double g = std::clamp(fp.score, kScoreClamp, 1.0 - kScoreClamp);

  MatcherGradients out;
  out.score = fp.score;
  out.loss = -(y * std::log(g) + (1.0 - y) * std::log(1.0 - g));

  // Clamped scores have zero derivative.
  const bool clamped = fp.score != g;
  const double d_logit = clamped ? 0.0 : fp.score - y;

  out.out_weight = d_logit * fp.pooled;
  out.out_bias = d_logit;
  out.conv_weight = Eigen::MatrixXd::Zero(model.conv_weight.rows(), model.conv_weight.cols());
  out.conv_bias = Vector::Zero(model.conv_bias.size());
  RowMatrix d_match = RowMatrix::Zero(match.values.rows(), match.values.cols());
  const auto fan_in = static_cast<Eigen::Index>(s.fan_in());

  for (Eigen::Index f = 0; f < static_cast<Eigen::Index>(s.filters); ++f) {
    const Eigen::Index i = fp.argmax[static_cast<std::size_t>(f)];
    const double a = fp.activations(i, f);
    const double dz = d_logit * model.out_weight(f) * (1.0 - a * a);
    if (dz == 0.0) continue;
    out.conv_weight.row(f) += dz * fp.windows.row(i);
    out.conv_bias(f) += dz;
    Eigen::Map<Eigen::RowVectorXd>(d_match.data() + i * d_match.cols(), fan_in) +=
        dz * model.conv_weight.row(f);
  }

  // Cosine backward: dc/du = v/(|u||v|) - c u/|u|^2, symmetric in v.
  const auto d = model.embeddings.cols();
  RowMatrix d_post = RowMatrix::Zero(match.values.rows(), d);
  RowMatrix d_reply = RowMatrix::Zero(match.values.cols(), d);
  for (Eigen::Index i = 0; i < match.values.rows(); ++i) {
    if (!match.post_valid(static_cast<std::size_t>(i))) continue;
    const auto u = model.embeddings.row(match.post[static_cast<std::size_t>(i)]);
    const double nu = u.norm();
    if (nu == 0.0) continue;
    for (Eigen::Index j = 0; j < match.values.cols(); ++j) {
      const double dm = d_match(i, j);
      if (dm == 0.0 || !match.reply_valid(static_cast<std::size_t>(j))) continue;
      const auto v = model.embeddings.row(match.reply[static_cast<std::size_t>(j)]);
      const double nv = v.norm();
      if (nv == 0.0) continue;
      const double c = match.values(i, j);
      d_post.row(i) += dm * (v / (nu * nv) - (c / (nu * nu)) * u);
      d_reply.row(j) += dm * (u / (nu * nv) - (c / (nv * nv)) * v);
    }
  }
  auto scatter = [&](const RowMatrix& grads, const std::vector<Index>& ids, auto valid) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!valid(i)) continue;
      auto [it, inserted] = out.embedding_rows.try_emplace(ids[i], Vector::Zero(d));
      it->second += grads.row(static_cast<Eigen::Index>(i)).transpose();
    }
  };
  scatter(d_post, match.post, [&](std::size_t i) { return match.post_valid(i); });
  scatter(d_reply, match.reply, [&](std::size_t j) { return match.reply_valid(j); });
  return out;
}

MatcherGradients loss_and_grads(const Tokens& post, const Tokens& reply, int label,
                                const MatchClassifier& model) {
  return loss_and_grads(match_matrix(post, reply, model), label, model);
}

namespace {

struct AdagradState {
  Eigen::MatrixXd conv_weight;
  Vector conv_bias;
  Vector out_weight;
  double out_bias;
  RowMatrix embeddings;

  AdagradState(const MatchClassifier& m, double init)
      : conv_weight(Eigen::MatrixXd::Constant(m.conv_weight.rows(), m.conv_weight.cols(), init)),
        conv_bias(Vector::Constant(m.conv_bias.size(), init)),
        out_weight(Vector::Constant(m.out_weight.size(), init)),
        out_bias(init),
        embeddings(RowMatrix::Constant(m.embeddings.rows(), m.embeddings.cols(), init)) {}
};

template <typename Param, typename Sq, typename Grad>
void adagrad(Param&& param, Sq&& sq, const Grad& grad, double lr) {
  sq += grad.cwiseAbs2();
  param -= lr * grad.cwiseQuotient(sq.cwiseSqrt());
}

void apply(MatchClassifier& m, AdagradState& st, const MatcherGradients& g, double lr) {
  adagrad(m.conv_weight, st.conv_weight, g.conv_weight, lr);
  adagrad(m.conv_bias, st.conv_bias, g.conv_bias, lr);
  adagrad(m.out_weight, st.out_weight, g.out_weight, lr);
  st.out_bias += g.out_bias * g.out_bias;
  m.out_bias -= lr * g.out_bias / std::sqrt(st.out_bias);
  for (const auto& [row, grad] : g.embedding_rows)
    adagrad(m.embeddings.row(row), st.embeddings.row(row), grad.transpose(), lr);
  if (!m.conv_weight.allFinite() || !m.embeddings.allFinite() || !std::isfinite(m.out_bias))
    throw NumericError("non-finite parameter during sentence-level training");
}

}  // namespace

std::vector<SentenceEpoch> train_sentence_level(const PairCorpus& corpus, MatchClassifier& model,
                                                const SentenceTrainConfig& config) {
  if (corpus.size() < 2) throw DataError("sentence-level training needs at least 2 pairs");
  if (!(config.learning_rate > 0.0)) throw DataError("learning rate must be > 0");
  model.shape.validate();

  std::vector<std::vector<Index>> posts, replies;
  for (const auto& pair : corpus) {
    posts.push_back(model.vocab.encode_fixed(pair.post, Space::Post, model.shape.post_len));
    replies.push_back(model.vocab.encode_fixed(pair.reply, Space::Reply, model.shape.reply_len));
  }

  AdagradState state(model, config.initial_accumulator);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uniform_int_distribution<std::size_t> other(0, corpus.size() - 2);
  constexpr int kMaxDraws = 64;

  std::vector<SentenceEpoch> history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    std::size_t correct = 0, seen = 0;
    auto step = [&](std::size_t p, std::size_t r, int label) {
      const auto grads = loss_and_grads(match_matrix(posts[p], replies[r], model), label, model);
      loss += grads.loss;
      correct += (grads.score > 0.5) == (label == 1);
      ++seen;
      apply(model, state, grads, config.learning_rate);
    };
    for (std::size_t p : order) {
      step(p, p, 1);
      for (std::size_t k = 0; k < config.negatives; ++k) {
        for (int draw = 0; draw < kMaxDraws; ++draw) {
          std::size_t r = other(rng);
          if (r >= p) ++r;
          if (corpus.pairs[r].reply == corpus.pairs[p].reply) continue;
          step(p, r, 0);
          break;
        }
      }
    }
    history.push_back({loss / static_cast<double>(seen),
                       static_cast<double>(correct) / static_cast<double>(seen)});
  }
  return history;
}

namespace {

nlohmann::json flat(const Eigen::MatrixXd& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return data;
}

Eigen::MatrixXd unflat(const nlohmann::json& data, Eigen::Index rows, Eigen::Index cols) {
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw DataError("checkpoint array has the wrong length");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
  return m;
}

}  // namespace

void save_checkpoint(const MatchClassifier& model, const std::filesystem::path& json_file,
                     const std::filesystem::path& embedding_file) {
  {
    std::ofstream out(embedding_file, std::ios::binary);
    if (!out) throw IoError("cannot write " + embedding_file.string());
    export_embeddings(embedding_table(model), out);
  }
  nlohmann::ordered_json j;
  j["shape"] = {{"window", model.shape.window},
                {"filters", model.shape.filters},
                {"post_len", model.shape.post_len},
                {"reply_len", model.shape.reply_len}};
  j["mode"] = to_string(model.vocab.mode());
  j["conv_weight"] = {{"rows", model.conv_weight.rows()},
                      {"cols", model.conv_weight.cols()},
                      {"data", flat(model.conv_weight)}};
  j["conv_bias"] = flat(model.conv_bias);
  j["out_weight"] = flat(model.out_weight);
  j["out_bias"] = model.out_bias;
  j["embeddings"] = embedding_file.filename().string();
  std::ofstream out(json_file, std::ios::binary);
  if (!out) throw IoError("cannot write " + json_file.string());
  out << j.dump(1) << '\n';
}

MatchClassifier load_checkpoint(const std::filesystem::path& json_file) {
  std::ifstream in(json_file, std::ios::binary);
  if (!in) throw IoError("cannot open " + json_file.string());
  MatchClassifier m;
  try {
    const auto j = nlohmann::json::parse(in);
    const auto& sh = j.at("shape");
    m.shape = {sh.at("window").get<std::size_t>(), sh.at("filters").get<std::size_t>(),
               sh.at("post_len").get<std::size_t>(), sh.at("reply_len").get<std::size_t>()};
    m.shape.validate();
    const auto F = static_cast<Eigen::Index>(m.shape.filters);
    m.conv_weight = unflat(j.at("conv_weight").at("data"), F,
                           static_cast<Eigen::Index>(m.shape.fan_in()));
    m.conv_bias = unflat(j.at("conv_bias"), F, 1);
    m.out_weight = unflat(j.at("out_weight"), F, 1);
    m.out_bias = j.at("out_bias").get<double>();
    const auto emb_path = json_file.parent_path() / j.at("embeddings").get<std::string>();
    std::ifstream emb(emb_path, std::ios::binary);
    if (!emb) throw IoError("cannot open " + emb_path.string());
    ImportOptions opts;
    opts.duplicate_unprefixed = j.at("mode").get<std::string>() != "single";
    auto table = import_embeddings(emb, opts);
    m.vocab = std::move(table.vocab);
    m.embeddings = std::move(table.vectors);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
  return m;
}

}  // namespace prembed
