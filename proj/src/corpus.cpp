#include "prembed/corpus.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "prembed/error.hpp"

namespace prembed {

namespace {

bool is_detached_mark(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == '\'';
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool is_blank(std::string_view line) {
  for (char c : line)
    if (!is_space(c)) return false;
  return true;
}

}  // namespace

std::optional<PairFormat> parse_pair_format(std::string_view name) {
  if (name == "tsv") return PairFormat::Tsv;
  if (name == "jsonl") return PairFormat::Jsonl;
  return std::nullopt;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_detached_mark(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

PairCorpus parse_pairs(std::istream& in, PairFormat format, std::string source) {
  PairCorpus corpus;
  corpus.source_path = std::move(source);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = strip_cr(raw);
    if (is_blank(line)) continue;

    std::string post_text;
    std::string reply_text;
    if (format == PairFormat::Tsv) {
      auto tab = line.find('\t');
      if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
        corpus.skipped.push_back({line_no, "expected exactly 2 tab-separated fields"});
        continue;
      }
      post_text = line.substr(0, tab);
      reply_text = line.substr(tab + 1);
    } else {
      auto obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (obj.is_discarded() || !obj.is_object() || !obj.contains("post") ||
          !obj.contains("reply") || !obj["post"].is_string() || !obj["reply"].is_string()) {
        corpus.skipped.push_back({line_no, "expected an object with string fields post, reply"});
        continue;
      }
      post_text = obj["post"].get<std::string>();
      reply_text = obj["reply"].get<std::string>();
    }

    ConversationPair pair{tokenize(post_text), tokenize(reply_text)};
    if (pair.post.empty() || pair.reply.empty()) {
      corpus.skipped.push_back({line_no, pair.post.empty() ? "empty post" : "empty reply"});
      continue;
    }
    corpus.pairs.push_back(std::move(pair));
  }
  if (in.bad()) throw IoError("read failure in " + corpus.source_path);
  return corpus;
}

PairCorpus load_pairs(const std::filesystem::path& path, PairFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open pair file " + path.string());
  return parse_pairs(in, format, path.string());
}

void write_tsv(const PairCorpus& corpus, std::ostream& out) {
  for (const auto& pair : corpus.pairs)
    out << join_tokens(pair.post) << '\t' << join_tokens(pair.reply) << '\n';
}

}  // namespace prembed
