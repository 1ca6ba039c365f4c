#include "lagsim/codebook.hpp"

#include <cstdio>
#include <map>

#include "json.hpp"
#include "lagsim/error.hpp"

namespace lagsim {
namespace {

constexpr char kSep = '\x1f';

std::string join_key(std::span<const Token> tokens) {
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) key += kSep;
    key += tokens[i];
  }
  return key;
}

}  // namespace

Codebook Codebook::tokens(std::vector<std::vector<Token>> words, SymbolId halt) {
  Codebook book;
  book.kind_ = CodebookKind::Token;
  book.halt_ = halt;
  book.words_ = std::move(words);
  book.index_tokens();
  return book;
}

Codebook Codebook::vectors(Eigen::MatrixXd columns, SymbolId halt, VectorDecoder decoder) {
  Codebook book;
  book.kind_ = CodebookKind::Vector;
  book.halt_ = halt;
  book.table_ = std::move(columns);
  book.decoder_ = std::move(decoder);
  return book;
}

std::size_t Codebook::size() const {
  return kind_ == CodebookKind::Token ? words_.size() : static_cast<std::size_t>(table_.cols());
}

void Codebook::index_tokens() {
  lookup_.clear();
  prefixes_.clear();
  for (SymbolId s = 0; s < words_.size(); ++s) {
    const auto& w = words_[s];
    lookup_.emplace(join_key(w), s);
    for (std::size_t n = 1; n < w.size(); ++n)
      prefixes_.insert(join_key(std::span<const Token>(w.data(), n)));
  }
}

Eigen::Index nearest_column(const Eigen::MatrixXd& table, const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (table.cols() == 0) throw EmptyCodebook("codebook has no codewords");
  if (table.rows() != v.size())
    throw DimensionMismatch("vector of dimension " + std::to_string(v.size()) +
                            " against codebook of dimension " + std::to_string(table.rows()));
  Eigen::Index best = 0;
  double best_d = (table.col(0) - v).squaredNorm();
  for (Eigen::Index j = 1; j < table.cols(); ++j) {
    double d = (table.col(j) - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

SymbolId Codebook::decode_vector(const Eigen::VectorXd& v) const {
  if (decoder_) return decoder_(v);
  return static_cast<SymbolId>(nearest_column(table_, v));
}

std::optional<SymbolString> Codebook::parse_tokens(std::span<const Token> stream) const {
  TokenParser parser(*this);
  SymbolString out;
  for (const auto& t : stream) {
    switch (parser.push(t)) {
      case TokenParser::Status::Symbol: out.push_back(parser.last()); break;
      case TokenParser::Status::NeedMore: break;
      case TokenParser::Status::Invalid: return std::nullopt;
    }
  }
  if (!parser.idle()) return std::nullopt;
  return out;
}

Codebook::TokenParser::Status Codebook::TokenParser::push(const Token& t) {
  if (!buffer_.empty()) buffer_ += kSep;
  buffer_ += t;
  if (auto it = book_->lookup_.find(buffer_); it != book_->lookup_.end()) {
    last_ = it->second;
    buffer_.clear();
    return Status::Symbol;
  }
  if (book_->prefixes_.contains(buffer_)) return Status::NeedMore;
  buffer_.clear();
  return Status::Invalid;
}

Codebook build_pair_codebook(const Alphabet& alphabet, const TokenAlphabet& tokens) {
  tokens.check();
  const std::size_t n = tokens.tokens.size();
  if (n * n < alphabet.size())
    throw InsufficientTokens(std::to_string(n) + " tokens give " + std::to_string(n * n) +
                             " pairs for " + std::to_string(alphabet.size()) + " symbols");
  std::vector<std::vector<Token>> words;
  words.reserve(alphabet.size());
  for (std::size_t i = 0; i < alphabet.size(); ++i)
    words.push_back({tokens.tokens[i / n], tokens.tokens[i % n]});
  return Codebook::tokens(std::move(words), alphabet.halt());
}

ValidationReport check_codebook(const Codebook& codebook, const Alphabet& alphabet) {
  ValidationReport report;
  if (codebook.size() != alphabet.size()) {
    report.push_back({"size", "codebook has " + std::to_string(codebook.size()) +
                                  " codewords for " + std::to_string(alphabet.size()) + " symbols",
                      {}});
    return report;
  }
  if (codebook.halt() != alphabet.halt())
    report.push_back({"halt", "codebook halt differs from the alphabet's", {alphabet.label(alphabet.halt())}});

  const auto n = static_cast<SymbolId>(alphabet.size());
  if (codebook.kind() == CodebookKind::Token) {
    std::map<std::vector<Token>, std::vector<SymbolId>> owners;
    for (SymbolId s = 0; s < n; ++s) {
      const auto& w = codebook.token_word(s);
      if (w.empty()) report.push_back({"empty", "empty codeword", {alphabet.label(s)}});
      owners[w].push_back(s);
    }
    for (const auto& [word, syms] : owners) {
      if (syms.size() < 2) continue;
      Violation v{"injectivity", "symbols share codeword '" + join_key(word) + "'", {}};
      for (auto s : syms) v.symbols.push_back(alphabet.label(s));
      report.push_back(std::move(v));
    }
    for (SymbolId a = 0; a < n; ++a) {
      const auto& wa = codebook.token_word(a);
      for (SymbolId b = 0; b < n; ++b) {
        const auto& wb = codebook.token_word(b);
        if (a == b || wa.empty() || wa.size() >= wb.size()) continue;
        if (std::equal(wa.begin(), wa.end(), wb.begin()))
          report.push_back({"prefix", "codeword of " + alphabet.label(a) + " is a proper prefix of " +
                                          alphabet.label(b) + "'s",
                            {alphabet.label(a), alphabet.label(b)}});
      }
    }
    for (SymbolId s = 0; s < n; ++s) {
      auto parsed = codebook.parse_tokens(codebook.token_word(s));
      if (!parsed || parsed->size() != 1 || (*parsed)[0] != s)
        report.push_back({"round_trip", "D(E(s)) != s", {alphabet.label(s)}});
    }
  } else {
    const auto& t = codebook.vector_table();
    for (SymbolId a = 0; a < n; ++a)
      for (SymbolId b = a + 1; b < n; ++b)
        if (t.col(a) == t.col(b))
          report.push_back({"injectivity", "symbols share a codeword vector",
                            {alphabet.label(a), alphabet.label(b)}});
    for (SymbolId s = 0; s < n; ++s) {
      if (!t.col(s).allFinite()) {
        report.push_back({"non_finite", "codeword has non-finite entries", {alphabet.label(s)}});
        continue;
      }
      if (codebook.decode_vector(t.col(s)) != s)
        report.push_back({"round_trip", "D(E(s)) != s", {alphabet.label(s)}});
    }
  }
  return report;
}

std::string codebook_to_json(const Codebook& codebook, const Alphabet& alphabet) {
  nlohmann::json j;
  j["kind"] = codebook.kind() == CodebookKind::Token ? "token_code" : "vector_code";
  j["halt"] = alphabet.label(codebook.halt());
  auto entries = nlohmann::json::array();
  for (SymbolId s = 0; s < codebook.size(); ++s) {
    nlohmann::json e;
    e["symbol"] = alphabet.label(s);
    if (codebook.kind() == CodebookKind::Token) {
      e["codeword"] = codebook.token_word(s);
    } else {
      auto col = codebook.vector_word(s);
      e["codeword"] = std::vector<double>(col.data(), col.data() + col.size());
    }
    entries.push_back(std::move(e));
  }
  j["entries"] = std::move(entries);
  return j.dump(2);
}

Codebook codebook_from_json(const std::string& text, const Alphabet& alphabet) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("codebook JSON: ") + e.what());
  }
  const std::string kind = j.at("kind");
  const SymbolId halt = alphabet.at(j.at("halt").get<std::string>());
  const auto& entries = j.at("entries");
  if (entries.size() != alphabet.size())
    throw InvalidCodebook("codebook JSON has " + std::to_string(entries.size()) + " entries for " +
                          std::to_string(alphabet.size()) + " symbols");
  if (kind == "token_code") {
    std::vector<std::vector<Token>> words(alphabet.size());
    std::vector<bool> seen(alphabet.size(), false);
    for (const auto& e : entries) {
      SymbolId s = alphabet.at(e.at("symbol").get<std::string>());
      if (seen[s]) throw InvalidCodebook("duplicate entry for " + alphabet.label(s));
      seen[s] = true;
      words[s] = e.at("codeword").get<std::vector<Token>>();
    }
    return Codebook::tokens(std::move(words), halt);
  }
  if (kind == "vector_code") {
    Eigen::MatrixXd table;
    std::vector<bool> seen(alphabet.size(), false);
    for (const auto& e : entries) {
      SymbolId s = alphabet.at(e.at("symbol").get<std::string>());
      if (seen[s]) throw InvalidCodebook("duplicate entry for " + alphabet.label(s));
      seen[s] = true;
      auto v = e.at("codeword").get<std::vector<double>>();
      if (table.size() == 0) table.resize(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(alphabet.size()));
      if (static_cast<Eigen::Index>(v.size()) != table.rows())
        throw DimensionMismatch("codeword dimensions differ");
      table.col(s) = Eigen::Map<Eigen::VectorXd>(v.data(), table.rows());
    }
    return Codebook::vectors(std::move(table), halt);
  }
  throw InvalidCodebook("unknown codebook kind '" + kind + "'");
}

std::string UnitCodec<Eigen::VectorXd>::render(std::span<const Eigen::VectorXd> units) {
  std::string s;
  char buf[32];
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (i) s += ' ';
    s += '[';
    for (Eigen::Index k = 0; k < units[i].size(); ++k) {
      std::snprintf(buf, sizeof buf, k ? ",%.6g" : "%.6g", units[i][k]);
      s += buf;
    }
    s += ']';
  }
  return s;
}

}  // namespace lagsim
