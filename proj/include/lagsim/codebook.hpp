#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lagsim/alphabet.hpp"

namespace lagsim {

enum class CodebookKind { Token, Vector };

/// Maps a (possibly off-codebook) vector back to a symbol.
using VectorDecoder = std::function<SymbolId(const Eigen::VectorXd&)>;

/// Injective encoder E from symbols (including h) to codewords and its
/// inverse D. Token codewords are token sequences; vector codewords are
/// columns of a d x K matrix. The codebook is indexed by SymbolId and covers
/// every id of the owning alphabet.
class Codebook {
 public:
  static Codebook tokens(std::vector<std::vector<Token>> words, SymbolId halt);
  /// `decoder` defaults to nearest-codeword (L2, ties to lowest id).
  static Codebook vectors(Eigen::MatrixXd columns, SymbolId halt, VectorDecoder decoder = {});

  CodebookKind kind() const { return kind_; }
  std::size_t size() const;
  SymbolId halt() const { return halt_; }

  const std::vector<Token>& token_word(SymbolId s) const { return words_.at(s); }
  const std::vector<std::vector<Token>>& token_words() const { return words_; }

  Eigen::Index dimension() const { return table_.rows(); }
  const Eigen::MatrixXd& vector_table() const { return table_; }
  auto vector_word(SymbolId s) const { return table_.col(static_cast<Eigen::Index>(s)); }
  SymbolId decode_vector(const Eigen::VectorXd& v) const;
  bool has_custom_decoder() const { return static_cast<bool>(decoder_); }

  /// Token codewords: decodes a complete stream, or nullopt if it does not
  /// split into codewords.
  std::optional<SymbolString> parse_tokens(std::span<const Token> stream) const;

  /// Incremental prefix-free parser over token codewords.
  class TokenParser {
   public:
    enum class Status { NeedMore, Symbol, Invalid };
    explicit TokenParser(const Codebook& book) : book_(&book) {}
    Status push(const Token& t);
    SymbolId last() const { return last_; }
    bool idle() const { return buffer_.empty(); }

   private:
    const Codebook* book_;
    std::string buffer_;
    SymbolId last_ = 0;
  };

 private:
  friend class TokenParser;
  void index_tokens();

  CodebookKind kind_ = CodebookKind::Token;
  SymbolId halt_ = 0;
  std::vector<std::vector<Token>> words_;
  // Joined codeword -> symbol; the first symbol wins on collisions.
  std::unordered_map<std::string, SymbolId> lookup_;
  std::unordered_set<std::string> prefixes_;
  Eigen::MatrixXd table_;
  VectorDecoder decoder_;
};

/// Index of the column of `table` nearest to `v`; ties resolve to the
/// lowest index. Throws EmptyCodebook if `table` has no columns.
Eigen::Index nearest_column(const Eigen::MatrixXd& table, const Eigen::Ref<const Eigen::VectorXd>& v);

/// Assigns every symbol a distinct ordered token pair: symbol i gets the i-th
/// pair in lexicographic order of (token index, token index).
Codebook build_pair_codebook(const Alphabet& alphabet, const TokenAlphabet& tokens);

/// Empty iff the codebook is injective, round-trips, and (token codes) is
/// prefix-free.
ValidationReport check_codebook(const Codebook& codebook, const Alphabet& alphabet);

std::string codebook_to_json(const Codebook& codebook, const Alphabet& alphabet);
Codebook codebook_from_json(const std::string& text, const Alphabet& alphabet);

/// Unit-type glue used by the decoding harness: token codebooks speak Token,
/// vector codebooks speak Eigen::VectorXd (one unit per codeword).
template <typename Unit>
struct UnitCodec;

template <>
struct UnitCodec<Token> {
  static void append(const Codebook& book, SymbolId s, std::vector<Token>& out) {
    const auto& w = book.token_word(s);
    out.insert(out.end(), w.begin(), w.end());
  }
  static std::string render(std::span<const Token> units) {
    std::string s;
    for (std::size_t i = 0; i < units.size(); ++i) {
      if (i) s += ' ';
      s += units[i];
    }
    return s;
  }
};

template <>
struct UnitCodec<Eigen::VectorXd> {
  static void append(const Codebook& book, SymbolId s, std::vector<Eigen::VectorXd>& out) {
    out.emplace_back(book.vector_word(s));
  }
  static std::string render(std::span<const Eigen::VectorXd> units);
};

}  // namespace lagsim
