#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lagsim {

using SymbolId = std::uint32_t;

struct Symbol {
  SymbolId id;
  std::string display;
};

/// Finite set of interned symbols with a designated halt symbol and an
/// optional end-marker. Ids are dense: 0 .. size()-1.
class Alphabet {
 public:
  Alphabet() = default;

  /// Builds an alphabet from display labels. `halt` and `end_marker` name
  /// labels in `labels`. Throws Error on duplicates, missing halt, or fewer
  /// than two symbols.
  Alphabet(std::vector<std::string> labels, std::string_view halt,
           std::optional<std::string_view> end_marker = std::nullopt);

  std::size_t size() const { return labels_.size(); }
  bool contains(SymbolId id) const { return id < labels_.size(); }
  const std::string& label(SymbolId id) const { return labels_.at(id); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<SymbolId> find(std::string_view label) const;
  /// Like find() but throws ForeignSymbol.
  SymbolId at(std::string_view label) const;

  SymbolId halt() const { return halt_; }
  std::optional<SymbolId> end_marker() const { return end_marker_; }

  Symbol symbol(SymbolId id) const { return {id, label(id)}; }

  bool operator==(const Alphabet& other) const {
    return labels_ == other.labels_ && halt_ == other.halt_ && end_marker_ == other.end_marker_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, SymbolId> index_;
  SymbolId halt_ = 0;
  std::optional<SymbolId> end_marker_;
};

using SymbolString = std::vector<SymbolId>;

/// Parses whitespace-separated labels. Throws ForeignSymbol on unknown labels.
SymbolString parse_symbols(const Alphabet& alphabet, std::string_view text);
std::vector<std::string> render_symbols(const Alphabet& alphabet, std::span<const SymbolId> s);
std::string join_symbols(const Alphabet& alphabet, std::span<const SymbolId> s);

using Token = std::string;

/// Opaque model-side tokens with a designated halt token.
struct TokenAlphabet {
  std::vector<Token> tokens;
  Token halt_token;

  /// Throws Error if tokens repeat.
  void check() const;
};

/// One problem found by a validator; violations are data, not errors.
struct Violation {
  std::string kind;
  std::string message;
  std::vector<std::string> symbols;
};

using ValidationReport = std::vector<Violation>;

}  // namespace lagsim
