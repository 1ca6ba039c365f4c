#include "lagsim/alphabet.hpp"

#include <sstream>
#include <unordered_set>

#include "lagsim/error.hpp"

namespace lagsim {

Alphabet::Alphabet(std::vector<std::string> labels, std::string_view halt,
                   std::optional<std::string_view> end_marker)
    : labels_(std::move(labels)) {
  if (labels_.size() < 2) throw Error("alphabet needs at least two symbols");
  for (SymbolId i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) throw Error("empty symbol label");
    if (!index_.emplace(labels_[i], i).second)
      throw Error("duplicate symbol label '" + labels_[i] + "'");
  }
  auto h = find(halt);
  if (!h) throw Error("halt symbol '" + std::string(halt) + "' not in alphabet");
  halt_ = *h;
  if (end_marker) {
    auto e = find(*end_marker);
    if (!e) throw Error("end-marker '" + std::string(*end_marker) + "' not in alphabet");
    if (*e == halt_) throw Error("end-marker must differ from the halt symbol");
    end_marker_ = *e;
  }
}

std::optional<SymbolId> Alphabet::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SymbolId Alphabet::at(std::string_view label) const {
  auto id = find(label);
  if (!id) throw ForeignSymbol("symbol '" + std::string(label) + "' is not in the alphabet");
  return *id;
}

SymbolString parse_symbols(const Alphabet& alphabet, std::string_view text) {
  std::istringstream in{std::string(text)};
  SymbolString out;
  std::string label;
  while (in >> label) out.push_back(alphabet.at(label));
  return out;
}

std::vector<std::string> render_symbols(const Alphabet& alphabet, std::span<const SymbolId> s) {
  std::vector<std::string> out;
  out.reserve(s.size());
  for (SymbolId id : s) out.push_back(alphabet.label(id));
  return out;
}

std::string join_symbols(const Alphabet& alphabet, std::span<const SymbolId> s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += alphabet.label(s[i]);
  }
  return out;
}

void TokenAlphabet::check() const {
  std::unordered_set<Token> seen;
  for (const auto& t : tokens)
    if (!seen.insert(t).second) throw Error("duplicate token '" + t + "'");
}

}  // namespace lagsim
