#pragma once
// Independent re-implementations used as test oracles. They share no code
// with the library beyond plain data types.

#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lagsim/lag.hpp"

namespace oracle {

/// Lag 2, deletion 1 on plain vectors with a linear rule scan.
struct NaiveLag {
  std::vector<std::pair<std::vector<int>, std::vector<int>>> rules;

  enum class End { Rule, NoRule, TooShort };

  End step(std::vector<int>& s) const {
    if (s.size() < 2) return End::TooShort;
    for (const auto& [lhs, rhs] : rules)
      if (lhs[0] == s[0] && lhs[1] == s[1]) {
        s.insert(s.end(), rhs.begin(), rhs.end());
        s.erase(s.begin());
        return End::Rule;
      }
    return End::NoRule;
  }

  std::vector<std::vector<int>> run(std::vector<int> s, std::size_t max_steps, End* end = nullptr) const {
    std::vector<std::vector<int>> out{s};
    for (std::size_t k = 0; k < max_steps; ++k) {
      End e = step(s);
      if (e != End::Rule) {
        if (end) *end = e;
        return out;
      }
      out.push_back(s);
    }
    if (end) *end = End::Rule;
    return out;
  }
};

/// Random deterministic lag-2 system over `symbols` symbols (ids 0..n-1;
/// halt is id n). Each pair gets a rule with probability `density`.
inline lagsim::LagSystem random_system(std::mt19937_64& rng, int symbols, double density, NaiveLag* naive = nullptr) {
  std::vector<std::string> labels;
  for (int i = 0; i < symbols; ++i) labels.push_back("s" + std::to_string(i));
  labels.push_back("<h>");
  lagsim::Alphabet alphabet(labels, "<h>");
  std::vector<lagsim::ProductionRule> rules;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> sym(0, symbols - 1);
  for (int a = 0; a < symbols; ++a)
    for (int b = 0; b < symbols; ++b) {
      if (coin(rng) >= density) continue;
      lagsim::ProductionRule r;
      r.lhs = {static_cast<lagsim::SymbolId>(a), static_cast<lagsim::SymbolId>(b)};
      const int n_out = coin(rng) < 0.5 ? 1 : 2;
      for (int i = 0; i < n_out; ++i) r.rhs.push_back(static_cast<lagsim::SymbolId>(sym(rng)));
      if (naive)
        naive->rules.push_back({{a, b}, std::vector<int>(r.rhs.begin(), r.rhs.end())});
      rules.push_back(std::move(r));
    }
  return lagsim::LagSystem(alphabet, std::move(rules));
}

inline std::vector<int> random_string(std::mt19937_64& rng, int symbols, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> sym(0, symbols - 1);
  std::vector<int> s(len(rng));
  for (auto& x : s) x = sym(rng);
  return s;
}

/// Turing machine on a map-backed tape; transitions keyed by (state, symbol)
/// names, moves 'L' / 'R'.
struct NaiveTM {
  struct T {
    std::string write;
    char move;
    std::string next;
  };
  std::map<std::pair<std::string, std::string>, T> delta;
  std::string blank;

  struct Config {
    std::map<long, std::string> tape;
    long head = 0;
    std::string state;
  };

  std::string read(const Config& c) const {
    auto it = c.tape.find(c.head);
    return it == c.tape.end() ? blank : it->second;
  }

  bool step(Config& c) const {
    auto it = delta.find({c.state, read(c)});
    if (it == delta.end()) return false;
    c.tape[c.head] = it->second.write;
    c.head += it->second.move == 'L' ? -1 : 1;
    c.state = it->second.next;
    return true;
  }

  /// Non-blank span of the tape, left to right.
  std::string tape_string(const Config& c) const {
    long lo = c.head, hi = c.head;
    for (const auto& [pos, v] : c.tape)
      if (v != blank) lo = std::min(lo, pos), hi = std::max(hi, pos);
    std::string out;
    for (long p = lo; p <= hi; ++p) {
      auto it = c.tape.find(p);
      out += it == c.tape.end() ? blank : it->second;
    }
    return out;
  }
};

}  // namespace oracle
