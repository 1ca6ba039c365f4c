#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lagsim/alphabet.hpp"

namespace lagsim {

struct ProductionRule {
  SymbolString lhs;  // exactly `lag` symbols
  SymbolString rhs;  // one or two symbols

  bool operator==(const ProductionRule&) const = default;
};

/// A rule as written in a rule file, before symbols are resolved.
struct RuleText {
  std::vector<std::string> lhs;
  std::vector<std::string> rhs;
  std::size_t line = 0;
};

/// Parses the rule-file format: `LHS1 LHS2 -> RHS1 [RHS2]`, `#` comments.
/// Only syntax is checked here; see validate(). Throws SyntaxError.
std::vector<RuleText> parse_rule_file(std::string_view text);

/// Alphabet holding every label used by `rules` (first-appearance order),
/// any `extra` labels, and a fresh halt symbol `halt_label`.
Alphabet alphabet_for_rules(const std::vector<RuleText>& rules,
                            const std::vector<std::string>& extra = {},
                            const std::string& halt_label = "<h>");

/// Ingestion-time checks: duplicate lhs, foreign symbols, lhs/rhs lengths.
ValidationReport validate(const std::vector<RuleText>& rules, const Alphabet& alphabet, int lag = 2);

enum class HaltReason { NoRuleMatch, StringTooShort, StepBudget };
std::string to_string(HaltReason r);

/// Deterministic Lag system: reads the first `lag` symbols, appends the
/// matching rule's output, deletes `deletion` symbols from the front.
class LagSystem {
 public:
  /// Keeps rules in the given order. On a duplicate lhs the first rule is
  /// the one applied; validate() reports the duplicate.
  LagSystem(Alphabet alphabet, std::vector<ProductionRule> rules, int lag = 2, int deletion = 1);

  /// Resolves and checks rule text; throws Error listing violations.
  static LagSystem from_text(const std::vector<RuleText>& rules, Alphabet alphabet);

  const Alphabet& alphabet() const { return alphabet_; }
  int lag() const { return lag_; }
  int deletion() const { return deletion_; }
  const std::vector<ProductionRule>& rules() const { return rules_; }

  /// Rule whose lhs matches the front of `prefix`, if any.
  const ProductionRule* match(const SymbolId* prefix) const;

  /// Rules in lexicographic lhs order.
  std::vector<const ProductionRule*> sorted_rules() const;

  std::size_t two_output_rule_count() const;

  /// Rule file text, one rule per line in stored order.
  std::string to_rule_file() const;

 private:
  Alphabet alphabet_;
  std::vector<ProductionRule> rules_;
  int lag_;
  int deletion_;
  // Dense lookup for lag 2; general map otherwise.
  std::vector<int> pair_table_;
  std::map<SymbolString, int> general_;
};

ValidationReport validate(const LagSystem& system);

struct LagConfiguration {
  std::deque<SymbolId> string;
  std::size_t step_index = 0;
};

using StepOutcome = std::variant<LagConfiguration, HaltReason>;

/// One rewriting step. Throws ForeignSymbol if a read symbol is foreign.
StepOutcome step(const LagSystem& system, const LagConfiguration& config);

/// In-place step; returns the rule applied, or the halt reason.
std::variant<const ProductionRule*, HaltReason> step_in_place(const LagSystem& system,
                                                              std::deque<SymbolId>& string);

struct LagTrace {
  std::vector<SymbolString> strings;  // strings[0] is the input
  HaltReason halt = HaltReason::StepBudget;
};

LagTrace run(const LagSystem& system, const SymbolString& input, std::size_t max_steps);

/// Streaming run for long traces: `visit(step, string)` is called for the
/// input and after every applied rule; returns the halt reason and the
/// number of steps taken.
std::pair<HaltReason, std::size_t> run_visit(
    const LagSystem& system, const SymbolString& input, std::size_t max_steps,
    const std::function<void(std::size_t, const std::deque<SymbolId>&)>& visit);

/// One JSON Lines record: {"step":k,"string":[labels]}.
std::string trace_line(const Alphabet& alphabet, std::size_t step, const std::deque<SymbolId>& s);

}  // namespace lagsim
