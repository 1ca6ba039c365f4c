#include "lagsim/lag.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "lagsim/error.hpp"

namespace lagsim {
namespace {

constexpr std::size_t kDenseLimit = 4096;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

std::vector<RuleText> parse_rule_file(std::string_view text) {
  std::vector<RuleText> rules;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto arrow = line.find("->");
    if (arrow == std::string::npos) throw SyntaxError(line_no, "expected 'LHS1 LHS2 -> RHS1 [RHS2]'");
    RuleText r{words(line.substr(0, arrow)), words(line.substr(arrow + 2)), line_no};
    if (r.lhs.empty()) throw SyntaxError(line_no, "empty left-hand side");
    if (r.rhs.empty()) throw SyntaxError(line_no, "empty right-hand side");
    rules.push_back(std::move(r));
  }
  return rules;
}

Alphabet alphabet_for_rules(const std::vector<RuleText>& rules, const std::vector<std::string>& extra,
                            const std::string& halt_label) {
  std::vector<std::string> labels;
  std::unordered_map<std::string, bool> seen;
  auto add = [&](const std::string& l) {
    if (seen.emplace(l, true).second) labels.push_back(l);
  };
  for (const auto& r : rules) {
    for (const auto& l : r.lhs) add(l);
    for (const auto& l : r.rhs) add(l);
  }
  for (const auto& l : extra) add(l);
  add(halt_label);
  if (labels.size() < 2) labels.insert(labels.begin(), "<pad>");
  return Alphabet(std::move(labels), halt_label);
}

ValidationReport validate(const std::vector<RuleText>& rules, const Alphabet& alphabet, int lag) {
  ValidationReport report;
  std::map<std::vector<std::string>, std::size_t> first_line;
  for (const auto& r : rules) {
    const std::string where = "line " + std::to_string(r.line);
    if (static_cast<int>(r.lhs.size()) != lag)
      report.push_back({"lhs_length", where + ": lhs has " + std::to_string(r.lhs.size()) + " symbols, expected " +
                                          std::to_string(lag),
                        r.lhs});
    if (r.rhs.size() < 1 || r.rhs.size() > 2)
      report.push_back({"rhs_length", where + ": rhs has " + std::to_string(r.rhs.size()) + " symbols, expected 1 or 2",
                        r.rhs});
    for (const auto* side : {&r.lhs, &r.rhs})
      for (const auto& l : *side)
        if (!alphabet.find(l))
          report.push_back({"foreign_symbol", where + ": symbol '" + l + "' not in alphabet", {l}});
        else if (*alphabet.find(l) == alphabet.halt())
          report.push_back({"halt_symbol", where + ": the halt symbol may not appear in rules", {l}});
    auto [it, inserted] = first_line.emplace(r.lhs, r.line);
    if (!inserted)
      report.push_back({"duplicate_lhs", where + ": lhs already defined on line " + std::to_string(it->second), r.lhs});
  }
  return report;
}

std::string to_string(HaltReason r) {
  switch (r) {
    case HaltReason::NoRuleMatch: return "NoRuleMatch";
    case HaltReason::StringTooShort: return "StringTooShort";
    case HaltReason::StepBudget: return "StepBudget";
  }
  return "?";
}

LagSystem::LagSystem(Alphabet alphabet, std::vector<ProductionRule> rules, int lag, int deletion)
    : alphabet_(std::move(alphabet)), rules_(std::move(rules)), lag_(lag), deletion_(deletion) {
  if (lag_ < 1 || deletion_ < 1 || deletion_ > lag_) throw Error("need 1 <= deletion <= lag");
  const std::size_t k = alphabet_.size();
  const bool dense = lag_ == 2 && k <= kDenseLimit;
  if (dense) pair_table_.assign(k * k, -1);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& lhs = rules_[i].lhs;
    if (static_cast<int>(lhs.size()) != lag_) continue;
    if (std::any_of(lhs.begin(), lhs.end(), [&](SymbolId s) { return !alphabet_.contains(s); })) continue;
    if (dense) {
      auto& slot = pair_table_[lhs[0] * k + lhs[1]];
      if (slot < 0) slot = static_cast<int>(i);
    } else {
      general_.emplace(lhs, static_cast<int>(i));
    }
  }
}

LagSystem LagSystem::from_text(const std::vector<RuleText>& rules, Alphabet alphabet) {
  auto report = validate(rules, alphabet);
  if (!report.empty()) {
    std::string msg = "invalid rule set:";
    for (const auto& v : report) msg += "\n  " + v.message;
    throw Error(msg);
  }
  std::vector<ProductionRule> resolved;
  resolved.reserve(rules.size());
  for (const auto& r : rules) {
    ProductionRule p;
    for (const auto& l : r.lhs) p.lhs.push_back(alphabet.at(l));
    for (const auto& l : r.rhs) p.rhs.push_back(alphabet.at(l));
    resolved.push_back(std::move(p));
  }
  return LagSystem(std::move(alphabet), std::move(resolved));
}

const ProductionRule* LagSystem::match(const SymbolId* prefix) const {
  if (!pair_table_.empty()) {
    int i = pair_table_[prefix[0] * alphabet_.size() + prefix[1]];
    return i < 0 ? nullptr : &rules_[static_cast<std::size_t>(i)];
  }
  auto it = general_.find(SymbolString(prefix, prefix + lag_));
  return it == general_.end() ? nullptr : &rules_[static_cast<std::size_t>(it->second)];
}

std::vector<const ProductionRule*> LagSystem::sorted_rules() const {
  std::vector<const ProductionRule*> out;
  for (const auto& r : rules_) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->lhs < b->lhs; });
  return out;
}

std::size_t LagSystem::two_output_rule_count() const {
  return static_cast<std::size_t>(std::count_if(rules_.begin(), rules_.end(), [](const auto& r) { return r.rhs.size() == 2; }));
}

std::string LagSystem::to_rule_file() const {
  std::string out;
  for (const auto& r : rules_) {
    out += join_symbols(alphabet_, r.lhs);
    out += " -> ";
    out += join_symbols(alphabet_, r.rhs);
    out += '\n';
  }
  return out;
}

ValidationReport validate(const LagSystem& system) {
  ValidationReport report;
  const auto& a = system.alphabet();
  std::map<SymbolString, std::size_t> seen;
  for (std::size_t i = 0; i < system.rules().size(); ++i) {
    const auto& r = system.rules()[i];
    const std::string where = "rule " + std::to_string(i);
    if (static_cast<int>(r.lhs.size()) != system.lag())
      report.push_back({"lhs_length", where + ": lhs length " + std::to_string(r.lhs.size()), {}});
    if (r.rhs.size() < 1 || r.rhs.size() > 2)
      report.push_back({"rhs_length", where + ": rhs length " + std::to_string(r.rhs.size()), {}});
    bool foreign = false;
    for (const auto* side : {&r.lhs, &r.rhs})
      for (SymbolId s : *side)
        if (!a.contains(s)) {
          report.push_back({"foreign_symbol", where + ": symbol id " + std::to_string(s) + " not in alphabet", {}});
          foreign = true;
        } else if (s == a.halt()) {
          report.push_back({"halt_symbol", where + ": the halt symbol may not appear in rules", {a.label(s)}});
        }
    if (foreign) continue;
    if (!seen.emplace(r.lhs, i).second)
      report.push_back({"duplicate_lhs", where + ": duplicate lhs", render_symbols(a, r.lhs)});
  }
  return report;
}

std::variant<const ProductionRule*, HaltReason> step_in_place(const LagSystem& system, std::deque<SymbolId>& string) {
  const auto lag = static_cast<std::size_t>(system.lag());
  if (string.size() < lag) return HaltReason::StringTooShort;
  SymbolId prefix[8];
  SymbolString big;
  SymbolId* p = prefix;
  if (lag > 8) {
    big.resize(lag);
    p = big.data();
  }
  for (std::size_t i = 0; i < lag; ++i) {
    p[i] = string[i];
    if (!system.alphabet().contains(p[i]))
      throw ForeignSymbol("symbol id " + std::to_string(p[i]) + " is not in the alphabet");
  }
  const ProductionRule* rule = system.match(p);
  if (!rule) return HaltReason::NoRuleMatch;
  for (int i = 0; i < system.deletion(); ++i) string.pop_front();
  string.insert(string.end(), rule->rhs.begin(), rule->rhs.end());
  return rule;
}

StepOutcome step(const LagSystem& system, const LagConfiguration& config) {
  LagConfiguration next = config;
  auto r = step_in_place(system, next.string);
  if (auto* h = std::get_if<HaltReason>(&r)) return *h;
  ++next.step_index;
  return next;
}

std::pair<HaltReason, std::size_t> run_visit(
    const LagSystem& system, const SymbolString& input, std::size_t max_steps,
    const std::function<void(std::size_t, const std::deque<SymbolId>&)>& visit) {
  for (SymbolId s : input)
    if (!system.alphabet().contains(s))
      throw ForeignSymbol("symbol id " + std::to_string(s) + " is not in the alphabet");
  std::deque<SymbolId> string(input.begin(), input.end());
  visit(0, string);
  for (std::size_t k = 0; k < max_steps; ++k) {
    auto r = step_in_place(system, string);
    if (auto* h = std::get_if<HaltReason>(&r)) return {*h, k};
    visit(k + 1, string);
  }
  return {HaltReason::StepBudget, max_steps};
}

LagTrace run(const LagSystem& system, const SymbolString& input, std::size_t max_steps) {
  LagTrace trace;
  auto [halt, steps] = run_visit(system, input, max_steps, [&](std::size_t, const std::deque<SymbolId>& s) {
    trace.strings.emplace_back(s.begin(), s.end());
  });
  (void)steps;
  trace.halt = halt;
  return trace;
}

std::string trace_line(const Alphabet& alphabet, std::size_t step, const std::deque<SymbolId>& s) {
  nlohmann::json j;
  j["step"] = step;
  auto arr = nlohmann::json::array();
  for (SymbolId id : s) arr.push_back(alphabet.label(id));
  j["string"] = std::move(arr);
  return j.dump();
}

}  // namespace lagsim
