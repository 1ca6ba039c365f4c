#include "lagsim/compiler.hpp"

#include "json.hpp"
#include "lagsim/error.hpp"

namespace lagsim {
namespace {

using Kind = CompiledSymbol::Kind;
using Mark = CompiledSymbol::Mark;

CompiledSymbol cell(int phase, int tape, bool first, int state = -1, Mark mark = Mark::None) {
  return {Kind::Cell, phase, tape, state, mark, first};
}

CompiledSymbol end_symbol(int phase) { return {Kind::End, phase, 0, -1, Mark::None, false}; }

std::string label_of(const TuringMachine& m, const CompiledSymbol& s) {
  switch (s.kind) {
    case Kind::Halt: return "<h>";
    case Kind::End: return "(#,p" + std::to_string(s.phase) + ",end)";
    case Kind::Cell: break;
  }
  std::string content = m.symbol_name(s.tape);
  if (s.has_head()) {
    content = m.state_name(s.state) + ":" + content;
    if (s.mark == Mark::Pending) content += "!";
    if (s.mark == Mark::Arrived) content += "*";
  }
  return "(" + content + ",p" + std::to_string(s.phase) + "," + (s.first ? "first" : "-") + ")";
}

void check_names(const TuringMachine& m) {
  auto bad = [](const std::string& n) { return n.find_first_of(" \t\n(),:!*#<>") != std::string::npos; };
  for (const auto& n : m.state_names())
    if (bad(n)) throw UnsupportedMachine("state name '" + n + "' contains a reserved character");
  for (const auto& n : m.symbol_names())
    if (bad(n)) throw UnsupportedMachine("symbol name '" + n + "' contains a reserved character");
}

class RuleBuilder {
 public:
  explicit RuleBuilder(const TuringMachine& m) : m_(m) { enumerate_symbols(); }

  CompiledLag build() {
    shifted_pass();
    aligned_pass();
    std::vector<std::string> labels;
    for (const auto& s : meta_) labels.push_back(label_of(m_, s));
    Alphabet alphabet(std::move(labels), "<h>", label_of(m_, end_symbol(0)));
    return CompiledLag(m_, LagSystem(std::move(alphabet), std::move(rules_)), std::move(meta_));
  }

 private:
  const Transition* transition_of(const CompiledSymbol& c) const {
    if (!c.has_head() || m_.is_halting(c.state)) return nullptr;
    const auto& t = m_.transition(c.state, c.tape);
    return t ? &*t : nullptr;
  }
  bool stuck(const CompiledSymbol& c) const { return c.has_head() && !transition_of(c); }

  void add_symbol(const CompiledSymbol& s) {
    if (index_.emplace(s, static_cast<SymbolId>(meta_.size())).second) meta_.push_back(s);
  }
  SymbolId id(const CompiledSymbol& s) const { return index_.at(s); }

  void enumerate_symbols() {
    const int nq = static_cast<int>(m_.state_count());
    const int na = static_cast<int>(m_.symbol_count());
    std::vector<bool> right_target(static_cast<std::size_t>(nq), false);
    for (int q = 0; q < nq; ++q)
      for (int a = 0; a < na; ++a)
        if (const auto& t = m_.transition(q, a); t && t->move == Move::Right) right_target[static_cast<std::size_t>(t->next)] = true;

    for (bool first : {false, true}) {
      for (int a = 0; a < na; ++a) add_symbol(cell(0, a, first));
      for (int q = 0; q < nq; ++q)
        for (int a = 0; a < na; ++a) add_symbol(cell(0, a, first, q));
    }
    for (bool first : {false, true}) {
      for (int a = 0; a < na; ++a) add_symbol(cell(1, a, first));
      for (int q = 0; q < nq; ++q)
        for (int a = 0; a < na; ++a)
          if (const auto& t = m_.transition(q, a); t && t->move == Move::Left && !m_.is_halting(q))
            add_symbol(cell(1, a, first, q, Mark::Pending));
    }
    // A head arrives through a right move, never on the first cell.
    for (int q = 0; q < nq; ++q)
      if (right_target[static_cast<std::size_t>(q)])
        for (int a = 0; a < na; ++a) add_symbol(cell(1, a, false, q, Mark::Arrived));
    add_symbol(end_symbol(0));
    add_symbol(end_symbol(1));
    add_symbol({Kind::Halt, 0, 0, -1, Mark::None, false});
  }

  std::vector<CompiledSymbol> cells(int phase, std::optional<bool> first) const {
    std::vector<CompiledSymbol> out;
    for (const auto& s : meta_)
      if (s.kind == Kind::Cell && s.phase == phase && (!first || s.first == *first)) out.push_back(s);
    return out;
  }

  void emit(const CompiledSymbol& a, const CompiledSymbol& b, std::initializer_list<CompiledSymbol> rhs) {
    ProductionRule r{{id(a), id(b)}, {}};
    for (const auto& s : rhs) r.rhs.push_back(id(s));
    rules_.push_back(std::move(r));
  }

  // Phase 0 -> 1. The rule read at (x, x') emits the new value of the
  // cell under x', so it sees that cell's left neighbour. The first cell
  // additionally emits its own new value.
  void shifted_pass() {
    const int blank = m_.blank();
    auto own_update = [&](const CompiledSymbol& c, bool first) {
      if (const auto* t = transition_of(c))
        return t->move == Move::Right ? cell(1, t->write, first) : cell(1, c.tape, first, c.state, Mark::Pending);
      return cell(1, c.tape, first);
    };
    auto next_of = [&](const CompiledSymbol& x, const CompiledSymbol& y) {
      if (y.has_head()) return own_update(y, false);
      if (const auto* t = transition_of(x); t && t->move == Move::Right)
        return cell(1, y.tape, false, t->next, Mark::Arrived);
      return cell(1, y.tape, false);
    };

    auto rights = cells(0, false);
    rights.push_back(end_symbol(0));
    for (const auto& x : cells(0, std::nullopt)) {
      if (stuck(x)) continue;
      for (const auto& y : rights) {
        if (stuck(y) || (x.has_head() && y.has_head())) continue;
        const auto& content = y.kind == Kind::End ? cell(0, blank, false) : y;
        auto next = next_of(x, content);
        if (x.first) emit(x, y, {own_update(x, true), next});
        else emit(x, y, {next});
      }
    }
    for (const auto& w : cells(1, true)) emit(end_symbol(0), w, {end_symbol(1)});
  }

  // Phase 1 -> 0. The rule read at (y, y') emits the new value of y's
  // cell, seeing its right neighbour. The first cell also emits a fresh
  // blank cell to its left, which receives the head on a left move.
  void aligned_pass() {
    const int blank = m_.blank();
    auto rights = cells(1, false);
    rights.push_back(end_symbol(1));
    for (const auto& y : cells(1, std::nullopt)) {
      for (const auto& z : rights) {
        if (y.has_head() && z.has_head()) continue;
        const auto& right = z.kind == Kind::End ? cell(1, blank, false) : z;
        CompiledSymbol self;
        if (y.mark == Mark::Pending) {
          self = cell(0, transition_of(y)->write, false);
        } else if (y.mark == Mark::Arrived) {
          self = cell(0, y.tape, false, y.state);
        } else if (right.mark == Mark::Pending) {
          self = cell(0, y.tape, false, transition_of(right)->next);
        } else {
          self = cell(0, y.tape, false);
        }
        if (y.first) {
          auto left = y.mark == Mark::Pending ? cell(0, blank, true, transition_of(y)->next) : cell(0, blank, true);
          emit(y, z, {left, self});
        } else {
          emit(y, z, {self});
        }
      }
    }
    for (const auto& c : cells(0, true)) emit(end_symbol(1), c, {end_symbol(0)});
  }

  const TuringMachine& m_;
  std::vector<CompiledSymbol> meta_;
  std::map<CompiledSymbol, SymbolId> index_;
  std::vector<ProductionRule> rules_;
};

}  // namespace

CompiledLag::CompiledLag(const TuringMachine& machine, LagSystem system, std::vector<CompiledSymbol> meta)
    : machine_(machine), system_(std::move(system)), meta_(std::move(meta)) {
  for (SymbolId i = 0; i < meta_.size(); ++i) index_.emplace(meta_[i], i);
}

SymbolId CompiledLag::id_of(const CompiledSymbol& c) const {
  auto it = index_.find(c);
  if (it == index_.end()) throw Error("compiled alphabet lacks a symbol");
  return it->second;
}

SymbolString CompiledLag::encode_config(const TMConfiguration& c) const {
  auto [tape, head] = tape_of(c);
  SymbolString out;
  out.reserve(tape.size() + 1);
  for (std::size_t i = 0; i < tape.size(); ++i)
    out.push_back(id_of(cell(0, tape[i], i == 0, i == head ? c.state : -1)));
  out.push_back(end_marker());
  return out;
}

std::optional<TMConfiguration> CompiledLag::decode_impl(std::span<const SymbolId> s) const {
  for (SymbolId id : s)
    if (!alphabet().contains(id)) throw ForeignSymbol("symbol id " + std::to_string(id) + " is not in the alphabet");
  if (s.size() < 2 || s.back() != end_marker()) return std::nullopt;
  std::vector<int> tape;
  std::optional<std::size_t> head;
  int state = -1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const auto& m = meta_[s[i]];
    if (m.kind != Kind::Cell || m.phase != 0 || m.first != (i == 0)) return std::nullopt;
    if (m.has_head()) {
      if (head) return std::nullopt;
      head = i;
      state = m.state;
    }
    tape.push_back(m.tape);
  }
  if (!head) return std::nullopt;
  TMConfiguration c;
  c.state = state;
  c.head = tape[*head];
  for (std::size_t i = *head; i-- > 0;) c.left.push_back(tape[i]);
  c.right.assign(tape.begin() + static_cast<std::ptrdiff_t>(*head) + 1, tape.end());
  canonicalize(c, machine_.blank());
  return c;
}

std::size_t CompiledLag::macro_bound(const TMConfiguration& c) const {
  return macro_bound_for_length(c.left.size() + c.right.size() + 2);
}

CompileStats CompiledLag::stats() const {
  return {system_.rules().size(), alphabet().size() - 1, system_.two_output_rule_count()};
}

std::string CompiledLag::sidecar_json() const {
  nlohmann::json j;
  auto s = stats();
  j["stats"] = {{"rule_count", s.rule_count}, {"symbol_count", s.symbol_count},
                {"two_output_rule_count", s.two_output_rule_count}};
  j["alphabet"] = alphabet().labels();
  j["end_marker"] = alphabet().label(end_marker());
  j["halt"] = alphabet().label(alphabet().halt());
  j["checkpoint_format_version"] = kCheckpointFormatVersion;
  return j.dump(2);
}

CompiledLag compile(const TuringMachine& machine) {
  check_names(machine);
  return RuleBuilder(machine).build();
}

Alphabet alphabet_from_sidecar(const std::string& json_text) {
  auto j = nlohmann::json::parse(json_text);
  std::optional<std::string> end;
  if (j.contains("end_marker")) end = j["end_marker"].get<std::string>();
  return Alphabet(j.at("alphabet").get<std::vector<std::string>>(), j.at("halt").get<std::string>(), end);
}

}  // namespace lagsim
