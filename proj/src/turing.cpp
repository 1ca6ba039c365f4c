#include "lagsim/turing.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "lagsim/error.hpp"

namespace lagsim {
namespace {

std::vector<std::string> split_words(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

int index_of(const std::vector<std::string>& names, std::string_view n) {
  auto it = std::find(names.begin(), names.end(), n);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

}  // namespace

TuringMachine::TuringMachine(std::vector<std::string> states, std::vector<std::string> symbols, int blank, int start,
                             std::vector<int> halting)
    : states_(std::move(states)),
      symbols_(std::move(symbols)),
      blank_(blank),
      start_(start),
      halting_(states_.size(), false),
      table_(states_.size() * symbols_.size()) {
  if (states_.empty() || symbols_.empty()) throw Error("machine needs states and symbols");
  if (blank_ < 0 || static_cast<std::size_t>(blank_) >= symbols_.size()) throw Error("blank is not a tape symbol");
  if (start_ < 0 || static_cast<std::size_t>(start_) >= states_.size()) throw Error("start is not a state");
  for (int q : halting) halting_.at(static_cast<std::size_t>(q)) = true;
}

void TuringMachine::set_transition(int state, int read, Transition t) {
  if (is_halting(state)) throw Error("transition defined on halting state " + state_name(state));
  table_.at(static_cast<std::size_t>(state) * symbols_.size() + static_cast<std::size_t>(read)) = t;
}

std::optional<int> TuringMachine::find_state(std::string_view name) const {
  int i = index_of(states_, name);
  return i < 0 ? std::nullopt : std::optional<int>(i);
}

std::optional<int> TuringMachine::find_symbol(std::string_view name) const {
  int i = index_of(symbols_, name);
  return i < 0 ? std::nullopt : std::optional<int>(i);
}

std::size_t TuringMachine::transition_count() const {
  return static_cast<std::size_t>(std::count_if(table_.begin(), table_.end(), [](const auto& t) { return t.has_value(); }));
}

TuringMachine parse_tm(std::string_view text, bool strict) {
  std::vector<std::string> states, symbols, halt;
  std::string blank, start;
  struct Pending {
    std::size_t line;
    std::vector<std::string> w;
  };
  std::vector<Pending> transitions;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    auto w = split_words(raw);
    if (w.empty()) continue;
    auto colon = raw.find(':');
    if (colon != std::string::npos && raw.find("->") == std::string::npos) {
      auto key = split_words(raw.substr(0, colon));
      auto values = split_words(raw.substr(colon + 1));
      if (key.size() != 1) throw SyntaxError(line_no, "malformed header");
      const auto& k = key[0];
      if (k == "states") states = values;
      else if (k == "alphabet") symbols = values;
      else if (k == "halt") halt = values;
      else if (k == "blank" || k == "start") {
        if (values.size() != 1) throw SyntaxError(line_no, "'" + k + "' takes exactly one value");
        (k == "blank" ? blank : start) = values[0];
      } else {
        throw SyntaxError(line_no, "unknown header '" + k + "'");
      }
      continue;
    }
    // q a -> b M q'
    if (w.size() != 6 || w[2] != "->") throw SyntaxError(line_no, "expected 'q a -> b M q2'");
    transitions.push_back({line_no, std::move(w)});
  }
  if (states.empty()) throw SyntaxError(line_no, "missing 'states:' header");
  if (symbols.empty()) throw SyntaxError(line_no, "missing 'alphabet:' header");
  if (start.empty()) throw SyntaxError(line_no, "missing 'start:' header");
  if (blank.empty()) throw SyntaxError(line_no, "missing 'blank:' header");
  for (const auto* names : {&states, &symbols}) {
    std::unordered_set<std::string> seen;
    for (const auto& n : *names)
      if (!seen.insert(n).second) throw SyntaxError(line_no, "duplicate declaration '" + n + "'");
  }

  auto state = [&](const std::string& n, std::size_t line) {
    int i = index_of(states, n);
    if (i < 0) throw UndeclaredSymbol("line " + std::to_string(line) + ": undeclared state '" + n + "'");
    return i;
  };
  auto symbol = [&](const std::string& n, std::size_t line) {
    int i = index_of(symbols, n);
    if (i < 0) throw UndeclaredSymbol("line " + std::to_string(line) + ": undeclared symbol '" + n + "'");
    return i;
  };

  std::vector<int> halting;
  for (const auto& h : halt) halting.push_back(state(h, 0));
  TuringMachine m(states, symbols, symbol(blank, 0), state(start, 0), halting);

  for (const auto& t : transitions) {
    int q = state(t.w[0], t.line);
    int a = symbol(t.w[1], t.line);
    int b = symbol(t.w[3], t.line);
    Move mv;
    if (t.w[4] == "L") mv = Move::Left;
    else if (t.w[4] == "R") mv = Move::Right;
    else throw UnsupportedMachine("line " + std::to_string(t.line) + ": move must be L or R, got '" + t.w[4] + "'");
    int next = state(t.w[5], t.line);
    if (m.is_halting(q)) throw SyntaxError(t.line, "transition out of halting state '" + t.w[0] + "'");
    if (m.transition(q, a)) throw SyntaxError(t.line, "second transition for (" + t.w[0] + ", " + t.w[1] + ")");
    m.set_transition(q, a, {b, mv, next});
  }
  if (strict) {
    for (int q = 0; q < static_cast<int>(m.state_count()); ++q) {
      if (m.is_halting(q)) continue;
      for (int a = 0; a < static_cast<int>(m.symbol_count()); ++a)
        if (!m.transition(q, a))
          throw SyntaxError(line_no, "strict: no transition for (" + m.state_name(q) + ", " + m.symbol_name(a) + ")");
    }
  }
  return m;
}

void canonicalize(TMConfiguration& c, int blank) {
  while (!c.left.empty() && c.left.back() == blank) c.left.pop_back();
  while (!c.right.empty() && c.right.back() == blank) c.right.pop_back();
}

bool is_canonical(const TMConfiguration& c, int blank) {
  return (c.left.empty() || c.left.back() != blank) && (c.right.empty() || c.right.back() != blank);
}

TMConfiguration initial_configuration(const TuringMachine& m, const std::vector<int>& tape, std::size_t head_index) {
  TMConfiguration c;
  c.state = m.start();
  if (tape.empty()) {
    c.head = m.blank();
    return c;
  }
  if (head_index >= tape.size()) throw Error("head index outside the tape");
  c.head = tape[head_index];
  for (std::size_t i = head_index; i-- > 0;) c.left.push_back(tape[i]);
  for (std::size_t i = head_index + 1; i < tape.size(); ++i) c.right.push_back(tape[i]);
  canonicalize(c, m.blank());
  return c;
}

std::optional<TMConfiguration> tm_step(const TuringMachine& m, const TMConfiguration& c) {
  if (m.is_halting(c.state)) return std::nullopt;
  const auto& t = m.transition(c.state, c.head);
  if (!t) return std::nullopt;
  TMConfiguration n = c;
  n.state = t->next;
  auto& from = t->move == Move::Right ? n.right : n.left;
  auto& to = t->move == Move::Right ? n.left : n.right;
  // `from` and `to` are nearest-first, so the near end is the front.
  to.insert(to.begin(), t->write);
  if (from.empty()) {
    n.head = m.blank();
  } else {
    n.head = from.front();
    from.erase(from.begin());
  }
  canonicalize(n, m.blank());
  return n;
}

TMTrace tm_run(const TuringMachine& m, const TMConfiguration& start, std::size_t max_steps) {
  TMTrace trace;
  trace.configs.push_back(start);
  for (std::size_t k = 0; k < max_steps; ++k) {
    auto next = tm_step(m, trace.configs.back());
    if (!next) {
      trace.end = TMHalt::Halted;
      return trace;
    }
    trace.configs.push_back(std::move(*next));
  }
  if (!tm_step(m, trace.configs.back())) trace.end = TMHalt::Halted;
  return trace;
}

std::pair<std::vector<int>, std::size_t> tape_of(const TMConfiguration& c) {
  std::vector<int> tape(c.left.rbegin(), c.left.rend());
  std::size_t head = tape.size();
  tape.push_back(c.head);
  tape.insert(tape.end(), c.right.begin(), c.right.end());
  return {tape, head};
}

std::string tm_trace_line(const TuringMachine& m, std::size_t step, const TMConfiguration& c) {
  nlohmann::json j;
  j["step"] = step;
  j["state"] = m.state_name(c.state);
  auto names = [&](const std::vector<int>& v) {
    auto a = nlohmann::json::array();
    for (int s : v) a.push_back(m.symbol_name(s));
    return a;
  };
  j["left"] = names(c.left);
  j["head"] = m.symbol_name(c.head);
  j["right"] = names(c.right);
  return j.dump();
}

}  // namespace lagsim
