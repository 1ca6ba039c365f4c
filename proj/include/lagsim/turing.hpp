#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lagsim {

enum class Move { Left, Right };

struct Transition {
  int write;
  Move move;
  int next;
};

/// Single-tape Turing machine over interned states and tape symbols.
/// Missing transitions on non-halting states halt the machine.
class TuringMachine {
 public:
  TuringMachine(std::vector<std::string> states, std::vector<std::string> symbols, int blank, int start,
                std::vector<int> halting);

  void set_transition(int state, int read, Transition t);

  std::size_t state_count() const { return states_.size(); }
  std::size_t symbol_count() const { return symbols_.size(); }
  const std::string& state_name(int q) const { return states_.at(static_cast<std::size_t>(q)); }
  const std::string& symbol_name(int a) const { return symbols_.at(static_cast<std::size_t>(a)); }
  const std::vector<std::string>& state_names() const { return states_; }
  const std::vector<std::string>& symbol_names() const { return symbols_; }
  std::optional<int> find_state(std::string_view name) const;
  std::optional<int> find_symbol(std::string_view name) const;

  int blank() const { return blank_; }
  int start() const { return start_; }
  bool is_halting(int q) const { return halting_.at(static_cast<std::size_t>(q)); }
  const std::optional<Transition>& transition(int state, int read) const {
    return table_[static_cast<std::size_t>(state) * symbols_.size() + static_cast<std::size_t>(read)];
  }
  std::size_t transition_count() const;

 private:
  std::vector<std::string> states_;
  std::vector<std::string> symbols_;
  int blank_;
  int start_;
  std::vector<bool> halting_;
  std::vector<std::optional<Transition>> table_;
};

/// Parses the TM file format:
///   states: q0 q1 qh
///   alphabet: 0 1
///   blank: 0
///   start: q0
///   halt: qh
///   q0 0 -> 1 R qh
/// With `strict`, a non-halting state lacking a transition for some symbol
/// is rejected. Throws SyntaxError or UndeclaredSymbol.
TuringMachine parse_tm(std::string_view text, bool strict = false);

/// Tape split at the head; `left` and `right` list cells nearest-first and
/// never end in a blank.
struct TMConfiguration {
  std::vector<int> left;
  int head = 0;
  std::vector<int> right;
  int state = 0;

  bool operator==(const TMConfiguration&) const = default;
};

/// Drops trailing blanks from both sides.
void canonicalize(TMConfiguration& c, int blank);
bool is_canonical(const TMConfiguration& c, int blank);

/// Configuration with `tape` written left to right, head at `head_index`,
/// in the start state. An empty tape means a single blank cell.
TMConfiguration initial_configuration(const TuringMachine& m, const std::vector<int>& tape, std::size_t head_index = 0);

/// Next configuration, or nullopt when the machine has halted (halting
/// state or no transition).
std::optional<TMConfiguration> tm_step(const TuringMachine& m, const TMConfiguration& c);

enum class TMHalt { Halted, StepBudget };

struct TMTrace {
  std::vector<TMConfiguration> configs;
  TMHalt end = TMHalt::StepBudget;
};

TMTrace tm_run(const TuringMachine& m, const TMConfiguration& start, std::size_t max_steps);

/// Tape cells from leftmost to rightmost, with the head's index.
std::pair<std::vector<int>, std::size_t> tape_of(const TMConfiguration& c);

/// {"step":k,"state":..,"left":[..],"head":..,"right":[..]}
std::string tm_trace_line(const TuringMachine& m, std::size_t step, const TMConfiguration& c);

}  // namespace lagsim
