#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "lagsim/lag.hpp"
#include "lagsim/turing.hpp"

namespace lagsim {

/// What a compiled symbol means. Cells carry one tape symbol, optionally the
/// head (with its state), a phase tag, and whether the cell is the leftmost
/// one in the queue.
struct CompiledSymbol {
  enum class Kind : std::uint8_t { Cell, End, Halt };
  enum class Mark : std::uint8_t { None, Pending, Arrived };

  Kind kind = Kind::Cell;
  int phase = 0;
  int tape = 0;
  int state = -1;  // -1: no head on this cell
  Mark mark = Mark::None;
  bool first = false;

  bool has_head() const { return state >= 0; }
  auto key() const { return std::tuple(kind, phase, tape, state, mark, first); }
  bool operator<(const CompiledSymbol& o) const { return key() < o.key(); }
};

struct CompileStats {
  std::size_t rule_count = 0;
  std::size_t symbol_count = 0;  // excludes the halt symbol h
  std::size_t two_output_rule_count = 0;
};

/// Lag system (lag 2, deletion 1) simulating a Turing machine, plus the
/// maps between machine configurations and checkpoint strings.
///
/// Layout: a checkpoint string is `c_1 ... c_m #`, all phase 0, where the
/// cells spell the tape left to right, exactly one cell holds the head and
/// c_1 is flagged first. One machine step is two passes over the queue:
/// a phase 0 -> 1 pass whose outputs are shifted one cell right (each new
/// cell is computed from its left neighbour and itself, resolving right
/// moves) and a phase 1 -> 0 pass whose outputs are aligned (computed from
/// the cell and its right neighbour, resolving left moves). Each pass also
/// adds one blank cell at one end, so the tape never runs out.
class CompiledLag {
 public:
  CompiledLag(const TuringMachine& machine, LagSystem system, std::vector<CompiledSymbol> meta);

  const LagSystem& system() const { return system_; }
  const Alphabet& alphabet() const { return system_.alphabet(); }
  const TuringMachine& machine() const { return machine_; }
  const CompiledSymbol& meta(SymbolId s) const { return meta_.at(s); }
  SymbolId end_marker() const { return *system_.alphabet().end_marker(); }

  /// Checkpoint string for `c`, ending in the end-marker.
  SymbolString encode_config(const TMConfiguration& c) const;

  /// Defined exactly on checkpoint strings. Throws ForeignSymbol on ids
  /// outside the alphabet.
  template <typename Range>
  std::optional<TMConfiguration> decode_config(const Range& s) const {
    std::vector<SymbolId> v(std::begin(s), std::end(s));
    return decode_impl(v);
  }

  /// Lag steps needed to go from the checkpoint of `c` to the next one.
  std::size_t macro_bound(const TMConfiguration& c) const;
  static std::size_t macro_bound_for_length(std::size_t checkpoint_length) { return 2 * checkpoint_length + 1; }

  CompileStats stats() const;

  /// {stats, alphabet, end_marker, halt, checkpoint_format_version}
  std::string sidecar_json() const;

 private:
  std::optional<TMConfiguration> decode_impl(std::span<const SymbolId> s) const;
  SymbolId id_of(const CompiledSymbol& c) const;

  TuringMachine machine_;
  LagSystem system_;
  std::vector<CompiledSymbol> meta_;
  std::map<CompiledSymbol, SymbolId> index_;
};

inline constexpr int kCheckpointFormatVersion = 1;

/// Throws UnsupportedMachine if symbol or state names would produce
/// ambiguous labels.
CompiledLag compile(const TuringMachine& machine);

/// Alphabet recorded in a sidecar JSON file.
Alphabet alphabet_from_sidecar(const std::string& json_text);

}  // namespace lagsim
