#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lagsim/codebook.hpp"
#include "lagsim/error.hpp"
#include "lagsim/lag.hpp"

namespace lagsim {

/// Deterministic next-unit model. Units are tokens or codeword vectors.
/// Implementations realize greedy decoding: argmax with ties to the lowest
/// index, so equal contexts give equal outputs.
template <typename Unit>
class Backend {
 public:
  virtual ~Backend() = default;

  /// Maximum number of units consumed per query.
  virtual std::size_t context_window() const = 0;

  virtual Unit next(std::span<const Unit> context) const = 0;

  /// One full response to `context`. The default runs autoregressively,
  /// appending each output to the context, until `done(outputs)` or
  /// `max_units` outputs.
  virtual std::vector<Unit> respond(std::span<const Unit> context, std::size_t max_units,
                                    const std::function<bool(std::span<const Unit>)>& done) const {
    std::vector<Unit> ctx(context.begin(), context.end());
    std::vector<Unit> out;
    while (out.size() < max_units) {
      out.push_back(next(ctx));
      ctx.push_back(out.back());
      if (done(out)) break;
    }
    return out;
  }

  virtual bool share_safe() const { return true; }
  virtual std::string identity() const = 0;
};

using TokenBackend = Backend<Token>;
using VectorBackend = Backend<Eigen::VectorXd>;

/// Sliding window over the most recent N units of input + generated output.
template <typename Unit>
std::vector<Unit> standard_decode(const Backend<Unit>& model, std::span<const Unit> input, std::size_t k) {
  const std::size_t n_ctx = model.context_window();
  std::vector<Unit> s(input.begin(), input.end());
  std::vector<Unit> out;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t start = s.size() > n_ctx ? s.size() - n_ctx : 0;
    out.push_back(model.next(std::span<const Unit>(s).subspan(start)));
    s.push_back(out.back());
  }
  return out;
}

/// Window of width N that starts at the beginning of the operational string
/// and, once full, advances one unit per step, so inputs longer than N are
/// read in full. Coincides with standard_decode whenever |input| <= N.
template <typename Unit>
std::vector<Unit> generalized_decode(const Backend<Unit>& model, std::span<const Unit> input, std::size_t k) {
  const std::size_t n_ctx = model.context_window();
  const std::size_t slack = input.size() < n_ctx ? n_ctx - input.size() : 0;
  std::vector<Unit> s(input.begin(), input.end());
  std::vector<Unit> out;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t start = i > slack ? i - slack : 0;
    const std::size_t len = std::min(n_ctx, s.size() - start);
    out.push_back(model.next(std::span<const Unit>(s).subspan(start, len)));
    s.push_back(out.back());
  }
  return out;
}

enum class FailureKind { WrongSymbol, NoHalt, EmptyProduction, ParseFailure, Transport };
std::string to_string(FailureKind k);

class ProtocolViolation : public Error {
 public:
  ProtocolViolation(FailureKind kind, std::string context, const std::string& detail)
      : Error(to_string(kind) + ": " + detail + " [context: " + context + "]"),
        kind_(kind),
        context_(std::move(context)) {}
  FailureKind kind() const { return kind_; }
  const std::string& context() const { return context_; }

 private:
  FailureKind kind_;
  std::string context_;
};

template <typename Unit>
struct SimulationConfig {
  std::vector<Unit> system_prompt;
  const Codebook* codebook = nullptr;
  std::size_t max_output_codewords_per_step = 3;
  std::size_t step_budget = 1000;
};

/// The model's answer to one production query S E(s1) E(s2), decoded.
struct ProductionResponse {
  SymbolString symbols;  // decoded codewords in order, including h if produced
  std::optional<FailureKind> failure;
  std::string detail;
  std::string context;  // rendered query
};

namespace detail {

template <typename Unit>
class ResponseParser;

template <>
class ResponseParser<Token> {
 public:
  explicit ResponseParser(const Codebook& book) : book_(&book), parser_(book) {}
  // Returns false once no more input is wanted.
  bool push(const Token& t, std::size_t cap) {
    switch (parser_.push(t)) {
      case Codebook::TokenParser::Status::NeedMore: return true;
      case Codebook::TokenParser::Status::Invalid: invalid_ = true; return false;
      case Codebook::TokenParser::Status::Symbol: symbols_.push_back(parser_.last()); break;
    }
    return symbols_.back() != book_->halt() && symbols_.size() < cap;
  }
  bool invalid() const { return invalid_; }
  bool partial() const { return !parser_.idle(); }
  const SymbolString& symbols() const { return symbols_; }
  std::size_t max_units(std::size_t cap) const {
    std::size_t w = 1;
    for (const auto& word : book_->token_words()) w = std::max(w, word.size());
    return cap * w;
  }

 private:
  const Codebook* book_;
  Codebook::TokenParser parser_;
  SymbolString symbols_;
  bool invalid_ = false;
};

template <>
class ResponseParser<Eigen::VectorXd> {
 public:
  explicit ResponseParser(const Codebook& book) : book_(&book) {}
  bool push(const Eigen::VectorXd& v, std::size_t cap) {
    if (v.size() != book_->dimension() || !v.allFinite()) {
      invalid_ = true;
      return false;
    }
    symbols_.push_back(book_->decode_vector(v));
    return symbols_.back() != book_->halt() && symbols_.size() < cap;
  }
  bool invalid() const { return invalid_; }
  bool partial() const { return false; }
  const SymbolString& symbols() const { return symbols_; }
  std::size_t max_units(std::size_t cap) const { return cap; }

 private:
  const Codebook* book_;
  SymbolString symbols_;
  bool invalid_ = false;
};

template <typename Unit>
std::size_t max_codeword_width(const Codebook& book) {
  if constexpr (std::is_same_v<Unit, Token>) {
    std::size_t w = 1;
    for (const auto& word : book.token_words()) w = std::max(w, word.size());
    return w;
  } else {
    return 1;
  }
}

}  // namespace detail

/// Query context S ++ E(s1) ++ E(s2).
template <typename Unit>
std::vector<Unit> production_context(const SimulationConfig<Unit>& cfg, SymbolId s1, SymbolId s2) {
  std::vector<Unit> ctx = cfg.system_prompt;
  UnitCodec<Unit>::append(*cfg.codebook, s1, ctx);
  UnitCodec<Unit>::append(*cfg.codebook, s2, ctx);
  return ctx;
}

/// Asks the model for the production of (s1, s2) and parses its output
/// codeword by codeword until the halt codeword or the per-step cap.
/// Transport errors from remote backends are reported, not thrown.
template <typename Unit>
ProductionResponse query_production(const Backend<Unit>& model, const SimulationConfig<Unit>& cfg, SymbolId s1,
                                    SymbolId s2) {
  if (!cfg.codebook) throw Error("simulation config has no codebook");
  const std::size_t cap = cfg.max_output_codewords_per_step;
  if (cap < 2) throw Error("max_output_codewords_per_step must be at least 2");
  const std::size_t needed = cfg.system_prompt.size() + 2 * detail::max_codeword_width<Unit>(*cfg.codebook);
  if (model.context_window() < needed)
    throw ContextOverflow("context window " + std::to_string(model.context_window()) + " < |S| + 2 codewords = " +
                          std::to_string(needed));

  ProductionResponse r;
  auto ctx = production_context(cfg, s1, s2);
  r.context = UnitCodec<Unit>::render(ctx);
  detail::ResponseParser<Unit> parser(*cfg.codebook);
  std::vector<Unit> units;
  try {
    std::size_t fed = 0;
    bool wanting = true;
    units = model.respond(ctx, parser.max_units(cap), [&](std::span<const Unit> out) {
      while (fed < out.size() && wanting) wanting = parser.push(out[fed++], cap);
      return !wanting;
    });
    // Remote responses arrive whole; feed whatever the callback did not see.
    while (fed < units.size() && wanting) wanting = parser.push(units[fed++], cap);
  } catch (const TransportError& e) {
    r.failure = FailureKind::Transport;
    r.detail = e.what();
    return r;
  } catch (const ProviderRefusal& e) {
    r.failure = FailureKind::Transport;
    r.detail = e.what();
    return r;
  }
  r.symbols = parser.symbols();
  const SymbolId h = cfg.codebook->halt();
  if (parser.invalid() || parser.partial()) {
    r.failure = FailureKind::ParseFailure;
    r.detail = "output does not parse into codewords: " + UnitCodec<Unit>::render(units);
  } else if (!r.symbols.empty() && r.symbols.front() == h) {
    r.failure = FailureKind::EmptyProduction;
    r.detail = "first output codeword is the halt codeword";
  } else if (r.symbols.empty() || r.symbols.back() != h) {
    r.failure = FailureKind::NoHalt;
    r.detail = "no halt codeword within " + std::to_string(cap) + " codewords";
  }
  return r;
}

/// Input plus everything generated; symbols before `cursor` are consumed.
struct OperationalString {
  SymbolString symbols;
  std::size_t cursor = 0;

  std::size_t live_size() const { return symbols.size() - cursor; }
  SymbolString live() const { return SymbolString(symbols.begin() + static_cast<std::ptrdiff_t>(cursor), symbols.end()); }
};

/// One extended step: reads the two symbols at the cursor, appends the
/// decoded production (halt dropped) and advances the cursor by one.
/// Throws ProtocolViolation on a malformed production.
template <typename Unit>
std::variant<SymbolString, HaltReason> extended_decode_step(const Backend<Unit>& model,
                                                            const SimulationConfig<Unit>& cfg, OperationalString& op) {
  if (op.cursor + 2 > op.symbols.size()) return HaltReason::StringTooShort;
  auto r = query_production(model, cfg, op.symbols[op.cursor], op.symbols[op.cursor + 1]);
  if (r.failure) throw ProtocolViolation(*r.failure, r.context, r.detail);
  SymbolString appended(r.symbols.begin(), r.symbols.end() - 1);
  op.symbols.insert(op.symbols.end(), appended.begin(), appended.end());
  ++op.cursor;
  return appended;
}

struct SimulationTrace {
  std::vector<SymbolString> strings;  // live operational string per step
  std::optional<HaltReason> halt;     // StringTooShort or StepBudget
  std::optional<FailureKind> violation;
  std::string violation_detail;
  std::size_t steps = 0;
};

/// Observer for streaming traces: (step, appended, cursor, string_len).
using SimulationObserver = std::function<void(std::size_t, const SymbolString&, std::size_t, std::size_t)>;

/// Iterates extended_decode_step from `input` until halt, violation, or
/// budget. With `keep_strings`, records the live string at every step so
/// the trace lines up with run() of the Lag engine.
template <typename Unit>
SimulationTrace simulate_lag(const Backend<Unit>& model, const SimulationConfig<Unit>& cfg, const SymbolString& input,
                             bool keep_strings = true, const SimulationObserver& observer = {}) {
  for (SymbolId s : input)
    if (s >= cfg.codebook->size()) throw ForeignSymbol("input symbol " + std::to_string(s) + " has no codeword");
  SimulationTrace trace;
  OperationalString op{input, 0};
  if (keep_strings) trace.strings.push_back(op.live());
  for (std::size_t k = 0; k < cfg.step_budget; ++k) {
    std::variant<SymbolString, HaltReason> r;
    try {
      r = extended_decode_step(model, cfg, op);
    } catch (const ProtocolViolation& v) {
      trace.violation = v.kind();
      trace.violation_detail = v.what();
      return trace;
    }
    if (auto* h = std::get_if<HaltReason>(&r)) {
      trace.halt = *h;
      return trace;
    }
    ++trace.steps;
    if (keep_strings) trace.strings.push_back(op.live());
    if (observer) observer(trace.steps, std::get<SymbolString>(r), op.cursor, op.symbols.size());
  }
  trace.halt = HaltReason::StepBudget;
  return trace;
}

/// JSON Lines record {"step","appended","cursor","string_len"[,"string"]}.
std::string simulation_line(const Alphabet& alphabet, std::size_t step, const SymbolString& appended,
                            std::size_t cursor, std::size_t string_len, const SymbolString* snapshot = nullptr);

}  // namespace lagsim
