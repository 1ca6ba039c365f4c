#pragma once

#include <algorithm>
#include <atomic>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lagsim/codebook.hpp"
#include "lagsim/compiler.hpp"
#include "lagsim/decoding.hpp"
#include "lagsim/hashing.hpp"
#include "lagsim/lag.hpp"
#include "lagsim/turing.hpp"

namespace lagsim {

struct RuleVerdict {
  ProductionRule rule;
  std::string context;
  SymbolString expected;  // rhs followed by h
  SymbolString observed;
  bool pass = false;
  std::optional<FailureKind> failure;
  std::string detail;
};

struct VerificationReport {
  std::string system_hash;
  std::string backend;
  std::string codebook_hash;
  std::string prompt_hash;
  std::vector<RuleVerdict> verdicts;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::string timestamp;  // excluded from determinism comparisons

  std::size_t total() const { return verdicts.size(); }
  bool all_passed() const { return failed == 0; }
  const RuleVerdict* first_failure() const;
};

/// {"toolkit_version", "system_hash", ..., "verdicts", "summary", "metadata": {"timestamp"}}.
/// `full` = false keeps only failing verdicts.
/// `provenance` entries (e.g. config hash, seed) are added as top-level strings.
using Provenance = std::vector<std::pair<std::string, std::string>>;
std::string report_to_json(const VerificationReport& r, const Alphabet& alphabet, bool full = true,
                           const Provenance& provenance = {});
/// The report JSON with the metadata block removed; equal for reruns.
std::string report_fingerprint(const VerificationReport& r, const Alphabet& alphabet,
                               const Provenance& provenance = {});
std::string utc_timestamp();

/// Verdict of one rule from a fresh query.
template <typename Unit>
RuleVerdict verify_rule(const Backend<Unit>& model, const SimulationConfig<Unit>& cfg, const ProductionRule& rule) {
  RuleVerdict v;
  v.rule = rule;
  v.expected = rule.rhs;
  v.expected.push_back(cfg.codebook->halt());
  auto r = query_production(model, cfg, rule.lhs[0], rule.lhs[1]);
  v.context = r.context;
  v.observed = r.symbols;
  if (r.failure) {
    v.failure = r.failure;
    v.detail = r.detail;
  } else if (v.observed != v.expected) {
    v.failure = FailureKind::WrongSymbol;
    v.detail = "observed production differs from the rule";
  }
  v.pass = !v.failure;
  return v;
}

/// Queries every rule of `system` (lexicographic lhs order), one fresh
/// context per rule. Throws InvalidCodebook if the codebook fails
/// check_codebook.
template <typename Unit>
VerificationReport verify_rules(const Backend<Unit>& model, const Codebook& codebook,
                                const std::vector<Unit>& system_prompt, const LagSystem& system,
                                std::size_t workers = 1) {
  auto problems = check_codebook(codebook, system.alphabet());
  if (!problems.empty()) throw InvalidCodebook("codebook rejected: " + problems.front().message);

  SimulationConfig<Unit> cfg;
  cfg.system_prompt = system_prompt;
  cfg.codebook = &codebook;

  VerificationReport rep;
  rep.system_hash = sha256_hex(system.to_rule_file());
  rep.backend = model.identity();
  rep.codebook_hash = sha256_hex(codebook_to_json(codebook, system.alphabet()));
  rep.prompt_hash = sha256_hex(UnitCodec<Unit>::render(system_prompt));
  rep.timestamp = utc_timestamp();

  const auto rules = system.sorted_rules();
  rep.verdicts.resize(rules.size());
  if (!model.share_safe()) workers = 1;
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(rules.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < rules.size(); ++i) rep.verdicts[i] = verify_rule(model, cfg, *rules[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < rules.size();) rep.verdicts[i] = verify_rule(model, cfg, *rules[i]);
      });
  }
  for (const auto& v : rep.verdicts) (v.pass ? rep.passed : rep.failed)++;
  return rep;
}

struct CosimReport {
  std::size_t steps_requested = 0;
  std::size_t steps_compared = 0;
  std::optional<std::size_t> divergence_step;  // 1-based step of first disagreement
  std::optional<HaltReason> lag_halt;
  std::optional<FailureKind> model_violation;
  std::string detail;
  SymbolString expected;  // live strings at the divergence step, if any
  SymbolString observed;

  bool agreed() const { return !divergence_step; }
};

/// Advances a Lag configuration and an extended-decoding operational string
/// together and compares their live strings after every step.
template <typename Unit>
class Lockstep {
 public:
  enum class Outcome { Agree, Diverge, LagHalted };

  Lockstep(const LagSystem& system, const Backend<Unit>& model, const SimulationConfig<Unit>& cfg,
           const SymbolString& input)
      : system_(&system), model_(&model), cfg_(&cfg), lag_(input.begin(), input.end()), op_{input, 0} {}

  Outcome step() {
    auto lag_result = step_in_place(*system_, lag_);
    ++steps_;
    if (auto* h = std::get_if<HaltReason>(&lag_result)) {
      lag_halt_ = *h;
      // A missing rule has no defined model behavior; only a too-short
      // string must be mirrored by the model.
      if (*h != HaltReason::StringTooShort) return Outcome::LagHalted;
      if (op_.live_size() < 2) return Outcome::LagHalted;
      detail_ = "model kept going after the Lag string became too short";
      return Outcome::Diverge;
    }
    std::variant<SymbolString, HaltReason> model_result;
    try {
      model_result = extended_decode_step(*model_, *cfg_, op_);
    } catch (const ProtocolViolation& v) {
      violation_ = v.kind();
      detail_ = v.what();
      return Outcome::Diverge;
    }
    if (std::holds_alternative<HaltReason>(model_result)) {
      detail_ = "model string too short while the Lag system applied a rule";
      return Outcome::Diverge;
    }
    if (!std::equal(lag_.begin(), lag_.end(), op_.symbols.begin() + static_cast<std::ptrdiff_t>(op_.cursor),
                    op_.symbols.end())) {
      detail_ = "live strings differ";
      return Outcome::Diverge;
    }
    return Outcome::Agree;
  }

  std::size_t steps() const { return steps_; }
  SymbolString lag_string() const { return SymbolString(lag_.begin(), lag_.end()); }
  SymbolString model_string() const { return op_.live(); }
  std::optional<HaltReason> lag_halt() const { return lag_halt_; }
  std::optional<FailureKind> violation() const { return violation_; }
  const std::string& detail() const { return detail_; }

 private:
  const LagSystem* system_;
  const Backend<Unit>* model_;
  const SimulationConfig<Unit>* cfg_;
  std::deque<SymbolId> lag_;
  OperationalString op_;
  std::size_t steps_ = 0;
  std::optional<HaltReason> lag_halt_;
  std::optional<FailureKind> violation_;
  std::string detail_;
};

/// Runs the model under extended decoding and the Lag engine side by side
/// for up to `steps` steps and reports the first divergence.
template <typename Unit>
CosimReport cosimulate(const Backend<Unit>& model, const Codebook& codebook, const std::vector<Unit>& system_prompt,
                       const LagSystem& system, const SymbolString& input, std::size_t steps) {
  SimulationConfig<Unit> cfg;
  cfg.system_prompt = system_prompt;
  cfg.codebook = &codebook;
  cfg.step_budget = steps;
  CosimReport rep;
  rep.steps_requested = steps;
  Lockstep<Unit> ls(system, model, cfg, input);
  for (std::size_t k = 0; k < steps; ++k) {
    auto outcome = ls.step();
    if (outcome == Lockstep<Unit>::Outcome::LagHalted) {
      rep.lag_halt = ls.lag_halt();
      break;
    }
    if (outcome == Lockstep<Unit>::Outcome::Diverge) {
      rep.divergence_step = ls.steps();
      rep.model_violation = ls.violation();
      rep.detail = ls.detail();
      rep.expected = ls.lag_string();
      rep.observed = ls.model_string();
      rep.lag_halt = ls.lag_halt();
      break;
    }
    ++rep.steps_compared;
  }
  return rep;
}

struct EndToEndReport {
  bool pass = false;
  std::string failed_stage;  // "", "verify", "cosimulate", "decode", "compare", "halting"
  std::string detail;
  std::size_t tm_steps_checked = 0;
  std::size_t lag_steps = 0;
  bool tm_halted = false;
  bool lag_halted = false;
  std::optional<VerificationReport> verification;
};

/// Three-way check TM = Lag = model on a compiled machine: verifies all
/// rules, then co-simulates macro step by macro step, decoding each
/// checkpoint and comparing it with the machine's own trace.
template <typename Unit>
EndToEndReport end_to_end_tm_check(const CompiledLag& compiled, const Backend<Unit>& model, const Codebook& codebook,
                                   const std::vector<Unit>& system_prompt, const TMConfiguration& start,
                                   std::size_t tm_steps) {
  EndToEndReport rep;
  rep.verification = verify_rules(model, codebook, system_prompt, compiled.system());
  if (!rep.verification->all_passed()) {
    rep.failed_stage = "verify";
    rep.detail = std::to_string(rep.verification->failed) + " rule(s) failed";
    return rep;
  }
  const TMTrace tm = tm_run(compiled.machine(), start, tm_steps);
  rep.tm_halted = tm.end == TMHalt::Halted;

  SimulationConfig<Unit> cfg;
  cfg.system_prompt = system_prompt;
  cfg.codebook = &codebook;
  SymbolString checkpoint = compiled.encode_config(start);
  Lockstep<Unit> ls(compiled.system(), model, cfg, checkpoint);

  for (std::size_t i = 0; i + 1 < tm.configs.size(); ++i) {
    const std::size_t bound = CompiledLag::macro_bound_for_length(checkpoint.size());
    for (std::size_t k = 0; k < bound; ++k) {
      auto outcome = ls.step();
      if (outcome != Lockstep<Unit>::Outcome::Agree) {
        rep.failed_stage = outcome == Lockstep<Unit>::Outcome::Diverge ? "cosimulate" : "halting";
        rep.detail = outcome == Lockstep<Unit>::Outcome::Diverge
                         ? ls.detail()
                         : "Lag system halted mid-step while the machine can still move";
        rep.lag_steps = ls.steps();
        return rep;
      }
    }
    checkpoint = ls.model_string();
    auto decoded = compiled.decode_config(checkpoint);
    if (!decoded) {
      rep.failed_stage = "decode";
      rep.detail = "string after macro step " + std::to_string(i + 1) + " is not a checkpoint";
      rep.lag_steps = ls.steps();
      return rep;
    }
    TMConfiguration want = tm.configs[i + 1];
    canonicalize(want, compiled.machine().blank());
    canonicalize(*decoded, compiled.machine().blank());
    if (!(want == *decoded)) {
      rep.failed_stage = "compare";
      rep.detail = "decoded configuration differs from the machine after step " + std::to_string(i + 1);
      rep.lag_steps = ls.steps();
      return rep;
    }
    ++rep.tm_steps_checked;
  }

  if (rep.tm_halted) {
    // The halted configuration must stop the Lag system within one macro step.
    const std::size_t bound = CompiledLag::macro_bound_for_length(checkpoint.size());
    for (std::size_t k = 0; k < bound && !rep.lag_halted; ++k) {
      auto outcome = ls.step();
      if (outcome == Lockstep<Unit>::Outcome::Diverge) {
        rep.failed_stage = "cosimulate";
        rep.detail = ls.detail();
        rep.lag_steps = ls.steps();
        return rep;
      }
      rep.lag_halted = outcome == Lockstep<Unit>::Outcome::LagHalted;
    }
    if (!rep.lag_halted) {
      rep.failed_stage = "halting";
      rep.detail = "machine halted but the Lag system completed another macro step";
      rep.lag_steps = ls.steps();
      return rep;
    }
  }
  rep.lag_steps = ls.steps();
  rep.pass = true;
  return rep;
}

}  // namespace lagsim
