#include "lagsim/verification.hpp"

#include <chrono>
#include <ctime>

#include "json.hpp"

namespace lagsim {

namespace {

nlohmann::json labels(const Alphabet& a, const SymbolString& s) {
  auto arr = nlohmann::json::array();
  for (SymbolId id : s) arr.push_back(a.contains(id) ? a.label(id) : "#" + std::to_string(id));
  return arr;
}

nlohmann::json report_body(const VerificationReport& r, const Alphabet& a, bool full, const Provenance& provenance) {
  nlohmann::json j;
  j["toolkit_version"] = LAGSIM_VERSION;
  for (const auto& [k, v] : provenance) j[k] = v;
  j["system_hash"] = r.system_hash;
  j["backend"] = r.backend;
  j["codebook_hash"] = r.codebook_hash;
  j["prompt_hash"] = r.prompt_hash;
  auto verdicts = nlohmann::json::array();
  for (const auto& v : r.verdicts) {
    if (!full && v.pass) continue;
    nlohmann::json e;
    e["lhs"] = labels(a, v.rule.lhs);
    e["rhs"] = labels(a, v.rule.rhs);
    e["context"] = v.context;
    e["expected"] = labels(a, v.expected);
    e["observed"] = labels(a, v.observed);
    e["pass"] = v.pass;
    e["failure"] = v.failure ? nlohmann::json(to_string(*v.failure)) : nlohmann::json(nullptr);
    if (!v.detail.empty()) e["detail"] = v.detail;
    verdicts.push_back(std::move(e));
  }
  j["verdicts"] = std::move(verdicts);
  j["summary"] = {{"total", r.total()}, {"passed", r.passed}, {"failed", r.failed}};
  return j;
}

}  // namespace

const RuleVerdict* VerificationReport::first_failure() const {
  for (const auto& v : verdicts)
    if (!v.pass) return &v;
  return nullptr;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string report_to_json(const VerificationReport& r, const Alphabet& alphabet, bool full,
                           const Provenance& provenance) {
  auto j = report_body(r, alphabet, full, provenance);
  j["metadata"] = {{"timestamp", r.timestamp}};
  return j.dump(2) + "\n";
}

std::string report_fingerprint(const VerificationReport& r, const Alphabet& alphabet,
                               const Provenance& provenance) {
  return report_body(r, alphabet, true, provenance).dump();
}

}  // namespace lagsim
