#include "lagsim/decoding.hpp"

#include "json.hpp"

namespace lagsim {

std::string to_string(FailureKind k) {
  switch (k) {
    case FailureKind::WrongSymbol: return "WrongSymbol";
    case FailureKind::NoHalt: return "NoHalt";
    case FailureKind::EmptyProduction: return "EmptyProduction";
    case FailureKind::ParseFailure: return "ParseFailure";
    case FailureKind::Transport: return "Transport";
  }
  return "?";
}

std::string simulation_line(const Alphabet& alphabet, std::size_t step, const SymbolString& appended,
                            std::size_t cursor, std::size_t string_len, const SymbolString* snapshot) {
  nlohmann::json j;
  j["step"] = step;
  j["appended"] = render_symbols(alphabet, appended);
  j["cursor"] = cursor;
  j["string_len"] = string_len;
  if (snapshot) j["string"] = render_symbols(alphabet, *snapshot);
  return j.dump();
}

}  // namespace lagsim
