#pragma once

#include <string>
#include <vector>

#include "lagsim/compiler.hpp"
#include "lagsim/trainer.hpp"

namespace lagsim {

inline constexpr const char* kSweepHeader = "arch,d,seed,success,iterations,log_time_metric,wall_seconds";

/// CSV with a leading `# lagsim <version> config=<hash> seed=<seed>` line.
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& config_hash, const std::string& seed);
/// Inverse of sweep_csv (comment lines skipped). Throws SyntaxError.
std::vector<SweepRow> parse_sweep_csv(const std::string& text);
/// The CSV without the wall_seconds column, for determinism comparisons.
std::string sweep_fingerprint(const std::vector<SweepRow>& rows);

struct PlotPoint {
  std::string arch;
  std::string series;  // "mean" or "seed=<n>"
  long long d = 0;
  double value = 0.0;
};

/// Per-seed series and per-dimension means of log_time_metric, grouped by
/// architecture and sorted by d.
std::vector<PlotPoint> plot_points(const std::vector<SweepRow>& rows);
std::string plot_csv(const std::vector<PlotPoint>& points);
/// Static line chart: faded per-seed lines, solid mean line per architecture.
std::string plot_svg(const std::vector<PlotPoint>& points);

struct ReferenceStats {
  std::size_t rules = 1857;
  std::size_t symbols = 249;
  std::size_t two_output_rules = 14;
};

/// Human-readable table of `stats` against `reference`.
std::string stats_table(const CompileStats& stats, const ReferenceStats& reference = {});
bool stats_match(const CompileStats& stats, const ReferenceStats& reference = {});

}  // namespace lagsim
