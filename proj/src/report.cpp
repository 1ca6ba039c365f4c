#include "lagsim/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "lagsim/error.hpp"

namespace lagsim {

namespace {

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string row_prefix(const SweepRow& r) {
  std::ostringstream out;
  out << r.arch << ',' << r.d << ',' << r.seed << ',' << (r.success ? "true" : "false") << ','
      << (r.iterations ? std::to_string(*r.iterations) : "") << ',' << fmt(r.log_time_metric, 6);
  return out.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& config_hash, const std::string& seed) {
  std::ostringstream out;
  out << "# lagsim " << LAGSIM_VERSION << " config=" << config_hash << " seed=" << seed << '\n';
  out << kSweepHeader << '\n';
  for (const auto& r : rows) out << row_prefix(r) << ',' << fmt(r.wall_seconds, 3) << '\n';
  return out.str();
}

std::string sweep_fingerprint(const std::vector<SweepRow>& rows) {
  std::string s;
  for (const auto& r : rows) s += row_prefix(r) + '\n';
  return s;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::vector<SweepRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kSweepHeader) throw SyntaxError(line_no, "expected sweep CSV header");
      header_seen = true;
      continue;
    }
    auto f = split(line, ',');
    if (f.size() != 7) throw SyntaxError(line_no, "expected 7 fields");
    try {
      SweepRow r;
      r.arch = f[0];
      r.d = std::stol(f[1]);
      r.seed = std::stoull(f[2]);
      r.success = f[3] == "true";
      if (!f[4].empty()) r.iterations = std::stoull(f[4]);
      r.log_time_metric = std::stod(f[5]);
      r.wall_seconds = std::stod(f[6]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw SyntaxError(line_no, "malformed number");
    }
  }
  if (!header_seen) throw SyntaxError(line_no, "missing sweep CSV header");
  return rows;
}

std::vector<PlotPoint> plot_points(const std::vector<SweepRow>& rows) {
  std::map<std::string, std::map<long long, std::vector<double>>> by_arch;
  std::map<std::string, std::map<std::uint64_t, std::map<long long, double>>> by_seed;
  for (const auto& r : rows) {
    if (!r.error.empty()) continue;
    by_arch[r.arch][r.d].push_back(r.log_time_metric);
    by_seed[r.arch][r.seed][r.d] = r.log_time_metric;
  }
  std::vector<PlotPoint> pts;
  for (const auto& [arch, seeds] : by_seed)
    for (const auto& [seed, series] : seeds)
      for (const auto& [d, v] : series) pts.push_back({arch, "seed=" + std::to_string(seed), d, v});
  for (const auto& [arch, dims] : by_arch)
    for (const auto& [d, vals] : dims) {
      double sum = 0.0;
      for (double v : vals) sum += v;
      pts.push_back({arch, "mean", d, sum / static_cast<double>(vals.size())});
    }
  return pts;
}

std::string plot_csv(const std::vector<PlotPoint>& points) {
  std::ostringstream out;
  out << "arch,series,d,log_time_metric\n";
  for (const auto& p : points) out << p.arch << ',' << p.series << ',' << p.d << ',' << fmt(p.value, 6) << '\n';
  return out.str();
}

std::string plot_svg(const std::vector<PlotPoint>& points) {
  const double width = 640, height = 400, margin = 50;
  double x_min = 0, x_max = 1, y_min = -1;
  bool first = true;
  for (const auto& p : points) {
    const double x = std::log2(static_cast<double>(std::max(1LL, p.d)));
    if (first) x_min = x_max = x, first = false;
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
    y_min = std::min(y_min, p.value);
  }
  if (x_max == x_min) x_max = x_min + 1;
  auto sx = [&](long long d) {
    return margin + (std::log2(static_cast<double>(std::max(1LL, d))) - x_min) / (x_max - x_min) * (width - 2 * margin);
  };
  auto sy = [&](double v) { return margin + (v / y_min) * (height - 2 * margin); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::map<std::string, std::map<std::string, std::vector<const PlotPoint*>>> lines;
  for (const auto& p : points) lines[p.arch][p.series].push_back(&p);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << width - margin << "\" y2=\"" << margin
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">dimension (log2)</text>\n";
  out << "<text x=\"12\" y=\"" << height / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 12 " << height / 2 << ")\">log time-to-universality</text>\n";
  std::set<long long> ticks;
  for (const auto& p : points) ticks.insert(p.d);
  for (long long d : ticks)
    out << "<text x=\"" << fmt(sx(d), 1) << "\" y=\"" << margin - 8 << "\" text-anchor=\"middle\" font-size=\"10\">"
        << d << "</text>\n";
  std::size_t ci = 0;
  for (const auto& [arch, series] : lines) {
    const char* color = colors[ci++ % 4];
    for (const auto& [name, pts] : series) {
      const bool mean = name == "mean";
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << (mean ? 2.5 : 1)
          << "\" stroke-opacity=\"" << (mean ? 1.0 : 0.25) << "\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i)
        out << (i ? " " : "") << fmt(sx(pts[i]->d), 1) << ',' << fmt(sy(pts[i]->value), 1);
      out << "\"/>\n";
    }
    out << "<text x=\"" << width - margin - 80 << "\" y=\"" << height - margin - 20.0 * static_cast<double>(ci)
        << "\" fill=\"" << color << "\" font-size=\"12\">" << arch << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string stats_table(const CompileStats& s, const ReferenceStats& ref) {
  std::ostringstream out;
  auto row = [&](const char* name, std::size_t got, std::size_t want) {
    out << name << ": " << got << " (reference " << want << (got == want ? ", match" : ", differs") << ")\n";
  };
  row("rules", s.rule_count, ref.rules);
  row("symbols", s.symbol_count, ref.symbols);
  row("two-output rules", s.two_output_rule_count, ref.two_output_rules);
  return out.str();
}

bool stats_match(const CompileStats& s, const ReferenceStats& ref) {
  return s.rule_count == ref.rules && s.symbol_count == ref.symbols && s.two_output_rule_count == ref.two_output_rules;
}

}  // namespace lagsim
