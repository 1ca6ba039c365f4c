#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "lagsim/backend_config.hpp"
#include "lagsim/compiler.hpp"
#include "lagsim/config.hpp"
#include "lagsim/error.hpp"
#include "lagsim/hashing.hpp"
#include "lagsim/report.hpp"
#include "lagsim/trainer.hpp"
#include "lagsim/turing.hpp"
#include "lagsim/verification.hpp"

using namespace lagsim;
namespace fs = std::filesystem;

namespace {

constexpr int kExitMalformed = 2;

struct Globals {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out;
};

// Writes to --out when given, else stdout.
void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
}

std::string header_line(const std::string& config_hash, std::uint64_t seed) {
  nlohmann::json j;
  j["lagsim"] = LAGSIM_VERSION;
  j["config_hash"] = config_hash;
  j["seed"] = std::to_string(seed);
  return j.dump() + "\n";
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

SymbolString parse_input(const Alphabet& a, const std::string& text) { return parse_symbols(a, text); }

const std::vector<Token>& prompt_of(const TokenSetup& s) { return s.prompt; }
std::vector<Eigen::VectorXd> prompt_of(const VectorSetup&) { return {}; }

TMConfiguration tm_start(const TuringMachine& m, const std::string& tape, std::size_t head) {
  std::vector<int> cells;
  for (const auto& w : words(tape)) {
    auto id = m.find_symbol(w);
    if (!id) throw ForeignSymbol("tape symbol '" + w + "' is not in the machine's alphabet");
    cells.push_back(*id);
  }
  return initial_configuration(m, cells, head);
}

int run_tm_cmd(const Globals& g, const std::string& path, const std::string& tape, std::size_t head,
               std::size_t budget) {
  const std::string text = read_file(path);
  auto m = parse_tm(text);
  auto trace = tm_run(m, tm_start(m, tape, head), budget);
  std::string out = header_line(sha256_hex(text + "\n" + tape + "\n" + std::to_string(head)), g.seed);
  for (std::size_t i = 0; i < trace.configs.size(); ++i) out += tm_trace_line(m, i, trace.configs[i]) + "\n";
  nlohmann::json end;
  end["end"] = trace.end == TMHalt::Halted ? "halted" : "step_budget";
  end["steps"] = trace.configs.size() - 1;
  out += end.dump() + "\n";
  emit(g.out, out);
  return 0;
}

int run_lag_cmd(const Globals& g, const std::string& path, const std::string& input, std::size_t budget) {
  auto system = load_lag_system(path);
  auto problems = validate(system);
  if (!problems.empty()) {
    for (const auto& v : problems) std::cerr << v.kind << ": " << v.message << '\n';
    return kExitMalformed;
  }
  std::string out = header_line(sha256_hex(system.to_rule_file() + "\n" + input), g.seed);
  auto [halt, steps] = run_visit(system, parse_input(system.alphabet(), input), budget,
                                 [&](std::size_t k, const std::deque<SymbolId>& s) {
                                   out += trace_line(system.alphabet(), k, s) + "\n";
                                 });
  nlohmann::json end;
  end["halt"] = to_string(halt);
  end["steps"] = steps;
  out += end.dump() + "\n";
  emit(g.out, out);
  return 0;
}

int compile_cmd(const Globals& g, const std::string& path) {
  if (!fs::exists(path)) throw Error("machine file not found: " + path);
  auto m = parse_tm(read_file(path));
  auto compiled = compile(m);
  const fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
  const fs::path rules = dir / (fs::path(path).stem().string() + ".lag");
  fs::path sidecar = rules;
  sidecar += ".json";
  write_file_atomic(rules.string(), compiled.system().to_rule_file());
  write_file_atomic(sidecar.string(), compiled.sidecar_json());
  const auto st = compiled.stats();
  std::cout << "wrote " << rules.string() << " and " << sidecar.string() << '\n'
            << "rules: " << st.rule_count << "\nsymbols: " << st.symbol_count
            << "\ntwo-output rules: " << st.two_output_rule_count << '\n';
  return 0;
}

struct Loaded {
  LagSystem system;
  BackendSetup backend;
  std::string config_hash;
};

Loaded load_with_backend(const std::string& rules_path, const std::string& backend_path) {
  auto system = load_lag_system(rules_path);
  auto problems = validate(system);
  if (!problems.empty()) throw Error(problems.front().kind + ": " + problems.front().message);
  const std::string toml = read_file(backend_path);
  auto table = ConfigTable::parse(toml);
  auto backend = make_backend(table, system, fs::path(backend_path).parent_path());
  std::string hash = sha256_hex(system.to_rule_file() + "\n" + toml);
  return Loaded{std::move(system), std::move(backend), std::move(hash)};
}

int verify_cmd(const Globals& g, const std::string& rules_path, const std::string& backend_path,
               const std::string& format) {
  auto l = load_with_backend(rules_path, backend_path);
  VerificationReport rep = std::visit(
      [&](const auto& s) { return verify_rules(*s.backend, *s.codebook, prompt_of(s), l.system, g.workers); },
      l.backend);
  const Provenance prov{{"config_hash", l.config_hash}, {"seed", std::to_string(g.seed)}};
  if (!g.out.empty()) write_file_atomic(g.out, report_to_json(rep, l.system.alphabet(), true, prov));
  if (format == "full" && g.out.empty()) {
    std::cout << report_to_json(rep, l.system.alphabet(), true, prov);
  } else {
    std::cout << "rules: " << rep.total() << "  passed: " << rep.passed << "  failed: " << rep.failed << '\n';
    for (const auto& v : rep.verdicts)
      if (!v.pass)
        std::cout << "FAIL " << join_symbols(l.system.alphabet(), v.rule.lhs) << " -> "
                  << join_symbols(l.system.alphabet(), v.rule.rhs) << ": "
                  << (v.failure ? to_string(*v.failure) : "") << " observed ["
                  << join_symbols(l.system.alphabet(), v.observed) << "]\n";
  }
  return rep.all_passed() ? 0 : 1;
}

std::string render_cosim(const CosimReport& r, const Alphabet& a) {
  std::ostringstream out;
  out << "steps compared: " << r.steps_compared << " of " << r.steps_requested << '\n';
  if (r.lag_halt) out << "lag halt: " << to_string(*r.lag_halt) << '\n';
  if (r.divergence_step) {
    out << "DIVERGENCE at step " << *r.divergence_step << ": " << r.detail << '\n'
        << "  expected: " << join_symbols(a, r.expected) << '\n'
        << "  observed: " << join_symbols(a, r.observed) << '\n';
  } else {
    out << "agreement\n";
  }
  return out.str();
}

int cosim_cmd(const Globals& g, const std::string& rules_path, const std::string& backend_path,
              const std::string& input, std::size_t steps, const std::string& tm_path, const std::string& tape,
              std::size_t head) {
  if (!tm_path.empty()) {
    // Three-way check against the machine the rules were compiled from.
    auto m = parse_tm(read_file(tm_path));
    auto compiled = compile(m);
    auto table = ConfigTable::parse(read_file(backend_path));
    auto setup = make_backend(table, compiled.system(), fs::path(backend_path).parent_path());
    auto rep = std::visit(
        [&](const auto& s) {
          return end_to_end_tm_check(compiled, *s.backend, *s.codebook, prompt_of(s), tm_start(m, tape, head), steps);
        },
        setup);
    std::cout << "machine steps checked: " << rep.tm_steps_checked << "\nlag steps: " << rep.lag_steps
              << "\nmachine halted: " << (rep.tm_halted ? "yes" : "no")
              << "\nlag halted: " << (rep.lag_halted ? "yes" : "no") << '\n';
    if (!rep.pass) std::cout << "FAILED at " << rep.failed_stage << ": " << rep.detail << '\n';
    (void)rules_path;
    return rep.pass ? 0 : 1;
  }
  auto l = load_with_backend(rules_path, backend_path);
  auto rep = std::visit(
      [&](const auto& s) {
        return cosimulate(*s.backend, *s.codebook, prompt_of(s), l.system, parse_input(l.system.alphabet(), input),
                          steps);
      },
      l.backend);
  const std::string text = render_cosim(rep, l.system.alphabet());
  if (!g.out.empty()) write_file_atomic(g.out, header_line(l.config_hash, g.seed) + text);
  std::cout << text;
  return rep.agreed() ? 0 : 1;
}

TrainConfig train_config_from(const ConfigTable& t, TrainConfig c) {
  c.step_size = t.get_number("train.step_size", c.step_size);
  c.max_iterations = static_cast<std::size_t>(t.get_number("train.max_iterations", static_cast<double>(c.max_iterations)));
  c.verify_every = static_cast<std::size_t>(t.get_number("train.verify_every", static_cast<double>(c.verify_every)));
  c.loss.commitment_weight = t.get_number("train.commitment_weight", c.loss.commitment_weight);
  c.loss.distance_weight = t.get_number("train.distance_weight", c.loss.distance_weight);
  return c;
}

std::string train_config_text(const TrainConfig& c) {
  std::ostringstream s;
  s << "step_size=" << c.step_size << " max_iterations=" << c.max_iterations << " verify_every=" << c.verify_every
    << " commitment=" << c.loss.commitment_weight << " distance=" << c.loss.distance_weight;
  return s.str();
}

int train_cmd(const Globals& g, const std::string& rules_path, const std::string& arch, long d,
              const TrainConfig& cfg_in) {
  auto system = load_lag_system(rules_path);
  TrainConfig cfg = cfg_in;
  cfg.seed = g.seed;
  auto net = sweep_backend(arch, d, g.seed);
  auto res = train_codebook(*net, system, cfg, [](std::size_t it, double loss, std::size_t p, std::size_t n) {
    std::cerr << "iteration " << it << " loss " << loss << " verified " << p << "/" << n << '\n';
  });
  const fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
  const std::string config_hash = sha256_hex(system.to_rule_file() + "\n" + arch + " " + std::to_string(d) + " " +
                                             train_config_text(cfg));
  nlohmann::json j;
  j["lagsim"] = LAGSIM_VERSION;
  j["config_hash"] = config_hash;
  j["seed"] = std::to_string(g.seed);
  j["arch"] = arch;
  j["d"] = d;
  j["success"] = res.success;
  j["iterations_to_universality"] = res.iterations_to_universality ? nlohmann::json(*res.iterations_to_universality)
                                                                   : nlohmann::json(nullptr);
  j["log_time_metric"] = res.log_time_metric;
  j["backend_hash"] = res.backend_hash_after;
  j["backend_frozen"] = res.backend_hash_before == res.backend_hash_after;
  write_file_atomic((dir / "train.json").string(), j.dump(2) + "\n");
  if (res.codebook) {
    write_file_atomic((dir / "codebook.json").string(), codebook_to_json(*res.codebook, system.alphabet()));
    std::ostringstream toml;
    toml << "# lagsim " << LAGSIM_VERSION << " config=" << config_hash << " seed=" << g.seed << "\n[backend]\nkind = \""
         << arch << "\"\nd = " << d << "\nseed = " << g.seed << "\ncodebook = \"codebook.json\"\n";
    write_file_atomic((dir / "backend.toml").string(), toml.str());
  }
  std::cout << (res.success ? "universal after " + std::to_string(*res.iterations_to_universality) + " iterations"
                            : "budget reached without universality")
            << "\nlog_time_metric: " << res.log_time_metric << '\n';
  return res.success ? 0 : 1;
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    if constexpr (std::is_same_v<T, std::string>) {
      out.push_back(item);
    } else {
      try {
        out.push_back(static_cast<T>(std::stoll(item)));
      } catch (const std::logic_error&) {
        throw ConfigError("not an integer: '" + item + "'");
      }
    }
  }
  return out;
}

int sweep_cmd(const Globals& g, const std::string& rules_path, const std::string& archs, const std::string& dims,
              const std::string& seeds, const TrainConfig& cfg) {
  auto system = load_lag_system(rules_path);
  const auto a = parse_list<std::string>(archs);
  const auto d = parse_list<Eigen::Index>(dims);
  const auto s = parse_list<std::uint64_t>(seeds);
  const std::string config_hash =
      sha256_hex(system.to_rule_file() + "\n" + archs + "|" + dims + "|" + seeds + "|" + train_config_text(cfg));
  auto rows = sweep(a, d, s, system, cfg, g.workers, [](const SweepRow& r) {
    std::cerr << r.arch << " d=" << r.d << " seed=" << r.seed << (r.success ? " success at " : " failure")
              << (r.iterations ? std::to_string(*r.iterations) : "") << (r.error.empty() ? "" : " error: " + r.error)
              << '\n';
  });
  const fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
  write_file_atomic((dir / "sweep.csv").string(), sweep_csv(rows, config_hash, seeds));
  auto pts = plot_points(rows);
  write_file_atomic((dir / "plot.csv").string(), plot_csv(pts));
  write_file_atomic((dir / "plot.svg").string(), plot_svg(pts));
  std::cout << "wrote " << rows.size() << " rows to " << (dir / "sweep.csv").string() << '\n';
  return 0;
}

int report_cmd(const Globals& g, const std::string& sweep_path, const std::string& rules_path) {
  if (!rules_path.empty()) {
    auto system = load_lag_system(rules_path);
    CompileStats st;
    st.rule_count = system.rules().size();
    st.symbol_count = system.alphabet().size() - 1;
    st.two_output_rule_count = system.two_output_rule_count();
    std::cout << stats_table(st);
  }
  if (!sweep_path.empty()) {
    auto rows = parse_sweep_csv(read_file(sweep_path));
    auto pts = plot_points(rows);
    const fs::path dir = g.out.empty() ? fs::path(sweep_path).parent_path() : fs::path(g.out);
    write_file_atomic((dir / "plot.csv").string(), plot_csv(pts));
    write_file_atomic((dir / "plot.svg").string(), plot_svg(pts));
    for (const auto& p : pts)
      if (p.series == "mean") std::cout << p.arch << " d=" << p.d << " mean log_time_metric " << p.value << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lag-system simulation and proof-of-simulation toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed recorded in every output");
  app.add_option("--workers", g.workers, "Worker threads for verify and sweep")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output file or directory");
  app.set_version_flag("--version", LAGSIM_VERSION);

  std::string path, backend, input, tape, tm_path, format = "summary", arch = "rnn", sweep_path, rules_path;
  std::string archs = "rnn,attention", dims = "4,16,64", seeds = "0,1,2,3,4", train_toml;
  std::size_t budget = 1000, head = 0, steps = 1000;
  long d = 64;
  TrainConfig tcfg;

  auto* run_tm = app.add_subcommand("run-tm", "Run a Turing machine and write a JSON Lines trace");
  run_tm->add_option("machine", path)->required();
  run_tm->add_option("--tape", tape, "Whitespace-separated tape symbols");
  run_tm->add_option("--head", head, "Initial head index");
  run_tm->add_option("--budget", budget, "Step budget");

  auto* run_lag = app.add_subcommand("run-lag", "Run a Lag system and write a JSON Lines trace");
  run_lag->add_option("rules", path)->required();
  run_lag->add_option("--input", input, "Whitespace-separated symbols")->required();
  run_lag->add_option("--budget", budget, "Step budget");

  auto* compile_sc = app.add_subcommand("compile", "Compile a Turing machine into a Lag rule file");
  compile_sc->add_option("machine", path)->required();

  auto* verify = app.add_subcommand("verify", "Check every production rule against a backend");
  verify->add_option("rules", path)->required();
  verify->add_option("--backend", backend, "Backend TOML")->required();
  verify->add_option("--format", format, "summary or full")->check(CLI::IsMember({"summary", "full"}));

  auto* cosim = app.add_subcommand("cosim", "Co-simulate a backend against the Lag engine");
  cosim->add_option("rules", path);
  cosim->add_option("--backend", backend, "Backend TOML")->required();
  cosim->add_option("--input", input, "Whitespace-separated start symbols");
  cosim->add_option("--steps", steps, "Steps (machine steps with --tm)");
  cosim->add_option("--tm", tm_path, "Machine file: run the machine/Lag/model three-way check");
  cosim->add_option("--tape", tape, "Tape for --tm");
  cosim->add_option("--head", head, "Head index for --tm");

  auto add_train_opts = [&](CLI::App* sc) {
    sc->add_option("--max-iterations", tcfg.max_iterations, "Iteration budget");
    sc->add_option("--verify-every", tcfg.verify_every, "Iterations between discrete verifications");
    sc->add_option("--step-size", tcfg.step_size, "Adam step size");
    sc->add_option("--config", train_toml, "TOML with a [train] table");
  };
  auto* train = app.add_subcommand("train", "Train a codebook for a frozen random backend");
  train->add_option("rules", path)->required();
  train->add_option("--arch", arch, "rnn or attention")->check(CLI::IsMember({"rnn", "attention"}));
  train->add_option("--d", d, "Backend dimension")->check(CLI::PositiveNumber);
  add_train_opts(train);

  auto* sweep_sc = app.add_subcommand("sweep", "Train over architectures x dimensions x seeds");
  sweep_sc->add_option("rules", path)->required();
  sweep_sc->add_option("--archs", archs, "Comma-separated architectures");
  sweep_sc->add_option("--dims", dims, "Comma-separated dimensions");
  sweep_sc->add_option("--seeds", seeds, "Comma-separated seeds");
  add_train_opts(sweep_sc);

  auto* report = app.add_subcommand("report", "Plot data from a sweep CSV; rule-table statistics");
  report->add_option("--sweep", sweep_path, "Sweep CSV");
  report->add_option("--rules", rules_path, "Rule file to summarize");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitMalformed;
  }

  try {
    if (!train_toml.empty()) tcfg = train_config_from(ConfigTable::load(train_toml), tcfg);
    if (*run_tm) return run_tm_cmd(g, path, tape, head, budget);
    if (*run_lag) return run_lag_cmd(g, path, input, budget);
    if (*compile_sc) return compile_cmd(g, path);
    if (*verify) return verify_cmd(g, path, backend, format);
    if (*cosim) return cosim_cmd(g, path, backend, input, steps, tm_path, tape, head);
    if (*train) return train_cmd(g, path, arch, d, tcfg);
    if (*sweep_sc) return sweep_cmd(g, path, archs, dims, seeds, tcfg);
    if (*report) return report_cmd(g, sweep_path, rules_path);
  } catch (const SyntaxError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMalformed;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMalformed;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
