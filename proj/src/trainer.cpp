#include "lagsim/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "lagsim/error.hpp"
#include "lagsim/verification.hpp"

namespace lagsim {

using Eigen::Index;
using Eigen::MatrixXd;

namespace {

constexpr double kNormEps = 1e-5;

MatrixXd gaussian(GaussianStream& g, Index rows, Index cols, double sd) { return g.matrix(rows, cols, sd); }

std::vector<ad::Var> tape_outputs_recurrent(ad::Tape& t, const RecurrentParams<double>& p,
                                            std::span<const ad::Var> xs) {
  const Index n = xs[0].cols();
  ad::Var w_in = t.constant(p.w_in), w_rec = t.constant(p.w_rec), w_out = t.constant(p.w_out);
  ad::Var b = t.constant(p.b), c = t.constant(p.c);
  ad::Var state = t.constant(MatrixXd::Zero(p.w_rec.rows(), n));
  std::vector<ad::Var> outs;
  for (ad::Var x : xs) {
    state = ad::tanh(ad::add_col(ad::add(ad::matmul(w_rec, state), ad::matmul(w_in, x)), b));
    outs.push_back(ad::add_col(ad::matmul(w_out, state), c));
  }
  return outs;
}

std::vector<ad::Var> tape_outputs_attention(ad::Tape& t, const AttentionParams<double>& p,
                                            std::span<const ad::Var> xs) {
  const Index d = p.w_out.cols();
  const Index dh = d / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Var> h(xs.begin(), xs.end());
  for (const auto& blk : p.blocks) {
    ad::Var wq = t.constant(blk.wq), wk = t.constant(blk.wk), wv = t.constant(blk.wv), wo = t.constant(blk.wo);
    std::vector<ad::Var> q, k, v;
    for (ad::Var x : h) {
      ad::Var n = ad::layer_norm_cols(x, kLayerNormEps);
      q.push_back(ad::matmul(wq, n));
      k.push_back(ad::matmul(wk, n));
      v.push_back(ad::matmul(wv, n));
    }
    std::vector<ad::Var> next;
    for (std::size_t pos = 0; pos < h.size(); ++pos) {
      std::vector<ad::Var> head_out;
      for (int head = 0; head < p.heads; ++head) {
        const Index r0 = head * dh;
        ad::Var qh = ad::rows(q[pos], r0, dh);
        std::vector<ad::Var> scores;
        for (std::size_t u = 0; u <= pos; ++u)
          scores.push_back(ad::scale(ad::col_sum(ad::cmul(qh, ad::rows(k[u], r0, dh))), scale));
        ad::Var w = ad::softmax_cols(ad::vstack(scores));
        ad::Var acc = ad::mul_row(ad::rows(w, 0, 1), ad::rows(v[0], r0, dh));
        for (std::size_t u = 1; u <= pos; ++u)
          acc = ad::add(acc, ad::mul_row(ad::rows(w, static_cast<Index>(u), 1), ad::rows(v[u], r0, dh)));
        head_out.push_back(acc);
      }
      next.push_back(ad::add(h[pos], ad::matmul(wo, ad::vstack(head_out))));
    }
    h = std::move(next);
  }
  ad::Var w_out = t.constant(p.w_out), c = t.constant(p.c);
  std::vector<ad::Var> outs;
  for (ad::Var x : h) outs.push_back(ad::add_col(ad::matmul(w_out, x), c));
  return outs;
}

std::vector<ad::Var> tape_outputs(ad::Tape& t, const SequenceNet& net, std::span<const ad::Var> xs) {
  if (auto* r = dynamic_cast<const RandomRecurrentNet*>(&net)) return tape_outputs_recurrent(t, r->params(), xs);
  if (auto* a = dynamic_cast<const RandomAttentionNet*>(&net)) return tape_outputs_attention(t, a->params(), xs);
  throw ConfigError("training supports the rnn and attention backends only");
}

MatrixXd nearest_columns(const MatrixXd& table, const MatrixXd& x) {
  MatrixXd q(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) q.col(j) = table.col(nearest_column(table, x.col(j)));
  return q;
}

}  // namespace

ResidualMlp ResidualMlp::init(Index in, Index hidden, Index out, GaussianStream& rng) {
  ResidualMlp m;
  m.w_in = gaussian(rng, hidden, in, 1.0 / std::sqrt(static_cast<double>(in)));
  m.b_in = MatrixXd::Zero(hidden, 1);
  for (auto& b : m.blocks) {
    b.gamma = MatrixXd::Ones(hidden, 1);
    b.beta = MatrixXd::Zero(hidden, 1);
    b.w = gaussian(rng, hidden, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)));
    b.b = MatrixXd::Zero(hidden, 1);
  }
  m.w_out = gaussian(rng, out, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)));
  m.b_out = MatrixXd::Zero(out, 1);
  return m;
}

std::vector<MatrixXd*> ResidualMlp::tensors() {
  std::vector<MatrixXd*> v{&w_in, &b_in};
  for (auto& b : blocks) v.insert(v.end(), {&b.gamma, &b.beta, &b.w, &b.b});
  v.insert(v.end(), {&w_out, &b_out});
  return v;
}

std::vector<const MatrixXd*> ResidualMlp::tensors() const {
  auto m = const_cast<ResidualMlp*>(this)->tensors();
  return {m.begin(), m.end()};
}

std::size_t ResidualMlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

MatrixXd ResidualMlp::apply(const MatrixXd& x) const {
  MatrixXd h = (w_in * x).colwise() + b_in.col(0);
  for (const auto& b : blocks) {
    MatrixXd a = layer_norm_cols(h);
    a = (b.gamma.col(0).asDiagonal() * a).colwise() + b.beta.col(0);
    h += (b.w * a.array().tanh().matrix()).colwise() + b.b.col(0);
  }
  return (w_out * layer_norm_cols(h)).colwise() + b_out.col(0);
}

ad::Var ResidualMlp::apply(ad::Tape&, ad::Var x, std::span<const ad::Var> p) const {
  if (p.size() != 12) throw Error("residual MLP expects 12 parameter tensors");
  ad::Var h = ad::add_col(ad::matmul(p[0], x), p[1]);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto* b = &p[2 + 4 * i];
    ad::Var a = ad::add_col(ad::mul_col(ad::layer_norm_cols(h, kNormEps), b[0]), b[1]);
    h = ad::add(h, ad::add_col(ad::matmul(b[2], ad::tanh(a)), b[3]));
  }
  return ad::add_col(ad::matmul(p[10], ad::layer_norm_cols(h, kNormEps)), p[11]);
}

CodebookNets CodebookNets::init(Index symbols, Index dimension, std::uint64_t seed) {
  if (symbols < 2) throw EmptyCodebook("need at least two symbols");
  if (dimension < 1) throw DimensionMismatch("dimension must be positive");
  GaussianStream rng(seed);
  CodebookNets n;
  n.symbols = symbols;
  n.dimension = dimension;
  n.encoder = ResidualMlp::init(symbols, 4 * dimension, dimension, rng);
  n.decoder = ResidualMlp::init(dimension, 4 * dimension, symbols, rng);
  return n;
}

std::vector<MatrixXd*> CodebookNets::tensors() {
  auto v = encoder.tensors();
  auto d = decoder.tensors();
  v.insert(v.end(), d.begin(), d.end());
  return v;
}

std::vector<const MatrixXd*> CodebookNets::tensors() const {
  auto m = const_cast<CodebookNets*>(this)->tensors();
  return {m.begin(), m.end()};
}

MatrixXd CodebookNets::codeword_table() const { return encoder.apply(MatrixXd::Identity(symbols, symbols)); }

Codebook CodebookNets::snapshot(SymbolId halt) const {
  auto dec = std::make_shared<const ResidualMlp>(decoder);
  VectorDecoder argmax = [dec](const Eigen::VectorXd& v) {
    Eigen::VectorXd scores = dec->apply(v);
    Index best = 0;
    for (Index i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[best]) best = i;
    return static_cast<SymbolId>(best);
  };
  return Codebook::vectors(codeword_table(), halt, std::move(argmax));
}

LossAndGrads loss_and_grads(const CodebookNets& nets, const SequenceNet& backend,
                            std::span<const ProductionRule> rules, SymbolId halt, const LossOptions& options) {
  if (rules.empty()) throw Error("no rules to train on");
  if (backend.dimension() != nets.dimension)
    throw DimensionMismatch("backend dimension " + std::to_string(backend.dimension()) + " != codebook dimension " +
                            std::to_string(nets.dimension));
  const Index k_sym = nets.symbols;
  ad::Tape t;
  std::vector<ad::Var> leaves;
  for (const auto* m : nets.tensors()) leaves.push_back(t.leaf(*m));
  const std::span<const ad::Var> enc(leaves.data(), 12), dec(leaves.data() + 12, 12);

  ad::Var table = nets.encoder.apply(t, t.constant(MatrixXd::Identity(k_sym, k_sym)), enc);

  const auto n = static_cast<Index>(rules.size());
  std::vector<Index> s1, s2, t1, p3;
  std::vector<Index> target2, target3;
  Eigen::VectorXd w3(n);
  for (Index r = 0; r < n; ++r) {
    const auto& rule = rules[static_cast<std::size_t>(r)];
    if (rule.lhs.size() != 2 || rule.rhs.empty() || rule.rhs.size() > 2) throw Error("rule shape not lag 2");
    for (SymbolId s : rule.lhs)
      if (s >= static_cast<SymbolId>(k_sym)) throw ForeignSymbol("rule symbol outside the codebook");
    const bool two = rule.rhs.size() == 2;
    s1.push_back(rule.lhs[0]);
    s2.push_back(rule.lhs[1]);
    t1.push_back(rule.rhs[0]);
    p3.push_back(two ? rule.rhs[1] : halt);
    target2.push_back(two ? rule.rhs[1] : halt);
    target3.push_back(halt);
    w3[r] = two ? 1.0 : 0.0;
  }
  const std::vector<ad::Var> inputs{ad::gather_cols(table, s1), ad::gather_cols(table, s2),
                                    ad::gather_cols(table, t1), ad::gather_cols(table, p3)};
  auto outs = tape_outputs(t, backend, inputs);
  const std::vector<ad::Var> raw{outs[1], outs[2], outs[3]};

  std::vector<ad::Var> decoder_in;
  std::vector<ad::Var> terms;
  if (options.relaxed) {
    decoder_in = raw;
  } else {
    for (ad::Var o : raw) decoder_in.push_back(ad::straight_through(o, nearest_columns(table.value(), o.value())));
  }
  decoder_in.push_back(table);

  std::vector<Index> targets(t1);
  targets.insert(targets.end(), target2.begin(), target2.end());
  targets.insert(targets.end(), target3.begin(), target3.end());
  Eigen::VectorXd weights(3 * n);
  weights << Eigen::VectorXd::Ones(2 * n), w3;
  std::vector<Index> all_targets(targets);
  Eigen::VectorXd all_weights(3 * n + k_sym);
  all_weights << weights, Eigen::VectorXd::Ones(k_sym);
  for (Index s = 0; s < k_sym; ++s) all_targets.push_back(s);

  ad::Var scores = nets.decoder.apply(t, ad::hstack(decoder_in), dec);
  terms.push_back(ad::cross_entropy_cols(scores, all_targets, all_weights));

  ad::Var raw_all = ad::hstack(raw);
  if (!options.relaxed && options.commitment_weight != 0.0) {
    ad::Var q = t.constant(nearest_columns(table.value(), raw_all.value()));
    terms.push_back(ad::scale(ad::weighted_sq_norm_cols(ad::sub(raw_all, q), weights), options.commitment_weight));
  }
  if (options.distance_weight != 0.0)
    terms.push_back(ad::scale(ad::cross_entropy_cols(ad::neg_sq_dist(table, raw_all), targets, weights),
                              options.distance_weight));

  ad::Var total = ad::sum_scalars(terms);
  LossAndGrads out;
  out.loss = total.value()(0, 0);
  if (!std::isfinite(out.loss)) {
    std::ostringstream msg;
    msg << "loss is " << out.loss << " (terms:";
    for (ad::Var v : terms) msg << ' ' << v.value()(0, 0);
    msg << ")";
    throw NonFiniteLoss(msg.str());
  }
  t.backward(total);
  for (ad::Var v : leaves) out.grads.push_back(t.grad(v));
  return out;
}

double log_time_metric(std::optional<std::size_t> k, std::size_t max_iterations) {
  if (!k) return 0.0;
  return std::log(static_cast<double>(*k) / static_cast<double>(max_iterations));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TrainResult train_codebook(const SequenceNet& backend, const LagSystem& system, const TrainConfig& config,
                           const TrainObserver& observer) {
  if (!(config.step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (config.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (config.verify_every < 1) throw ConfigError("verify_every must be at least 1");
  const auto halt = system.alphabet().halt();
  std::vector<ProductionRule> rules;
  for (const auto* r : system.sorted_rules()) rules.push_back(*r);

  TrainResult res;
  res.backend_hash_before = backend.parameter_hash();
  res.nets = CodebookNets::init(static_cast<Index>(system.alphabet().size()), backend.dimension(),
                                derive_seed(config.seed, 2));
  auto params = res.nets.tensors();
  std::vector<MatrixXd> m1, m2;
  for (auto* p : params) {
    m1.push_back(MatrixXd::Zero(p->rows(), p->cols()));
    m2.push_back(MatrixXd::Zero(p->rows(), p->cols()));
  }
  std::shared_ptr<const SequenceNet> net(&backend, [](const SequenceNet*) {});

  double b1t = 1.0, b2t = 1.0;
  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    auto lg = loss_and_grads(res.nets, backend, rules, halt, config.loss);
    res.final_loss = lg.loss;
    b1t *= config.beta1;
    b2t *= config.beta2;
    for (std::size_t i = 0; i < params.size(); ++i) {
      m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * lg.grads[i];
      m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * lg.grads[i].cwiseAbs2();
      *params[i] -= (config.step_size * (m1[i] / (1.0 - b1t)).array() /
                     ((m2[i] / (1.0 - b2t)).array().sqrt() + config.epsilon))
                        .matrix();
    }
    res.iterations_run = it;
    if (it % config.verify_every != 0) continue;

    auto book = std::make_shared<const Codebook>(res.nets.snapshot(halt));
    std::size_t passed = 0;
    if (check_codebook(*book, system.alphabet()).empty()) {
      NetBackend model(net, book);
      passed = verify_rules<Eigen::VectorXd>(model, *book, {}, system).passed;
    }
    if (observer) observer(it, lg.loss, passed, rules.size());
    if (passed == rules.size()) {
      res.success = true;
      res.iterations_to_universality = it;
      res.codebook = *book;
      break;
    }
  }
  res.log_time_metric = log_time_metric(res.iterations_to_universality, config.max_iterations);
  res.backend_hash_after = backend.parameter_hash();
  return res;
}

std::shared_ptr<SequenceNet> sweep_backend(const std::string& arch, Index d, std::uint64_t seed) {
  const std::uint64_t arch_tag = arch == "rnn" ? 1 : 2;
  return make_random_net(arch, d, derive_seed(seed, arch_tag * 1000003ULL + static_cast<std::uint64_t>(d)));
}

std::vector<SweepRow> sweep(const std::vector<std::string>& archs, const std::vector<Index>& dims,
                            const std::vector<std::uint64_t>& seeds, const LagSystem& system,
                            const TrainConfig& base, std::size_t workers,
                            const std::function<void(const SweepRow&)>& on_row) {
  std::vector<SweepRow> rows;
  for (const auto& a : archs)
    for (Index d : dims)
      for (auto s : seeds) {
        SweepRow row;
        row.arch = a;
        row.d = d;
        row.seed = s;
        rows.push_back(std::move(row));
      }
  std::mutex report;
  auto run_row = [&](SweepRow& row) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto net = sweep_backend(row.arch, row.d, row.seed);
      TrainConfig cfg = base;
      cfg.seed = row.seed;
      auto r = train_codebook(*net, system, cfg);
      row.success = r.success;
      row.iterations = r.iterations_to_universality;
      row.log_time_metric = r.log_time_metric;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_row) {
      std::lock_guard lock(report);
      on_row(row);
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(rows.size(), 1));
  if (workers == 1) {
    for (auto& r : rows) run_row(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < rows.size();) run_row(rows[i]);
      });
  }
  return rows;
}

}  // namespace lagsim
