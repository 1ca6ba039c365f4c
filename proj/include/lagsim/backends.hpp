#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lagsim/codebook.hpp"
#include "lagsim/decoding.hpp"
#include "lagsim/lag.hpp"

namespace lagsim {

namespace detail {
inline bool unit_equal(const Token& a, const Token& b) { return a == b; }
inline bool unit_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}
inline Token junk_unit(const Token*) { return "<?>"; }
inline Eigen::VectorXd junk_unit(const Eigen::VectorXd*) {
  return Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN());
}
}  // namespace detail

/// Exact oracle: answers S E(s1) E(s2) [partial output] with the next unit of
/// E(t1) [E(t2)] E(h) for the matching rule. Unknown pairs, a wrong system
/// prompt, or an inconsistent partial output yield an unparseable unit.
template <typename Unit>
class RuleTableBackend : public Backend<Unit> {
 public:
  RuleTableBackend(std::shared_ptr<const LagSystem> system, std::shared_ptr<const Codebook> codebook,
                   std::vector<Unit> system_prompt = {}, std::size_t context_window = std::size_t{1} << 20)
      : system_(std::move(system)),
        codebook_(std::move(codebook)),
        prompt_(std::move(system_prompt)),
        window_(context_window) {}

  std::size_t context_window() const override { return window_; }
  std::string identity() const override { return "rule-table"; }

  Unit next(std::span<const Unit> context) const override {
    const Unit junk = detail::junk_unit(static_cast<const Unit*>(nullptr));
    if (context.size() < prompt_.size()) return junk;
    for (std::size_t i = 0; i < prompt_.size(); ++i)
      if (!detail::unit_equal(context[i], prompt_[i])) return junk;
    auto rest = context.subspan(prompt_.size());

    // Split off the two query codewords.
    SymbolId pair[2];
    std::size_t used = 0;
    for (auto& s : pair) {
      auto [sym, n] = read_codeword(rest.subspan(used));
      if (n == 0) return junk;
      s = sym;
      used += n;
    }
    const SymbolId lhs[2] = {pair[0], pair[1]};
    if (!system_->alphabet().contains(lhs[0]) || !system_->alphabet().contains(lhs[1])) return junk;
    const ProductionRule* rule = system_->match(lhs);
    if (!rule) return junk;

    std::vector<Unit> full;
    for (SymbolId t : rule->rhs) UnitCodec<Unit>::append(*codebook_, t, full);
    UnitCodec<Unit>::append(*codebook_, codebook_->halt(), full);
    auto emitted = rest.subspan(used);
    if (emitted.size() >= full.size()) return junk;
    for (std::size_t i = 0; i < emitted.size(); ++i)
      if (!detail::unit_equal(emitted[i], full[i])) return junk;
    return full[emitted.size()];
  }

 private:
  // Returns (symbol, units consumed); consumed == 0 on failure.
  std::pair<SymbolId, std::size_t> read_codeword(std::span<const Unit> units) const {
    if constexpr (std::is_same_v<Unit, Token>) {
      Codebook::TokenParser p(*codebook_);
      for (std::size_t i = 0; i < units.size(); ++i) {
        auto st = p.push(units[i]);
        if (st == Codebook::TokenParser::Status::Symbol) return {p.last(), i + 1};
        if (st == Codebook::TokenParser::Status::Invalid) return {0, 0};
      }
      return {0, 0};
    } else {
      if (units.empty() || units[0].size() != codebook_->dimension()) return {0, 0};
      return {codebook_->decode_vector(units[0]), 1};
    }
  }

  std::shared_ptr<const LagSystem> system_;
  std::shared_ptr<const Codebook> codebook_;
  std::vector<Unit> prompt_;
  std::size_t window_;
};

/// Nearest codeword to `v` (L2, ties to the lowest symbol id).
std::pair<SymbolId, Eigen::VectorXd> quantize(const Eigen::VectorXd& v, const Codebook& codebook);

/// Standard normal draws from mt19937_64 via Box-Muller, identical on every
/// platform.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed);
  double next();
  std::uint64_t next_raw();
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols, double scale);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Frozen sequence model over d-dimensional vectors.
class SequenceNet {
 public:
  virtual ~SequenceNet() = default;
  virtual Eigen::Index dimension() const = 0;
  /// Raw (pre-quantization) output after reading the whole sequence.
  virtual Eigen::VectorXd forward(std::span<const Eigen::VectorXd> sequence) const = 0;
  /// SHA-256 over the serialized parameters.
  virtual std::string parameter_hash() const = 0;
  virtual std::string name() const = 0;
};

template <typename Scalar>
struct RecurrentParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Matrix w_in, w_rec, w_out;
  Vector b, c;
};

/// state_0 = 0; state_t = tanh(W_rec state_{t-1} + W_in x_t + b);
/// output = W_out state_T + c.
template <typename Scalar>
typename RecurrentParams<Scalar>::Vector recurrent_forward(const RecurrentParams<Scalar>& p,
                                                           std::span<const typename RecurrentParams<Scalar>::Vector> xs) {
  typename RecurrentParams<Scalar>::Vector state = RecurrentParams<Scalar>::Vector::Zero(p.w_rec.rows());
  for (const auto& x : xs) state = (p.w_rec * state + p.w_in * x + p.b).array().tanh().matrix();
  return p.w_out * state + p.c;
}

template <typename Scalar>
struct AttentionBlockParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix wq, wk, wv, wo;
};

template <typename Scalar>
struct AttentionParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  int heads = 8;
  std::vector<AttentionBlockParams<Scalar>> blocks;
  Matrix w_out;
  Vector c;
};

inline constexpr double kLayerNormEps = 1e-5;

/// Column-wise layer normalization without affine parameters.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> layer_norm_cols(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Scalar mean = x.col(j).mean();
    auto centered = (x.col(j).array() - mean).matrix();
    Scalar var = centered.squaredNorm() / static_cast<Scalar>(x.rows());
    out.col(j) = centered / std::sqrt(var + static_cast<Scalar>(kLayerNormEps));
  }
  return out;
}

/// Pre-norm causal multi-head self-attention blocks with residuals; the
/// output is W_out h_T + c at the last position.
template <typename Scalar>
typename AttentionParams<Scalar>::Vector attention_forward(const AttentionParams<Scalar>& p,
                                                           std::span<const typename AttentionParams<Scalar>::Vector> xs) {
  using Matrix = typename AttentionParams<Scalar>::Matrix;
  const Eigen::Index d = p.w_out.cols();
  const auto t_len = static_cast<Eigen::Index>(xs.size());
  Matrix h(d, t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) h.col(t) = xs[static_cast<std::size_t>(t)];
  const Eigen::Index dh = d / p.heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  for (const auto& blk : p.blocks) {
    Matrix n = layer_norm_cols(h);
    Matrix q = blk.wq * n, k = blk.wk * n, v = blk.wv * n;
    Matrix attn = Matrix::Zero(d, t_len);
    for (int head = 0; head < p.heads; ++head) {
      const Eigen::Index r0 = head * dh;
      for (Eigen::Index t = 0; t < t_len; ++t) {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s(t + 1);
        for (Eigen::Index u = 0; u <= t; ++u) s[u] = q.col(t).segment(r0, dh).dot(k.col(u).segment(r0, dh)) * scale;
        s = (s.array() - s.maxCoeff()).exp().matrix();
        s /= s.sum();
        for (Eigen::Index u = 0; u <= t; ++u) attn.col(t).segment(r0, dh) += s[u] * v.col(u).segment(r0, dh);
      }
    }
    h += blk.wo * attn;
  }
  return p.w_out * h.col(t_len - 1) + p.c;
}

/// Largest head count <= 8 that divides d.
int attention_heads_for(Eigen::Index d);

class RandomRecurrentNet : public SequenceNet {
 public:
  /// All matrices and biases ~ N(0, 1/d), then frozen.
  RandomRecurrentNet(Eigen::Index d, std::uint64_t seed, bool zero_biases = false);
  explicit RandomRecurrentNet(RecurrentParams<double> params) : p_(std::move(params)) {}

  Eigen::Index dimension() const override { return p_.w_rec.rows(); }
  Eigen::VectorXd forward(std::span<const Eigen::VectorXd> sequence) const override;
  std::string parameter_hash() const override;
  std::string name() const override { return "rnn"; }
  const RecurrentParams<double>& params() const { return p_; }

 private:
  RecurrentParams<double> p_;
};

class RandomAttentionNet : public SequenceNet {
 public:
  RandomAttentionNet(Eigen::Index d, std::uint64_t seed, int depth = 1, bool zero_biases = false);
  explicit RandomAttentionNet(AttentionParams<double> params) : p_(std::move(params)) {}

  Eigen::Index dimension() const override { return p_.w_out.rows(); }
  Eigen::VectorXd forward(std::span<const Eigen::VectorXd> sequence) const override;
  std::string parameter_hash() const override;
  std::string name() const override { return "attention"; }
  const AttentionParams<double>& params() const { return p_; }

 private:
  AttentionParams<double> p_;
};

std::shared_ptr<SequenceNet> make_random_net(const std::string& arch, Eigen::Index d, std::uint64_t seed);

/// Greedy vector model: forward the frozen net, then snap the output to the
/// nearest codeword.
class NetBackend : public VectorBackend {
 public:
  NetBackend(std::shared_ptr<const SequenceNet> net, std::shared_ptr<const Codebook> codebook)
      : net_(std::move(net)), codebook_(std::move(codebook)) {}

  std::size_t context_window() const override { return std::size_t{1} << 20; }
  Eigen::VectorXd next(std::span<const Eigen::VectorXd> context) const override;
  std::string identity() const override { return net_->name() + ":" + net_->parameter_hash().substr(0, 16); }
  const SequenceNet& net() const { return *net_; }

 private:
  std::shared_ptr<const SequenceNet> net_;
  std::shared_ptr<const Codebook> codebook_;
};

}  // namespace lagsim
