#include <cmath>
#include <numbers>

#include "lagsim/backends.hpp"
#include "lagsim/error.hpp"
#include "lagsim/hashing.hpp"

namespace lagsim {

std::pair<SymbolId, Eigen::VectorXd> quantize(const Eigen::VectorXd& v, const Codebook& codebook) {
  if (codebook.kind() != CodebookKind::Vector) throw InvalidCodebook("quantize needs a vector codebook");
  const Eigen::Index j = nearest_column(codebook.vector_table(), v);
  return {static_cast<SymbolId>(j), codebook.vector_table().col(j)};
}

GaussianStream::GaussianStream(std::uint64_t seed) : engine_(seed) {}

std::uint64_t GaussianStream::next_raw() { return engine_(); }

double GaussianStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Uniforms in (0, 1] from the top 53 bits, so log() never sees zero.
  auto uniform = [&] { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; };
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Eigen::MatrixXd GaussianStream::matrix(Eigen::Index rows, Eigen::Index cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill order, fixed regardless of Eigen storage.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * next();
  return m;
}

int attention_heads_for(Eigen::Index d) {
  if (d <= 0) throw DimensionMismatch("model dimension must be positive");
  for (int h = 8; h > 1; --h)
    if (d % h == 0) return h;
  return 1;
}

namespace {

void append_matrix(std::string& buf, const Eigen::MatrixXd& m) {
  const auto rows = static_cast<std::int64_t>(m.rows());
  const auto cols = static_cast<std::int64_t>(m.cols());
  buf.append(reinterpret_cast<const char*>(&rows), sizeof rows);
  buf.append(reinterpret_cast<const char*>(&cols), sizeof cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      buf.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

void check_sequence(std::span<const Eigen::VectorXd> xs, Eigen::Index d) {
  if (xs.empty()) throw DimensionMismatch("empty input sequence");
  for (const auto& x : xs)
    if (x.size() != d)
      throw DimensionMismatch("input vector has dimension " + std::to_string(x.size()) + ", model expects " +
                              std::to_string(d));
}

}  // namespace

RandomRecurrentNet::RandomRecurrentNet(Eigen::Index d, std::uint64_t seed, bool zero_biases) {
  if (d <= 0) throw DimensionMismatch("model dimension must be positive");
  GaussianStream g(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  p_.w_in = g.matrix(d, d, sd);
  p_.w_rec = g.matrix(d, d, sd);
  p_.w_out = g.matrix(d, d, sd);
  p_.b = g.matrix(d, 1, sd);
  p_.c = g.matrix(d, 1, sd);
  if (zero_biases) {
    p_.b.setZero();
    p_.c.setZero();
  }
}

Eigen::VectorXd RandomRecurrentNet::forward(std::span<const Eigen::VectorXd> sequence) const {
  check_sequence(sequence, dimension());
  return recurrent_forward<double>(p_, sequence);
}

std::string RandomRecurrentNet::parameter_hash() const {
  std::string buf = "rnn";
  for (const Eigen::MatrixXd* m : {&p_.w_in, &p_.w_rec, &p_.w_out}) append_matrix(buf, *m);
  append_matrix(buf, p_.b);
  append_matrix(buf, p_.c);
  return sha256_hex(buf);
}

RandomAttentionNet::RandomAttentionNet(Eigen::Index d, std::uint64_t seed, int depth, bool zero_biases) {
  if (depth < 1) throw ConfigError("attention depth must be at least 1");
  p_.heads = attention_heads_for(d);
  GaussianStream g(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < depth; ++l) {
    AttentionBlockParams<double> blk;
    blk.wq = g.matrix(d, d, sd);
    blk.wk = g.matrix(d, d, sd);
    blk.wv = g.matrix(d, d, sd);
    blk.wo = g.matrix(d, d, sd);
    p_.blocks.push_back(std::move(blk));
  }
  p_.w_out = g.matrix(d, d, sd);
  p_.c = g.matrix(d, 1, sd);
  if (zero_biases) p_.c.setZero();
}

Eigen::VectorXd RandomAttentionNet::forward(std::span<const Eigen::VectorXd> sequence) const {
  check_sequence(sequence, dimension());
  return attention_forward<double>(p_, sequence);
}

std::string RandomAttentionNet::parameter_hash() const {
  std::string buf = "attention:" + std::to_string(p_.heads);
  for (const auto& blk : p_.blocks)
    for (const Eigen::MatrixXd* m : {&blk.wq, &blk.wk, &blk.wv, &blk.wo}) append_matrix(buf, *m);
  append_matrix(buf, p_.w_out);
  append_matrix(buf, p_.c);
  return sha256_hex(buf);
}

std::shared_ptr<SequenceNet> make_random_net(const std::string& arch, Eigen::Index d, std::uint64_t seed) {
  if (arch == "rnn") return std::make_shared<RandomRecurrentNet>(d, seed);
  if (arch == "attention" || arch == "transformer") return std::make_shared<RandomAttentionNet>(d, seed);
  throw ConfigError("unknown architecture '" + arch + "' (expected rnn or attention)");
}

Eigen::VectorXd NetBackend::next(std::span<const Eigen::VectorXd> context) const {
  return quantize(net_->forward(context), *codebook_).second;
}

}  // namespace lagsim
