#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lagsim/autodiff.hpp"
#include "lagsim/backends.hpp"
#include "lagsim/codebook.hpp"
#include "lagsim/lag.hpp"

namespace lagsim {

/// Feed-forward map: in -> hidden, two residual blocks
/// h += W tanh(LN(h) * gamma + beta) + b, then out = W_out LN(h) + b_out.
struct ResidualMlp {
  struct Block {
    Eigen::MatrixXd gamma, beta, w, b;
  };
  Eigen::MatrixXd w_in, b_in;
  std::array<Block, 2> blocks;
  Eigen::MatrixXd w_out, b_out;

  static ResidualMlp init(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, GaussianStream& rng);

  std::vector<Eigen::MatrixXd*> tensors();
  std::vector<const Eigen::MatrixXd*> tensors() const;
  std::size_t parameter_count() const;

  /// Column-batched forward.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  /// Same on a tape; `params` are this network's leaves in tensors() order.
  ad::Var apply(ad::Tape& tape, ad::Var x, std::span<const ad::Var> params) const;
};

/// Encoder (one-hot symbol -> d-vector) and decoder (d-vector -> symbol
/// scores) trained jointly.
struct CodebookNets {
  ResidualMlp encoder;
  ResidualMlp decoder;
  Eigen::Index symbols = 0;
  Eigen::Index dimension = 0;

  static CodebookNets init(Eigen::Index symbols, Eigen::Index dimension, std::uint64_t seed);

  std::vector<Eigen::MatrixXd*> tensors();
  std::vector<const Eigen::MatrixXd*> tensors() const;

  /// d x K table of current codewords.
  Eigen::MatrixXd codeword_table() const;
  /// Discrete codebook: E(s) = encoder output, D(v) = decoder argmax
  /// (ties to the lowest id).
  Codebook snapshot(SymbolId halt) const;
};

struct LossOptions {
  double commitment_weight = 0.25;
  /// Cross-entropy over negative squared distances to all codewords; 0 disables.
  double distance_weight = 1.0;
  /// Replace quantization by the identity (smooth surrogate for gradient checks).
  bool relaxed = false;
};

struct LossAndGrads {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> grads;  // CodebookNets::tensors() order
  double backend_grad_norm = 0.0;      // always 0: backend weights are constants
};

/// Teacher-forced loss over every rule's outputs t1 [t2] h, plus the
/// commitment term and the decoder(encoder(s)) = s term. Duplicate rules
/// count once per occurrence.
LossAndGrads loss_and_grads(const CodebookNets& nets, const SequenceNet& backend,
                            std::span<const ProductionRule> rules, SymbolId halt, const LossOptions& options);

struct TrainConfig {
  double step_size = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t max_iterations = 20000;
  std::uint64_t seed = 0;
  std::size_t verify_every = 50;
  LossOptions loss;
};

struct TrainResult {
  bool success = false;
  std::optional<std::size_t> iterations_to_universality;
  double log_time_metric = 0.0;
  std::size_t iterations_run = 0;
  double final_loss = 0.0;
  std::optional<Codebook> codebook;
  CodebookNets nets;
  std::string backend_hash_before;
  std::string backend_hash_after;
};

/// Called after each verification with (iteration, loss, passed, total).
using TrainObserver = std::function<void(std::size_t, double, std::size_t, std::size_t)>;

/// Full-batch Adam on loss_and_grads; every verify_every iterations the
/// discrete codebook is checked with verify_rules. Stops at the first full
/// pass or at max_iterations.
TrainResult train_codebook(const SequenceNet& backend, const LagSystem& system, const TrainConfig& config,
                           const TrainObserver& observer = {});

/// ln(k / max_iterations) for success at k, else 0.
double log_time_metric(std::optional<std::size_t> k, std::size_t max_iterations);

/// splitmix64 of (seed, stream): independent streams per (seed, role).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct SweepRow {
  std::string arch;
  Eigen::Index d = 0;
  std::uint64_t seed = 0;
  bool success = false;
  std::optional<std::size_t> iterations;
  double log_time_metric = 0.0;
  double wall_seconds = 0.0;
  std::string error;  // non-empty if the row failed with an exception
};

/// One training run per (arch, d, seed); rows are independent, returned in
/// (arch, d, seed) iteration order regardless of worker scheduling.
std::vector<SweepRow> sweep(const std::vector<std::string>& archs, const std::vector<Eigen::Index>& dims,
                            const std::vector<std::uint64_t>& seeds, const LagSystem& system,
                            const TrainConfig& base, std::size_t workers = 1,
                            const std::function<void(const SweepRow&)>& on_row = {});

/// Backend for a sweep row, seeded from (seed, arch, d).
std::shared_ptr<SequenceNet> sweep_backend(const std::string& arch, Eigen::Index d, std::uint64_t seed);

}  // namespace lagsim
