#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "embryoforge/checkpoint.hpp"
#include "embryoforge/imaging.hpp"
#include "embryoforge/models.hpp"
#include "embryoforge/nn.hpp"
#include "embryoforge/rng.hpp"

namespace embryoforge {

enum class LossKind { minimax, wgan_gp };

std::string_view loss_kind_name(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct TrainConfig {
  int batch_size = 32;
  int epochs = 30;
  std::int64_t iterations = 3000;
  double lr_classifier = 1e-5;
  double lr_gan = 1e-4;
  double classifier_beta1 = 0.9;
  double classifier_beta2 = 0.999;
  double gan_beta1 = 0.0;
  double gan_beta2 = 0.9;
  int n_critic = 5;
  double penalty_weight = 10.0;
  int latent_dim = 128;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::wgan_gp;
  /// Generator loss under minimax: false is the non-saturating
  /// -mean(log D(G(z))), true the literal mean(log(1 - D(G(z)))).
  bool literal_minimax = false;
  double dropout_rate = 0.5;
  bool augment = true;
  AugmentConfig augment_config;
  int sample_every = 500;
  int sample_grid = 8;
  DType dtype = DType::f32;

  void validate() const;
};

/// Raised when a loss or gradient stops being finite.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::int64_t iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

struct TraceRow {
  std::int64_t iter = 0;
  double critic_obj = 0;
  double gen_obj = 0;
  double penalty = 0;
  double wall_ms = 0;
};

class LossTrace {
 public:
  static constexpr std::string_view kHeader = "iter,critic_obj,gen_obj,penalty,wall_ms";

  /// Rejects non-increasing iterations and non-finite values.
  void append(const TraceRow& row);
  const std::vector<TraceRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  /// Values printed with round-trip precision.
  std::string to_csv() const;
  static LossTrace from_csv(std::string_view text);

  /// Equal in every column except wall time.
  bool same_values(const LossTrace& other) const;

 private:
  std::vector<TraceRow> rows_;
};

struct MinimaxLosses {
  Tensor d_loss;
  Tensor g_loss;
  /// mean(log D(x)) + mean(log(1 - D(G(z)))).
  double objective = 0;
};

/// Two-player objective on sigmoid outputs in (0,1). Inputs are clamped
/// to [1e-7, 1 - 1e-7]; values further outside the interval are rejected.
MinimaxLosses minimax_loss(const Tensor& d_real, const Tensor& d_fake, bool literal = false);

struct WassersteinLosses {
  Tensor critic_loss;
  Tensor gen_loss;
  /// mean(d_real) - mean(d_fake).
  double estimate = 0;
};

WassersteinLosses wasserstein_objective(const Tensor& d_real, const Tensor& d_fake,
                                        const Tensor& penalty);

using CriticFn = std::function<Tensor(const Tensor&)>;

struct PenaltyResult {
  Tensor penalty;
  /// Per-sample norm of the critic's input gradient at the interpolates.
  std::vector<double> grad_norms;
};

/// lambda * mean_n (|grad_x D(x_n)| - 1)^2 at x_n = e_n real_n + (1-e_n) fake_n,
/// e_n ~ U[0,1). The result stays differentiable in the critic's parameters.
PenaltyResult gradient_penalty(const CriticFn& critic, const Tensor& real, const Tensor& fake,
                               double lambda, Rng& rng);
/// Network overload; rejects critics whose train-mode output couples the batch.
PenaltyResult gradient_penalty(Network& critic, const Tensor& real, const Tensor& fake,
                               double lambda, Rng& rng);

/// Draws a batch of n real samples using the given generator.
using BatchSource = std::function<Tensor(std::int64_t n, Rng& rng)>;

/// Uniform sampling with replacement from the rows of `data` [M, ...].
BatchSource tensor_source(Tensor data);

/// Standard normal latent batch [n, dim].
Tensor sample_latent(std::int64_t n, int dim, Rng& rng, DType dtype);

/// Alternating critic/generator training with resumable state.
class GanTrainer {
 public:
  GanTrainer(Network generator, Network critic, TrainConfig cfg);
  /// Restores networks, optimizer moments, RNG streams, iteration and trace.
  static GanTrainer resume(const Checkpoint& generator, const Checkpoint& critic,
                           TrainConfig cfg);

  struct Hooks {
    /// Called every cfg.sample_every iterations with eval-mode samples
    /// from a fixed latent grid.
    std::function<void(std::int64_t iteration, const Tensor& samples)> on_samples;
    std::function<void(const TraceRow&)> on_row;
  };

  /// Runs until `iteration() == until`. On a non-finite loss or gradient,
  /// restores the state from the start of the failing iteration and
  /// throws NumericalFailure.
  void run(std::int64_t until, const BatchSource& real, const Hooks& hooks = {});

  std::int64_t iteration() const { return iteration_; }
  const LossTrace& trace() const { return trace_; }
  Network& generator() { return generator_; }
  Network& critic() { return critic_; }
  const TrainConfig& config() const { return cfg_; }

  /// Mean critic input-gradient norm at the interpolates of the last
  /// critic step.
  double last_grad_norm() const { return last_grad_norm_; }

  Checkpoint generator_checkpoint() const;
  Checkpoint critic_checkpoint() const;

  /// Eval-mode generator output for the fixed sample grid.
  Tensor grid_samples();

 private:
  struct Snapshot {
    Checkpoint generator, critic;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& s);
  void step(const BatchSource& real);

  TrainConfig cfg_;
  Network generator_;
  Network critic_;
  AdamState g_opt_;
  AdamState c_opt_;
  RngStreams streams_;
  std::int64_t iteration_ = 0;
  LossTrace trace_;
  Tensor grid_latent_;
  double last_grad_norm_ = 0;
  std::chrono::steady_clock::time_point start_;
};

/// Argmax class per row of [N,K] logits.
std::vector<int> argmax_rows(const Tensor& logits);
/// Fraction of rows whose argmax equals the label.
double accuracy(const Tensor& logits, std::span<const int> labels);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double test_accuracy = 0;
};

/// Eval-mode logits for a patch set, in batches.
Tensor predict_logits(Network& net, std::span<const Patch> patches, int batch_size, DType dtype);

/// Cross-entropy training with Adam(lr_classifier). Batches are reshuffled
/// every epoch; augmentation touches training batches only. Returns one
/// record per epoch.
std::vector<EpochRecord> train_classifier(Network& net, std::span<const Patch> train,
                                          std::span<const Patch> test, const TrainConfig& cfg,
                                          const std::function<void(const EpochRecord&)>& on_epoch = {});

struct OverfitRow {
  double width_scale = 1.0;
  std::uint64_t seed = 0;
  double train_accuracy = 0;
  double test_accuracy = 0;
};

struct OverfitReport {
  std::vector<OverfitRow> rows;
  struct WidthSummary {
    double width_scale;
    double mean_test;
    double std_test;
    double mean_train;
  };
  std::vector<WidthSummary> summary;
  /// Fraction of seeds where the half-width net's test accuracy is at
  /// least the full-width one's.
  double half_not_worse_fraction = 0;

  std::string table() const;
};

struct OverfitConfig {
  int train_size = 198;
  int test_size = 200;
  int seeds = 10;
  int patch_size = 32;
  std::vector<double> widths{1.0, 0.5};
  NetworkConfig network;
  /// Augmentation is off so the full-width net can memorize the set.
  TrainConfig train = [] {
    TrainConfig t;
    t.augment = false;
    return t;
  }();
};

/// Trains each width on the same small labeled set per seed and compares
/// held-out accuracy.
OverfitReport overfit_demo(const OverfitConfig& cfg,
                           const std::function<void(const OverfitRow&)>& on_row = {});

}  // namespace embryoforge
