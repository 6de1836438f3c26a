#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kln/data.hpp"
#include "kln/kernels.hpp"
#include "kln/network.hpp"
#include "kln/optim.hpp"

namespace kln {

enum class TrainMode { Supervised, SemiSupervised, IdentityAblation, AePretrainAblation };

std::string to_string(TrainMode mode);
/// Accepts supervised|semi|identity|ae-pretrain.
TrainMode parse_train_mode(const std::string& name);

struct TrainConfig {
  Eigen::Index batch_size = 100;
  double lambda = 0.1;
  double beta = 0.1;   // AE weight, supervised
  double beta1 = 0.1;  // AE weight, semi-supervised
  double beta2 = 1.0;  // confidence weight, semi-supervised
  OptimizerConfig optimizer = SgdMomentum{};
  LrSchedule lr_schedule{{{50, 0.2}, {100, 0.2}, {130, 0.2}}};
  int epochs = 30;
  std::uint64_t seed = 0;
  KernelSpec data_kernel;
  KernelSpec label_kernel;
  Architecture arch;
  Eigen::Index steps_per_epoch = 0;  // 0: floor(pool size / batch_size)
  int pretrain_epochs = -1;          // AE phase of AePretrainAblation; -1: same as epochs
  bool hard_predictions = false;     // diagnostic: feed argmax one-hot labels to CMMD

  /// Semi-supervised runs use Adam without a schedule; everything else SGD.
  static TrainConfig defaults_for(TrainMode mode);
  void validate() const;
};

struct StepLosses {
  double cmmd = 0.0;
  double ae = 0.0;
  double conf = 0.0;
  double total = 0.0;
};

/// Weights and switches of one evaluation of the training objective.
struct ObjectiveSpec {
  KernelSpec data_kernel;
  KernelSpec label_kernel;
  double lambda = 0.1;
  double ae_weight = 0.0;
  double conf_weight = 0.0;
  bool hard_predictions = false;
  bool train_encoder = true;
};

struct ObjectiveResult {
  StepLosses losses;
  ModelGrads grads;
};

/// CMMD(labels y_s on x_s vs predictions on x_t) + ae_weight * AE over both
/// batches + conf_weight * confidence of the predictions on x_t.
///
/// y_s holds label vectors (one-hot). `prior` is required iff conf_weight > 0
/// and is also used, when given, to report the confidence term.
ObjectiveResult evaluate_objective(const ModelParams& params, const ObjectiveSpec& spec,
                                   const Mat& x_s, const Mat& y_s, const Mat& x_t,
                                   const Vec* prior, bool want_grads = true);

/// Reconstruction loss alone over x, with gradients for encoder and decoder.
ObjectiveResult evaluate_ae_objective(const ModelParams& params, const Mat& x,
                                      bool want_grads = true);

struct Batch {
  Mat x;
  std::vector<int> y;  // empty for unlabeled batches
};

/// Owns parameters and optimizer state; applies single training steps.
class Trainer {
 public:
  Trainer(ModelParams params, TrainConfig config);

  /// Supervised step: CMMD + beta * AE. The decoder is left untouched when beta == 0.
  StepLosses supervised_step(const Batch& batch_s, const Batch& batch_t, double lr_multiplier = 1.0);

  /// Semi-supervised step: CMMD + beta1 * AE + beta2 * confidence(prior).
  StepLosses semi_supervised_step(const Batch& batch_l, const Batch& batch_u, const Vec& prior,
                                  double lr_multiplier = 1.0);

  /// Reconstruction-only step (AE pretraining).
  StepLosses ae_step(const Batch& batch, double lr_multiplier = 1.0);

  /// CMMD-only step updating the classifier with the encoder frozen.
  StepLosses classifier_step(const Batch& batch_s, const Batch& batch_t, double lr_multiplier = 1.0);

  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const TrainConfig& config() const { return config_; }

 private:
  struct Parts {
    bool encoder = true;
    bool decoder = true;
    bool classifier = true;
  };
  StepLosses run(const Batch& s, const Batch& t, const ObjectiveSpec& spec, const Vec* prior,
                 Parts parts, double lr_multiplier);
  void apply(const ModelGrads& grads, Parts parts, double lr_multiplier);

  ModelParams params_;
  TrainConfig config_;
  Optimizer optimizer_;
};

/// Fraction of rows whose argmax prediction differs from the label; ties go
/// to the lowest class index.
double evaluate(const ModelParams& params, const Dataset& test);

/// Row-wise argmax with lowest-index tie-break.
std::vector<int> predict(const ModelParams& params, const Mat& x);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double cmmd = 0.0;
  double ae = 0.0;
  double conf = 0.0;
  double lr = 0.0;
  double test_error = 0.0;
};

struct TrainReport {
  std::string mode;
  std::vector<EpochRecord> epochs;
  double final_test_error = 1.0;
  double best_test_error = 1.0;
  int best_epoch = 0;
  double wall_seconds = 0.0;  // not part of write(): reports stay byte-stable

  /// "epoch=E cmmd=... ae=... conf=... lr=... test_error=..." per epoch plus
  /// a closing "final ..." record; doubles printed with %.17g.
  void write(std::ostream& out) const;
};

struct TrainData {
  Dataset train;                   // full pool (labels unused in semi mode)
  std::optional<Dataset> labeled;  // semi-supervised labeled subset
  Dataset test;
};

struct TrainResult {
  TrainReport report;
  ModelParams params;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const TrainData& data, const TrainConfig& config, TrainMode mode,
                  const EpochCallback& on_epoch = {});

/// Cycles through seeded permutations of [0, n), reshuffling whenever fewer
/// than `batch` indices remain.
class BatchCycler {
 public:
  BatchCycler(Eigen::Index n, Eigen::Index batch, std::mt19937_64 rng);
  std::vector<Eigen::Index> next();

 private:
  void reshuffle();
  Eigen::Index n_;
  Eigen::Index batch_;
  std::mt19937_64 rng_;
  std::vector<Eigen::Index> order_;
  std::size_t pos_ = 0;
};

Batch make_batch(const Dataset& ds, std::span<const Eigen::Index> rows, bool with_labels);

}  // namespace kln
