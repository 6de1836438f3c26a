#include "kln/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <ostream>

#include "kln/cmmd.hpp"
#include "kln/error.hpp"
#include "kln/rng.hpp"

namespace kln {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Supervised: return "supervised";
    case TrainMode::SemiSupervised: return "semi";
    case TrainMode::IdentityAblation: return "identity";
    case TrainMode::AePretrainAblation: return "ae-pretrain";
  }
  return "unknown";
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "supervised") return TrainMode::Supervised;
  if (name == "semi" || name == "semi-supervised") return TrainMode::SemiSupervised;
  if (name == "identity") return TrainMode::IdentityAblation;
  if (name == "ae-pretrain") return TrainMode::AePretrainAblation;
  throw ConfigError("unknown mode '" + name + "' (supervised|semi|identity|ae-pretrain)");
}

TrainConfig TrainConfig::defaults_for(TrainMode mode) {
  TrainConfig c;
  if (mode == TrainMode::SemiSupervised) {
    c.optimizer = Adam{};
    c.lr_schedule.milestones.clear();
  }
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (beta < 0.0 || beta1 < 0.0 || beta2 < 0.0) throw ConfigError("beta weights must be >= 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be >= 0");
  data_kernel.validate();
  label_kernel.validate();
  lr_schedule.validate();
  Optimizer probe(optimizer);
  (void)probe;
  if (arch.latent_dim <= 0) throw ConfigError("latent_dim must be positive");
}

namespace {

Mat labels_for_cmmd(const Mat& probs, bool hard) {
  if (!hard) return probs;
  Mat out = Mat::Zero(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(i, c) > probs(i, best)) best = c;
    }
    out(i, best) = 1.0;
  }
  return out;
}

}  // namespace

ObjectiveResult evaluate_objective(const ModelParams& params, const ObjectiveSpec& spec,
                                   const Mat& x_s, const Mat& y_s, const Mat& x_t,
                                   const Vec* prior, bool want_grads) {
  if (x_s.rows() == 0 || x_t.rows() == 0) throw DimensionError("objective: empty batch");
  if (y_s.rows() != x_s.rows()) throw DimensionError("objective: label rows differ from samples");
  if (spec.conf_weight > 0.0 && prior == nullptr) {
    throw ConfigError("objective: confidence term needs a class prior");
  }
  const bool identity = params.encoder.is_identity();
  const bool has_decoder = !params.decoder.is_identity();

  MlpTrace enc_s, enc_t;
  if (!identity) {
    enc_s = params.encoder.forward(x_s);
    enc_t = params.encoder.forward(x_t);
  }
  const Mat& z_s = identity ? x_s : enc_s.output;
  const Mat& z_t = identity ? x_t : enc_t.output;

  const MlpTrace cls_t = params.classifier.forward(z_t);
  const Mat& probs = cls_t.output;
  if (probs.cols() != y_s.cols()) {
    throw DimensionError("objective: classifier emits " + std::to_string(probs.cols()) +
                         " classes, labels carry " + std::to_string(y_s.cols()));
  }

  CmmdTape tape(spec.data_kernel, spec.label_kernel, spec.lambda);
  const CmmdValue cmmd = tape.forward(z_s, y_s, z_t, labels_for_cmmd(probs, spec.hard_predictions));

  ObjectiveResult r;
  r.losses.cmmd = cmmd.total;

  const double n_ae = static_cast<double>(x_s.rows() + x_t.rows());
  const bool ae_active = has_decoder && spec.ae_weight > 0.0;
  MlpTrace dec_s, dec_t;
  if (ae_active) {
    dec_s = params.decoder.forward(z_s);
    dec_t = params.decoder.forward(z_t);
    r.losses.ae = ((dec_s.output - x_s).squaredNorm() + (dec_t.output - x_t).squaredNorm()) / n_ae;
  } else if (has_decoder) {
    r.losses.ae = ((params.decoder.infer(z_s) - x_s).squaredNorm() +
                   (params.decoder.infer(z_t) - x_t).squaredNorm()) / n_ae;
  }
  if (prior != nullptr) r.losses.conf = confidence_loss(probs, *prior);
  r.losses.total = r.losses.cmmd + spec.ae_weight * r.losses.ae + spec.conf_weight * r.losses.conf;
  if (!std::isfinite(r.losses.total)) throw NumericError("objective: loss is not finite");
  if (!want_grads) return r;

  r.grads = ModelGrads::zeros_like(params);
  const CmmdGrads g = tape.backward(1.0);
  Mat dz_s = g.latent_s;
  Mat dz_t = g.latent_t;

  Mat dprobs = spec.hard_predictions ? Mat::Zero(probs.rows(), probs.cols()) : g.labels_t;
  if (spec.conf_weight > 0.0) dprobs += spec.conf_weight * confidence_loss_grad(probs, *prior);
  dz_t += params.classifier.backward(cls_t, dprobs, r.grads.classifier);

  if (ae_active) {
    const double scale = spec.ae_weight * 2.0 / n_ae;
    dz_s += params.decoder.backward(dec_s, scale * (dec_s.output - x_s), r.grads.decoder);
    dz_t += params.decoder.backward(dec_t, scale * (dec_t.output - x_t), r.grads.decoder);
  }
  if (!identity && spec.train_encoder) {
    params.encoder.backward(enc_s, dz_s, r.grads.encoder);
    params.encoder.backward(enc_t, dz_t, r.grads.encoder);
  }
  return r;
}

ObjectiveResult evaluate_ae_objective(const ModelParams& params, const Mat& x, bool want_grads) {
  if (params.encoder.is_identity() || params.decoder.is_identity()) {
    throw ConfigError("ae objective: model needs an encoder and a decoder");
  }
  const MlpTrace enc = params.encoder.forward(x);
  const MlpTrace dec = params.decoder.forward(enc.output);
  ObjectiveResult r;
  r.losses.ae = reconstruction_loss(dec.output, x);
  r.losses.total = r.losses.ae;
  if (!std::isfinite(r.losses.total)) throw NumericError("ae objective: loss is not finite");
  if (!want_grads) return r;
  r.grads = ModelGrads::zeros_like(params);
  const Mat dz = params.decoder.backward(dec, reconstruction_loss_grad(dec.output, x), r.grads.decoder);
  params.encoder.backward(enc, dz, r.grads.encoder);
  return r;
}

Trainer::Trainer(ModelParams params, TrainConfig config)
    : params_(std::move(params)), config_(std::move(config)), optimizer_(config_.optimizer) {
  config_.validate();
}

void Trainer::apply(const ModelGrads& grads, Parts parts, double lr_multiplier) {
  auto update_mlp = [&](Mlp& mlp, const MlpGrads& g, std::size_t base) {
    if (g.size() != mlp.depth()) return;
    for (std::size_t k = 0; k < mlp.depth(); ++k) {
      Layer& l = mlp.layers()[k];
      optimizer_.update(base + 2 * k, {l.weight.data(), static_cast<std::size_t>(l.weight.size())},
                        {g[k].weight.data(), static_cast<std::size_t>(g[k].weight.size())},
                        lr_multiplier);
      optimizer_.update(base + 2 * k + 1, {l.bias.data(), static_cast<std::size_t>(l.bias.size())},
                        {g[k].bias.data(), static_cast<std::size_t>(g[k].bias.size())},
                        lr_multiplier);
    }
  };
  if (parts.encoder) update_mlp(params_.encoder, grads.encoder, 0);
  if (parts.decoder) update_mlp(params_.decoder, grads.decoder, 256);
  if (parts.classifier) update_mlp(params_.classifier, grads.classifier, 512);
}

StepLosses Trainer::run(const Batch& s, const Batch& t, const ObjectiveSpec& spec,
                        const Vec* prior, Parts parts, double lr_multiplier) {
  if (s.y.size() != static_cast<std::size_t>(s.x.rows())) {
    throw ConfigError("training step: source batch must carry one label per sample");
  }
  const int classes = static_cast<int>(params_.classifier.output_width());
  const Mat y_s = one_hot(s.y, classes);
  ObjectiveResult r = evaluate_objective(params_, spec, s.x, y_s, t.x, prior, true);
  apply(r.grads, parts, lr_multiplier);
  return r.losses;
}

StepLosses Trainer::supervised_step(const Batch& batch_s, const Batch& batch_t,
                                    double lr_multiplier) {
  ObjectiveSpec spec{config_.data_kernel, config_.label_kernel, config_.lambda,
                     config_.beta,        0.0,                  config_.hard_predictions, true};
  return run(batch_s, batch_t, spec, nullptr, {true, config_.beta > 0.0, true}, lr_multiplier);
}

StepLosses Trainer::semi_supervised_step(const Batch& batch_l, const Batch& batch_u,
                                         const Vec& prior, double lr_multiplier) {
  ObjectiveSpec spec{config_.data_kernel, config_.label_kernel, config_.lambda,
                     config_.beta1,       config_.beta2,        config_.hard_predictions, true};
  return run(batch_l, batch_u, spec, &prior, {true, config_.beta1 > 0.0, true}, lr_multiplier);
}

StepLosses Trainer::classifier_step(const Batch& batch_s, const Batch& batch_t,
                                    double lr_multiplier) {
  ObjectiveSpec spec{config_.data_kernel, config_.label_kernel, config_.lambda,
                     0.0,                 0.0,                  config_.hard_predictions, false};
  return run(batch_s, batch_t, spec, nullptr, {false, false, true}, lr_multiplier);
}

StepLosses Trainer::ae_step(const Batch& batch, double lr_multiplier) {
  ObjectiveResult r = evaluate_ae_objective(params_, batch.x, true);
  apply(r.grads, {true, true, false}, lr_multiplier);
  return r.losses;
}

std::vector<int> predict(const ModelParams& params, const Mat& x) {
  const Mat probs = classify(params, encode(params, x));
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(i, c) > probs(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double evaluate(const ModelParams& params, const Dataset& test) {
  const auto& y = test.labels();
  if (test.size() == 0) throw DimensionError("evaluate: empty test set");
  constexpr Eigen::Index kChunk = 1000;
  Eigen::Index wrong = 0;
  for (Eigen::Index start = 0; start < test.size(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, test.size() - start);
    const auto pred = predict(params, test.x.middleRows(start, len));
    for (Eigen::Index i = 0; i < len; ++i) {
      if (pred[static_cast<std::size_t>(i)] != y[static_cast<std::size_t>(start + i)]) ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(test.size());
}

namespace {

void put_double(std::ostream& out, const char* key, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << ' ' << key << '=' << buf;
}

}  // namespace

void TrainReport::write(std::ostream& out) const {
  out << "# kln train report mode=" << mode << '\n';
  for (const auto& e : epochs) {
    out << "epoch=" << e.epoch;
    put_double(out, "cmmd", e.cmmd);
    put_double(out, "ae", e.ae);
    put_double(out, "conf", e.conf);
    put_double(out, "lr", e.lr);
    put_double(out, "test_error", e.test_error);
    out << '\n';
  }
  out << "final";
  put_double(out, "test_error", final_test_error);
  put_double(out, "best_test_error", best_test_error);
  out << " best_epoch=" << best_epoch << '\n';
}

BatchCycler::BatchCycler(Eigen::Index n, Eigen::Index batch, std::mt19937_64 rng)
    : n_(n), batch_(std::min(batch, n)), rng_(std::move(rng)) {
  if (n <= 0) throw DimensionError("batch cycler: empty pool");
  order_.resize(static_cast<std::size_t>(n_));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  reshuffle();
}

void BatchCycler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  pos_ = 0;
}

std::vector<Eigen::Index> BatchCycler::next() {
  if (pos_ + static_cast<std::size_t>(batch_) > order_.size()) reshuffle();
  std::vector<Eigen::Index> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                order_.begin() + static_cast<std::ptrdiff_t>(pos_) + batch_);
  pos_ += static_cast<std::size_t>(batch_);
  return out;
}

Batch make_batch(const Dataset& ds, std::span<const Eigen::Index> rows, bool with_labels) {
  Batch b;
  b.x.resize(static_cast<Eigen::Index>(rows.size()), ds.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) b.x.row(static_cast<Eigen::Index>(i)) = ds.x.row(rows[i]);
  if (with_labels) {
    const auto& y = ds.labels();
    b.y.reserve(rows.size());
    for (Eigen::Index r : rows) b.y.push_back(y[static_cast<std::size_t>(r)]);
  }
  return b;
}

TrainResult train(const TrainData& data, const TrainConfig& config, TrainMode mode,
                  const EpochCallback& on_epoch) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const Dataset& pool = data.train;
  if (mode == TrainMode::SemiSupervised && !data.labeled) {
    throw ConfigError("semi-supervised training needs a labeled subset");
  }
  const Dataset& source = mode == TrainMode::SemiSupervised ? *data.labeled : pool;
  const int classes = source.classes;
  if (classes < 2) throw ConfigError("training needs at least two classes");
  if (data.test.classes > classes) throw ConfigError("test set has more classes than training data");
  source.labels();
  if (pool.dim() != data.test.dim() || source.dim() != pool.dim()) {
    throw DimensionError("train/test feature widths differ");
  }

  auto init_rng = substream(config.seed, "init");
  ModelParams params = mode == TrainMode::IdentityAblation
                           ? make_identity_model(pool.dim(), classes, init_rng)
                           : make_model(pool.dim(), classes, config.arch, init_rng);
  Trainer trainer(std::move(params), config);

  Vec prior;
  if (mode == TrainMode::SemiSupervised) {
    const auto counts = class_counts(source);
    if (std::any_of(counts.begin(), counts.end(), [](Eigen::Index c) { return c == 0; })) {
      std::cerr << "warning: labeled subset misses a class; prior re-estimated from present classes\n";
    }
    prior = empirical_prior(source);
  }

  BatchCycler cycle_s(source.size(), config.batch_size, substream(config.seed, "shuffle-s"));
  BatchCycler cycle_t(pool.size(), config.batch_size, substream(config.seed, "shuffle-t"));
  const Eigen::Index steps = config.steps_per_epoch > 0
                                 ? config.steps_per_epoch
                                 : std::max<Eigen::Index>(1, pool.size() / config.batch_size);

  TrainResult result;
  result.report.mode = to_string(mode);
  const int pretrain = mode == TrainMode::AePretrainAblation
                           ? (config.pretrain_epochs < 0 ? config.epochs : config.pretrain_epochs)
                           : 0;
  const int total_epochs = config.epochs + pretrain;
  const double base_lr = Optimizer(config.optimizer).base_lr();

  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const bool ae_phase = epoch < pretrain;
    const double mult = config.lr_schedule.multiplier(ae_phase ? epoch : epoch - pretrain);
    StepLosses sum;
    for (Eigen::Index step = 0; step < steps; ++step) {
      const auto idx_s = cycle_s.next();
      const auto idx_t = cycle_t.next();
      const Batch bs = make_batch(source, idx_s, true);
      const Batch bt = make_batch(pool, idx_t, false);
      StepLosses l;
      switch (mode) {
        case TrainMode::Supervised:
        case TrainMode::IdentityAblation:
          l = trainer.supervised_step(bs, bt, mult);
          break;
        case TrainMode::SemiSupervised:
          l = trainer.semi_supervised_step(bs, bt, prior, mult);
          break;
        case TrainMode::AePretrainAblation:
          l = ae_phase ? trainer.ae_step(bt, mult) : trainer.classifier_step(bs, bt, mult);
          break;
      }
      sum.cmmd += l.cmmd;
      sum.ae += l.ae;
      sum.conf += l.conf;
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.cmmd = sum.cmmd / static_cast<double>(steps);
    rec.ae = sum.ae / static_cast<double>(steps);
    rec.conf = sum.conf / static_cast<double>(steps);
    rec.lr = base_lr * mult;
    rec.test_error = evaluate(trainer.params(), data.test);
    result.report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  result.report.final_test_error = result.report.epochs.empty()
                                       ? evaluate(trainer.params(), data.test)
                                       : result.report.epochs.back().test_error;
  result.report.best_test_error = result.report.final_test_error;
  for (const auto& e : result.report.epochs) {
    if (result.report.best_epoch == 0 || e.test_error < result.report.best_test_error) {
      result.report.best_test_error = e.test_error;
      result.report.best_epoch = e.epoch;
    }
  }
  result.params = trainer.params();
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace kln
