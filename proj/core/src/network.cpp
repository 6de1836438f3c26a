#include "kln/network.hpp"

#include <cmath>
#include <string>

#include "kln/error.hpp"

namespace kln {

namespace {

constexpr double kLogFloor = 1e-12;

void apply_activation(const Activation& act, const Mat& pre, Mat& out) {
  switch (act.kind) {
    case ActivationKind::Identity:
      out = pre;
      return;
    case ActivationKind::ReLU:
      out = pre.cwiseMax(0.0);
      return;
    case ActivationKind::LeakyReLU:
      out = pre.unaryExpr([s = act.slope](double v) { return v > 0.0 ? v : s * v; });
      return;
    case ActivationKind::Sigmoid:
      out = pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      return;
    case ActivationKind::Softmax:
      out = softmax_rows(pre);
      return;
  }
}

Mat activation_backward(const Activation& act, const Mat& pre, const Mat& out, const Mat& g) {
  switch (act.kind) {
    case ActivationKind::Identity:
      return g;
    case ActivationKind::ReLU:
      return g.cwiseProduct(pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    case ActivationKind::LeakyReLU:
      return g.cwiseProduct(
          pre.unaryExpr([s = act.slope](double v) { return v > 0.0 ? 1.0 : s; }));
    case ActivationKind::Sigmoid:
      return g.array() * out.array() * (1.0 - out.array());
    case ActivationKind::Softmax: {
      const Vec inner = g.cwiseProduct(out).rowwise().sum();
      Mat r = g;
      r.colwise() -= inner;
      return r.cwiseProduct(out);
    }
  }
  return g;
}

void validate_layer(const Layer& l) {
  if (l.bias.size() != l.weight.rows()) {
    throw DimensionError("layer: bias length " + std::to_string(l.bias.size()) +
                         " does not match weight " + shape_of(l.weight));
  }
  if (l.activation.kind == ActivationKind::LeakyReLU &&
      !(l.activation.slope > 0.0 && l.activation.slope < 1.0)) {
    throw ConfigError("layer: LeakyReLU slope must lie in (0, 1)");
  }
}

}  // namespace

Mat softmax_rows(const Mat& logits) {
  Mat out = logits;
  const Vec mx = logits.rowwise().maxCoeff();
  out.colwise() -= mx;
  out = out.array().exp();
  const Vec sums = out.rowwise().sum();
  out.array().colwise() /= sums.array();
  return out;
}

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    validate_layer(layers_[i]);
    if (i > 0 && layers_[i].inputs() != layers_[i - 1].outputs()) {
      throw DimensionError("mlp: layer " + std::to_string(i) + " expects " +
                           std::to_string(layers_[i].inputs()) + " inputs but previous emits " +
                           std::to_string(layers_[i - 1].outputs()));
    }
  }
}

Mlp Mlp::make(std::span<const Eigen::Index> widths, Activation hidden, Activation last,
              std::mt19937_64& rng) {
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const Eigen::Index in = widths[i];
    const Eigen::Index out = widths[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer l;
    l.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = dist(rng);
    l.bias = Vec::Zero(out);
    l.activation = (i + 2 == widths.size()) ? last : hidden;
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

Eigen::Index Mlp::input_width() const {
  return layers_.empty() ? -1 : layers_.front().inputs();
}

Eigen::Index Mlp::output_width() const {
  return layers_.empty() ? -1 : layers_.back().outputs();
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void Mlp::check_input(const Mat& x) const {
  if (!layers_.empty() && x.cols() != layers_.front().inputs()) {
    throw DimensionError("mlp: input width " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(layers_.front().inputs()));
  }
}

MlpTrace Mlp::forward(const Mat& x) const {
  check_input(x);
  MlpTrace t;
  t.inputs.reserve(layers_.size());
  t.pre.reserve(layers_.size());
  Mat cur = x;
  for (const auto& l : layers_) {
    Mat pre = cur * l.weight.transpose();
    pre.rowwise() += l.bias.transpose();
    Mat out;
    apply_activation(l.activation, pre, out);
    t.inputs.push_back(std::move(cur));
    t.pre.push_back(std::move(pre));
    cur = std::move(out);
  }
  t.output = std::move(cur);
  return t;
}

Mat Mlp::infer(const Mat& x) const {
  check_input(x);
  Mat cur = x;
  for (const auto& l : layers_) {
    Mat pre = cur * l.weight.transpose();
    pre.rowwise() += l.bias.transpose();
    apply_activation(l.activation, pre, cur);
  }
  return cur;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  g.reserve(layers_.size());
  for (const auto& l : layers_) {
    g.push_back({Mat::Zero(l.weight.rows(), l.weight.cols()), Vec::Zero(l.bias.size())});
  }
  return g;
}

Mat Mlp::backward(const MlpTrace& trace, const Mat& grad_out, MlpGrads& grads) const {
  if (trace.empty()) throw StateError("mlp: backward without forward");
  if (trace.inputs.size() != layers_.size()) {
    throw StateError("mlp: trace does not belong to this network");
  }
  if (grad_out.rows() != trace.output.rows() || grad_out.cols() != trace.output.cols()) {
    throw DimensionError("mlp: output gradient " + shape_of(grad_out) + " vs output " +
                         shape_of(trace.output));
  }
  if (grads.size() != layers_.size()) grads = zero_grads();
  Mat g = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Layer& l = layers_[k];
    const Mat& out = (k + 1 == layers_.size()) ? trace.output : trace.inputs[k + 1];
    const Mat g_pre = activation_backward(l.activation, trace.pre[k], out, g);
    grads[k].weight.noalias() += g_pre.transpose() * trace.inputs[k];
    grads[k].bias += g_pre.colwise().sum().transpose();
    g = g_pre * l.weight;
  }
  return g;
}

ModelGrads ModelGrads::zeros_like(const ModelParams& p) {
  return {p.encoder.zero_grads(), p.decoder.zero_grads(), p.classifier.zero_grads()};
}

ModelParams make_model(Eigen::Index input_dim, int classes, const Architecture& arch,
                       std::mt19937_64& rng) {
  if (input_dim <= 0 || classes < 2 || arch.latent_dim <= 0) {
    throw ConfigError("make_model: need input_dim > 0, classes >= 2, latent_dim > 0");
  }
  const Activation leaky{ActivationKind::LeakyReLU, arch.leaky_slope};
  ModelParams p;
  std::vector<Eigen::Index> enc{input_dim};
  enc.insert(enc.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
  enc.push_back(arch.latent_dim);
  p.encoder = Mlp::make(enc, leaky, leaky, rng);

  std::vector<Eigen::Index> dec{arch.latent_dim};
  dec.insert(dec.end(), arch.decoder_hidden.begin(), arch.decoder_hidden.end());
  dec.push_back(input_dim);
  p.decoder = Mlp::make(dec, {ActivationKind::ReLU}, {ActivationKind::Sigmoid}, rng);

  const std::vector<Eigen::Index> cls{arch.latent_dim, classes};
  p.classifier = Mlp::make(cls, {ActivationKind::Identity}, {ActivationKind::Softmax}, rng);
  return p;
}

ModelParams make_identity_model(Eigen::Index input_dim, int classes, std::mt19937_64& rng) {
  ModelParams p;
  const std::vector<Eigen::Index> cls{input_dim, classes};
  p.classifier = Mlp::make(cls, {ActivationKind::Identity}, {ActivationKind::Softmax}, rng);
  return p;
}

Mat encode(const ModelParams& params, const Mat& x) { return params.encoder.infer(x); }

Mat decode(const ModelParams& params, const Mat& z) {
  if (params.decoder.is_identity()) throw StateError("decode: model has no decoder");
  return params.decoder.infer(z);
}

Mat classify(const ModelParams& params, const Mat& z) { return params.classifier.infer(z); }

double reconstruction_loss(const Mat& reconstruction, const Mat& x) {
  if (reconstruction.rows() != x.rows() || reconstruction.cols() != x.cols()) {
    throw DimensionError("ae_loss: reconstruction " + shape_of(reconstruction) + " vs input " +
                         shape_of(x));
  }
  if (x.rows() == 0) throw DimensionError("ae_loss: empty batch");
  return (reconstruction - x).squaredNorm() / static_cast<double>(x.rows());
}

Mat reconstruction_loss_grad(const Mat& reconstruction, const Mat& x) {
  return (2.0 / static_cast<double>(x.rows())) * (reconstruction - x);
}

double ae_loss(const ModelParams& params, const Mat& x) {
  return reconstruction_loss(decode(params, encode(params, x)), x);
}

namespace {

void check_probabilities(const Mat& probs, const Vec& prior) {
  if (probs.rows() == 0) throw DimensionError("confidence_loss: empty batch");
  if (probs.cols() != prior.size()) {
    throw DimensionError("confidence_loss: " + std::to_string(probs.cols()) +
                         " classes but prior has " + std::to_string(prior.size()));
  }
  if (!probs.allFinite() || (probs.array() < 0.0).any() ||
      ((probs.rowwise().sum().array() - 1.0).abs() > 1e-6).any()) {
    throw NumericError("confidence_loss: rows must be probability vectors");
  }
  if (!prior.allFinite() || (prior.array() < 0.0).any() || std::abs(prior.sum() - 1.0) > 1e-6) {
    throw NumericError("confidence_loss: prior must be a probability vector");
  }
}

}  // namespace

double confidence_loss(const Mat& probs, const Vec& prior) {
  check_probabilities(probs, prior);
  const double n = static_cast<double>(probs.rows());
  const double entropy =
      -(probs.array() * probs.array().max(kLogFloor).log()).sum() / n;
  const Vec mean = probs.colwise().mean().transpose();
  const double ce = -(prior.array() * mean.array().max(kLogFloor).log()).sum();
  return entropy + ce;
}

Mat confidence_loss_grad(const Mat& probs, const Vec& prior) {
  check_probabilities(probs, prior);
  const double n = static_cast<double>(probs.rows());
  Mat g = probs.unaryExpr([](double p) {
    return p >= kLogFloor ? -(std::log(p) + 1.0) : -std::log(kLogFloor);
  });
  g /= n;
  const Vec mean = probs.colwise().mean().transpose();
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    if (mean(c) >= kLogFloor) g.col(c).array() -= prior(c) / (mean(c) * n);
  }
  return g;
}

}  // namespace kln
