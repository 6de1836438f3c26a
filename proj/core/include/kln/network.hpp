#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kln/linalg.hpp"

namespace kln {

enum class ActivationKind : std::uint8_t { Identity = 0, ReLU = 1, LeakyReLU = 2, Sigmoid = 3, Softmax = 4 };

struct Activation {
  ActivationKind kind = ActivationKind::Identity;
  double slope = 0.2;  // LeakyReLU only
};

/// Dense layer y = act(x W^T + b) applied to a batch with samples as rows.
struct Layer {
  Mat weight;  // out x in
  Vec bias;    // out
  Activation activation;

  Eigen::Index inputs() const { return weight.cols(); }
  Eigen::Index outputs() const { return weight.rows(); }
};

struct LayerGrad {
  Mat weight;
  Vec bias;
};

using MlpGrads = std::vector<LayerGrad>;

/// Per-layer inputs and pre-activations of one forward pass.
struct MlpTrace {
  std::vector<Mat> inputs;
  std::vector<Mat> pre;
  Mat output;
  bool empty() const { return inputs.empty() && output.size() == 0; }
};

/// Stack of dense layers. An empty stack is the identity map.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers);

  /// Layers of widths[0] -> widths[1] -> ..., Glorot-uniform weights, zero
  /// biases. `hidden` is used between layers, `last` on the output layer.
  static Mlp make(std::span<const Eigen::Index> widths, Activation hidden, Activation last,
                  std::mt19937_64& rng);

  MlpTrace forward(const Mat& x) const;
  Mat infer(const Mat& x) const;

  /// Accumulates parameter gradients into `grads` (resized on first use) and
  /// returns dL/dx. Throws StateError on an empty trace.
  Mat backward(const MlpTrace& trace, const Mat& grad_out, MlpGrads& grads) const;

  MlpGrads zero_grads() const;

  bool is_identity() const { return layers_.empty(); }
  std::size_t depth() const { return layers_.size(); }
  Eigen::Index input_width() const;   // -1 for the identity
  Eigen::Index output_width() const;  // -1 for the identity
  std::size_t parameter_count() const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

 private:
  void check_input(const Mat& x) const;
  std::vector<Layer> layers_;
};

/// Encoder h_we, decoder h_wd and softmax classifier w_fc.
struct ModelParams {
  Mlp encoder;
  Mlp decoder;
  Mlp classifier;
};

struct ModelGrads {
  MlpGrads encoder;
  MlpGrads decoder;
  MlpGrads classifier;

  static ModelGrads zeros_like(const ModelParams& p);
};

struct Architecture {
  std::vector<Eigen::Index> encoder_hidden{512, 256};
  Eigen::Index latent_dim = 128;
  std::vector<Eigen::Index> decoder_hidden{256, 512};
  double leaky_slope = 0.2;
};

/// Dense encoder (LeakyReLU), decoder (ReLU, Sigmoid output) and softmax classifier.
ModelParams make_model(Eigen::Index input_dim, int classes, const Architecture& arch,
                       std::mt19937_64& rng);

/// Identity encoder, no decoder, classifier input_dim -> classes.
ModelParams make_identity_model(Eigen::Index input_dim, int classes, std::mt19937_64& rng);

Mat encode(const ModelParams& params, const Mat& x);
Mat decode(const ModelParams& params, const Mat& z);
Mat classify(const ModelParams& params, const Mat& z);

/// Row-wise softmax with max subtraction.
Mat softmax_rows(const Mat& logits);

/// Mean over rows of the summed squared reconstruction error.
double reconstruction_loss(const Mat& reconstruction, const Mat& x);
Mat reconstruction_loss_grad(const Mat& reconstruction, const Mat& x);
double ae_loss(const ModelParams& params, const Mat& x);

/// (1/n) sum_i H(p_i) + CE(prior, column mean of p), logs clamped at 1e-12.
double confidence_loss(const Mat& probs, const Vec& prior);
Mat confidence_loss_grad(const Mat& probs, const Vec& prior);

}  // namespace kln
