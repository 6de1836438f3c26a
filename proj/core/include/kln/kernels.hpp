#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "kln/linalg.hpp"

namespace kln {

enum class KernelFamily { GaussianMixture, Linear };

/// Kernel family plus its squared bandwidths.
///
/// GaussianMixture evaluates (1/q) sum_q exp(-|a-b|^2 / sigma2_q), so
/// k(x, x) = 1 and every value lies in (0, 1]. Linear is <a, b> and carries
/// no bandwidths.
struct KernelSpec {
  KernelFamily family = KernelFamily::GaussianMixture;
  std::vector<double> bandwidths{1.0, 3.0, 5.0, 7.0, 9.0};

  static KernelSpec gaussian_mixture(std::vector<double> sigma2);
  static KernelSpec linear();

  /// Throws ConfigError on an empty or non-positive bandwidth list.
  void validate() const;
};

/// Pairwise squared Euclidean distances, clamped at zero.
Mat squared_distances(const Mat& a, const Mat& b);

/// Gram matrix G_ij = k(a_i, b_j) between the rows of a and b.
Mat gram(const KernelSpec& spec, const Mat& a, const Mat& b);

using Encoder = std::function<Mat(const Mat&)>;

/// gram(spec, encode(a), encode(b)): the base kernel composed with an encoder.
Mat compound_gram(const KernelSpec& spec, const Encoder& encode, const Mat& a, const Mat& b);

/// Adjoint of gram(): given dL/dG, returns (dL/da, dL/db).
///
/// The mixture derivative is d k(a_i, b_j)/d a_i = (1/q) sum_q k_q (-2/sigma2_q)(a_i - b_j).
/// When a and b are the same matrix the caller adds the two halves.
std::pair<Mat, Mat> gram_backward(const KernelSpec& spec, const Mat& a, const Mat& b,
                                  const Mat& grad_gram);

}  // namespace kln
