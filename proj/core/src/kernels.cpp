#include "kln/kernels.hpp"

#include <cmath>
#include <string>

#include "kln/error.hpp"

namespace kln {

KernelSpec KernelSpec::gaussian_mixture(std::vector<double> sigma2) {
  KernelSpec spec{KernelFamily::GaussianMixture, std::move(sigma2)};
  spec.validate();
  return spec;
}

KernelSpec KernelSpec::linear() { return KernelSpec{KernelFamily::Linear, {}}; }

void KernelSpec::validate() const {
  if (family == KernelFamily::Linear) {
    if (!bandwidths.empty()) throw ConfigError("linear kernel takes no bandwidths");
    return;
  }
  if (bandwidths.empty()) throw ConfigError("gaussian mixture needs at least one bandwidth");
  for (double s : bandwidths) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ConfigError("bandwidth must be positive and finite, got " + std::to_string(s));
    }
  }
}

namespace {

void check_batches(const Mat& a, const Mat& b, const char* who) {
  if (a.rows() == 0 || b.rows() == 0) {
    throw DimensionError(std::string(who) + ": empty batch");
  }
  if (a.cols() != b.cols()) {
    throw DimensionError(std::string(who) + ": feature widths differ, " + shape_of(a) +
                         " vs " + shape_of(b));
  }
}

}  // namespace

Mat squared_distances(const Mat& a, const Mat& b) {
  check_batches(a, b, "squared_distances");
  const Vec na = a.rowwise().squaredNorm();
  const Vec nb = b.rowwise().squaredNorm();
  Mat d = -2.0 * (a * b.transpose());
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  if (a.data() == b.data() && a.rows() == b.rows()) {
    // Self distances: GEMM round-off is not symmetric and can leave a nonzero
    // diagonal, which would break Gram symmetry and k(x, x) = 1.
    d = 0.5 * (d + d.transpose()).eval();
    d.diagonal().setZero();
  }
  return d.cwiseMax(0.0);
}

Mat gram(const KernelSpec& spec, const Mat& a, const Mat& b) {
  spec.validate();
  check_batches(a, b, "gram");
  if (spec.family == KernelFamily::Linear) {
    Mat g = a * b.transpose();
    if (a.data() == b.data() && a.rows() == b.rows()) g = 0.5 * (g + g.transpose()).eval();
    require_finite(g, "gram");
    return g;
  }
  const Mat d = squared_distances(a, b);
  Mat g = Mat::Zero(d.rows(), d.cols());
  for (double s2 : spec.bandwidths) {
    g.array() += (-d.array() / s2).exp();
  }
  g /= static_cast<double>(spec.bandwidths.size());
  require_finite(g, "gram");
  return g;
}

Mat compound_gram(const KernelSpec& spec, const Encoder& encode, const Mat& a, const Mat& b) {
  const Mat za = encode(a);
  const Mat zb = encode(b);
  if (za.cols() != zb.cols()) {
    throw DimensionError("compound_gram: encoder produced widths " + shape_of(za) + " and " +
                         shape_of(zb));
  }
  return gram(spec, za, zb);
}

std::pair<Mat, Mat> gram_backward(const KernelSpec& spec, const Mat& a, const Mat& b,
                                  const Mat& grad_gram) {
  check_batches(a, b, "gram_backward");
  if (grad_gram.rows() != a.rows() || grad_gram.cols() != b.rows()) {
    throw DimensionError("gram_backward: gradient is " + shape_of(grad_gram) + ", expected " +
                         std::to_string(a.rows()) + "x" + std::to_string(b.rows()));
  }
  if (spec.family == KernelFamily::Linear) {
    return {grad_gram * b, grad_gram.transpose() * a};
  }
  // dL/d(dist_ij), then dist_ij = |a_i|^2 + |b_j|^2 - 2 <a_i, b_j>.
  const Mat d = squared_distances(a, b);
  Mat w = Mat::Zero(d.rows(), d.cols());
  for (double s2 : spec.bandwidths) {
    w.array() += (-d.array() / s2).exp() * (-1.0 / s2);
  }
  w.array() *= grad_gram.array() / static_cast<double>(spec.bandwidths.size());

  const Vec row_sum = w.rowwise().sum();
  const Vec col_sum = w.colwise().sum().transpose();
  Mat ga = 2.0 * (row_sum.asDiagonal() * a - w * b);
  Mat gb = 2.0 * (col_sum.asDiagonal() * b - w.transpose() * a);
  return {std::move(ga), std::move(gb)};
}

}  // namespace kln
