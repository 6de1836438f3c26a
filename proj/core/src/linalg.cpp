#include "kln/linalg.hpp"

#include <cmath>
#include <random>
#include <string>

#include "kln/error.hpp"

namespace kln {

namespace {

constexpr double kSymmetryTolerance = 1e-10;

}  // namespace

std::string shape_of(const Mat& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape_of(a) + " by " + shape_of(b));
  }
  Mat out = a * b;
  return out;
}

Cholesky::Cholesky(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("cholesky: matrix must be square, got " + shape_of(a));
  }
  if (!all_finite(a)) {
    throw NumericError("cholesky: matrix has non-finite entries");
  }
  const double asym = max_asymmetry(a);
  if (asym > kSymmetryTolerance) {
    throw DimensionError("cholesky: matrix is not symmetric (max |A-A^T| = " +
                         std::to_string(asym) + ")");
  }
  const Eigen::Index n = a.rows();
  lower_ = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto row_j = lower_.row(j).head(j);
    const double pivot = a(j, j) - row_j.squaredNorm();
    if (!(pivot > 0.0)) {
      throw NotPositiveDefinite(static_cast<std::size_t>(j), pivot);
    }
    const double d = std::sqrt(pivot);
    lower_(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      lower_(i, j) = (a(i, j) - lower_.row(i).head(j).dot(row_j)) / d;
    }
  }
}

Mat Cholesky::solve(const Mat& b) const {
  if (b.rows() != lower_.rows()) {
    throw DimensionError("cholesky solve: factor is " + shape_of(lower_) + ", rhs is " +
                         shape_of(b));
  }
  Mat y = lower_.triangularView<Eigen::Lower>().solve(b);
  lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
  return y;
}

Mat spd_solve(const Mat& a, const Mat& b) { return Cholesky(a).solve(b); }

double trace_of_product(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows() || b.cols() != a.rows()) {
    throw DimensionError("trace_of_product: " + shape_of(a) + " and " + shape_of(b) +
                         " do not give a square product");
  }
  return a.cwiseProduct(b.transpose()).sum();
}

double max_asymmetry(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("max_asymmetry: matrix must be square, got " + shape_of(a));
  }
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

double min_eigenvalue_estimate(const Mat& a, int iterations, std::uint64_t seed) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw DimensionError("min_eigenvalue_estimate: need a nonempty square matrix, got " +
                         shape_of(a));
  }
  const Eigen::Index n = a.rows();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;

  auto power = [&](const Mat& m) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(gen);
    v.normalize();
    double rayleigh = v.dot(m * v);
    for (int it = 0; it < iterations; ++it) {
      Vec w = m * v;
      const double norm = w.norm();
      if (norm == 0.0) return 0.0;
      v = w / norm;
      rayleigh = v.dot(m * v);
    }
    return rayleigh;
  };

  // Gershgorin bound makes the shift dominate every eigenvalue, so the
  // shifted matrix is PSD and its top eigenvalue maps to the bottom of a.
  double shift = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    shift = std::max(shift, a.row(i).cwiseAbs().sum());
  }
  const Mat shifted = Mat::Identity(n, n) * shift - a;
  return shift - power(shifted);
}

bool all_finite(const Mat& a) { return a.allFinite(); }

void require_finite(const Mat& a, std::string_view what) {
  if (!a.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite value");
  }
}

}  // namespace kln
