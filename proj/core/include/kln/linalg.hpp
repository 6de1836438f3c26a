#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace kln {

/// Dense row-major matrix; rows are samples wherever a matrix holds a batch.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Conforming product a*b. Throws DimensionError naming both shapes.
Mat matmul(const Mat& a, const Mat& b);

/// Cholesky factor A = L L^T of a symmetric positive-definite matrix.
///
/// Construction checks symmetry (max |A - A^T| <= 1e-10) and throws
/// NotPositiveDefinite carrying the index of the first non-positive pivot.
/// The factor is kept so one decomposition serves many right-hand sides.
class Cholesky {
 public:
  explicit Cholesky(const Mat& a);

  /// X with A X = B.
  Mat solve(const Mat& b) const;
  const Mat& lower() const { return lower_; }
  Eigen::Index size() const { return lower_.rows(); }

 private:
  Mat lower_;
};

/// Solves a X = b for symmetric positive-definite a through a Cholesky factor.
Mat spd_solve(const Mat& a, const Mat& b);

/// Tr(a*b) as sum_ij a_ij b_ji, without forming the product.
double trace_of_product(const Mat& a, const Mat& b);

/// max_ij |a_ij - a_ji|; a must be square.
double max_asymmetry(const Mat& a);

/// Smallest eigenvalue of a symmetric matrix by shifted power iteration.
double min_eigenvalue_estimate(const Mat& a, int iterations = 2000, std::uint64_t seed = 1);

bool all_finite(const Mat& a);

/// Throws NumericError mentioning `what` if any entry is NaN or infinite.
void require_finite(const Mat& a, std::string_view what);

std::string shape_of(const Mat& a);

}  // namespace kln
