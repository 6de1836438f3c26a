#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "kln/data.hpp"
#include "kln/kernels.hpp"
#include "kln/network.hpp"

namespace kln {

Encoder identity_encoder();
/// Encoder of a model snapshot (copied, so the result outlives `params`).
Encoder model_encoder(const ModelParams& params);

enum class BatchMode { Mixed, SingleClass };

struct Heatmap {
  Mat h;                     // (K + lambda I)^{-1} K (K + lambda I)^{-1}
  std::vector<int> labels;   // batch labels, rows sorted by label
  double offdiag_cv = 0.0;   // coefficient of variation of the off-diagonal entries
};

/// Draws a batch (any classes, or only `single_class`), encodes it and
/// returns the H matrix of the kernel Gram on the codes.
Heatmap h_heatmap(const Dataset& ds, const KernelSpec& spec, const Encoder& encode,
                  BatchMode mode, int single_class, Eigen::Index batch_size, double lambda,
                  std::uint64_t seed);

double offdiag_coefficient_of_variation(const Mat& m);

/// |a - b|_F / |a|_F.
double relative_frobenius_distance(const Mat& a, const Mat& b);

/// Comma-separated rows, %.17g.
void write_matrix_csv(const Mat& m, std::ostream& out);

/// Binary P5 greymap, per-matrix min-max normalized to 0..255.
void write_pgm(const Mat& m, std::ostream& out);

struct KernelHistogram {
  std::vector<double> edges;  // bins + 1 edges over [0, 1]
  std::vector<Eigen::Index> same;
  std::vector<Eigen::Index> diff;
  std::vector<double> same_values;
  std::vector<double> diff_values;
};

/// Kernel values of `pairs` random same-class pairs and `pairs` random
/// different-class pairs, binned over [0, 1] (out-of-range values land in
/// the end bins).
KernelHistogram kernel_histogram(const Dataset& ds, const KernelSpec& spec, const Encoder& encode,
                                 Eigen::Index pairs, int bins, std::uint64_t seed);

/// Header "bin_left,bin_right,count_same,count_diff".
void write_histogram_csv(const KernelHistogram& hist, std::ostream& out);

/// mean(same) - mean(diff).
double separation_score(std::span<const double> same, std::span<const double> diff);

}  // namespace kln
