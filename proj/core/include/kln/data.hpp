#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kln/linalg.hpp"

namespace kln {

/// Samples as rows scaled to [0, 1], optional labels in [0, classes).
struct Dataset {
  Mat x;
  std::optional<std::vector<int>> y;
  int classes = 0;
  std::string name;

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index dim() const { return x.cols(); }
  bool labeled() const { return y.has_value(); }
  const std::vector<int>& labels() const;

  /// Features in [0, 1], label count and range.
  void validate() const;

  /// Rows in the given order (labels follow).
  Dataset subset(std::span<const Eigen::Index> rows) const;
  Dataset without_labels() const;
};

/// Raw IDX tensor: unsigned-byte payload with big-endian dimension sizes.
struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

/// Parses an unsigned-byte IDX blob. `expected_magic` is 0x00000803 for
/// images and 0x00000801 for labels.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic);
std::vector<std::uint8_t> serialize_idx(const IdxTensor& t);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// MNIST-style image + label files. Pixels are divided by 255 and each image
/// is flattened row-major. classes = max label + 1.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Isotropic Gaussian blobs around simplex-like class means, globally
/// min-max rescaled to [0, 1]. Deterministic per seed.
Dataset synth_blobs(int classes, int per_class, int dim, double spread, std::uint64_t seed);

struct LabeledSplit {
  Dataset labeled;
  Dataset full;
};

/// Class-balanced draw of n_labeled samples (n_labeled / classes each).
/// The full set is returned unchanged as the unlabeled pool.
LabeledSplit split_labeled(const Dataset& ds, Eigen::Index n_labeled, std::uint64_t seed);

/// Seeded random subset of n rows (n >= size returns a permuted copy).
Dataset random_subset(const Dataset& ds, Eigen::Index n, std::uint64_t seed);

/// Holds out round(fraction * size) seeded rows; returns {train, held_out}.
std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, double fraction, std::uint64_t seed);

std::vector<Eigen::Index> class_counts(const Dataset& ds);

/// Class prior estimated from the labels.
Vec empirical_prior(const Dataset& ds);

Mat one_hot(std::span<const int> labels, int classes);

/// Header "f0,...,f{D-1},label"; label column empty for unlabeled data.
void write_csv(const Dataset& ds, std::ostream& out);

}  // namespace kln
