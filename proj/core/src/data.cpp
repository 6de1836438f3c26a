#include "kln/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <random>

#include "kln/error.hpp"
#include "kln/rng.hpp"

namespace kln {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<Eigen::Index> permutation(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

const std::vector<int>& Dataset::labels() const {
  if (!y) throw ConfigError("dataset '" + name + "' has no labels");
  return *y;
}

void Dataset::validate() const {
  if (!x.allFinite() || (x.size() > 0 && (x.minCoeff() < 0.0 || x.maxCoeff() > 1.0))) {
    throw NumericError("dataset '" + name + "': features must lie in [0, 1]");
  }
  if (y) {
    if (static_cast<Eigen::Index>(y->size()) != x.rows()) {
      throw DimensionError("dataset '" + name + "': label count differs from sample count");
    }
    for (int label : *y) {
      if (label < 0 || label >= classes) {
        throw ConfigError("dataset '" + name + "': label " + std::to_string(label) +
                          " outside [0, " + std::to_string(classes) + ")");
      }
    }
  }
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.classes = classes;
  out.name = name;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  if (y) out.y.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) throw DimensionError("subset: row out of range");
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    if (y) out.y->push_back((*y)[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

Dataset Dataset::without_labels() const {
  Dataset out = *this;
  out.y.reset();
  return out;
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic) {
  if (bytes.size() < 4) {
    throw IdxError(IdxError::Kind::Truncated, bytes.size(), "idx: file shorter than magic");
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != expected_magic) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "idx: bad magic 0x%08x, expected 0x%08x", magic,
                  expected_magic);
    throw IdxError(IdxError::Kind::BadMagic, 0, buf);
  }
  const std::size_t ndims = magic & 0xffu;
  IdxTensor t;
  std::size_t offset = 4;
  std::uint64_t count = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    if (offset + 4 > bytes.size()) {
      throw IdxError(IdxError::Kind::Truncated, offset, "idx: truncated dimension header");
    }
    t.dims.push_back(read_be32(bytes, offset));
    count *= t.dims.back();
    offset += 4;
  }
  if (bytes.size() - offset < count) {
    throw IdxError(IdxError::Kind::Truncated, bytes.size(),
                   "idx: payload has " + std::to_string(bytes.size() - offset) +
                       " bytes, header declares " + std::to_string(count));
  }
  if (bytes.size() - offset > count) {
    throw IdxError(IdxError::Kind::Truncated, offset + count, "idx: trailing bytes after payload");
  }
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return t;
}

std::vector<std::uint8_t> serialize_idx(const IdxTensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * t.dims.size() + t.data.size());
  write_be32(out, 0x00000800u | static_cast<std::uint32_t>(t.dims.size()));
  for (std::uint32_t d : t.dims) write_be32(out, d);
  out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto image_bytes = read_file(images);
  const auto label_bytes = read_file(labels);
  const IdxTensor img = parse_idx(image_bytes, kImageMagic);
  const IdxTensor lab = parse_idx(label_bytes, kLabelMagic);
  if (img.dims[0] != lab.dims[0]) {
    throw IdxError(IdxError::Kind::CountMismatch, 4,
                   "idx: " + std::to_string(img.dims[0]) + " images but " +
                       std::to_string(lab.dims[0]) + " labels");
  }
  const Eigen::Index n = img.dims[0];
  const Eigen::Index d = static_cast<Eigen::Index>(img.dims[1]) * img.dims[2];
  Dataset ds;
  ds.name = images.filename().string();
  ds.x.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      ds.x(i, j) = static_cast<double>(img.data[static_cast<std::size_t>(i * d + j)]) / 255.0;
    }
  }
  ds.y.emplace(lab.data.begin(), lab.data.end());
  ds.classes = ds.y->empty() ? 0 : *std::max_element(ds.y->begin(), ds.y->end()) + 1;
  ds.validate();
  return ds;
}

Dataset synth_blobs(int classes, int per_class, int dim, double spread, std::uint64_t seed) {
  if (classes < 2 || per_class < 1 || dim < 1 || !(spread >= 0.0)) {
    throw ConfigError("synth_blobs: need classes >= 2, per_class >= 1, dim >= 1, spread >= 0");
  }
  auto rng = substream(seed, "blobs");
  std::normal_distribution<double> normal;

  // Class means: simplex vertices e_c under a random rotation when dim >= C,
  // otherwise evenly spaced on a unit-chord circle (or line) in the first dims.
  Mat means = Mat::Zero(classes, dim);
  if (dim >= classes) {
    Mat g(dim, dim);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    const Mat q = Eigen::HouseholderQR<Mat>(g).householderQ();
    for (int c = 0; c < classes; ++c) means.row(c) = q.row(c);
  } else if (dim >= 2) {
    const double pi = std::acos(-1.0);
    const double radius = std::sqrt(2.0) / (2.0 * std::sin(pi / classes));
    for (int c = 0; c < classes; ++c) {
      means(c, 0) = radius * std::cos(2.0 * pi * c / classes);
      means(c, 1) = radius * std::sin(2.0 * pi * c / classes);
    }
  } else {
    for (int c = 0; c < classes; ++c) means(c, 0) = std::sqrt(2.0) * c;
  }

  const Eigen::Index n = static_cast<Eigen::Index>(classes) * per_class;
  Dataset ds;
  ds.name = "blobs";
  ds.classes = classes;
  ds.x.resize(n, dim);
  ds.y.emplace();
  const auto order = permutation(n, rng);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int c = static_cast<int>(order[static_cast<std::size_t>(k)] / per_class);
    for (int j = 0; j < dim; ++j) ds.x(k, j) = means(c, j) + spread * normal(rng);
    ds.y->push_back(c);
  }
  const double lo = ds.x.minCoeff();
  const double hi = ds.x.maxCoeff();
  if (hi > lo) {
    ds.x = (ds.x.array() - lo) / (hi - lo);
  } else {
    ds.x.setConstant(0.5);
  }
  ds.x = ds.x.cwiseMax(0.0).cwiseMin(1.0);
  return ds;
}

std::vector<Eigen::Index> class_counts(const Dataset& ds) {
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(ds.classes), 0);
  for (int label : ds.labels()) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

Vec empirical_prior(const Dataset& ds) {
  const auto counts = class_counts(ds);
  Vec p(ds.classes);
  for (int c = 0; c < ds.classes; ++c) p(c) = static_cast<double>(counts[static_cast<std::size_t>(c)]);
  if (p.sum() <= 0.0) throw ConfigError("empirical_prior: empty dataset");
  return p / p.sum();
}

LabeledSplit split_labeled(const Dataset& ds, Eigen::Index n_labeled, std::uint64_t seed) {
  const auto& y = ds.labels();
  if (n_labeled <= 0 || n_labeled > ds.size()) {
    throw ConfigError("split_labeled: n_labeled must lie in [1, " + std::to_string(ds.size()) + "]");
  }
  if (n_labeled % ds.classes != 0) {
    throw ConfigError("split_labeled: n_labeled must be a multiple of the class count");
  }
  const Eigen::Index per_class = n_labeled / ds.classes;
  auto rng = substream(seed, "split");
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(ds.classes));
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])].push_back(i);
  }
  std::vector<Eigen::Index> chosen;
  for (int c = 0; c < ds.classes; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    if (static_cast<Eigen::Index>(members.size()) < per_class) {
      throw ConfigError("split_labeled: class " + std::to_string(c) + " has only " +
                        std::to_string(members.size()) + " samples, need " +
                        std::to_string(per_class));
    }
    std::shuffle(members.begin(), members.end(), rng);
    chosen.insert(chosen.end(), members.begin(), members.begin() + per_class);
  }
  std::shuffle(chosen.begin(), chosen.end(), rng);
  return {ds.subset(chosen), ds};
}

Dataset random_subset(const Dataset& ds, Eigen::Index n, std::uint64_t seed) {
  auto rng = substream(seed, "subset");
  auto idx = permutation(ds.size(), rng);
  idx.resize(static_cast<std::size_t>(std::min(n, ds.size())));
  return ds.subset(idx);
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ConfigError("split_holdout: fraction must lie in [0, 1)");
  }
  auto rng = substream(seed, "holdout");
  const auto idx = permutation(ds.size(), rng);
  const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ds.size())));
  const std::vector<Eigen::Index> keep(idx.begin() + static_cast<std::ptrdiff_t>(held), idx.end());
  const std::vector<Eigen::Index> out(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(held));
  return {ds.subset(keep), ds.subset(out)};
}

Mat one_hot(std::span<const int> labels, int classes) {
  Mat m = Mat::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw ConfigError("one_hot: label " + std::to_string(labels[i]) + " out of range");
    }
    m(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return m;
}

void write_csv(const Dataset& ds, std::ostream& out) {
  for (Eigen::Index j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  char buf[32];
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.x(i, j));
      out << buf << ',';
    }
    if (ds.y) out << (*ds.y)[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

}  // namespace kln
