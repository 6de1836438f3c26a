#include "kln/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "kln/cmmd.hpp"
#include "kln/error.hpp"
#include "kln/rng.hpp"

namespace kln {

Encoder identity_encoder() {
  return [](const Mat& x) { return x; };
}

Encoder model_encoder(const ModelParams& params) {
  return [enc = params.encoder](const Mat& x) { return enc.infer(x); };
}

Heatmap h_heatmap(const Dataset& ds, const KernelSpec& spec, const Encoder& encode,
                  BatchMode mode, int single_class, Eigen::Index batch_size, double lambda,
                  std::uint64_t seed) {
  const auto& y = ds.labels();
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    if (mode == BatchMode::Mixed || y[static_cast<std::size_t>(i)] == single_class) {
      candidates.push_back(i);
    }
  }
  if (static_cast<Eigen::Index>(candidates.size()) < batch_size || batch_size < 1) {
    throw ConfigError("h_heatmap: need " + std::to_string(batch_size) + " samples, only " +
                      std::to_string(candidates.size()) + " available");
  }
  auto rng = substream(seed, "diagnostics");
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(static_cast<std::size_t>(batch_size));
  std::stable_sort(candidates.begin(), candidates.end(), [&](Eigen::Index a, Eigen::Index b) {
    return y[static_cast<std::size_t>(a)] < y[static_cast<std::size_t>(b)];
  });

  const Dataset batch = ds.subset(candidates);
  const Mat z = encode(batch.x);
  Heatmap out;
  out.h = h_matrix(gram(spec, z, z), lambda);
  out.labels = batch.labels();
  out.offdiag_cv = offdiag_coefficient_of_variation(out.h);
  return out;
}

double offdiag_coefficient_of_variation(const Mat& m) {
  const Eigen::Index n = m.rows();
  if (n < 2 || m.cols() != n) throw DimensionError("offdiag_cv: need a square matrix, n >= 2");
  double sum = 0.0, sq = 0.0;
  const double count = static_cast<double>(n * (n - 1));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) sum += m(i, j);
  const double mean = sum / count;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) sq += (m(i, j) - mean) * (m(i, j) - mean);
  const double sd = std::sqrt(sq / count);
  return mean == 0.0 ? 0.0 : sd / std::abs(mean);
}

double relative_frobenius_distance(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("relative_frobenius_distance: " + shape_of(a) + " vs " + shape_of(b));
  }
  const double na = a.norm();
  return na == 0.0 ? (b - a).norm() : (a - b).norm() / na;
}

void write_matrix_csv(const Mat& m, std::ostream& out) {
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

void write_pgm(const Mat& m, std::ostream& out) {
  out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  const double lo = m.minCoeff();
  const double hi = m.maxCoeff();
  const double range = hi - lo;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double t = range > 0.0 ? (m(i, j) - lo) / range : 0.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
    }
  }
}

namespace {

double kernel_value(const KernelSpec& spec, const Mat& z, Eigen::Index i, Eigen::Index j) {
  if (spec.family == KernelFamily::Linear) return z.row(i).dot(z.row(j));
  const double d = (z.row(i) - z.row(j)).squaredNorm();
  double v = 0.0;
  for (double s2 : spec.bandwidths) v += std::exp(-d / s2);
  return v / static_cast<double>(spec.bandwidths.size());
}

}  // namespace

KernelHistogram kernel_histogram(const Dataset& ds, const KernelSpec& spec, const Encoder& encode,
                                 Eigen::Index pairs, int bins, std::uint64_t seed) {
  spec.validate();
  const auto& y = ds.labels();
  if (pairs < 1 || bins < 1) throw ConfigError("kernel_histogram: pairs and bins must be >= 1");
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(ds.classes));
  for (Eigen::Index i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])].push_back(i);
  std::vector<int> present;
  for (int c = 0; c < ds.classes; ++c) {
    const auto count = by_class[static_cast<std::size_t>(c)].size();
    if (count == 1) {
      throw ConfigError("kernel_histogram: class " + std::to_string(c) + " has fewer than 2 samples");
    }
    if (count > 0) present.push_back(c);
  }
  if (present.size() < 2) throw ConfigError("kernel_histogram: need at least two classes");

  auto rng = substream(seed, "diagnostics");
  std::uniform_int_distribution<Eigen::Index> any(0, ds.size() - 1);
  auto pick = [&](const std::vector<Eigen::Index>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };

  std::vector<std::pair<Eigen::Index, Eigen::Index>> same_pairs, diff_pairs;
  for (Eigen::Index p = 0; p < pairs; ++p) {
    const Eigen::Index i = any(rng);
    const auto& members = by_class[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
    Eigen::Index j = i;
    while (j == i) j = pick(members);
    same_pairs.emplace_back(i, j);
  }
  for (Eigen::Index p = 0; p < pairs; ++p) {
    const Eigen::Index i = any(rng);
    Eigen::Index j = i;
    while (y[static_cast<std::size_t>(j)] == y[static_cast<std::size_t>(i)]) j = any(rng);
    diff_pairs.emplace_back(i, j);
  }

  // Encode each distinct sampled row once.
  std::vector<Eigen::Index> rows;
  for (const auto& [i, j] : same_pairs) { rows.push_back(i); rows.push_back(j); }
  for (const auto& [i, j] : diff_pairs) { rows.push_back(i); rows.push_back(j); }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(ds.size()), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) slot[static_cast<std::size_t>(rows[k])] = static_cast<Eigen::Index>(k);
  const Mat z = encode(ds.subset(rows).x);

  KernelHistogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = static_cast<double>(b) / bins;
  h.same.assign(static_cast<std::size_t>(bins), 0);
  h.diff.assign(static_cast<std::size_t>(bins), 0);
  auto bin_of = [bins](double v) {
    const auto b = static_cast<long long>(std::floor(v * bins));
    return static_cast<std::size_t>(std::clamp<long long>(b, 0, bins - 1));
  };
  for (const auto& [i, j] : same_pairs) {
    const double v = kernel_value(spec, z, slot[static_cast<std::size_t>(i)], slot[static_cast<std::size_t>(j)]);
    h.same_values.push_back(v);
    ++h.same[bin_of(v)];
  }
  for (const auto& [i, j] : diff_pairs) {
    const double v = kernel_value(spec, z, slot[static_cast<std::size_t>(i)], slot[static_cast<std::size_t>(j)]);
    h.diff_values.push_back(v);
    ++h.diff[bin_of(v)];
  }
  return h;
}

void write_histogram_csv(const KernelHistogram& hist, std::ostream& out) {
  out << "bin_left,bin_right,count_same,count_diff\n";
  char buf[96];
  for (std::size_t b = 0; b < hist.same.size(); ++b) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,", hist.edges[b], hist.edges[b + 1]);
    out << buf << hist.same[b] << ',' << hist.diff[b] << '\n';
  }
}

double separation_score(std::span<const double> same, std::span<const double> diff) {
  if (same.empty() || diff.empty()) throw ConfigError("separation_score: empty input");
  const double ms = std::accumulate(same.begin(), same.end(), 0.0) / static_cast<double>(same.size());
  const double md = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(diff.size());
  return ms - md;
}

}  // namespace kln
