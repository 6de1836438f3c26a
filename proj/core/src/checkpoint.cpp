#include "kln/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "kln/error.hpp"

namespace kln {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'K', 'L', 'N', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxWidth = 1u << 24;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  return v;
}

void put_mlp(std::ostream& out, const Mlp& mlp) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(mlp.depth()));
  for (const Layer& l : mlp.layers()) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation.kind));
    put<double>(out, l.activation.slope);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(l.weight.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(l.weight.cols()));
    out.write(reinterpret_cast<const char*>(l.weight.data()),
              static_cast<std::streamsize>(l.weight.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(l.bias.data()),
              static_cast<std::streamsize>(l.bias.size() * sizeof(double)));
  }
}

Mlp get_mlp(std::istream& in) {
  const auto count = get<std::uint32_t>(in, "layer count");
  if (count > 1024) throw CheckpointError("checkpoint: implausible layer count");
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    Layer l;
    const auto kind = get<std::uint8_t>(in, "activation");
    if (kind > static_cast<std::uint8_t>(ActivationKind::Softmax)) {
      throw CheckpointError("checkpoint: unknown activation code " + std::to_string(kind));
    }
    l.activation.kind = static_cast<ActivationKind>(kind);
    l.activation.slope = get<double>(in, "slope");
    const auto rows = get<std::uint64_t>(in, "rows");
    const auto cols = get<std::uint64_t>(in, "cols");
    if (rows == 0 || cols == 0 || rows > kMaxWidth || cols > kMaxWidth) {
      throw CheckpointError("checkpoint: implausible layer shape");
    }
    l.weight.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    l.bias.resize(static_cast<Eigen::Index>(rows));
    if (!in.read(reinterpret_cast<char*>(l.weight.data()),
                 static_cast<std::streamsize>(rows * cols * sizeof(double))) ||
        !in.read(reinterpret_cast<char*>(l.bias.data()),
                 static_cast<std::streamsize>(rows * sizeof(double)))) {
      throw CheckpointError("checkpoint truncated inside layer payload");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw CheckpointError("checkpoint: non-finite parameter");
    }
    layers.push_back(std::move(l));
  }
  try {
    return Mlp(std::move(layers));
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const ModelParams& params, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put_mlp(out, params.encoder);
  put_mlp(out, params.decoder);
  put_mlp(out, params.classifier);
  if (!out) throw CheckpointError("checkpoint: write failed");
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
  save_checkpoint(params, out);
}

ModelParams load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError("checkpoint: bad magic");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  ModelParams p;
  p.encoder = get_mlp(in);
  p.decoder = get_mlp(in);
  p.classifier = get_mlp(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("checkpoint: trailing bytes after payload");
  }
  if (p.classifier.is_identity()) throw CheckpointError("checkpoint: missing classifier");
  const Eigen::Index latent = p.encoder.is_identity() ? -1 : p.encoder.output_width();
  if (latent > 0 && p.classifier.input_width() != latent) {
    throw CheckpointError("checkpoint: classifier input does not match encoder output");
  }
  if (!p.decoder.is_identity() && latent > 0 && p.decoder.input_width() != latent) {
    throw CheckpointError("checkpoint: decoder input does not match encoder output");
  }
  return p;
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace kln
