#include "latentforge/latv.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "latentforge/errors.hpp"
#include "latentforge/fileio.hpp"

namespace latentforge {

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

std::uint32_t read_u32le(std::span<const std::byte> b, std::size_t off) {
  return std::uint32_t(std::to_integer<std::uint8_t>(b[off])) |
         std::uint32_t(std::to_integer<std::uint8_t>(b[off + 1])) << 8 |
         std::uint32_t(std::to_integer<std::uint8_t>(b[off + 2])) << 16 |
         std::uint32_t(std::to_integer<std::uint8_t>(b[off + 3])) << 24;
}

void write_u32le(std::vector<std::byte>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(std::byte((v >> (8 * k)) & 0xffu));
}

}  // namespace

std::vector<double> VectorStore::row(std::size_t i) const {
  if (i >= count_)
    throw InputError("row " + std::to_string(i) + " out of range (count " +
                     std::to_string(count_) + ")");
  const auto first = data_.begin() + static_cast<std::ptrdiff_t>(i * dim_);
  return {first, first + dim_};
}

std::vector<LatentVector> VectorStore::latents() const {
  std::vector<LatentVector> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) out.push_back(latent(i));
  return out;
}

std::uint32_t VectorStore::append(std::span<const double> values) {
  if (dim_ == 0) throw InputError("vector store dim must be >= 1");
  if (values.size() != dim_)
    throw DimensionError("vector store dim " + std::to_string(dim_) + ", row has " +
                         std::to_string(values.size()));
  for (double v : values) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) throw InputError("vector store rows must be finite in float32");
    data_.push_back(f);
  }
  return count_++;
}

VectorStore VectorStore::from_latents(std::span<const LatentVector> latents, std::uint32_t dim) {
  VectorStore store(dim);
  for (const auto& w : latents) store.append(w.values());
  return store;
}

std::vector<std::byte> VectorStore::serialize() const {
  std::vector<std::byte> out;
  out.reserve(kHeaderSize + data_.size() * 4);
  for (char c : {'L', 'A', 'T', 'V'}) out.push_back(std::byte(c));
  write_u32le(out, kVersion);
  write_u32le(out, count_);
  write_u32le(out, dim_);
  for (float f : data_) write_u32le(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

VectorStore VectorStore::parse(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderSize)
    throw FormatError("LATV: truncated header at offset " + std::to_string(bytes.size()) + " (need " +
                      std::to_string(kHeaderSize) + " bytes)");
  if (std::memcmp(bytes.data(), "LATV", 4) != 0) throw FormatError("LATV: bad magic at offset 0");
  const std::uint32_t version = read_u32le(bytes, 4);
  if (version != kVersion)
    throw FormatError("LATV: unsupported version " + std::to_string(version) + " at offset 4");

  VectorStore store;
  store.count_ = read_u32le(bytes, 8);
  store.dim_ = read_u32le(bytes, 12);
  if (store.count_ > 0 && store.dim_ == 0)
    throw FormatError("LATV: dim 0 with nonzero count at offset 12");

  // 64-bit product of two u32 cannot overflow; the byte count can exceed size_t only on 32-bit.
  const std::uint64_t values = std::uint64_t(store.count_) * store.dim_;
  const std::uint64_t payload = bytes.size() - kHeaderSize;
  if (payload != values * 4)
    throw FormatError("LATV: header declares " + std::to_string(store.count_) + "x" +
                      std::to_string(store.dim_) + " values (" + std::to_string(values * 4) +
                      " bytes) but payload at offset 16 has " + std::to_string(payload) + " bytes");

  store.data_.resize(values);
  for (std::size_t i = 0; i < values; ++i) {
    const std::size_t off = kHeaderSize + 4 * i;
    const float f = std::bit_cast<float>(read_u32le(bytes, off));
    if (!std::isfinite(f))
      throw FormatError("LATV: non-finite value at offset " + std::to_string(off));
    store.data_[i] = f;
  }
  return store;
}

void VectorStore::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

VectorStore VectorStore::load(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace latentforge
