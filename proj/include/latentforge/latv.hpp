#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "latentforge/latent_geometry.hpp"

namespace latentforge {

/// Dense row-major float32 matrix persisted in the "LATV v1" layout:
///
///   offset 0   magic "LATV"
///   offset 4   u32 version (1)
///   offset 8   u32 count
///   offset 12  u32 dim
///   offset 16  count*dim float32, little-endian, row-major
///
/// Parsing is strict: the payload length must match the header exactly and
/// every value must be finite. Any violation raises FormatError naming the
/// offending byte offset.
class VectorStore {
 public:
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kHeaderSize = 16;

  VectorStore() = default;
  explicit VectorStore(std::uint32_t dim) : dim_(dim) {}

  std::uint32_t count() const noexcept { return count_; }
  std::uint32_t dim() const noexcept { return dim_; }

  /// Row widened to double.
  std::vector<double> row(std::size_t i) const;
  LatentVector latent(std::size_t i) const { return LatentVector(row(i)); }
  std::vector<LatentVector> latents() const;

  /// Appends a row, narrowing to float32. Returns the row index.
  std::uint32_t append(std::span<const double> values);

  std::vector<std::byte> serialize() const;
  static VectorStore parse(std::span<const std::byte> bytes);

  void save(const std::filesystem::path& path) const;
  static VectorStore load(const std::filesystem::path& path);

  static VectorStore from_latents(std::span<const LatentVector> latents, std::uint32_t dim);

 private:
  std::uint32_t count_ = 0;
  std::uint32_t dim_ = 0;
  std::vector<float> data_;
};

}  // namespace latentforge
