#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latentforge {

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::filesystem::path& path);

/// Minimal CSV: comma separated, no quoting, '#' comment lines and blank
/// lines skipped. `header` names the expected first row; when the first row
/// matches it is dropped, otherwise every row is data.
struct CsvTable {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable parse_csv(std::string_view text, std::span<const std::string_view> header = {});
CsvTable read_csv(const std::filesystem::path& path, std::span<const std::string_view> header = {});

double parse_double(std::string_view field, std::string_view context);
long long parse_int(std::string_view field, std::string_view context);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace latentforge
