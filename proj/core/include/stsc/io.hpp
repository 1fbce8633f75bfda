#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stsc {

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written artifact under `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Splits one CSV line on commas (no quoting; the toolkit's formats never
/// need it). A trailing '\r' is dropped.
std::vector<std::string_view> split_csv_line(std::string_view line);

// Little-endian binary helpers for the archive and checkpoint formats.
void append_u32_le(std::string& out, std::uint32_t v);
void append_f32_le(std::string& out, std::span<const float> values);
std::uint32_t read_u32_le(const char* p);
float read_f32_le(const char* p);

/// Shortest decimal text that round-trips the double.
std::string format_double(double v);
/// Fixed precision, for reports.
std::string format_fixed(double v, int digits);

}  // namespace stsc
