#pragma once

// Internal file helpers shared by the dataset and model formats.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fairhead::detail {

std::string read_file(const std::filesystem::path& file);
void write_file(const std::filesystem::path& file, std::string_view bytes);

// Little-endian IEEE-754 binary32, independent of host byte order.
std::string encode_f32_le(std::span<const float> values);
std::vector<float> decode_f32_le(std::string_view bytes);

// Minimal RFC 4180 style CSV: comma separated, optional double quotes with ""
// escapes, LF or CRLF line endings. `quoted` reports per field whether it was
// quoted in the source.
struct CsvRow {
    std::vector<std::string> fields;
    std::vector<bool> quoted;
};
std::vector<CsvRow> parse_csv(std::string_view text, const std::string& source);

std::string csv_quote(std::string_view s);
// Quotes only when the field would otherwise be ambiguous.
std::string csv_field(std::string_view s);

// Shortest-enough decimal text that reads back to the same float.
std::string format_f32(float v);
float parse_f32(std::string_view s, const std::string& context);

}  // namespace fairhead::detail
