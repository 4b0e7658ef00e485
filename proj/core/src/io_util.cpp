#include "io_util.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fairhead/error.hpp"

namespace fairhead::detail {

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("missing file: " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& file, std::string_view bytes) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + file.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + file.string());
}

std::string encode_f32_le(std::span<const float> values) {
    std::string out(values.size() * 4, '\0');
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
    return out;
}

std::vector<float> decode_f32_le(std::string_view bytes) {
    if (bytes.size() % 4 != 0) throw Error("float payload length is not a multiple of 4");
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
        out[i] = std::bit_cast<float>(bits);
    }
    return out;
}

std::vector<CsvRow> parse_csv(std::string_view text, const std::string& source) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool field_quoted = false;
    bool in_quotes = false;
    bool row_has_content = false;

    auto end_field = [&] {
        row.fields.push_back(std::move(field));
        row.quoted.push_back(field_quoted);
        field.clear();
        field_quoted = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row = {};
        row_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
            case '"':
                if (!field.empty()) throw Error(source + ": stray quote inside unquoted field");
                in_quotes = true;
                field_quoted = true;
                row_has_content = true;
                break;
            case ',':
                end_field();
                row_has_content = true;
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(ch);
                row_has_content = true;
        }
    }
    if (in_quotes) throw Error(source + ": unterminated quoted field");
    if (row_has_content || !row.fields.empty()) end_row();
    return rows;
}

std::string csv_quote(std::string_view s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") != std::string_view::npos) return csv_quote(s);
    return std::string(s);
}

std::string format_f32(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

float parse_f32(std::string_view s, const std::string& context) {
    float v = 0.0f;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(context + ": not a number: '" + std::string(s) + "'");
    return v;
}

}  // namespace fairhead::detail
