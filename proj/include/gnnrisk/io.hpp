#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gnnrisk {

std::vector<std::string> split_whitespace(std::string_view line);
std::vector<std::string> split_csv(std::string_view line);

/// Strict numeric parsing; `where` prefixes the ParseError message.
std::int64_t parse_int(std::string_view token, const std::string& where);
double parse_double(std::string_view token, const std::string& where);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames, so readers never see a
/// half-written artifact. Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace gnnrisk
