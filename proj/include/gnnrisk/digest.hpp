#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace gnnrisk {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::string_view bytes);
std::string to_hex(const Sha256& digest);
std::string sha256_hex(std::string_view bytes);
/// Hex SHA-256 of a file's contents. Throws IoError if unreadable.
std::string file_sha256_hex(const std::filesystem::path& path);

}  // namespace gnnrisk
