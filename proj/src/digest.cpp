#include "gnnrisk/digest.hpp"

#include <openssl/evp.h>

#include "gnnrisk/errors.hpp"
#include "gnnrisk/io.hpp"

namespace gnnrisk {

Sha256 sha256(std::string_view bytes) {
    Sha256 out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size()) {
        throw IoError("SHA-256 computation failed");
    }
    return out;
}

std::string to_hex(const Sha256& digest) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (std::uint8_t b : digest) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xF]);
    }
    return s;
}

std::string sha256_hex(std::string_view bytes) { return to_hex(sha256(bytes)); }

std::string file_sha256_hex(const std::filesystem::path& path) {
    return sha256_hex(read_text_file(path));
}

}  // namespace gnnrisk
