#include "seal/bytes.hpp"

#include "seal/errors.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>
#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace seal::bytes {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

uint32_t crc32(std::span<const uint8_t> data) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks for files > 4 GiB
    size_t off = 0;
    while (off < data.size()) {
        const size_t n = std::min<size_t>(data.size() - off, 1u << 30);
        crc = ::crc32(crc, data.data() + off, static_cast<uInt>(n));
        off += n;
    }
    return static_cast<uint32_t>(crc);
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char *>(data.data()), data.size(), digest);
    static const char * hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char c : digest) {
        out.push_back(hex[c >> 4]);
        out.push_back(hex[c & 15]);
    }
    return out;
}

std::string base64_encode(std::span<const uint8_t> data) {
    std::string out(4 * ((data.size() + 2) / 3), '\0');
    if (data.empty()) {
        return out;
    }
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()), data.data(),
                                  static_cast<int>(data.size()));
    out.resize(static_cast<size_t>(n));
    return out;
}

std::vector<uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) {
        throw ProtocolError("base64 length is not a multiple of 4");
    }
    std::vector<uint8_t> out(3 * text.size() / 4);
    if (text.empty()) {
        return out;
    }
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char *>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) {
        throw ProtocolError("malformed base64");
    }
    // EVP_DecodeBlock keeps the padding bytes; strip them
    size_t len = static_cast<size_t>(n);
    if (text.back() == '=') --len;
    if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

std::string floats_to_base64(std::span<const float> values) {
    std::vector<uint8_t> raw;
    put_floats(raw, values);
    return base64_encode(raw);
}

std::vector<float> floats_from_base64(std::string_view text) {
    const auto raw = base64_decode(text);
    if (raw.size() % 4 != 0) {
        throw ProtocolError("float payload is not a multiple of 4 bytes");
    }
    std::vector<float> out(raw.size() / 4);
    get_floats(raw, 0, out);
    return out;
}

void put_u32(std::vector<uint8_t> & out, uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
}

uint32_t get_u32(std::span<const uint8_t> in, size_t offset) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<uint32_t>(in[offset + i]) << (8 * i);
    }
    return v;
}

void put_floats(std::vector<uint8_t> & out, std::span<const float> values) {
    const size_t base = out.size();
    out.resize(base + 4 * values.size());
    if (!values.empty()) {
        std::memcpy(out.data() + base, values.data(), 4 * values.size());
    }
}

void get_floats(std::span<const uint8_t> in, size_t offset, std::span<float> out) {
    if (!out.empty()) {
        std::memcpy(out.data(), in.data() + offset, 4 * out.size());
    }
}

std::vector<uint8_t> read_file(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string & path, std::span<const uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out.write(reinterpret_cast<const char *>(data.data()), static_cast<std::streamsize>(data.size()));
}

} // namespace seal::bytes
