#pragma once

// Byte-level helpers shared by the binary file formats and the sidecar wire
// protocol. All multi-byte values are little-endian on disk and on the wire.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seal::bytes {

uint32_t crc32(std::span<const uint8_t> data);

std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const uint8_t> data);
std::vector<uint8_t> base64_decode(std::string_view text);

// float32 vectors <-> little-endian bytes
std::string floats_to_base64(std::span<const float> values);
std::vector<float> floats_from_base64(std::string_view text);

void put_u32(std::vector<uint8_t> & out, uint32_t v);
uint32_t get_u32(std::span<const uint8_t> in, size_t offset);
void put_floats(std::vector<uint8_t> & out, std::span<const float> values);
void get_floats(std::span<const uint8_t> in, size_t offset, std::span<float> out);

std::vector<uint8_t> read_file(const std::string & path);
void write_file(const std::string & path, std::span<const uint8_t> data);

} // namespace seal::bytes
