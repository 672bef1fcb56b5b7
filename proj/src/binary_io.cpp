#include "enf/binary_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "enf/errors.hpp"

namespace enf {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in pieces.
    std::size_t done = 0;
    while (done < bytes.size()) {
        const std::size_t len = std::min<std::size_t>(bytes.size() - done, 1u << 30);
        crc = crc32(crc, bytes.data() + done, static_cast<uInt>(len));
        done += len;
    }
    return static_cast<std::uint32_t>(crc);
}

void ByteWriter::put_u16(std::uint16_t v) {
    put_u8(static_cast<std::uint8_t>(v & 0xff));
    put_u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::put_u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) put_u8(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
}

void ByteWriter::put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::put_crc() {
    const auto* data = reinterpret_cast<const std::uint8_t*>(buffer_.data());
    put_u32(crc32_of({data, buffer_.size()}));
}

void ByteReader::need(std::size_t n) const {
    if (bytes_.size() - offset_ < n) throw LoadError("unexpected end of file", offset_);
}

std::uint8_t ByteReader::get_u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[offset_++]);
}

std::uint16_t ByteReader::get_u16() {
    need(2);
    const std::uint16_t lo = get_u8();
    const std::uint16_t hi = get_u8();
    return static_cast<std::uint16_t>(lo | (hi << 8));
}

std::uint32_t ByteReader::get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(get_u8()) << (8 * k);
    return v;
}

float ByteReader::get_f32() { return std::bit_cast<float>(get_u32()); }

std::string ByteReader::get_bytes(std::size_t n) {
    need(n);
    std::string out = bytes_.substr(offset_, n);
    offset_ += n;
    return out;
}

void ByteReader::verify_trailing_crc() const {
    if (bytes_.size() < 4) throw LoadError("file too short for checksum", 0);
    const std::size_t body = bytes_.size() - 4;
    const auto* data = reinterpret_cast<const std::uint8_t*>(bytes_.data());
    std::uint32_t stored = 0;
    for (int k = 0; k < 4; ++k) stored |= static_cast<std::uint32_t>(data[body + k]) << (8 * k);
    if (crc32_of({data, body}) != stored) throw LoadError("CRC32 mismatch", body);
}

void ByteReader::expect_only_crc_left() const {
    if (remaining() != 4) throw LoadError("unexpected trailing bytes before checksum", offset_);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace enf
