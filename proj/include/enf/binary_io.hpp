#pragma once

// Little-endian byte buffers shared by the dataset and checkpoint formats.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace enf {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

class ByteWriter {
public:
    void put_u8(std::uint8_t v) { buffer_.push_back(static_cast<char>(v)); }
    void put_u16(std::uint16_t v);
    void put_u32(std::uint32_t v);
    void put_f32(float v);
    void put_bytes(std::string_view bytes) { buffer_.append(bytes); }
    /// Append CRC32 of everything written so far.
    void put_crc();

    const std::string& bytes() const { return buffer_; }

private:
    std::string buffer_;
};

/// Reads from an in-memory file image; every failure is a LoadError carrying
/// the byte offset.
class ByteReader {
public:
    explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

    std::uint8_t get_u8();
    std::uint16_t get_u16();
    std::uint32_t get_u32();
    float get_f32();
    std::string get_bytes(std::size_t n);

    std::size_t offset() const { return offset_; }
    std::size_t remaining() const { return bytes_.size() - offset_; }

    /// Verify the trailing CRC32 over all preceding bytes; call before parsing.
    void verify_trailing_crc() const;
    /// Fail unless exactly the 4 CRC bytes remain.
    void expect_only_crc_left() const;

private:
    void need(std::size_t n) const;

    std::string bytes_;
    std::size_t offset_ = 0;
};

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace enf
