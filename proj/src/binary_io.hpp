#pragma once

// Little-endian byte buffers shared by the EMBS and NNCK containers.

#include "disrank/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace disrank::detail {

template <typename U>
U to_little(U v) noexcept {
    if constexpr (std::endian::native == std::endian::big) {
        U out = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            out = static_cast<U>((out << 8) | (v & 0xFF));
            v >>= 8;
        }
        return out;
    } else {
        return v;
    }
}

class ByteWriter {
public:
    template <typename U>
    void put_uint(U v) {
        v = to_little(v);
        const auto* p = reinterpret_cast<const char*>(&v);
        m_bytes.append(p, sizeof(U));
    }
    void put_u16(std::uint16_t v) { put_uint(v); }
    void put_u32(std::uint32_t v) { put_uint(v); }
    void put_u64(std::uint64_t v) { put_uint(v); }
    void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
    void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
    void put_bytes(std::string_view s) { m_bytes.append(s); }

    const std::string& bytes() const noexcept { return m_bytes; }
    std::string take() noexcept { return std::move(m_bytes); }

private:
    std::string m_bytes;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : m_bytes(bytes) {}

    template <typename U>
    U get_uint(const char* what) {
        need(sizeof(U), what);
        U v;
        std::memcpy(&v, m_bytes.data() + m_pos, sizeof(U));
        m_pos += sizeof(U);
        return to_little(v);
    }
    std::uint16_t get_u16(const char* what) { return get_uint<std::uint16_t>(what); }
    std::uint32_t get_u32(const char* what) { return get_uint<std::uint32_t>(what); }
    std::uint64_t get_u64(const char* what) { return get_uint<std::uint64_t>(what); }
    float get_f32(const char* what) { return std::bit_cast<float>(get_u32(what)); }
    double get_f64(const char* what) { return std::bit_cast<double>(get_u64(what)); }

    std::string_view get_bytes(std::size_t n, const char* what) {
        need(n, what);
        auto s = m_bytes.substr(m_pos, n);
        m_pos += n;
        return s;
    }

    std::size_t offset() const noexcept { return m_pos; }
    std::size_t remaining() const noexcept { return m_bytes.size() - m_pos; }

private:
    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw FormatError(std::string("truncated file while reading ") + what, m_pos);
        }
    }

    std::string_view m_bytes;
    std::size_t m_pos = 0;
};

std::string read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace disrank::detail
