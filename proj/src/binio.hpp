#pragma once

// Little-endian binary IO helpers shared by the checkpoint and trajectory
// formats. Byte order is explicit so files are platform-independent.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "spus/errors.hpp"

namespace spus::binio {

inline void put_u8(std::ostream& os, uint8_t v) { os.put(static_cast<char>(v)); }

inline void put_u32(std::ostream& os, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
    put_u32(os, static_cast<uint32_t>(v & 0xffffffffu));
    put_u32(os, static_cast<uint32_t>(v >> 32));
}

inline void put_f32(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

inline void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

inline void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline uint8_t get_u8(std::istream& is) {
    int c = is.get();
    if (c == EOF) throw corruption_error("unexpected end of file");
    return static_cast<uint8_t>(c);
}

inline uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4) throw corruption_error("unexpected end of file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint64_t get_u64(std::istream& is) {
    const uint64_t lo = get_u32(is);
    const uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

inline float get_f32(std::istream& is) {
    const uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline double get_f64(std::istream& is) {
    const uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline std::string get_string(std::istream& is, uint32_t max_len = 1u << 20) {
    const uint32_t len = get_u32(is);
    if (len > max_len) throw format_error("string length " + std::to_string(len) + " too large");
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (is.gcount() != static_cast<std::streamsize>(len))
        throw corruption_error("unexpected end of file in string");
    return s;
}

inline void put_f32_array(std::ostream& os, const std::vector<double>& v) {
    for (double x : v) put_f32(os, static_cast<float>(x));
}

inline std::vector<double> get_f32_array(std::istream& is, size_t count) {
    std::vector<double> out(count);
    for (size_t i = 0; i < count; ++i) out[i] = static_cast<double>(get_f32(is));
    return out;
}

}  // namespace spus::binio
