#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace hpr::wire {

inline void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf.push_back(static_cast<unsigned char>(v >> (8 * k)));
}

inline void put_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) buf.push_back(static_cast<unsigned char>(v >> (8 * k)));
}

inline void put_f64(std::vector<unsigned char>& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

inline void put_f32(std::vector<unsigned char>& buf, float v) { put_u32(buf, std::bit_cast<std::uint32_t>(v)); }

inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(p[k]) << (8 * k);
    return v;
}

inline std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(p[k]) << (8 * k);
    return v;
}

inline double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }

inline float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

inline constexpr char kHandshake[] = "SPR1\n";
inline constexpr std::size_t kHandshakeLen = 5;

}  // namespace hpr::wire
