#pragma once

// Binary cycle cache:
//   "GCYC" | version (1 byte) | p (u64 LE) | count (u64 LE) | count x gap (u16 LE) | sum of gaps (u64 LE)

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sievedyn/cycle.hpp"
#include "sievedyn/errors.hpp"

namespace sievedyn {

inline constexpr std::array<char, 4> kCycleMagic{'G', 'C', 'Y', 'C'};
inline constexpr std::uint8_t kCycleVersion = 1;
inline constexpr u64 kCycleHeaderBytes = 4 + 1 + 8 + 8;
inline constexpr u64 kCycleFooterBytes = 8;

inline u64 cycle_file_size(u64 gap_count) { return kCycleHeaderBytes + 2 * gap_count + kCycleFooterBytes; }

namespace detail {

inline void put_u64(std::vector<char>& buf, u64 v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline u64 get_u64(const char* p) {
    u64 v = 0;
    for (int i = 0; i < 8; ++i) v |= u64{static_cast<unsigned char>(p[i])} << (8 * i);
    return v;
}

}  // namespace detail

inline void save_cycle(const std::filesystem::path& path, const GapCycle& c) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::vector<char> buf;
    buf.reserve(cycle_file_size(c.size()));
    buf.insert(buf.end(), kCycleMagic.begin(), kCycleMagic.end());
    buf.push_back(static_cast<char>(kCycleVersion));
    detail::put_u64(buf, c.p());
    detail::put_u64(buf, c.size());
    u64 sum = 0;
    for (Gap g : c.gaps()) {
        buf.push_back(static_cast<char>(g & 0xff));
        buf.push_back(static_cast<char>(g >> 8));
        sum += g;
    }
    detail::put_u64(buf, sum);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw PreconditionError("cannot write cycle file " + tmp);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw PreconditionError("short write to cycle file " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline GapCycle load_cycle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("cannot open cycle file " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string where = " in " + path.string();
    if (buf.size() < kCycleHeaderBytes + kCycleFooterBytes) throw FormatError("cycle file truncated" + where);
    if (!std::equal(kCycleMagic.begin(), kCycleMagic.end(), buf.begin())) throw FormatError("bad magic" + where);
    if (static_cast<std::uint8_t>(buf[4]) != kCycleVersion) throw FormatError("unsupported version" + where);
    const u64 p = detail::get_u64(buf.data() + 5);
    const u64 count = detail::get_u64(buf.data() + 13);
    if (count == 0 || buf.size() != cycle_file_size(count))
        throw FormatError("checksum error: file size does not match gap count" + where);
    std::vector<Gap> gaps(count);
    u64 sum = 0;
    const char* g = buf.data() + kCycleHeaderBytes;
    for (u64 i = 0; i < count; ++i) {
        gaps[i] = static_cast<Gap>(static_cast<unsigned char>(g[2 * i]) |
                                   (static_cast<unsigned>(static_cast<unsigned char>(g[2 * i + 1])) << 8));
        sum += gaps[i];
    }
    const u64 stored = detail::get_u64(buf.data() + buf.size() - kCycleFooterBytes);
    if (stored != sum) throw FormatError("checksum error: gap sum mismatch" + where);
    if (auto primorial = primorial_exact(p); primorial && *primorial != sum)
        throw FormatError("checksum error: gap sum is not p#" + where);
    return GapCycle(p, std::move(gaps));
}

}  // namespace sievedyn
