#pragma once

#include <cstdint>

namespace nimble {

inline constexpr std::uint64_t KiB = 1024ull;
inline constexpr std::uint64_t MiB = 1024ull * KiB;
inline constexpr std::uint64_t GiB = 1024ull * MiB;

// Bandwidths are decimal: 1 GB/s = 1e9 bytes/s.
inline constexpr double gbps(double x) { return x * 1e9; }

} // namespace nimble
