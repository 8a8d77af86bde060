#pragma once

#include <cstdint>
#include <cstring>

#include "socialfusion/common.hpp"

namespace socialfusion {

// FNV-1a over raw bytes. Used to assert that frozen parameter groups are
// bit-identical across training steps.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t checksum(const Mat& m, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
}

inline std::uint64_t checksum(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace socialfusion
