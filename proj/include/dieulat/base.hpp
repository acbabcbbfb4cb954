#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dieulat {

using u32 = std::uint32_t;
using i32 = std::int32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;
using u128 = unsigned __int128;

// Largest supported extension degree of the coefficient field F_{p^m}.
inline constexpr std::size_t kMaxDeg = 12;

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw error(msg);
}

inline u64 pow_u64(u64 b, u64 e) {
  u64 r = 1;
  while (e) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}

// x^e mod m, 128-bit intermediate.
inline u64 powmod_u64(u64 x, u64 e, u64 m) {
  u64 r = 1 % m;
  x %= m;
  while (e) {
    if (e & 1) r = (u64)((u128)r * x % m);
    x = (u64)((u128)x * x % m);
    e >>= 1;
  }
  return r;
}

inline std::vector<u64> factor_trial(u64 n) {
  std::vector<u64> fs;
  for (u64 d = 2; d * d <= n; d += (d == 2 ? 1 : 2)) {
    if (n % d == 0) {
      fs.push_back(d);
      while (n % d == 0) n /= d;
    }
  }
  if (n > 1) fs.push_back(n);
  return fs;
}

// Deterministic xoshiro-style generator; all randomized searches are
// reproducible from a single seed.
struct Rng {
  u64 s[4];
  explicit Rng(u64 seed = 1) {
    u64 z = seed + 0x9e3779b97f4a7c15ULL;
    for (auto& si : s) {
      z += 0x9e3779b97f4a7c15ULL;
      u64 x = z;
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
      si = x ^ (x >> 31);
    }
  }
  static u64 rotl(u64 x, int k) { return (x << k) | (x >> (64 - k)); }
  u64 next() {
    u64 result = rotl(s[1] * 5, 7) * 9;
    u64 t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
  u64 below(u64 n) { return n ? next() % n : 0; }
};

}  // namespace dieulat
