#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

#include "dieulat/base.hpp"

namespace dieulat {

// Element of F_{p^m} in the polynomial basis 1, g, ..., g^{m-1} where g is a
// root of the field's Conway polynomial. Coefficients are integers in [0, p).
struct Fel {
  std::array<u32, kMaxDeg> c{};
  friend bool operator==(const Fel&, const Fel&) = default;
};

class FqCtx;
using FqPtr = std::shared_ptr<const FqCtx>;

// F_{p^m} with the Conway-polynomial modulus, so that serialized field
// elements are reproducible and subfield embeddings are compatible across
// degrees (g_l -> g_m^((p^m-1)/(p^l-1)) for l | m).
class FqCtx : public std::enable_shared_from_this<FqCtx> {
 public:
  u32 p;
  u32 m;
  std::vector<u32> modulus;  // monic, coefficients c[0..m], c[m] = 1

  static FqPtr get(u32 p, u32 m);

  u64 q() const { return pow_u64(p, m); }

  Fel zero() const { return Fel{}; }
  Fel one() const {
    Fel r{};
    r.c[0] = 1 % p;
    return r;
  }
  Fel gen() const {
    Fel r{};
    if (m == 1)
      r.c[0] = generator_residue_;
    else
      r.c[1] = 1;
    return r;
  }
  Fel from_int(u64 v) const {
    Fel r{};
    r.c[0] = (u32)(v % p);
    return r;
  }
  bool is_zero(const Fel& a) const {
    for (u32 i = 0; i < m; ++i)
      if (a.c[i]) return false;
    return true;
  }

  Fel add(const Fel& a, const Fel& b) const {
    Fel r{};
    for (u32 i = 0; i < m; ++i) {
      u32 s = a.c[i] + b.c[i];
      r.c[i] = s >= p ? s - p : s;
    }
    return r;
  }
  Fel neg(const Fel& a) const {
    Fel r{};
    for (u32 i = 0; i < m; ++i) r.c[i] = a.c[i] ? p - a.c[i] : 0;
    return r;
  }
  Fel sub(const Fel& a, const Fel& b) const { return add(a, neg(b)); }

  Fel mul(const Fel& a, const Fel& b) const {
    std::array<u64, 2 * kMaxDeg> t{};
    for (u32 i = 0; i < m; ++i) {
      if (!a.c[i]) continue;
      for (u32 j = 0; j < m; ++j) t[i + j] += (u64)a.c[i] * b.c[j];
    }
    // reduce degree 2m-2..m via x^m = -(modulus tail)
    for (u32 d = 2 * m - 2; d + 1 > m; --d) {
      u64 coef = t[d] % p;
      t[d] = 0;
      if (!coef) continue;
      u64 nc = (u64)(p - (u32)coef) % p;
      for (u32 j = 0; j < m; ++j)
        if (modulus[j]) t[d - m + j] += nc * modulus[j];
    }
    Fel r{};
    for (u32 i = 0; i < m; ++i) r.c[i] = (u32)(t[i] % p);
    return r;
  }

  Fel pow(Fel a, u64 e) const {
    Fel r = one();
    while (e) {
      if (e & 1) r = mul(r, a);
      a = mul(a, a);
      e >>= 1;
    }
    return r;
  }
  Fel inv(const Fel& a) const {
    require(!is_zero(a), "Fq: division by zero");
    return pow(a, q() - 2);
  }
  Fel frob(const Fel& a) const {  // x -> x^p
    Fel r{};
    for (u32 j = 0; j < m; ++j) {
      if (!a.c[j]) continue;
      for (u32 i = 0; i < m; ++i)
        r.c[i] = (u32)((r.c[i] + (u64)a.c[j] * frob_mat_[j].c[i]) % p);
    }
    return r;
  }
  Fel frob_k(Fel a, i64 k) const {
    i64 r = k % (i64)m;
    if (r < 0) r += m;
    for (i64 i = 0; i < r; ++i) a = frob(a);
    return a;
  }
  bool is_square(const Fel& a) const {
    if (is_zero(a)) return true;
    Fel e = pow(a, (q() - 1) / 2);
    return e == one();
  }

  // Enumeration order: index -> element, little-endian base-p digits.
  Fel from_index(u64 idx) const {
    Fel r{};
    for (u32 i = 0; i < m; ++i) {
      r.c[i] = (u32)(idx % p);
      idx /= p;
    }
    return r;
  }
  u64 to_index(const Fel& a) const {
    u64 idx = 0;
    for (u32 i = m; i-- > 0;) idx = idx * p + a.c[i];
    return idx;
  }
  Fel random(Rng& rng) const { return from_index(rng.below(q())); }

  // Image of an element of F_{p^l} (l | m) under the Conway-compatible
  // embedding.
  Fel embed_from(const FqCtx& sub, const Fel& a) const {
    require(sub.p == p && m % sub.m == 0, "Fq: not a subfield");
    if (sub.m == m) return a;
    Fel img = subfield_gen_image(sub.m);
    Fel r{}, pw = one();
    for (u32 i = 0; i < sub.m; ++i) {
      if (a.c[i]) {
        Fel t = pw;
        r = add(r, mul(from_int(a.c[i]), t));
      }
      pw = mul(pw, img);
    }
    return r;
  }
  // Inverse of embed_from; requires the element to lie in the subfield
  // (checked via x^{p^l} = x).
  Fel project_to(const FqCtx& sub, const Fel& a) const {
    require(frob_k(a, sub.m) == a, "Fq: element not in requested subfield");
    if (sub.m == m) return a;
    // solve in the basis img^0..img^{l-1} over F_p, using the full F_p basis
    Fel img = subfield_gen_image(sub.m);
    std::vector<std::vector<u32>> cols(sub.m, std::vector<u32>(m));
    Fel pw = one();
    for (u32 j = 0; j < sub.m; ++j) {
      for (u32 i = 0; i < m; ++i) cols[j][i] = pw.c[i];
      pw = mul(pw, img);
    }
    // gaussian elimination on the m x l system
    std::vector<std::vector<u32>> A(m, std::vector<u32>(sub.m + 1));
    for (u32 i = 0; i < m; ++i) {
      for (u32 j = 0; j < sub.m; ++j) A[i][j] = cols[j][i];
      A[i][sub.m] = a.c[i];
    }
    Fel r{};
    u32 row = 0;
    std::vector<i64> pivot_of(sub.m, -1);
    for (u32 col = 0; col < sub.m && row < m; ++col) {
      u32 pr = row;
      while (pr < m && !A[pr][col]) ++pr;
      if (pr == m) continue;
      std::swap(A[pr], A[row]);
      u64 ip = powmod_u64(A[row][col], p - 2, p);
      for (u32 j = col; j <= sub.m; ++j) A[row][j] = (u32)(A[row][j] * ip % p);
      for (u32 i = 0; i < m; ++i) {
        if (i == row || !A[i][col]) continue;
        u64 f = A[i][col];
        for (u32 j = col; j <= sub.m; ++j)
          A[i][j] = (u32)((A[i][j] + (p - f % p) * A[row][j]) % p);
      }
      pivot_of[col] = row;
      ++row;
    }
    for (u32 j = 0; j < sub.m; ++j)
      r.c[j] = pivot_of[j] >= 0 ? A[(u32)pivot_of[j]][sub.m] : 0;
    return r;
  }

  bool in_subfield(const Fel& a, u32 l) const { return frob_k(a, l) == a; }

  // For l | m, the image of the degree-l Conway generator in this field.
  Fel subfield_gen_image(u32 l) const {
    require(m % l == 0, "Fq: bad subfield degree");
    std::lock_guard<std::mutex> lk(cache_mutex_);
    auto it = subgen_cache_.find(l);
    if (it != subgen_cache_.end()) return it->second;
    Fel img;
    if (l == 1) {
      auto sub = FqCtx::get(p, 1);
      img = pow(gen(), (q() - 1) / (pow_u64(p, 1) - 1));
      // for m == 1 gen() already is the ground generator
      if (m == 1) img = gen();
      (void)sub;
    } else {
      img = pow(gen(), (q() - 1) / (pow_u64(p, l) - 1));
    }
    subgen_cache_[l] = img;
    return img;
  }

  explicit FqCtx(u32 p_, u32 m_);

 private:
  u32 generator_residue_ = 0;  // primitive root mod p (m == 1 case)
  std::vector<Fel> frob_mat_;  // frob_mat_[j] = (g^j)^p
  mutable std::mutex cache_mutex_;
  mutable std::map<u32, Fel> subgen_cache_;
};

namespace detail {

// dense F_p[x] helpers used only for the Conway search
using Poly = std::vector<u32>;

inline Poly poly_mulmod(const Poly& a, const Poly& b, const Poly& f, u32 p) {
  std::vector<u64> t(a.size() + b.size() - 1, 0);
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i])
      for (size_t j = 0; j < b.size(); ++j) t[i + j] += (u64)a[i] * b[j];
  size_t m = f.size() - 1;
  for (size_t d = t.size(); d-- > m;) {
    u64 coef = t[d] % p;
    if (!coef) continue;
    t[d] = 0;
    for (size_t j = 0; j < m; ++j)
      if (f[j]) t[d - m + j] += (p - (u32)coef) % p * (u64)f[j];
  }
  Poly r(m);
  for (size_t i = 0; i < m; ++i) r[i] = (u32)(t[i] % p);
  return r;
}

inline Poly poly_powmod(Poly base, u64 e, const Poly& f, u32 p) {
  Poly r(f.size() - 1, 0);
  r[0] = 1;
  while (e) {
    if (e & 1) r = poly_mulmod(r, base, f, p);
    base = poly_mulmod(base, base, f, p);
    e >>= 1;
  }
  return r;
}

inline bool poly_is_one(const Poly& a) {
  if (a.empty() || a[0] != 1) return false;
  for (size_t i = 1; i < a.size(); ++i)
    if (a[i]) return false;
  return true;
}

inline bool poly_is_x(const Poly& a) {
  if (a.size() < 2 || a[0] != 0 || a[1] != 1) return false;
  for (size_t i = 2; i < a.size(); ++i)
    if (a[i]) return false;
  return true;
}

// Conway polynomial of F_{p^m}: the minimal primitive monic polynomial in
// the standard word ordering that is norm-compatible with the Conway
// polynomials of all maximal subfields. Computed by direct search; small
// degrees only, cached per (p, m).
std::vector<u32> conway_poly(u32 p, u32 m);

}  // namespace detail

inline FqCtx::FqCtx(u32 p_, u32 m_) : p(p_), m(m_) {
  require(p >= 3, "FqCtx: p must be an odd prime");
  require(m >= 1 && m <= kMaxDeg, "FqCtx: unsupported extension degree");
  modulus = detail::conway_poly(p, m);
  if (m == 1) generator_residue_ = (p - modulus[0]) % p;
  // Frobenius images of the basis
  frob_mat_.resize(m);
  for (u32 j = 0; j < m; ++j) {
    detail::Poly gj(m, 0);
    gj[j] = 1;
    detail::Poly img = detail::poly_powmod(gj, p, modulus, p);
    Fel e{};
    for (u32 i = 0; i < m; ++i) e.c[i] = img[i];
    frob_mat_[j] = e;
  }
}

inline FqPtr FqCtx::get(u32 p, u32 m) {
  static std::mutex mu;
  static std::map<std::pair<u32, u32>, FqPtr> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto key = std::make_pair(p, m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto ctx = std::make_shared<FqCtx>(p, m);
  cache[key] = ctx;
  return ctx;
}

namespace detail {

inline bool is_irreducible(const Poly& f, u32 p, u32 m) {
  Poly x(m, 0);
  if (m == 1) return true;
  x[1] = 1;
  Poly xq = poly_powmod(x, pow_u64(p, m), f, p);
  if (!poly_is_x(xq)) return false;
  for (u64 l : factor_trial(m)) {
    Poly xs = poly_powmod(x, pow_u64(p, m / (u32)l), f, p);
    // gcd(x^{p^{m/l}} - x, f) must be 1; since f would then have a factor of
    // smaller degree, it suffices that x^{p^{m/l}} != x mod f for irreducible
    // candidates of degree m
    if (poly_is_x(xs)) return false;
  }
  return true;
}

inline bool is_primitive(const Poly& f, u32 p, u32 m,
                         const std::vector<u64>& qm1_factors) {
  if (!is_irreducible(f, p, m)) return false;
  u64 qm1 = pow_u64(p, m) - 1;
  Poly x(std::max<u32>(m, 2), 0);
  x[1 % x.size()] = 1;
  if (m == 1) {
    u64 root = (p - f[0]) % p;
    for (u64 l : qm1_factors)
      if (powmod_u64(root, qm1 / l, p) == 1) return false;
    return true;
  }
  for (u64 l : qm1_factors) {
    Poly e = poly_powmod(x, qm1 / l, f, p);
    if (poly_is_one(e)) return false;
  }
  return true;
}

inline bool is_compatible(const Poly& f, u32 p, u32 m) {
  // for each maximal subfield degree d = m / l, the power
  // x^{(p^m-1)/(p^d-1)} must be a root of conway_poly(p, d)
  for (u64 l : factor_trial(m)) {
    u32 d = m / (u32)l;
    Poly sub = conway_poly(p, d);
    u64 e = (pow_u64(p, m) - 1) / (pow_u64(p, d) - 1);
    Poly x(m, 0);
    x[1] = 1;
    Poly y = poly_powmod(x, e, f, p);
    // evaluate sub at y
    Poly acc(m, 0);
    for (size_t i = sub.size(); i-- > 0;) {
      acc = poly_mulmod(acc, y, f, p);
      acc[0] = (acc[0] + sub[i]) % p;
    }
    for (u32 c : acc)
      if (c) return false;
  }
  return true;
}

inline std::vector<u32> conway_poly(u32 p, u32 m) {
  static std::mutex mu;
  static std::map<std::pair<u32, u32>, Poly> cache;
  {
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find({p, m});
    if (it != cache.end()) return it->second;
  }
  std::vector<u64> qm1_factors = factor_trial(pow_u64(p, m) - 1);
  // candidate digits a_{m-1}..a_0; the word order compares (-1)^{m-i} a_i,
  // so positions with m-i odd are scanned downward
  Poly f(m + 1, 0);
  f[m] = 1;
  std::vector<u32> digits(m, 0);
  bool found = false;
  Poly result;
  // iterative odometer over candidate vectors in word order
  auto digit_value = [&](u32 pos, u32 step) -> u32 {
    // pos = exponent i of the coefficient; enumeration step -> coefficient
    return (m - pos) % 2 == 1 ? (p - 1 - step) : step;
  };
  std::vector<u32> steps(m, 0);
  while (!found) {
    for (u32 i = 0; i < m; ++i) f[i] = digit_value(i, steps[m - 1 - i]);
    // fast filter: constant term must give a primitive norm
    u64 norm = (m % 2 == 0) ? f[0] : (p - f[0]) % p;
    bool norm_ok = norm != 0;
    if (norm_ok) {
      for (u64 l : factor_trial(p - 1))
        if (powmod_u64(norm, (p - 1) / l, p) == 1) {
          norm_ok = false;
          break;
        }
    }
    if (norm_ok && is_primitive(f, p, m, qm1_factors) &&
        is_compatible(f, p, m)) {
      result = f;
      found = true;
      break;
    }
    // increment odometer (last position varies fastest -> word order)
    u32 k = m;
    while (k-- > 0) {
      if (++steps[k] < p) break;
      steps[k] = 0;
      if (k == 0) require(false, "conway_poly: search exhausted");
    }
  }
  std::lock_guard<std::mutex> lk(mu);
  cache[{p, m}] = result;
  return result;
}

}  // namespace detail

}  // namespace dieulat
