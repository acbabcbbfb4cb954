#pragma once

#include "dieulat/fq.hpp"

namespace dieulat {

// Element of W_N(F_{p^m}), represented in the unramified chain ring
// (Z/p^N)[x]/(f) where f is the integer lift of the Conway polynomial.
// This is the workhorse representation for all lattice computations; Witt
// digit vectors are recovered through the Teichmueller expansion.
struct Zel {
  std::array<u64, kMaxDeg> c{};
  friend bool operator==(const Zel&, const Zel&) = default;
};

class ZqCtx;
using ZqPtr = std::shared_ptr<const ZqCtx>;

class ZqCtx : public std::enable_shared_from_this<ZqCtx> {
 public:
  u32 p;
  u32 m;
  u32 n;    // precision: ring is W_n(F_{p^m})
  u64 pn;   // p^n
  FqPtr fq;

  static ZqPtr get(u32 p, u32 m, u32 n);

  Zel zero() const { return Zel{}; }
  Zel one() const {
    Zel r{};
    r.c[0] = 1;
    return r;
  }
  Zel from_int(i64 v) const {
    i64 w = v % (i64)pn;
    if (w < 0) w += (i64)pn;
    Zel r{};
    r.c[0] = (u64)w;
    return r;
  }
  bool is_zero(const Zel& a) const {
    for (u32 i = 0; i < m; ++i)
      if (a.c[i]) return false;
    return true;
  }

  Zel add(const Zel& a, const Zel& b) const {
    Zel r{};
    for (u32 i = 0; i < m; ++i) {
      u64 s = a.c[i] + b.c[i];
      r.c[i] = s >= pn ? s - pn : s;
    }
    return r;
  }
  Zel neg(const Zel& a) const {
    Zel r{};
    for (u32 i = 0; i < m; ++i) r.c[i] = a.c[i] ? pn - a.c[i] : 0;
    return r;
  }
  Zel sub(const Zel& a, const Zel& b) const { return add(a, neg(b)); }

  Zel mul(const Zel& a, const Zel& b) const {
    std::array<u128, 2 * kMaxDeg> t{};
    for (u32 i = 0; i < m; ++i) {
      if (!a.c[i]) continue;
      for (u32 j = 0; j < m; ++j) t[i + j] += (u128)a.c[i] * b.c[j];
    }
    if (m > 1) {
      for (u32 d = 2 * m - 2; d + 1 > m; --d) {
        u64 coef = (u64)(t[d] % pn);
        t[d] = 0;
        if (!coef) continue;
        u64 nc = pn - coef;
        for (u32 j = 0; j < m; ++j)
          if (mod_lift_[j]) t[d - m + j] += (u128)nc * mod_lift_[j];
      }
    }
    Zel r{};
    for (u32 i = 0; i < m; ++i) r.c[i] = (u64)(t[i] % pn);
    return r;
  }

  Zel smul(u64 s, const Zel& a) const {
    Zel r{};
    s %= pn;
    for (u32 i = 0; i < m; ++i) r.c[i] = (u64)((u128)s * a.c[i] % pn);
    return r;
  }

  Zel pow(Zel a, u64 e) const {
    Zel r = one();
    while (e) {
      if (e & 1) r = mul(r, a);
      a = mul(a, a);
      e >>= 1;
    }
    return r;
  }

  // p-adic valuation in [0, n]; val(0) = n.
  u32 val(const Zel& a) const {
    u32 v = n;
    for (u32 i = 0; i < m; ++i) {
      if (!a.c[i]) continue;
      u64 x = a.c[i];
      u32 vi = 0;
      while (x % p == 0) {
        x /= p;
        ++vi;
      }
      v = std::min(v, vi);
      if (v == 0) break;
    }
    return v;
  }
  bool is_unit(const Zel& a) const { return val(a) == 0; }

  // exact division by p^k (caller guarantees divisibility); loses k digits
  // of precision which the caller accounts for
  Zel div_pk(const Zel& a, u32 k) const {
    require(val(a) >= std::min(k, n), "Zq: inexact division by p^k");
    u64 pk = pow_u64(p, k);
    Zel r{};
    for (u32 i = 0; i < m; ++i) r.c[i] = a.c[i] / pk;
    return r;
  }
  Zel mul_pk(const Zel& a, u32 k) const {
    if (k >= n) return zero();
    return smul(pow_u64(p, k), a);
  }

  Zel inv(const Zel& a) const {
    require(is_unit(a), "Zq: inverse of non-unit");
    // Newton from the residue-field inverse
    Fel r0 = fq->inv(residue(a));
    Zel x = lift_residue(r0);
    for (u32 k = 1; k < n; k *= 2) x = mul(x, sub(from_int(2), mul(a, x)));
    return x;
  }
  // a / b for unit b
  Zel div(const Zel& a, const Zel& b) const { return mul(a, inv(b)); }

  Fel residue(const Zel& a) const {
    Fel r{};
    for (u32 i = 0; i < m; ++i) r.c[i] = (u32)(a.c[i] % p);
    return r;
  }
  // naive coefficient-wise lift (a section of the residue map, not the
  // Teichmueller lift)
  Zel lift_residue(const Fel& a) const {
    Zel r{};
    for (u32 i = 0; i < m; ++i) r.c[i] = a.c[i];
    return r;
  }

  Zel teichmuller(const Fel& a) const {
    Zel z = lift_residue(a);
    u64 q = fq->q();
    for (u32 k = 1; k < n; ++k) z = pow(z, q);
    return z;
  }

  // ring Frobenius (the automorphism lifting x -> x^p)
  Zel frob(const Zel& a) const { return apply_gen_images(a, frob_pows_); }
  Zel inv_frob(const Zel& a) const { return apply_gen_images(a, ifrob_pows_); }
  Zel frob_k(const Zel& a, i64 k) const {
    i64 r = k % (i64)m;
    if (r < 0) r += m;
    Zel x = a;
    // use whichever direction is shorter
    if ((u32)r <= m - (u32)r)
      for (i64 i = 0; i < r; ++i) x = frob(x);
    else
      for (u32 i = 0; i < m - (u32)r; ++i) x = inv_frob(x);
    return x;
  }

  // Witt digits via the Teichmueller expansion: a = sum p^i [d_i^{p^-i}].
  std::vector<Fel> digits(const Zel& a) const {
    std::vector<Fel> ds(n);
    Zel z = a;
    for (u32 k = 0; k < n; ++k) {
      Fel r = residue(z);
      ds[k] = fq->frob_k(r, k);
      if (k + 1 == n) break;
      Zel t = truncated_teich(r, n - k);
      z = div_pk(sub(z, t), 1);
    }
    return ds;
  }
  Zel from_digits(const std::vector<Fel>& ds) const {
    Zel acc = zero();
    for (u32 i = 0; i < std::min<u32>((u32)ds.size(), n); ++i) {
      Fel root = ds[i];
      // d^{p^{-i}}
      for (u32 j = 0; j < i; ++j) root = fq->frob_k(root, m - 1);
      acc = add(acc, mul_pk(teichmuller(root), i));
    }
    return acc;
  }

  // change of precision; raising is a plain coefficient injection and is
  // only meaningful for exactly-known values
  Zel to_precision(const ZqCtx& dst, const Zel& a) const {
    require(dst.p == p && dst.m == m, "Zq: precision change across rings");
    Zel r{};
    for (u32 i = 0; i < m; ++i) r.c[i] = a.c[i] % dst.pn;
    return r;
  }

  // Conway-compatible embedding W_n(F_{p^l}) -> W_n(F_{p^m}) for l | m,
  // via digit-wise field embedding
  Zel embed_from(const ZqCtx& sub, const Zel& a) const {
    require(sub.p == p && sub.n == n && m % sub.m == 0, "Zq: bad embedding");
    if (sub.m == m) return a;
    auto ds = sub.digits(a);
    std::vector<Fel> es(ds.size());
    for (size_t i = 0; i < ds.size(); ++i)
      es[i] = fq->embed_from(*sub.fq, ds[i]);
    return from_digits(es);
  }
  Zel project_to(const ZqCtx& sub, const Zel& a) const {
    require(sub.p == p && sub.n == n && m % sub.m == 0, "Zq: bad projection");
    if (sub.m == m) return a;
    auto ds = digits(a);
    std::vector<Fel> es(ds.size());
    for (size_t i = 0; i < ds.size(); ++i)
      es[i] = fq->project_to(*sub.fq, ds[i]);
    return sub.from_digits(es);
  }
  bool in_subring(const Zel& a, u32 l) const {
    return frob_k(a, l) == a;
  }

  Zel random(Rng& rng) const {
    Zel r{};
    for (u32 i = 0; i < m; ++i) r.c[i] = rng.below(pn);
    return r;
  }
  Zel random_unit(Rng& rng) const {
    for (;;) {
      Zel r = random(rng);
      if (is_unit(r)) return r;
    }
  }

  explicit ZqCtx(u32 p_, u32 m_, u32 n_);

 private:
  std::array<u64, kMaxDeg + 1> mod_lift_{};  // integer lift of the modulus
  std::vector<Zel> frob_pows_;               // sigma(g)^j, j < m
  std::vector<Zel> ifrob_pows_;              // sigma^{-1}(g)^j, j < m

  Zel apply_gen_images(const Zel& a, const std::vector<Zel>& pows) const {
    if (m == 1) return a;
    Zel r{};
    for (u32 j = 0; j < m; ++j)
      if (a.c[j]) r = add(r, smul(a.c[j], pows[j]));
    return r;
  }
  // [r] mod p^k (enough iterations for k digits only)
  Zel truncated_teich(const Fel& a, u32 k) const {
    Zel z = lift_residue(a);
    u64 q = fq->q();
    for (u32 i = 1; i < std::min(k, n); ++i) z = pow(z, q);
    return z;
  }
};

inline ZqCtx::ZqCtx(u32 p_, u32 m_, u32 n_) : p(p_), m(m_), n(n_) {
  require(n >= 1, "ZqCtx: precision must be >= 1");
  fq = FqCtx::get(p, m);
  // overflow guard: coefficient products must fit the 128/64-bit scheme
  require(n <= 62, "ZqCtx: precision too large");
  u128 acc = 1;
  for (u32 i = 0; i < n; ++i) {
    acc *= p;
    require(acc <= (u128)1 << 62, "ZqCtx: p^n exceeds the coefficient range");
  }
  pn = (u64)acc;
  for (u32 i = 0; i <= m; ++i) mod_lift_[i] = fq->modulus[i];
  if (m > 1) {
    // Hensel-lift the Frobenius: find the root of the modulus congruent to
    // g^p, then tabulate its powers
    Zel g{};
    g.c[1] = 1;
    Zel y = pow(g, p);
    for (u32 k = 1; k < n; k *= 2) {
      // y <- y - f(y)/f'(y)
      Zel fy = zero(), dfy = zero(), pw = one();
      for (u32 i = 0; i <= m; ++i) {
        if (mod_lift_[i]) fy = add(fy, smul(mod_lift_[i], pw));
        if (i < m) {
          u64 dc = (u64)((u128)(i + 1) * (i + 1 <= m ? mod_lift_[i + 1] : 0) % pn);
          if (dc) dfy = add(dfy, smul(dc, pw));
        }
        pw = mul(pw, y);
      }
      y = sub(y, div(fy, dfy));
    }
    frob_pows_.assign(m, one());
    for (u32 j = 1; j < m; ++j) frob_pows_[j] = mul(frob_pows_[j - 1], y);
    // sigma^{-1} = sigma^{m-1}
    Zel z = g;
    for (u32 i = 0; i + 1 < m; ++i) z = apply_gen_images(z, frob_pows_);
    ifrob_pows_.assign(m, one());
    for (u32 j = 1; j < m; ++j) ifrob_pows_[j] = mul(ifrob_pows_[j - 1], z);
  }
}

inline ZqPtr ZqCtx::get(u32 p, u32 m, u32 n) {
  static std::mutex mu;
  static std::map<std::tuple<u32, u32, u32>, ZqPtr> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto key = std::make_tuple(p, m, n);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto ctx = std::make_shared<ZqCtx>(p, m, n);
  cache[key] = ctx;
  return ctx;
}

}  // namespace dieulat
