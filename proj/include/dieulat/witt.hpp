#pragma once

#include "dieulat/dual_ring.hpp"

namespace dieulat {

// Generic truncated Witt vectors W_n(R) over any char-p base ring R that
// exposes a lift ring L with surjection L ->> R of kernel (p).  All
// structure maps are evaluated through ghost components of digit lifts:
// the ghost of any lift agrees with the ghost of the true Witt lift to
// high enough p-adic order that each digit can be recovered by an exact
// division, so no structure polynomials ever need to be expanded.
template <class B>
class WittCtx {
 public:
  using El = typename B::El;
  using LEl = typename B::LEl;
  using Vec = std::vector<El>;  // digit vector, length n

  std::shared_ptr<const B> base;
  u32 p;
  u32 n;

  WittCtx(std::shared_ptr<const B> base_, u32 n_)
      : base(std::move(base_)), p(base->p), n(n_) {
    require(n >= 1 && n <= 20, "Witt: bad length");
  }

  Vec zero() const { return Vec(n, base->zero()); }
  Vec one() const { return teich(base->one()); }
  Vec teich(const El& a) const {
    Vec v(n, base->zero());
    v[0] = a;
    return v;
  }
  bool is_zero(const Vec& a) const {
    for (auto& d : a)
      if (!base->is_zero(d)) return false;
    return true;
  }

  // ghost components of an (arbitrary) digit lift; component k is only
  // canonical modulo p^{k+1}
  std::vector<LEl> ghosts(const Vec& a, u32 len) const {
    std::vector<LEl> ls(len);
    for (u32 i = 0; i < len; ++i) ls[i] = base->lift(a[i]);
    std::vector<LEl> g(len, base->lzero());
    for (u32 k = 0; k < len; ++k) {
      for (u32 i = 0; i <= k; ++i)
        g[k] = base->ladd(
            g[k], base->lsmul(pow_u64(p, i),
                              base->lpow(ls[i], pow_u64(p, k - i))));
    }
    return g;
  }

  // digits of the Witt vector with the given ghost components
  Vec from_ghosts(const std::vector<LEl>& g) const {
    u32 len = (u32)g.size();
    Vec c(n, base->zero());
    std::vector<LEl> ls(len);
    for (u32 k = 0; k < len; ++k) {
      LEl acc = g[k];
      for (u32 i = 0; i < k; ++i)
        acc = base->lsub(
            acc, base->lsmul(pow_u64(p, i),
                             base->lpow(ls[i], pow_u64(p, k - i))));
      El ck = base->reduce(k ? base->ldiv_pk(acc, k) : acc);
      c[k] = ck;
      ls[k] = base->lift(ck);
    }
    return c;
  }

  Vec add(const Vec& a, const Vec& b) const {
    auto ga = ghosts(a, n), gb = ghosts(b, n);
    for (u32 k = 0; k < n; ++k) ga[k] = base->ladd(ga[k], gb[k]);
    return from_ghosts(ga);
  }
  Vec neg(const Vec& a) const {
    auto g = ghosts(a, n);
    for (auto& x : g) x = base->lneg(x);
    return from_ghosts(g);
  }
  Vec sub(const Vec& a, const Vec& b) const { return add(a, neg(b)); }
  Vec mul(const Vec& a, const Vec& b) const {
    auto ga = ghosts(a, n), gb = ghosts(b, n);
    for (u32 k = 0; k < n; ++k) ga[k] = base->lmul(ga[k], gb[k]);
    return from_ghosts(ga);
  }

  // Verschiebung: digit shift (exact; top digit falls off the truncation)
  Vec vshift(const Vec& a) const {
    Vec v(n, base->zero());
    for (u32 i = 0; i + 1 < n; ++i) v[i + 1] = a[i];
    return v;
  }

  // Witt Frobenius W_n -> W_{n-1}: gh_k(Fa) = gh_{k+1}(a).  Over a
  // non-perfect base this genuinely loses one digit; the result is padded
  // with a trailing zero that the caller must treat as unknown.
  Vec frob(const Vec& a) const {
    require(n >= 2, "Witt: frobenius needs length >= 2");
    auto g = ghosts(a, n);
    std::vector<LEl> gf(g.begin() + 1, g.end());
    Vec r = from_ghosts(gf);
    // from_ghosts already zero-pads slot n-1
    return r;
  }

  Vec smul(i64 s, const Vec& a) const {
    auto g = ghosts(a, n);
    u64 pn = pow_u64(p, std::min<u32>(n, 20));
    i64 w = s % (i64)pn;
    if (w < 0) w += (i64)pn;
    for (auto& x : g) x = base->lsmul((u64)w, x);
    return from_ghosts(g);
  }

  bool eq(const Vec& a, const Vec& b) const {
    for (u32 i = 0; i < n; ++i)
      if (!(a[i] == b[i])) return false;
    return true;
  }
};

using WittFq = WittCtx<FqLiftCtx>;
using WittDual = WittCtx<DualFqCtx>;

inline WittFq make_witt_fq(u32 p, u32 m, u32 n) {
  return WittFq(FqLiftCtx::get(p, m, n), n);
}
inline WittDual make_witt_dual(u32 p, u32 m, u32 n) {
  return WittDual(DualFqCtx::get(p, m, n), n);
}

// conversions between the digit representation and the chain ring
inline Zel witt_to_zq(const ZqCtx& W, const std::vector<Fel>& digits) {
  return W.from_digits(digits);
}
inline std::vector<Fel> zq_to_witt(const ZqCtx& W, const Zel& a) {
  return W.digits(a);
}

}  // namespace dieulat
