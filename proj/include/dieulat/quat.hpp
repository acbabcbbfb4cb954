#pragma once

#include "dieulat/galois_ring.hpp"

#include <memory>

namespace dieulat {

// ---------------------------------------------------------------------------
// Square roots and norm equations in the unramified quadratic chain ring
// W_n(F_{p^2}).  Residues are found by brute force over the small field and
// lifted by Newton iteration; both converge quadratically.
// ---------------------------------------------------------------------------

// sqrt of a unit whose residue is a square; p must be odd.
inline Zel zq_sqrt(const ZqCtx& W, const Zel& z) {
  require(W.p != 2, "zq_sqrt: even characteristic");
  require(W.is_unit(z), "zq_sqrt: non-unit");
  const FqCtx& F = *W.fq;
  Fel zres = W.residue(z);
  Zel x = W.zero();
  bool found = false;
  for (u64 i = 1; i < F.q() && !found; ++i) {
    Fel c = F.from_index(i);
    if (F.mul(c, c) == zres) {
      x = W.lift_residue(c);
      found = true;
    }
  }
  require(found, "zq_sqrt: residue is not a square");
  Zel half = W.inv(W.from_int(2));
  for (u32 it = 0; it < W.n + 2; ++it) {
    Zel err = W.sub(W.mul(x, x), z);
    if (W.is_zero(err)) break;
    x = W.mul(half, W.add(x, W.div(z, x)));
  }
  require(W.mul(x, x) == z, "zq_sqrt: iteration failed");
  return x;
}

// Solve N(u) = u * u^sigma = d for a unit d fixed by sigma, in W_n(F_{p^2}).
// The norm is onto the sigma-invariant units: residue by brute force over
// F_{p^2}^x, then Hensel with sigma-invariant corrections u <- u(1 + delta/2).
inline Zel zq_solve_norm(const ZqCtx& W, const Zel& d) {
  require(W.m == 2 && W.p != 2, "zq_solve_norm: wrong ring");
  require(W.is_unit(d) && W.in_subring(d, 1), "zq_solve_norm: bad target");
  const FqCtx& F = *W.fq;
  Fel dres = W.residue(d);
  Zel u = W.zero();
  bool found = false;
  for (u64 i = 1; i < F.q() && !found; ++i) {
    Fel c = F.from_index(i);
    if (F.pow(c, F.p + 1) == dres) {
      u = W.lift_residue(c);
      found = true;
    }
  }
  require(found, "zq_solve_norm: residue norm not attained");
  Zel half = W.inv(W.from_int(2));
  for (u32 it = 0; it < W.n + 2; ++it) {
    Zel nu = W.mul(u, W.frob(u));
    Zel delta = W.sub(W.div(d, nu), W.one());
    if (W.is_zero(delta)) break;
    require(W.in_subring(delta, 1), "zq_solve_norm: defect left the base");
    u = W.mul(u, W.add(W.one(), W.mul(half, delta)));
  }
  require(W.mul(u, W.frob(u)) == d, "zq_solve_norm: iteration failed");
  return u;
}

// ---------------------------------------------------------------------------
// The maximal order O = W_n(F_{p^2})<s>, s^2 = p, s a = sigma(a) s, written
// additively as a + b s.  This is the (truncated) maximal order of the
// quaternion division algebra over Q_p, and carries the main involution
// iota(a + b s) = sigma(a) - b s, the reduced norm, and the valuation
// v(a + b s) = min(2 v_p(a), 2 v_p(b) + 1) of the maximal-order filtration.
// ---------------------------------------------------------------------------

struct QEl {
  Zel a, b;
  friend bool operator==(const QEl&, const QEl&) = default;
};

class QuatCtx {
 public:
  ZqPtr W;  // W_n(F_{p^2})
  Zel t;    // Teichmueller unit with sigma(t) = -t; t^2 is a non-square unit

  static std::shared_ptr<const QuatCtx> get(u32 p, u32 n) {
    return std::make_shared<const QuatCtx>(p, n);
  }

  QuatCtx(u32 p, u32 n) {
    require(p != 2, "QuatCtx: even characteristic");
    W = ZqCtx::get(p, 2, n);
    t = W->teichmuller(W->fq->pow(W->fq->gen(), (u64)(p + 1) / 2));
    require(W->frob(t) == W->neg(t), "QuatCtx: anti-invariant unit failed");
  }

  QEl zero() const { return QEl{W->zero(), W->zero()}; }
  QEl one() const { return QEl{W->one(), W->zero()}; }
  QEl sg() const { return QEl{W->zero(), W->one()}; }
  QEl scal(const Zel& a) const { return QEl{a, W->zero()}; }
  QEl make(const Zel& a, const Zel& b) const { return QEl{a, b}; }
  bool is_zero(const QEl& x) const {
    return W->is_zero(x.a) && W->is_zero(x.b);
  }

  QEl add(const QEl& x, const QEl& y) const {
    return QEl{W->add(x.a, y.a), W->add(x.b, y.b)};
  }
  QEl neg(const QEl& x) const { return QEl{W->neg(x.a), W->neg(x.b)}; }
  QEl sub(const QEl& x, const QEl& y) const { return add(x, neg(y)); }
  // (a + b s)(c + d s) = (ac + p b sigma(d)) + (ad + b sigma(c)) s
  QEl mul(const QEl& x, const QEl& y) const {
    Zel a = W->add(W->mul(x.a, y.a), W->mul_pk(W->mul(x.b, W->frob(y.b)), 1));
    Zel b = W->add(W->mul(x.a, y.b), W->mul(x.b, W->frob(y.a)));
    return QEl{a, b};
  }
  QEl smul(const Zel& c, const QEl& x) const {
    return QEl{W->mul(c, x.a), W->mul(c, x.b)};
  }
  QEl iota(const QEl& x) const { return QEl{W->frob(x.a), W->neg(x.b)}; }
  // componentwise sigma (conjugation by s up to the s^2 = p center)
  QEl frob(const QEl& x) const { return QEl{W->frob(x.a), W->frob(x.b)}; }

  // reduced norm x iota(x); lands in the sigma-invariant line W_n(F_p)
  Zel nrd(const QEl& x) const {
    return W->sub(W->mul(x.a, W->frob(x.a)),
                  W->mul_pk(W->mul(x.b, W->frob(x.b)), 1));
  }

  // valuation in the maximal-order filtration; 2n+1 stands for "zero to
  // working precision"
  u32 vmax() const { return 2 * W->n + 1; }
  u32 v(const QEl& x) const {
    u32 va = W->is_zero(x.a) ? vmax() : 2 * W->val(x.a);
    u32 vb = W->is_zero(x.b) ? vmax() : 2 * W->val(x.b) + 1;
    return std::min(va, vb);
  }

  QEl div_pk(const QEl& x, u32 k) const {
    return QEl{W->div_pk(x.a, k), W->div_pk(x.b, k)};
  }
  QEl mul_pk(const QEl& x, u32 k) const {
    return QEl{W->mul_pk(x.a, k), W->mul_pk(x.b, k)};
  }

  QEl inv(const QEl& x) const {
    Zel nr = nrd(x);
    require(W->is_unit(nr), "QuatCtx: non-unit inverse");
    return smul(W->inv(nr), iota(x));
  }

  // x h^{-1} for v(x) >= v(h): clears the p-power of nrd(h) exactly
  QEl div_right(const QEl& x, const QEl& h) const {
    Zel nr = nrd(h);
    u32 k = W->val(nr);
    require(k < W->n, "QuatCtx: division by near-zero");
    QEl y = mul(x, iota(h));
    require(v(y) >= 2 * k, "QuatCtx: inexact right division");
    return smul(W->inv(W->div_pk(nr, k)), div_pk(y, k));
  }

  QEl random(Rng& rng) const { return QEl{W->random(rng), W->random(rng)}; }
  QEl random_unit(Rng& rng) const {
    for (;;) {
      QEl x = random(rng);
      if (W->is_unit(nrd(x))) return x;
    }
  }
};

using QuatPtr = std::shared_ptr<const QuatCtx>;

}  // namespace dieulat
