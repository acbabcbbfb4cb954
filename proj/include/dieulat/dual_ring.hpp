#pragma once

#include "dieulat/galois_ring.hpp"

namespace dieulat {

// Dual numbers R[s]/(s^2) over a finite field, with matching dual numbers
// over the chain ring serving as the lift ring for generic Witt arithmetic.
struct DFel {
  Fel a, b;  // a + b s
  friend bool operator==(const DFel&, const DFel&) = default;
};
struct DZel {
  Zel a, b;
  friend bool operator==(const DZel&, const DZel&) = default;
};

class DualFqCtx;
using DualPtr = std::shared_ptr<const DualFqCtx>;

class DualFqCtx : public std::enable_shared_from_this<DualFqCtx> {
 public:
  FqPtr F;
  ZqPtr W;  // lift coefficients for Witt digit arithmetic
  u32 p;

  static DualPtr get(u32 p, u32 m, u32 lift_prec) {
    static std::mutex mu;
    static std::map<std::tuple<u32, u32, u32>, DualPtr> cache;
    std::lock_guard<std::mutex> lk(mu);
    auto key = std::make_tuple(p, m, lift_prec);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto ctx = std::make_shared<DualFqCtx>(p, m, lift_prec);
    cache[key] = ctx;
    return ctx;
  }

  DualFqCtx(u32 p_, u32 m, u32 lift_prec) : p(p_) {
    F = FqCtx::get(p, m);
    W = ZqCtx::get(p, m, lift_prec);
  }

  DFel zero() const { return {F->zero(), F->zero()}; }
  DFel one() const { return {F->one(), F->zero()}; }
  DFel eps() const { return {F->zero(), F->one()}; }
  DFel from_fq(const Fel& x) const { return {x, F->zero()}; }
  bool is_zero(const DFel& x) const {
    return F->is_zero(x.a) && F->is_zero(x.b);
  }
  DFel add(const DFel& x, const DFel& y) const {
    return {F->add(x.a, y.a), F->add(x.b, y.b)};
  }
  DFel neg(const DFel& x) const { return {F->neg(x.a), F->neg(x.b)}; }
  DFel sub(const DFel& x, const DFel& y) const { return add(x, neg(y)); }
  DFel mul(const DFel& x, const DFel& y) const {
    return {F->mul(x.a, y.a),
            F->add(F->mul(x.a, y.b), F->mul(x.b, y.a))};
  }
  DFel inv(const DFel& x) const {
    Fel ia = F->inv(x.a);
    return {ia, F->neg(F->mul(F->mul(ia, ia), x.b))};
  }
  // x^p; kills the infinitesimal part since p >= 3
  DFel pth_power(const DFel& x) const { return {F->frob(x.a), F->zero()}; }

  // lift-ring (dual numbers over the chain ring) operations
  using El = DFel;
  using LEl = DZel;
  LEl lzero() const { return {W->zero(), W->zero()}; }
  LEl lone() const { return {W->one(), W->zero()}; }
  LEl ladd(const LEl& x, const LEl& y) const {
    return {W->add(x.a, y.a), W->add(x.b, y.b)};
  }
  LEl lneg(const LEl& x) const { return {W->neg(x.a), W->neg(x.b)}; }
  LEl lsub(const LEl& x, const LEl& y) const { return ladd(x, lneg(y)); }
  LEl lmul(const LEl& x, const LEl& y) const {
    return {W->mul(x.a, y.a),
            W->add(W->mul(x.a, y.b), W->mul(x.b, y.a))};
  }
  LEl lsmul(u64 s, const LEl& x) const {
    return {W->smul(s, x.a), W->smul(s, x.b)};
  }
  LEl lpow(LEl x, u64 e) const {
    LEl r = lone();
    while (e) {
      if (e & 1) r = lmul(r, x);
      x = lmul(x, x);
      e >>= 1;
    }
    return r;
  }
  LEl lift(const DFel& x) const {
    return {W->lift_residue(x.a), W->lift_residue(x.b)};
  }
  DFel reduce(const LEl& x) const { return {W->residue(x.a), W->residue(x.b)}; }
  LEl ldiv_pk(const LEl& x, u32 k) const {
    return {W->div_pk(x.a, k), W->div_pk(x.b, k)};
  }
};

// The finite field itself exposed through the same lift-ring interface, so
// the generic Witt engine can be cross-checked against the chain ring.
class FqLiftCtx : public std::enable_shared_from_this<FqLiftCtx> {
 public:
  FqPtr F;
  ZqPtr W;
  u32 p;

  FqLiftCtx(u32 p_, u32 m, u32 lift_prec) : p(p_) {
    F = FqCtx::get(p, m);
    W = ZqCtx::get(p, m, lift_prec);
  }
  static std::shared_ptr<const FqLiftCtx> get(u32 p, u32 m, u32 lift_prec) {
    static std::mutex mu;
    static std::map<std::tuple<u32, u32, u32>,
                    std::shared_ptr<const FqLiftCtx>>
        cache;
    std::lock_guard<std::mutex> lk(mu);
    auto key = std::make_tuple(p, m, lift_prec);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto ctx = std::make_shared<FqLiftCtx>(p, m, lift_prec);
    cache[key] = ctx;
    return ctx;
  }

  using El = Fel;
  using LEl = Zel;
  Fel zero() const { return F->zero(); }
  Fel one() const { return F->one(); }
  bool is_zero(const Fel& x) const { return F->is_zero(x); }
  Fel add(const Fel& x, const Fel& y) const { return F->add(x, y); }
  Fel neg(const Fel& x) const { return F->neg(x); }
  Fel sub(const Fel& x, const Fel& y) const { return F->sub(x, y); }
  Fel mul(const Fel& x, const Fel& y) const { return F->mul(x, y); }
  Fel pth_power(const Fel& x) const { return F->frob(x); }

  Zel lzero() const { return W->zero(); }
  Zel lone() const { return W->one(); }
  Zel ladd(const Zel& x, const Zel& y) const { return W->add(x, y); }
  Zel lneg(const Zel& x) const { return W->neg(x); }
  Zel lsub(const Zel& x, const Zel& y) const { return W->sub(x, y); }
  Zel lmul(const Zel& x, const Zel& y) const { return W->mul(x, y); }
  Zel lsmul(u64 s, const Zel& x) const { return W->smul(s, x); }
  Zel lpow(Zel x, u64 e) const { return W->pow(x, e); }
  Zel lift(const Fel& x) const { return W->lift_residue(x); }
  Fel reduce(const Zel& x) const { return W->residue(x); }
  Zel ldiv_pk(const Zel& x, u32 k) const { return W->div_pk(x, k); }
};

}  // namespace dieulat
