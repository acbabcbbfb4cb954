#include <doctest.h>

#include "dieulat/witt.hpp"

using namespace dieulat;

static std::vector<Fel> rand_digits(const FqCtx& F, u32 n, Rng& rng) {
  std::vector<Fel> v(n);
  for (auto& d : v) d = F.random(rng);
  return v;
}

TEST_CASE("generic engine agrees with the chain ring over F_q") {
  for (auto [p, m, n] : {std::tuple<u32, u32, u32>{3, 1, 5}, {3, 2, 4}, {5, 2, 3}}) {
    auto Wg = make_witt_fq(p, m, n);
    auto Zq = ZqCtx::get(p, m, n);
    auto F = Zq->fq;
    Rng rng(41 + p + m);
    for (int it = 0; it < 15; ++it) {
      auto a = rand_digits(*F, n, rng), b = rand_digits(*F, n, rng);
      Zel za = Zq->from_digits(a), zb = Zq->from_digits(b);
      CHECK(Wg.eq(Wg.add(a, b), Zq->digits(Zq->add(za, zb))));
      CHECK(Wg.eq(Wg.mul(a, b), Zq->digits(Zq->mul(za, zb))));
      CHECK(Wg.eq(Wg.neg(a), Zq->digits(Zq->neg(za))));
      // V = p sigma^{-1} on the chain ring side
      CHECK(Wg.eq(Wg.vshift(a), Zq->digits(Zq->mul_pk(Zq->inv_frob(za), 1))));
      // the generic frobenius drops the top digit
      auto fa = Wg.frob(a);
      auto fz = Zq->digits(Zq->frob(za));
      for (u32 i = 0; i + 1 < n; ++i) CHECK(fa[i] == fz[i]);
    }
  }
}

TEST_CASE("witt ring axioms hold over the dual numbers") {
  auto Wd = make_witt_dual(3, 2, 4);
  auto D = Wd.base;
  Rng rng(57);
  auto rnd = [&] {
    std::vector<DFel> v(Wd.n);
    for (auto& d : v) d = DFel{D->F->random(rng), D->F->random(rng)};
    return v;
  };
  for (int it = 0; it < 12; ++it) {
    auto a = rnd(), b = rnd(), c = rnd();
    CHECK(Wd.eq(Wd.add(a, b), Wd.add(b, a)));
    CHECK(Wd.eq(Wd.add(Wd.add(a, b), c), Wd.add(a, Wd.add(b, c))));
    CHECK(Wd.eq(Wd.mul(a, b), Wd.mul(b, a)));
    CHECK(Wd.eq(Wd.mul(Wd.mul(a, b), c), Wd.mul(a, Wd.mul(b, c))));
    CHECK(Wd.eq(Wd.mul(a, Wd.add(b, c)), Wd.add(Wd.mul(a, b), Wd.mul(a, c))));
    CHECK(Wd.is_zero(Wd.add(a, Wd.neg(a))));
    CHECK(Wd.eq(Wd.mul(a, Wd.one()), a));
    // F(V(x)) = p x and V(F(x)) = p x (top digit excluded where lost)
    auto fv = Wd.frob(Wd.vshift(a));
    auto pa = Wd.smul(3, a);
    for (u32 i = 0; i + 1 < Wd.n; ++i) CHECK(fv[i] == pa[i]);
    auto vf = Wd.vshift(Wd.frob(a));
    for (u32 i = 0; i < Wd.n; ++i) CHECK(vf[i] == pa[i]);
    // teichmuller multiplicativity
    DFel x{D->F->random(rng), D->F->random(rng)};
    DFel y{D->F->random(rng), D->F->random(rng)};
    CHECK(Wd.eq(Wd.mul(Wd.teich(x), Wd.teich(y)), Wd.teich(D->mul(x, y))));
  }
}

TEST_CASE("setting the infinitesimal part to zero recovers the F_q ring") {
  auto Wd = make_witt_dual(3, 2, 4);
  auto Wf = make_witt_fq(3, 2, 4);
  auto D = Wd.base;
  Rng rng(73);
  for (int it = 0; it < 10; ++it) {
    std::vector<Fel> a(4), b(4);
    std::vector<DFel> da(4), db(4);
    for (u32 i = 0; i < 4; ++i) {
      a[i] = D->F->random(rng);
      b[i] = D->F->random(rng);
      da[i] = D->from_fq(a[i]);
      db[i] = D->from_fq(b[i]);
    }
    auto sum = Wd.mul(Wd.add(da, db), da);
    auto ref = Wf.mul(Wf.add(a, b), a);
    for (u32 i = 0; i < 4; ++i) {
      CHECK(sum[i].a == ref[i]);
      CHECK(D->F->is_zero(sum[i].b));
    }
  }
}

TEST_CASE("ghost components are additive and multiplicative mod p^(k+1)") {
  auto Wg = make_witt_fq(3, 1, 4);
  auto Zq = ZqCtx::get(3, 1, 4);
  Rng rng(3);
  for (int it = 0; it < 10; ++it) {
    auto a = rand_digits(*Zq->fq, 4, rng), b = rand_digits(*Zq->fq, 4, rng);
    auto ga = Wg.ghosts(a, 4), gb = Wg.ghosts(b, 4);
    auto gs = Wg.ghosts(Wg.add(a, b), 4);
    auto gp = Wg.ghosts(Wg.mul(a, b), 4);
    for (u32 k = 0; k < 4; ++k) {
      u64 md = pow_u64(3, k + 1);
      CHECK((ga[k].c[0] + gb[k].c[0]) % md == gs[k].c[0] % md);
      CHECK(((u128)ga[k].c[0] * gb[k].c[0]) % md == gp[k].c[0] % md);
    }
  }
}
