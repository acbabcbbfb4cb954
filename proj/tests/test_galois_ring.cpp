#include <doctest.h>

#include "dieulat/galois_ring.hpp"

using namespace dieulat;

TEST_CASE("chain ring arithmetic basics") {
  for (auto [p, m, n] :
       {std::tuple<u32, u32, u32>{3, 2, 4}, {3, 4, 3}, {5, 2, 3}, {3, 1, 6}}) {
    auto W = ZqCtx::get(p, m, n);
    Rng rng(p * 100 + m * 10 + n);
    for (int it = 0; it < 40; ++it) {
      Zel a = W->random(rng), b = W->random(rng), c = W->random(rng);
      CHECK(W->mul(a, W->add(b, c)) == W->add(W->mul(a, b), W->mul(a, c)));
      CHECK(W->mul(a, b) == W->mul(b, a));
      CHECK(W->mul(W->mul(a, b), c) == W->mul(a, W->mul(b, c)));
      if (W->is_unit(a)) CHECK(W->mul(a, W->inv(a)) == W->one());
      // valuation is multiplicative on this ring
      CHECK(W->val(W->mul(a, b)) ==
            std::min(n, std::min(n, W->val(a) + W->val(b))));
    }
    CHECK(W->val(W->from_int((i64)pow_u64(p, n - 1))) == n - 1);
    CHECK(W->val(W->zero()) == n);
  }
}

TEST_CASE("frobenius lifts the residue frobenius and has order m") {
  for (auto [p, m, n] : {std::tuple<u32, u32, u32>{3, 2, 5}, {3, 4, 3}, {5, 2, 4}}) {
    auto W = ZqCtx::get(p, m, n);
    Rng rng(7 + m);
    for (int it = 0; it < 30; ++it) {
      Zel a = W->random(rng), b = W->random(rng);
      CHECK(W->frob(W->mul(a, b)) == W->mul(W->frob(a), W->frob(b)));
      CHECK(W->frob(W->add(a, b)) == W->add(W->frob(a), W->frob(b)));
      CHECK(W->fq->frob(W->residue(a)) == W->residue(W->frob(a)));
      CHECK(W->inv_frob(W->frob(a)) == a);
      Zel x = a;
      for (u32 i = 0; i < m; ++i) x = W->frob(x);
      CHECK(x == a);
      CHECK(W->frob_k(a, -3) == W->frob_k(a, (i64)m - 3));
    }
  }
}

TEST_CASE("teichmuller lifts are multiplicative and q-power fixed") {
  auto W = ZqCtx::get(3, 2, 5);
  auto F = W->fq;
  Rng rng(11);
  for (int it = 0; it < 25; ++it) {
    Fel a = F->random(rng), b = F->random(rng);
    Zel ta = W->teichmuller(a);
    CHECK(W->residue(ta) == a);
    CHECK(W->pow(ta, F->q()) == ta);
    CHECK(W->mul(ta, W->teichmuller(b)) == W->teichmuller(F->mul(a, b)));
    CHECK(W->frob(ta) == W->teichmuller(F->frob(a)));
  }
}

TEST_CASE("digit expansion round trips and twists correctly") {
  for (auto [p, m, n] : {std::tuple<u32, u32, u32>{3, 2, 5}, {5, 2, 3}, {3, 4, 3}}) {
    auto W = ZqCtx::get(p, m, n);
    auto F = W->fq;
    Rng rng(23 + p);
    for (int it = 0; it < 20; ++it) {
      Zel a = W->random(rng);
      auto ds = W->digits(a);
      REQUIRE(ds.size() == n);
      CHECK(W->from_digits(ds) == a);
      // p * sigma^{-1} shifts the digit vector by one slot
      Zel v = W->mul_pk(W->inv_frob(a), 1);
      auto dv = W->digits(v);
      CHECK(F->is_zero(dv[0]));
      for (u32 i = 0; i + 1 < n; ++i) CHECK(dv[i + 1] == ds[i]);
      // frobenius raises every digit to the p-th power
      auto df = W->digits(W->frob(a));
      for (u32 i = 0; i < n; ++i) CHECK(df[i] == F->frob(ds[i]));
    }
    // teichmuller of r has digit vector (r, 0, ..., 0)
    Fel r = F->gen();
    auto dt = W->digits(W->teichmuller(r));
    CHECK(dt[0] == r);
    for (u32 i = 1; i < n; ++i) CHECK(F->is_zero(dt[i]));
  }
}

TEST_CASE("precision change and subring embeddings") {
  auto W5 = ZqCtx::get(3, 2, 5);
  auto W3 = ZqCtx::get(3, 2, 3);
  Rng rng(31);
  for (int it = 0; it < 20; ++it) {
    Zel a = W5->random(rng), b = W5->random(rng);
    // reduction is a ring map
    CHECK(W5->to_precision(*W3, W5->mul(a, b)) ==
          W3->mul(W5->to_precision(*W3, a), W5->to_precision(*W3, b)));
  }
  auto S = ZqCtx::get(3, 2, 4);
  auto L = ZqCtx::get(3, 4, 4);
  for (int it = 0; it < 15; ++it) {
    Zel a = S->random(rng), b = S->random(rng);
    Zel ea = L->embed_from(*S, a);
    CHECK(L->mul(ea, L->embed_from(*S, b)) ==
          L->embed_from(*S, S->mul(a, b)));
    CHECK(L->in_subring(ea, 2));
    CHECK(L->project_to(*S, ea) == a);
    CHECK(L->val(ea) == S->val(a));
  }
}
