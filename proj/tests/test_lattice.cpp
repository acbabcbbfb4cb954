#include <doctest.h>

#include "dieulat/lattice.hpp"

using namespace dieulat;

static RMat random_gl(const ZqCtx& W, u32 r, Rng& rng) {
  for (;;) {
    RMat A = mat_random(W, r, r, rng);
    if (W.is_unit(det(W, A))) return A;
  }
}

TEST_CASE("howell form is a span invariant") {
  auto W = ZqCtx::get(3, 2, 6);
  Rng rng(101);
  for (int it = 0; it < 10; ++it) {
    RMat A = mat_random(*W, 4, 4, rng);
    // make some rows p-divisible to exercise saturation
    for (u32 j = 0; j < 4; ++j) A.at(1, j) = W->mul_pk(A.at(1, j), 2);
    Howell h = howell_form(*W, A);
    // every original row lies in the span
    for (u32 i = 0; i < A.r; ++i) {
      std::vector<Zel> row(A.a.begin() + (size_t)i * A.c,
                           A.a.begin() + (size_t)(i + 1) * A.c);
      CHECK(in_span(*W, h, row));
    }
    // the form of the form is the form
    Howell h2 = howell_form(*W, h.H);
    CHECK(h2.H == h.H);
    // unimodular row operations do not change the form
    RMat U = random_gl(*W, 4, rng);
    Howell h3 = howell_form(*W, mat_mul(*W, U, A));
    CHECK(h3.H == h.H);
    // random module elements (with p-power scalings) are members
    for (int t = 0; t < 5; ++t) {
      std::vector<Zel> v(4, W->zero());
      for (u32 i = 0; i < 4; ++i) {
        Zel cfs = W->random(rng);
        for (u32 j = 0; j < 4; ++j)
          v[j] = W->add(v[j], W->mul(cfs, A.at(i, j)));
      }
      CHECK(in_span(*W, h, v));
    }
  }
}

TEST_CASE("left kernels annihilate and are complete") {
  auto W = ZqCtx::get(3, 2, 5);
  Rng rng(7);
  // torsion example: diag(1, p, p^2) padded with a dependent row
  RMat M(4, 3);
  M.at(0, 0) = W->one();
  M.at(1, 1) = W->from_int(3);
  M.at(2, 2) = W->from_int(9);
  for (u32 j = 0; j < 3; ++j)
    M.at(3, j) = W->add(M.at(0, j), M.at(1, j));
  RMat K = left_kernel(*W, M);
  CHECK(mat_is_zero(*W, mat_mul(*W, K, M)));
  // the kernel span must contain the obvious row (0,0,0) relations:
  // p^4*e1, p^3*e2 combos and e0+e1-e3
  Howell hk = howell_form(*W, K);
  std::vector<Zel> rel(4, W->zero());
  rel[0] = W->one();
  rel[1] = W->one();
  rel[3] = W->neg(W->one());
  CHECK(in_span(*W, hk, rel));
  std::vector<Zel> tor(4, W->zero());
  tor[1] = W->from_int((i64)pow_u64(3, 4));
  CHECK(in_span(*W, hk, tor));
  // random matrices: K M = 0 always
  for (int it = 0; it < 8; ++it) {
    RMat A = mat_random(*W, 3, 5, rng);
    RMat K2 = left_kernel(*W, A);
    CHECK(mat_is_zero(*W, mat_mul(*W, K2, A)));
  }
}

TEST_CASE("charpoly, determinant and adjugate are consistent") {
  auto W = ZqCtx::get(3, 2, 6);
  Rng rng(13);
  for (u32 r : {1u, 2u, 3u, 5u}) {
    for (int it = 0; it < 6; ++it) {
      RMat A = mat_random(*W, r, r, rng), B = mat_random(*W, r, r, rng);
      CHECK(det(*W, mat_mul(*W, A, B)) == W->mul(det(*W, A), det(*W, B)));
      // A adj(A) = det(A) I
      RMat P = mat_mul(*W, A, adjugate(*W, A));
      RMat D = mat_identity(*W, r);
      for (u32 i = 0; i < r; ++i) D.at(i, i) = det(*W, A);
      CHECK(P == D);
      // Cayley-Hamilton
      auto cp = charpoly(*W, A);
      RMat acc(r, r);
      RMat pw = mat_identity(*W, r);
      for (u32 i = 0; i <= r; ++i) {
        acc = mat_add(*W, acc, mat_scale(*W, cp[i], pw));
        if (i < r) pw = mat_mul(*W, pw, A);
      }
      CHECK(mat_is_zero(*W, acc));
      // trace coefficient
      Zel tr = W->zero();
      for (u32 i = 0; i < r; ++i) tr = W->add(tr, A.at(i, i));
      CHECK(cp[r - 1] == W->neg(tr));
      if (W->is_unit(det(*W, A))) {
        CHECK(mat_mul(*W, A, mat_inv(*W, A)) == mat_identity(*W, r));
      }
    }
  }
}

TEST_CASE("lattice sum, intersection, dual and volume identities") {
  auto W = ZqCtx::get(3, 2, 10);
  Rng rng(29);
  RMat I3 = mat_identity(*W, 3);
  for (int it = 0; it < 8; ++it) {
    Lat A = lat_from_rows(*W, random_gl(*W, 3, rng), 0);
    RMat Bm = random_gl(*W, 3, rng);
    // scale some rows by p so the lattices genuinely differ
    for (u32 j = 0; j < 3; ++j) Bm.at(0, j) = W->mul_pk(Bm.at(0, j), 1);
    Lat B = lat_from_rows(*W, Bm, 0);
    Lat S = lat_sum(*W, A, B);
    Lat X = lat_intersect(*W, A, B);
    CHECK(lat_contains(*W, S, A));
    CHECK(lat_contains(*W, S, B));
    CHECK(lat_contains(*W, A, X));
    CHECK(lat_contains(*W, B, X));
    CHECK(lat_vol(*W, S) + lat_vol(*W, X) == lat_vol(*W, A) + lat_vol(*W, B));
    // double dual
    Lat DA = lat_dual(*W, A, I3);
    CHECK(lat_eq(*W, lat_dual(*W, DA, I3), A));
    // dual reverses inclusions
    CHECK(lat_contains(*W, lat_dual(*W, X, I3), DA));
    // colength of pA in A is rank * 1
    CHECK(lat_colength(*W, A, lat_scale_pk(*W, A, 1)) == 3);
    CHECK(lat_eq(*W, lat_sum(*W, A, A), A));
  }
  // standard lattice sanity
  Lat std3 = lat_standard(*W, 3);
  CHECK(lat_eq(*W, lat_dual(*W, std3, I3), std3));
  CHECK(lat_vol(*W, std3) == 0);
}

TEST_CASE("semilinear kernels via restriction of scalars") {
  auto W = ZqCtx::get(3, 2, 5);
  auto W1 = ZqCtx::get(3, 1, 5);
  // kernel of x -> sigma(x) - x on W(F_9) is exactly W(F_3)
  RMat one(1, 1), mone(1, 1);
  one.at(0, 0) = W->one();
  mone.at(0, 0) = W->neg(W->one());
  RMat big = mat_add(*W1, restrict_scalars(*W, *W1, one, 1),
                     restrict_scalars(*W, *W1, mone, 0));
  RMat K = left_kernel(*W1, big);
  Howell hk = howell_form(*W1, K);
  REQUIRE(hk.H.r == 1);
  CHECK(hk.piv_val[0] == 0);
  auto x = unrestrict_vector(*W, {hk.H.at(0, 0), hk.H.at(0, 1)}, 1);
  CHECK(W->frob(x[0]) == x[0]);
  CHECK(W->is_unit(x[0]));
  // generic consistency: any kernel row of the restriction really solves
  // the twisted equation
  Rng rng(37);
  for (int it = 0; it < 6; ++it) {
    RMat A = mat_random(*W, 2, 3, rng);
    RMat R = restrict_scalars(*W, *W1, A, 1);
    RMat K2 = left_kernel(*W1, R);
    for (u32 i = 0; i < K2.r; ++i) {
      std::vector<Zel> row(K2.a.begin() + (size_t)i * K2.c,
                           K2.a.begin() + (size_t)(i + 1) * K2.c);
      auto xv = unrestrict_vector(*W, row, 2);
      // sigma(x) A = 0
      for (u32 j = 0; j < 3; ++j) {
        Zel acc = W->zero();
        for (u32 k = 0; k < 2; ++k)
          acc = W->add(acc, W->mul(W->frob(xv[k]), A.at(k, j)));
        CHECK(W->is_zero(acc));
      }
    }
  }
}
