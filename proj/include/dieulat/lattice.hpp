#pragma once

#include "dieulat/matrix.hpp"

namespace dieulat {

// A p-power-shifted lattice p^{-e} * rowspan(B) inside W(F_q)^c (or its
// fraction field when e > 0).  B is kept in Howell canonical form with no
// zero rows, so two lattices are equal iff their normalized (e, B) agree.
struct Lat {
  i32 e = 0;
  RMat B;
};

inline Lat lat_normalize(const ZqCtx& W, i32 e, const RMat& rows) {
  Howell h = howell_form(W, rows);
  // pull common p factors into the shift
  u32 v = mat_min_val(W, h.H);
  if (h.H.r > 0 && v > 0 && v < W.n) {
    RMat R = mat_div_pk(W, h.H, v);
    return Lat{e - (i32)v, howell_form(W, R).H};
  }
  return Lat{h.H.r ? e : 0, h.H};
}

inline Lat lat_from_rows(const ZqCtx& W, const RMat& rows, i32 e = 0) {
  return lat_normalize(W, e, rows);
}
inline Lat lat_standard(const ZqCtx& W, u32 r) {
  return Lat{0, mat_identity(W, r)};
}

inline u32 lat_rank(const Lat& L) { return L.B.r; }

// bring two lattices to a common shift (max) for comparisons
inline std::pair<RMat, RMat> lat_common(const ZqCtx& W, const Lat& A,
                                        const Lat& B, i32& e) {
  e = std::max(A.e, B.e);
  RMat a = mat_mul_pk(W, A.B, (u32)(e - A.e));
  RMat b = mat_mul_pk(W, B.B, (u32)(e - B.e));
  return {a, b};
}

inline bool lat_eq(const ZqCtx& W, const Lat& A, const Lat& B) {
  return A.e == B.e && A.B == B.B;
}

inline bool lat_contains_vec(const ZqCtx& W, const Lat& L,
                             const std::vector<Zel>& x, i32 xe = 0) {
  // does p^{-xe} x lie in L?  compare at shift max(e, xe)
  i32 e = std::max(L.e, xe);
  RMat bb = mat_mul_pk(W, L.B, (u32)(e - L.e));
  Howell h = howell_form(W, bb);
  std::vector<Zel> y(x);
  for (auto& z : y) z = W.mul_pk(z, (u32)(e - xe));
  return in_span(W, h, y);
}

inline bool lat_contains(const ZqCtx& W, const Lat& A, const Lat& B) {
  // A contains B?
  i32 e;
  auto [a, b] = lat_common(W, A, B, e);
  Howell h = howell_form(W, a);
  for (u32 i = 0; i < b.r; ++i) {
    std::vector<Zel> row(b.a.begin() + (size_t)i * b.c,
                         b.a.begin() + (size_t)(i + 1) * b.c);
    if (!in_span(W, h, row)) return false;
  }
  return true;
}

inline Lat lat_sum(const ZqCtx& W, const Lat& A, const Lat& B) {
  i32 e;
  auto [a, b] = lat_common(W, A, B, e);
  return lat_normalize(W, e, mat_vstack(a, b));
}

inline Lat lat_scale_pk(const ZqCtx& W, const Lat& A, i32 k) {
  // p^k * A
  return Lat{A.e - k, A.B};
}

// image of a lattice under a sigma^t-semilinear map x -> sigma^t(x) M
inline Lat lat_image(const ZqCtx& W, const Lat& A, const RMat& M,
                     i64 twist = 0) {
  RMat rows = mat_mul(W, twist ? mat_frob(W, A.B, twist) : A.B, M);
  return lat_normalize(W, A.e, rows);
}

// p-valuation of det(B) minus rank * e; an absolute "volume" exponent used
// for colengths (full-rank lattices only)
inline i32 lat_vol(const ZqCtx& W, const Lat& L) {
  require(L.B.r == L.B.c, "lat_vol: full rank required");
  Zel d = det(W, L.B);
  u32 v = W.val(d);
  require(v < W.n, "lat_vol: determinant vanished at working precision");
  return (i32)v - (i32)L.B.r * L.e;
}

// length of A/B as a W(F_q)-module, for B inside A, both full rank
inline u32 lat_colength(const ZqCtx& W, const Lat& A, const Lat& B) {
  i32 d = lat_vol(W, B) - lat_vol(W, A);
  require(d >= 0, "lat_colength: not nested");
  return (u32)d;
}

// dual with respect to a perfect pairing with Gram matrix G on the
// standard coordinates: {x : x G y^T integral for all y in L}.
// Exact: uses the adjugate, with the determinant folded into the shift.
inline Lat lat_dual(const ZqCtx& W, const Lat& L, const RMat& G) {
  require(L.B.r == L.B.c && G.r == L.B.c && G.c == L.B.c, "lat_dual: shape");
  RMat X = mat_mul(W, L.B, G);
  Zel d = det(W, X);
  u32 v = W.val(d);
  require(v < W.n, "lat_dual: Gram degenerate at working precision");
  Zel u = W.inv(W.div_pk(d, v));
  // rows D with D X^T = det * I ; then p^{L.e - v} D is the true dual basis
  RMat D = mat_scale(W, u, mat_transpose(adjugate(W, X)));
  return lat_normalize(W, (i32)v - L.e, D);
}

inline Lat lat_intersect(const ZqCtx& W, const Lat& A, const Lat& B) {
  require(A.B.r == A.B.c && B.B.r == B.B.c,
          "lat_intersect: full rank required");
  RMat I = mat_identity(W, A.B.c);
  Lat da = lat_dual(W, A, I), db = lat_dual(W, B, I);
  return lat_dual(W, lat_sum(W, da, db), I);
}

}  // namespace dieulat
