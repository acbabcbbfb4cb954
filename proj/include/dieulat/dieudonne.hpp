#pragma once

#include <numeric>
#include <optional>

#include "dieulat/lattice.hpp"

namespace dieulat {

// A Dieudonne module at finite precision: the lattice is W^{rank} in its
// own basis (row vectors), F(x) = sigma(x) A_F, V(x) = sigma^{-1}(x) A_V,
// with F V = V F = p.  An optional Gram matrix stores a symmetric pairing
// phi(x, y) = x G y^T satisfying phi(x, Fy) = phi(Vx, y)^sigma.
struct DieuMod {
  ZqPtr W;
  u32 rank = 0;  // 2g
  RMat AF, AV;
  std::optional<RMat> gram;
  // effective precision: entries are only meaningful modulo p^prec (basis
  // changes that divide by a non-unit determinant thin this out); 0 means
  // full working precision
  u32 prec = 0;

  u32 g() const { return rank / 2; }
  u32 eff_prec() const { return prec ? prec : W->n; }
};

// equality of matrices modulo p^prec
inline bool mat_eq_mod(const ZqCtx& W, const RMat& A, const RMat& B,
                       u32 prec) {
  if (A.r != B.r || A.c != B.c) return false;
  for (size_t i = 0; i < A.a.size(); ++i)
    if (W.val(W.sub(A.a[i], B.a[i])) < prec) return false;
  return true;
}

inline bool dieu_check(const DieuMod& M, bool need_pairing = false) {
  const ZqCtx& W = *M.W;
  u32 pr = M.eff_prec();
  RMat pI = mat_mul_pk(W, mat_identity(W, M.rank), 1);
  if (!mat_eq_mod(W, mat_mul(W, mat_frob(W, M.AV, 1), M.AF), pI, pr))
    return false;
  if (!mat_eq_mod(W, mat_mul(W, mat_frob(W, M.AF, -1), M.AV), pI, pr))
    return false;
  if (M.gram) {
    const RMat& G = *M.gram;
    // symmetry
    if (!mat_eq_mod(W, mat_transpose(G), G, pr)) return false;
    // G A_F^T = sigma(A_V) sigma(G)
    RMat lhs = mat_mul(W, G, mat_transpose(M.AF));
    RMat rhs = mat_mul(W, mat_frob(W, M.AV, 1), mat_frob(W, G, 1));
    if (!mat_eq_mod(W, lhs, rhs, pr)) return false;
  } else if (need_pairing) {
    return false;
  }
  return true;
}

// lattice images under F and V (in the module's own coordinates)
inline Lat dieu_FL(const DieuMod& M, const Lat& L) {
  return lat_image(*M.W, L, M.AF, 1);
}
inline Lat dieu_VL(const DieuMod& M, const Lat& L) {
  return lat_image(*M.W, L, M.AV, -1);
}
inline Lat dieu_std(const DieuMod& M) { return lat_standard(*M.W, M.rank); }

inline std::vector<Zel> dieu_F(const DieuMod& M, const std::vector<Zel>& x) {
  const ZqCtx& W = *M.W;
  std::vector<Zel> y(M.rank, W.zero());
  for (u32 i = 0; i < M.rank; ++i) {
    Zel s = W.frob(x[i]);
    if (W.is_zero(s)) continue;
    for (u32 j = 0; j < M.rank; ++j)
      y[j] = W.add(y[j], W.mul(s, M.AF.at(i, j)));
  }
  return y;
}
inline std::vector<Zel> dieu_V(const DieuMod& M, const std::vector<Zel>& x) {
  const ZqCtx& W = *M.W;
  std::vector<Zel> y(M.rank, W.zero());
  for (u32 i = 0; i < M.rank; ++i) {
    Zel s = W.inv_frob(x[i]);
    if (W.is_zero(s)) continue;
    for (u32 j = 0; j < M.rank; ++j)
      y[j] = W.add(y[j], W.mul(s, M.AV.at(i, j)));
  }
  return y;
}
inline Zel dieu_pair(const DieuMod& M, const std::vector<Zel>& x,
                     const std::vector<Zel>& y) {
  require(M.gram.has_value(), "dieu_pair: no pairing");
  const ZqCtx& W = *M.W;
  Zel acc = W.zero();
  for (u32 i = 0; i < M.rank; ++i) {
    if (W.is_zero(x[i])) continue;
    for (u32 j = 0; j < M.rank; ++j)
      acc = W.add(acc, W.mul(W.mul(x[i], M.gram->at(i, j)), y[j]));
  }
  return acc;
}

// Re-express the module structure on an F,V-stable full-rank lattice
// L = p^{-e} span(B): new basis rows are p^{-e} B, and the shift drops out
// of the conjugation.  The division by det(B) is exact because L is
// stable; it thins precision by val(det B), which the padded working
// precision absorbs.
inline DieuMod dieu_change_basis(const DieuMod& M, const Lat& L) {
  const ZqCtx& W = *M.W;
  require(L.B.r == M.rank && L.B.c == M.rank, "change_basis: rank");
  const RMat& B = L.B;
  Zel d = det(W, B);
  u32 v = W.val(d);
  require(v < W.n, "change_basis: basis degenerate at working precision");
  Zel ui = W.inv(W.div_pk(d, v));
  RMat adjB = mat_scale(W, ui, adjugate(W, B));  // B * adjB = p^v I
  auto conj = [&](const RMat& A, i64 twist) {
    RMat num = mat_mul(W, mat_mul(W, mat_frob(W, B, twist), A), adjB);
    require(mat_min_val(W, num) >= v, "change_basis: lattice not stable");
    return mat_div_pk(W, num, v);
  };
  DieuMod R;
  R.W = M.W;
  R.rank = M.rank;
  require(M.eff_prec() > v, "change_basis: precision exhausted");
  R.prec = M.eff_prec() - v;
  R.AF = conj(M.AF, 1);
  R.AV = conj(M.AV, -1);
  if (M.gram) {
    // gram' = p^{-2e} B G B^T
    RMat Gn = mat_mul(W, mat_mul(W, B, *M.gram), mat_transpose(B));
    i32 sh = 2 * L.e;
    if (sh >= 0) {
      require(mat_min_val(W, Gn) >= (u32)sh, "change_basis: pairing shift");
      R.gram = mat_div_pk(W, Gn, (u32)sh);
    } else {
      R.gram = mat_mul_pk(W, Gn, (u32)(-sh));
    }
  }
  return R;
}

inline u32 dieu_a_number(const DieuMod& M) {
  const FqCtx& F = *M.W->fq;
  FMat S(2 * M.rank, M.rank);
  FMat rf = mat_residue(*M.W, M.AF), rv = mat_residue(*M.W, M.AV);
  std::copy(rf.a.begin(), rf.a.end(), S.a.begin());
  std::copy(rv.a.begin(), rv.a.end(), S.a.begin() + rf.a.size());
  return M.rank - fmat_rank(F, S);
}

inline u32 dieu_p_rank(const DieuMod& M) {
  const FqCtx& F = *M.W->fq;
  // stable image of the semilinear F on M/pM
  FMat U(M.rank, M.rank);
  for (u32 i = 0; i < M.rank; ++i) U.at(i, i) = F.one();
  FMat rf = mat_residue(*M.W, M.AF);
  u32 dim = M.rank;
  for (u32 it = 0; it < M.rank + 1; ++it) {
    // rows of U span the current subspace; image = frob(rows) * A_F
    FMat nxt(dim, M.rank);
    for (u32 i = 0; i < dim; ++i)
      for (u32 j = 0; j < M.rank; ++j) {
        Fel acc = F.zero();
        for (u32 k = 0; k < M.rank; ++k)
          acc = F.add(acc, F.mul(F.frob(U.at(i, k)), rf.at(k, j)));
        nxt.at(i, j) = acc;
      }
    auto piv = fmat_rref(F, nxt);
    u32 nd = (u32)piv.size();
    FMat red(nd, M.rank);
    std::copy(nxt.a.begin(), nxt.a.begin() + (size_t)nd * M.rank,
              red.a.begin());
    if (nd == dim) return dim;
    U = std::move(red);
    dim = nd;
  }
  return dim;
}

// Newton slopes of F, normalized to [0,1] with multiplicity rank; computed
// from the p-adic Newton polygon of the characteristic polynomial of the
// linear operator F^m.  Throws if the polygon is not pinned down at the
// working precision.
inline std::vector<std::pair<u32, u32>> dieu_newton_slopes(const DieuMod& M) {
  const ZqCtx& W = *M.W;
  u32 m = W.m;
  // matrix of F^m in the row-vector convention: sigma^{m-1}(A_F) ... A_F
  RMat Pi = M.AF;
  for (u32 k = 1; k < m; ++k) Pi = mat_mul(W, mat_frob(W, M.AF, (i64)k), Pi);
  auto cp = charpoly(W, Pi);
  u32 d = M.rank;
  std::vector<u32> val(d + 1);
  for (u32 i = 0; i <= d; ++i) val[i] = W.val(cp[i]);
  // lower convex hull of (i, val[i]); points with val = n are unknown
  // (>= n) and must lie strictly above the hull for determinacy
  std::vector<std::pair<u32, u32>> slopes;  // (numerator, denominator=m per root)
  u32 i = 0;
  require(val[0] < W.n, "newton_slopes: det(F^m) vanishes at precision");
  while (i < d) {
    // next hull vertex: minimize slope (val[j]-val[i])/(j-i) over j > i
    u32 best = d;
    // compare fractions (val[j]-val[i])/(j-i) without floats
    i64 bn = (i64)val[d] - val[i], bd = (i64)d - i;
    for (u32 j = i + 1; j < d; ++j) {
      if (val[j] >= W.n) continue;
      i64 nn = (i64)val[j] - val[i], nd = (i64)j - i;
      if (nn * bd < bn * nd) {
        best = j;
        bn = nn;
        bd = nd;
      }
    }
    // determinacy: unknown coefficients must lie strictly above the segment
    for (u32 j = i + 1; j < best; ++j)
      if (val[j] >= W.n)
        require((i64)W.n * bd > (i64)val[i] * bd + bn * ((i64)j - i),
                "newton_slopes: precision insufficient for the polygon");
    // the segment contributes (best - i) roots of valuation -bn/bd; the
    // slope of F per root is that valuation divided by m
    require(bn <= 0, "newton_slopes: polygon not monotone");
    for (u32 k = 0; k < best - i; ++k)
      slopes.emplace_back((u32)(-bn), (u32)bd * m);
    i = best;
  }
  // reduce fractions and sort
  for (auto& s : slopes) {
    u32 g = std::gcd(s.first, s.second);
    if (g) {
      s.first /= g;
      s.second /= g;
    }
  }
  std::sort(slopes.begin(), slopes.end(), [](auto a, auto b) {
    return (u64)a.first * b.second < (u64)b.first * a.second;
  });
  return slopes;
}

// skeleton span: the W(F_q)-lattice generated by {x in M : F^2 x = p x},
// solved as a sigma^2-semilinear kernel with high-valuation junk rows
// discarded.  Full rank (= rank M) certifies supersingularity.
inline Lat dieu_skeleton_span(const DieuMod& M) {
  const ZqCtx& W = *M.W;
  // the structure matrices are only exact modulo p^prec, so the kernel has
  // to be taken at that precision; solutions of the congruence split into
  // the true skeleton (pivot valuations bounded by the colength of S_0 in
  // M) and junk of valuation near prec, separated at prec/2
  u32 pr = M.eff_prec();
  auto Wp = ZqCtx::get(W.p, W.m, pr);
  auto W1 = ZqCtx::get(W.p, 1, pr);
  RMat C = mat_mul(W, mat_frob(W, M.AF, 1), M.AF);  // F^2: x -> sigma^2(x) C
  RMat Cp(M.rank, M.rank);
  for (size_t i = 0; i < C.a.size(); ++i) Cp.a[i] = W.to_precision(*Wp, C.a[i]);
  RMat big =
      mat_sub(*W1, restrict_scalars(*Wp, *W1, Cp, 2),
              restrict_scalars(*Wp, *W1,
                               mat_mul_pk(*Wp, mat_identity(*Wp, M.rank), 1),
                               0));
  RMat K = left_kernel(*W1, big);
  RMat rows(K.r, M.rank);
  for (u32 i = 0; i < K.r; ++i) {
    std::vector<Zel> kr(K.a.begin() + (size_t)i * K.c,
                        K.a.begin() + (size_t)(i + 1) * K.c);
    auto xv = unrestrict_vector(*Wp, kr, M.rank);
    for (u32 j = 0; j < M.rank; ++j) rows.at(i, j) = xv[j];
  }
  Howell h = howell_form(*Wp, rows);
  u32 tau = pr / 2;
  std::vector<u32> keep;
  for (u32 i = 0; i < h.H.r; ++i)
    if (h.piv_val[i] <= tau) keep.push_back(i);
  // lift to the full ring; in the full-rank (supersingular) case the
  // skeleton span contains p^tau M, so adding those rows absorbs the
  // val >= tau uncertainty and the lattice is exact.  In lower rank the
  // absorbers would fake full rank, so the raw span is returned.
  bool full = keep.size() == M.rank;
  u32 extra = full ? M.rank : 0;
  RMat S((u32)keep.size() + extra, M.rank);
  for (u32 i = 0; i < (u32)keep.size(); ++i)
    for (u32 j = 0; j < M.rank; ++j)
      S.at(i, j) = Wp->to_precision(W, h.H.at(keep[i], j));
  for (u32 i = 0; i < extra; ++i)
    S.at((u32)keep.size() + i, i) = W.mul_pk(W.one(), tau);
  return lat_from_rows(W, S, 0);
}

inline bool dieu_is_superspecial(const DieuMod& M) {
  Lat std = dieu_std(M);
  return lat_eq(*M.W, dieu_FL(M, std), dieu_VL(M, std));
}
inline bool dieu_is_supersingular(const DieuMod& M) {
  return lat_rank(dieu_skeleton_span(M)) == M.rank;
}

// largest superspecial submodule S_0(M)
struct FlaggedLat {
  Lat L;
  bool supersingular = true;
};
inline FlaggedLat dieu_s0_lower(const DieuMod& M) {
  Lat S = dieu_skeleton_span(M);
  return {S, lat_rank(S) == M.rank};
}

// smallest superspecial overmodule S^0(M) = p^{-(g-1)} V^{g-1}
// (sum over i+j = g-1 of F^i V^j M)
inline FlaggedLat dieu_s0_upper(const DieuMod& M) {
  const ZqCtx& W = *M.W;
  u32 g = M.g();
  Lat std = dieu_std(M);
  Lat acc = dieu_FL(M, std);  // placeholder; rebuilt below
  bool first = true;
  for (u32 i = 0; i + 1 <= g; ++i) {
    u32 j = g - 1 - i;
    Lat T = std;
    for (u32 k = 0; k < i; ++k) T = dieu_FL(M, T);
    for (u32 k = 0; k < j; ++k) T = dieu_VL(M, T);
    acc = first ? T : lat_sum(W, acc, T);
    first = false;
  }
  for (u32 k = 0; k + 1 < g; ++k) acc = dieu_VL(M, acc);
  Lat res = lat_scale_pk(W, acc, -(i32)(g - 1));
  return {res, dieu_is_supersingular(M)};
}

// s-profile: s_i = dim_k (M cap F^i S^0 / M cap F^{i+1} S^0), reported
// until it stabilizes at g
inline std::vector<u32> dieu_s_profile(const DieuMod& M, u32 terms) {
  const ZqCtx& W = *M.W;
  Lat std = dieu_std(M);
  Lat FS = dieu_s0_upper(M).L;
  std::vector<u32> s;
  Lat cur = lat_intersect(W, std, FS);
  for (u32 i = 0; i < terms; ++i) {
    FS = dieu_FL(M, FS);
    Lat nxt = lat_intersect(W, std, FS);
    s.push_back(lat_colength(W, cur, nxt));
    cur = nxt;
  }
  return s;
}

// Generator search for a superspecial module N of rank 2g: find x whose
// images F^{g-1-j} V^j x, j = 0..g-1, descend to a basis of
// F^{g-1}N / F^g N.  Randomized with a hard budget.
inline std::optional<std::vector<Zel>> dieu_find_s0_generator(
    const DieuMod& N, Rng& rng, u32 budget = 1000) {
  const ZqCtx& W = *N.W;
  u32 g = N.g();
  Lat std = dieu_std(N);
  Lat Fg1 = std;
  for (u32 k = 0; k + 1 < g; ++k) Fg1 = dieu_FL(N, Fg1);
  Lat Fg = dieu_FL(N, Fg1);
  for (u32 trial = 0; trial < budget; ++trial) {
    std::vector<Zel> x(N.rank);
    for (auto& z : x) z = W.random(rng);
    RMat rows(g, N.rank);
    // row j holds F^{g-1-j} V^j x
    for (u32 j = 0; j < g; ++j) {
      std::vector<Zel> t = x;
      for (u32 k = 0; k < j; ++k) t = dieu_V(N, t);
      for (u32 k = 0; k + 1 + j < g; ++k) t = dieu_F(N, t);
      for (u32 c = 0; c < N.rank; ++c) rows.at(j, c) = t[c];
    }
    Lat cand = lat_sum(W, Fg, lat_from_rows(W, rows, 0));
    if (lat_eq(W, cand, Fg1)) return x;
  }
  return std::nullopt;
}

// The basic isoclinic cyclic module of slope b/(a+b) on basis e_0..e_{h-1}
// (h = a+b): F e_i = p^{e_i} e_{i+1 mod h} with exactly b of the exponents
// equal to 1 (the first b steps), V = p F^{-1}.  No pairing.
inline DieuMod dieu_cyclic(ZqPtr W, u32 a, u32 b) {
  u32 h = a + b;
  require(h >= 1, "dieu_cyclic: empty");
  DieuMod M;
  M.W = W;
  M.rank = h;
  M.AF = RMat(h, h);
  M.AV = RMat(h, h);
  for (u32 i = 0; i < h; ++i) {
    u32 j = (i + 1) % h;
    u32 eps = i < b ? 1 : 0;
    M.AF.at(i, j) = eps ? W->from_int((i64)W->p) : W->one();
    M.AV.at(j, i) = eps ? W->one() : W->from_int((i64)W->p);
  }
  return M;
}

inline DieuMod dieu_direct_sum(const DieuMod& A, const DieuMod& B) {
  require(A.W == B.W, "direct_sum: mismatched rings");
  const ZqCtx& W = *A.W;
  DieuMod M;
  M.W = A.W;
  M.rank = A.rank + B.rank;
  M.AF = RMat(M.rank, M.rank);
  M.AV = RMat(M.rank, M.rank);
  auto place = [&](RMat& dst, const RMat& a, const RMat& b) {
    for (u32 i = 0; i < a.r; ++i)
      for (u32 j = 0; j < a.c; ++j) dst.at(i, j) = a.at(i, j);
    for (u32 i = 0; i < b.r; ++i)
      for (u32 j = 0; j < b.c; ++j) dst.at(A.rank + i, A.rank + j) = b.at(i, j);
  };
  place(M.AF, A.AF, B.AF);
  place(M.AV, A.AV, B.AV);
  if (A.gram && B.gram) {
    RMat G(M.rank, M.rank);
    place(G, *A.gram, *B.gram);
    M.gram = G;
  }
  (void)W;
  return M;
}

}  // namespace dieulat
