#pragma once
// Rank-8 classification layer on top of the pairing algebra:
//   * elementary-divisor profiles of self-dual supersingular modules,
//   * enumeration of self-dual superspecial neighbors Q,
//   * rejection samplers for hypothesized modules,
//   * the combination classifier for non-supersingular perfect modules,
//   * the exhaustive rank-2 census by quaternion orbit reduction.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pairing.hpp"

namespace dieulat {

using Profile = std::array<u32, 4>;

inline bool mat_symmetric(const ZqCtx& W, const RMat& G) {
  (void)W;
  for (u32 i = 0; i < G.r; ++i)
    for (u32 j = i + 1; j < G.c; ++j)
      if (!(G.at(i, j) == G.at(j, i))) return false;
  return true;
}

// exact division x / y in W (y may be a non-unit; x must be divisible)
inline Zel zdiv_exact(const ZqCtx& W, const Zel& x, const Zel& y) {
  u32 vy = W.val(y);
  require(vy < W.n, "zdiv_exact: division by zero");
  if (W.is_zero(x)) return W.zero();
  require(W.val(x) >= vy, "zdiv_exact: not divisible");
  return W.div(W.div_pk(x, vy), W.div_pk(y, vy));
}

// ---------------------------------------------------------------------------
// elementary-divisor profile of a perfect self-dual supersingular module:
// with N = S^0(M) and N^t its phi-dual, the colengths
//   D_j = length(N / (N^t + F^j N))
// satisfy D_j - D_{j-1} = #{i : r_i >= j} for the exponents r_i in
// N^t = (+) F^{r_i} N_i.  Returns the r_i sorted ascending (k = rank/2 of
// them, one per rank-2 factor).
// ---------------------------------------------------------------------------
inline std::vector<u32> ss_elementary_profile(const DieuMod& M,
                                              i32 shift = 0) {
  const ZqCtx& W = *M.W;
  require(M.rank % 2 == 0, "profile: odd rank");
  require(M.gram.has_value(), "profile: no pairing");
  require(mat_symmetric(W, *M.gram), "profile: pairing not symmetric");
  require(dieu_is_perfect(M, shift), "profile: pairing not perfect");
  u32 k = M.rank / 2;
  FlaggedLat up = dieu_s0_upper(M);
  require(up.supersingular, "profile: module is not supersingular");
  Lat N = up.L;
  Lat Nt = dieu_phi_dual(M, shift, N);
  require(lat_contains(W, N, Nt), "profile: dual hull not nested");
  u32 total = lat_colength(W, N, Nt);
  std::vector<u32> cnt;  // cnt[j-1] = #{i : r_i >= j}
  Lat FjN = N;
  u32 prev = 0;
  for (u32 j = 1; prev < total; ++j) {
    require(j <= total + 1, "profile: divisor chain does not terminate");
    FjN = dieu_FL(M, FjN);
    u32 Dj = lat_colength(W, N, lat_sum(W, Nt, FjN));
    require(Dj >= prev, "profile: colengths not monotone");
    u32 c = Dj - prev;
    require(c <= k, "profile: more divisors than factors");
    require(cnt.empty() || c <= cnt.back(), "profile: counts not monotone");
    require(c > 0 || Dj == total, "profile: chain stalled");
    if (c == 0) break;
    cnt.push_back(c);
    prev = Dj;
  }
  require(prev == total, "profile: divisors do not exhaust the colength");
  std::vector<u32> r(k, 0);
  for (u32 j = 0; j < cnt.size(); ++j)
    for (u32 i = 0; i < cnt[j]; ++i) ++r[i];
  std::sort(r.begin(), r.end());
  return r;
}

inline void rank8_require_hypotheses(const DieuMod& M, i32 shift = 0) {
  require(M.rank == 8, "rank8: wrong rank");
  require(M.gram.has_value(), "rank8: no pairing");
  require(dieu_check(M, true), "rank8: operator axioms fail");
  require(mat_symmetric(*M.W, *M.gram), "rank8: pairing not symmetric");
  require(dieu_is_perfect(M, shift), "rank8: pairing not perfect");
  require(dieu_is_supersingular(M), "rank8: not supersingular");
  CrisDisc c = crisdisc(M, shift);
  require(c.p_parity == 0 && c.unit_class == 0, "rank8: crisdisc is not 1");
}

inline Profile rank8_profile(const DieuMod& M, i32 shift = 0) {
  rank8_require_hypotheses(M, shift);
  auto r = ss_elementary_profile(M, shift);
  return Profile{r[0], r[1], r[2], r[3]};
}

inline bool rank8_profile_allowed(const Profile& r) {
  static const Profile ok[4] = {
      {0, 0, 0, 0}, {1, 1, 1, 1}, {0, 2, 2, 2}, {2, 2, 2, 2}};
  for (auto& a : ok)
    if (a == r) return true;
  return false;
}

// ---------------------------------------------------------------------------
// superspecial self-dual neighbors: all Q with FQ = VQ <= Q, Q^t = Q,
// FM <= Q and dim(M/McapQ) = dim(Q/McapQ) = 1.  Search space: the
// intersection L = M cap Q is a colength-1 sublattice of M containing
// FM + pM (FL <= FM cap FQ <= L and pQ <= L force this), hence a
// hyperplane of M/(FM+pM); moreover L must itself be F- and V-stable,
// which prunes the hyperplane functionals by two semilinear
// proportionality conditions.  Q then ranges over the q+1 index-p
// overlattices of L inside the phi-dual L^t (of colength 2 over L).
// ---------------------------------------------------------------------------
inline std::vector<Lat> rank8_find_q(const DieuMod& M, i32 shift = 0,
                                     u64 cap = 500000,
                                     u64 max_results = ~(u64)0) {
  rank8_require_hypotheses(M, shift);
  const ZqCtx& W = *M.W;
  const FqCtx& F = *W.fq;
  const u32 rk = M.rank;
  Lat Mstd = dieu_std(M);
  Lat FM = dieu_FL(M, Mstd);
  Lat FMpM = lat_sum(W, FM, lat_scale_pk(W, Mstd, 1));

  // functionals on M/pM vanishing on FM + pM
  FMat K = fmat_right_kernel(F, mat_residue(W, FMpM.B));
  require(K.r == 4, "find_q: unexpected corank of FM + pM");
  FMat AFr = mat_residue(W, M.AF), AVr = mat_residue(W, M.AV);

  auto proportional = [&](const std::vector<Fel>& u,
                          const std::vector<Fel>& v) {
    // u = lambda v for some lambda (v != 0 guaranteed by the caller)
    u32 i0 = rk;
    for (u32 i = 0; i < rk; ++i)
      if (!(v[i] == F.zero())) {
        i0 = i;
        break;
      }
    require(i0 < rk, "find_q: zero comparison vector");
    Fel lam = F.mul(u[i0], F.inv(v[i0]));
    for (u32 i = 0; i < rk; ++i)
      if (!(u[i] == F.mul(lam, v[i]))) return false;
    return true;
  };

  std::vector<Lat> result;
  // Admissible functionals c = gamma K satisfy  A_F c = l sigma(c)  and
  // A_V c = u sigma^{-1}(c)  (residues) for some scalars l, u.  Rescaling
  // c by beta multiplies l by beta^{1-p}; the values beta^{1-p} form the
  // index-(p-1) power subgroup of F_q^*, so l can be normalized into
  // {0, g^0, ..., g^{p-2}} for a generator g, and the residual freedom
  // (beta in F_p^*) fixes u.  For each representative pair (l, u) both
  // conditions are F_p-linear in gamma, so the whole projective scan
  // collapses to (p)^2 kernel computations over F_p in 4m variables.
  u64 q = F.q();
  const u32 p = W.p, md = W.m;
  std::vector<Fel> reps = {F.zero()};
  {
    Fel g = F.one();
    for (u32 k = 0; k + 1 < p; ++k) {
      reps.push_back(g);
      g = F.mul(g, F.gen());
    }
  }
  std::vector<std::vector<Fel>> cands;
  auto add_cand = [&](const std::vector<Fel>& c) {
    for (auto& o : cands)
      if (proportional(c, o)) return;
    cands.push_back(c);
  };
  const u32 nv = 4 * md;       // F_p coordinates of gamma
  const u32 ne = 2 * rk * md;  // F_p equations (two rk-vector conditions)
  for (auto& lrep : reps) {
    for (auto& urep : reps) {
      // the (0,0) class is untwisted and potentially huge; it is
      // streamed separately after the twisted candidates
      if (F.is_zero(lrep) && F.is_zero(urep)) continue;
      // column for gamma-basis-vector (i4, a): gamma_{i4} = g^a
      std::vector<std::vector<u32>> A(ne, std::vector<u32>(nv, 0));
      for (u32 i4 = 0; i4 < 4; ++i4) {
        for (u32 a = 0; a < md; ++a) {
          Fel ga;
          ga.c[a] = 1;
          std::vector<Fel> c(rk);
          for (u32 j = 0; j < rk; ++j) c[j] = F.mul(ga, K.at(i4, j));
          for (u32 i = 0; i < rk; ++i) {
            Fel s1 = F.zero(), s2 = F.zero();
            for (u32 j = 0; j < rk; ++j) {
              s1 = F.add(s1, F.mul(AFr.at(i, j), c[j]));
              s2 = F.add(s2, F.mul(AVr.at(i, j), c[j]));
            }
            Fel w1 = F.sub(s1, F.mul(lrep, F.frob(c[i])));
            Fel w2 = F.sub(s2, F.mul(urep, F.frob_k(c[i], -1)));
            for (u32 b = 0; b < md; ++b) {
              A[(size_t)i * md + b][i4 * md + a] = w1.c[b];
              A[(size_t)(rk + i) * md + b][i4 * md + a] = w2.c[b];
            }
          }
        }
      }
      // kernel of A over F_p (Gaussian elimination)
      std::vector<u32> pivot_of_col(nv, ne);
      u32 row = 0;
      for (u32 col = 0; col < nv && row < ne; ++col) {
        u32 pr = ne;
        for (u32 r = row; r < ne; ++r)
          if (A[r][col] % p) {
            pr = r;
            break;
          }
        if (pr == ne) continue;
        std::swap(A[row], A[pr]);
        u32 inv = 1;
        while ((inv * A[row][col]) % p != 1) ++inv;
        for (u32 j = col; j < nv; ++j) A[row][j] = A[row][j] * inv % p;
        for (u32 r = 0; r < ne; ++r) {
          if (r == row || A[r][col] % p == 0) continue;
          u32 f = A[r][col] % p;
          for (u32 j = col; j < nv; ++j)
            A[r][j] = (A[r][j] + (p - f) * A[row][j]) % p;
        }
        pivot_of_col[col] = row;
        ++row;
      }
      std::vector<u32> freecols;
      for (u32 col = 0; col < nv; ++col)
        if (pivot_of_col[col] == ne) freecols.push_back(col);
      u32 d = (u32)freecols.size();
      require(d <= 10, "find_q: functional kernel too large");
      // enumerate all nonzero F_p-combinations of the kernel basis
      u64 total = 1;
      for (u32 i = 0; i < d; ++i) total *= p;
      for (u64 code = 1; code < total; ++code) {
        std::vector<u32> x(nv, 0);
        u64 cc = code;
        for (u32 i = 0; i < d; ++i) {
          x[freecols[i]] = (u32)(cc % p);
          cc /= p;
        }
        for (u32 col = 0; col < nv; ++col) {
          if (pivot_of_col[col] == ne) continue;
          u32 r = pivot_of_col[col];
          u32 s = 0;
          for (u32 i = 0; i < d; ++i)
            s = (s + A[r][freecols[i]] * x[freecols[i]]) % p;
          x[col] = (p - s) % p;
        }
        std::vector<Fel> c(rk, F.zero());
        for (u32 i4 = 0; i4 < 4; ++i4) {
          Fel gi;
          for (u32 a = 0; a < md; ++a) gi.c[a] = x[i4 * md + a];
          for (u32 j = 0; j < rk; ++j)
            c[j] = F.add(c[j], F.mul(gi, K.at(i4, j)));
        }
        bool zero = true;
        for (u32 j = 0; j < rk; ++j)
          if (!(c[j] == F.zero())) zero = false;
        if (zero) continue;
        add_cand(c);
      }
    }
  }
  // full neighbor pipeline for one candidate functional; returns true
  // once `max_results` lattices have been collected
  auto process = [&](const std::vector<Fel>& c) -> bool {
    {
      // defensive recheck of both stability conditions
      std::vector<Fel> u1(rk), v1(rk), u2(rk), v2(rk);
      for (u32 i = 0; i < rk; ++i) {
        Fel s1 = F.zero(), s2 = F.zero();
        for (u32 j = 0; j < rk; ++j) {
          s1 = F.add(s1, F.mul(AFr.at(i, j), c[j]));
          s2 = F.add(s2, F.mul(AVr.at(i, j), c[j]));
        }
        u1[i] = s1;
        u2[i] = s2;
        v1[i] = F.frob(c[i]);
        v2[i] = F.frob_k(c[i], -1);
      }
      if (!proportional(u1, v1) || !proportional(u2, v2)) return false;
    }
    {
      // L = {x in M : c(x mod p) = 0}
      FMat crow(1, rk);
      for (u32 j = 0; j < rk; ++j) crow.at(0, j) = c[j];
      FMat kerc = fmat_right_kernel(F, crow);
      RMat rows(kerc.r + rk, rk);
      for (u32 i = 0; i < kerc.r; ++i)
        for (u32 j = 0; j < rk; ++j)
          rows.at(i, j) = W.lift_residue(kerc.at(i, j));
      for (u32 i = 0; i < rk; ++i)
        rows.at(kerc.r + i, i) = W.from_int((i64)W.p);
      Lat L = lat_from_rows(W, rows);
      require(lat_colength(W, Mstd, L) == 1, "find_q: hyperplane colength");
      Lat Lt = dieu_phi_dual(M, shift, L);
      require(lat_colength(W, Lt, L) == 2, "find_q: dual gap is not 2");

      // two generators of L^t / L
      std::vector<std::vector<Zel>> w;
      Lat acc = L;
      for (u32 i = 0; i < Lt.B.r && w.size() < 2; ++i) {
        RMat row(1, rk);
        for (u32 j = 0; j < rk; ++j) row.at(0, j) = Lt.B.at(i, j);
        Lat rl = lat_normalize(W, Lt.e, row);
        if (lat_contains(W, acc, rl)) continue;
        std::vector<Zel> v(rk);
        for (u32 j = 0; j < rk; ++j) v[j] = Lt.B.at(i, j);
        w.push_back(v);
        acc = lat_sum(W, acc, rl);
      }
      require(w.size() == 2, "find_q: quotient generators not found");

      // necessary isotropy of the new vector: phi(x, x) must be integral
      // for x = p^{-Lt.e} v, i.e. val(v G v^T) >= shift + 2 Lt.e; this is
      // a quadratic in the scan scalar and prunes almost every idx cheaply
      auto gpair = [&](const std::vector<Zel>& x, const std::vector<Zel>& y) {
        Zel acc = W.zero();
        for (u32 i = 0; i < rk; ++i)
          for (u32 j = 0; j < rk; ++j)
            acc = W.add(acc, W.mul(x[i], W.mul(M.gram->at(i, j), y[j])));
        return acc;
      };
      Zel g00 = gpair(w[0], w[0]), g11 = gpair(w[1], w[1]);
      Zel g01 = W.add(gpair(w[0], w[1]), gpair(w[1], w[0]));
      u32 need = (u32)std::min<i64>(shift + 2 * (i64)Lt.e, (i64)W.n);
      for (u64 idx = 0; idx <= q; ++idx) {
        std::vector<Zel> v(rk);
        if (idx == q) {
          if (W.val(g11) < need) continue;
          v = w[1];
        } else {
          Zel lm = W.lift_residue(F.from_index(idx));
          Zel gv = W.add(g00, W.add(W.mul(lm, g01), W.mul(W.mul(lm, lm), g11)));
          if (W.val(gv) < need) continue;
          for (u32 j = 0; j < rk; ++j) v[j] = W.add(w[0][j], W.mul(lm, w[1][j]));
        }
        RMat row(1, rk);
        for (u32 j = 0; j < rk; ++j) row.at(0, j) = v[j];
        Lat Q = lat_sum(W, L, lat_normalize(W, Lt.e, row));
        if (lat_colength(W, Q, L) != 1) continue;
        Lat FQ = dieu_FL(M, Q), VQ = dieu_VL(M, Q);
        if (!lat_contains(W, Q, FQ)) continue;
        if (!lat_eq(W, FQ, VQ)) continue;
        if (!lat_eq(W, dieu_phi_dual(M, shift, Q), Q)) continue;
        if (!lat_contains(W, Q, FM)) continue;
        Lat I = lat_intersect(W, Mstd, Q);
        if (lat_colength(W, Mstd, I) != 1 || lat_colength(W, Q, I) != 1)
          continue;
        bool dup = false;
        for (auto& known : result)
          if (lat_eq(W, known, Q)) {
            dup = true;
            break;
          }
        if (!dup) {
          result.push_back(Q);
          if ((u64)result.size() >= max_results) return true;
        }
      }
    }
    return false;
  };

  for (auto& c : cands)
    if (process(c)) return result;

  // the (0,0) class: functionals killing the residues of FM + VM + pM
  // form an F_q-subspace, enumerated projectively and streamed through
  // the pipeline; `cap` bounds the number of candidates examined
  FMat C(2 * rk, 4);
  for (u32 i4 = 0; i4 < 4; ++i4) {
    for (u32 i = 0; i < rk; ++i) {
      Fel s1 = F.zero(), s2 = F.zero();
      for (u32 j = 0; j < rk; ++j) {
        s1 = F.add(s1, F.mul(AFr.at(i, j), K.at(i4, j)));
        s2 = F.add(s2, F.mul(AVr.at(i, j), K.at(i4, j)));
      }
      C.at(i, i4) = s1;
      C.at(rk + i, i4) = s2;
    }
  }
  FMat kern = fmat_right_kernel(F, C);
  u32 s = kern.r;
  u64 npts = 0, pw = 1;
  for (u32 i = 0; i < s; ++i) {
    npts += pw;
    pw *= q;
  }
  bool exhaustive = max_results == ~(u64)0;
  require(!exhaustive || npts <= cap,
          "find_q: search-space overflow (raise the cap)");
  u64 examined = 0;
  for (u32 lead = 0; lead < s; ++lead) {
    u64 span = 1;
    for (u32 i = lead + 1; i < s; ++i) span *= q;
    for (u64 code = 0; code < span; ++code) {
      require(examined++ < cap,
              "find_q: search-space overflow (raise the cap)");
      std::vector<Fel> gam(s, F.zero());
      gam[lead] = F.one();
      u64 cc = code;
      for (u32 i = lead + 1; i < s; ++i) {
        gam[i] = F.from_index(cc % q);
        cc /= q;
      }
      std::vector<Fel> c(rk, F.zero());
      for (u32 j = 0; j < rk; ++j) {
        Fel v = F.zero();
        for (u32 i = 0; i < s; ++i)
          for (u32 i4 = 0; i4 < 4; ++i4)
            v = F.add(v, F.mul(F.mul(gam[i], kern.at(i, i4)), K.at(i4, j)));
        c[j] = v;
      }
      if (process(c)) return result;
    }
  }
  return result;
}

// closed form valid in profiles (0,2,2,2) and (2,2,2,2):
// Q = S_0-dual + F S^0 = N^t + F N  (equals F N when N^t = pN)
inline Lat rank8_q_closed_form(const DieuMod& M, i32 shift = 0) {
  const ZqCtx& W = *M.W;
  Lat N = dieu_s0_upper(M).L;
  return lat_sum(W, dieu_phi_dual(M, shift, N), dieu_FL(M, N));
}

// ---------------------------------------------------------------------------
// samplers: random perfect self-dual modules squeezed between a standard
// superspecial module N and its phi-dual (rejection on self-duality)
// ---------------------------------------------------------------------------
enum class SSShape { s0000, s0222, s2222, s1111, smixed };

// standard hull genus per shape: the hull N = S^0(M) of a module with
// exponents r_i carries true factor exponents -r_i/2 (kind 1) resp.
// -(r_i+1)/2 (kind 2); `shift` makes the stored Gram integral
// (true form = p^{-shift} gram)
struct ShapeGenus {
  std::vector<FactorSpec> specs;
  i32 shift = 0;
};
inline ShapeGenus rank8_shape_specs(SSShape s) {
  switch (s) {
    case SSShape::s0000:
      return {{{1, 0, false}, {1, 0, false}, {1, 0, false}, {1, 0, false}}, 0};
    case SSShape::s0222:
      return {{{1, 1, false}, {1, 0, false}, {1, 0, false}, {1, 0, false}}, 1};
    case SSShape::s2222:
      return {{{1, 0, false}, {1, 0, false}, {1, 0, false}, {1, 0, false}}, 1};
    case SSShape::s1111:
      return {{{2, 0, false}, {2, 0, false}, {2, 0, true}, {2, 0, true}}, 1};
    case SSShape::smixed:
      return {{{2, 0, false}, {2, 0, false}, {1, 0, false}, {1, 0, false}}, 1};
  }
  require(false, "shape_specs: bad shape");
  return {};
}

inline DieuMod dieu_truncate(const DieuMod& M, u32 nnew) {
  const ZqCtx& W = *M.W;
  require(nnew <= W.n, "truncate: cannot raise precision");
  require(M.eff_prec() >= nnew, "truncate: module not known to that depth");
  ZqPtr Wn = ZqCtx::get(W.p, W.m, nnew);
  DieuMod R;
  R.W = Wn;
  R.rank = M.rank;
  R.AF = mat_to_precision(*Wn, W, M.AF);
  R.AV = mat_to_precision(*Wn, W, M.AV);
  if (M.gram) R.gram = mat_to_precision(*Wn, W, *M.gram);
  R.prec = 0;
  return R;
}

// integrality of the p^{-shift}-scaled pairing on a lattice:
// phi(L, L) <= W, i.e. min val of B G B^T is at least 2e + shift
inline bool lat_pair_integral(const DieuMod& N, i32 shift, const Lat& L) {
  const ZqCtx& W = *N.W;
  RMat G = mat_mul(W, mat_mul(W, L.B, *N.gram), mat_transpose(L.B));
  i32 need = 2 * L.e + shift;
  if (need <= 0) return true;
  return (i32)mat_min_val(W, G) >= need;
}

// preimage lattices: F^{-1}(L) = sigma^{-1}(L A_F^{-1}) and
// V^{-1}(L) = sigma(L A_V^{-1}); the inverses come from
// sigma(A_V) A_F = pI, so both raise the denominator exponent by one
inline Lat dieu_F_preimage(const DieuMod& N, const Lat& L) {
  const ZqCtx& W = *N.W;
  return lat_normalize(W, L.e + 1, mat_mul(W, mat_frob(W, L.B, -1), N.AV));
}
inline Lat dieu_V_preimage(const DieuMod& N, const Lat& L) {
  const ZqCtx& W = *N.W;
  return lat_normalize(W, L.e + 1, mat_mul(W, mat_frob(W, L.B, 1), N.AF));
}

// one attempt at a self-dual F,V-stable lattice between the phi-dual
// N^t of the standard lattice and the standard lattice itself.  Grow
// from N^t by length-1 steps: a step vector is drawn from
// F^{-1}(M) /\ V^{-1}(M) /\ std0, so stability is automatic, and is
// kept only if the pairing stays integral.  F and V are nilpotent on
// M/N^t, so every self-dual intermediate is reachable by such chains.
// Once the volume midpoint is reached, integrality (M <= M^t) plus
// equal volumes forces M = M^t.
inline std::optional<Lat> selfdual_intermediate_try(const DieuMod& N, i32 shift,
                                                    Rng& rng) {
  const ZqCtx& W = *N.W;
  Lat std0 = dieu_std(N);
  Lat Nt = dieu_phi_dual(N, shift, std0);
  require(lat_contains(W, std0, Nt), "sampler: standard dual not integral");
  i32 volNt = lat_vol(W, Nt);
  if (volNt % 2 != 0) return std::nullopt;  // no self-dual midpoint
  i32 target = volNt / 2;
  Lat M = Nt;
  // deep opening move (half the tries): adjoin the F,V-closure of one
  // vector whose pairing conditions are solved, not rejection-sampled.
  // Plain length-1 steps stay inside the kernel span of the reductions
  // of F and V, which is rational over small fields and hence only
  // reaches modules equal to their superspecial hull; a deep vector is
  // what reaches the other profiles.  The two residue conditions
  // phi(b,b) = 0 and phi(b,Fb) = 0 are solved by scanning lines: the
  // value along b = a0 + [l]a1 is a polynomial of degree p+1 in the
  // Teichmueller scalar l.
  if (shift == 1 && rng.below(2) == 0) {
    const FqCtx& F = *W.fq;
    u64 q = F.q();
    auto g2 = [&](const RMat& x, const RMat& y) {
      Zel s = W.zero();
      for (u32 i = 0; i < N.rank; ++i)
        for (u32 j = 0; j < N.rank; ++j)
          s = W.add(s, W.mul(x.at(0, i), W.mul(N.gram->at(i, j), y.at(0, j))));
      return s;
    };
    auto apF = [&](const RMat& x) { return mat_mul(W, mat_frob(W, x, 1), N.AF); };
    Lat pstd = lat_normalize(W, 0, mat_mul_pk(W, mat_identity(W, N.rank), 1));
    Lat kerFV = lat_intersect(
        W, std0,
        lat_intersect(W, dieu_F_preimage(N, pstd), dieu_V_preimage(N, pstd)));
    bool jumped = false;
    for (u32 outer = 0; outer < 30 && !jumped; ++outer) {
      RMat a0 = mat_random(W, 1, N.rank, rng);
      RMat a1 = mat_random(W, 1, N.rank, rng);
      RMat fa0 = apF(a0), fa1 = apF(a1);
      Fel c00 = W.residue(g2(a0, fa0)), c01 = W.residue(g2(a0, fa1));
      Fel c10 = W.residue(g2(a1, fa0)), c11 = W.residue(g2(a1, fa1));
      for (u64 il = 0; il < q && !jumped; ++il) {
        Fel l = F.from_index(il);
        Fel lp = F.pow(l, W.p);
        Fel r = F.add(F.add(c00, F.mul(lp, c01)),
                      F.mul(l, F.add(c10, F.mul(lp, c11))));
        if (!F.is_zero(r)) continue;
        RMat a(1, N.rank);
        Zel tl = W.teichmuller(l);
        for (u32 j = 0; j < N.rank; ++j)
          a.at(0, j) = W.add(a0.at(0, j), W.mul(tl, a1.at(0, j)));
        RMat fa = apF(a);
        for (u32 dtry = 0; dtry < 4 && !jumped; ++dtry) {
          RMat d = mat_mul(W, mat_random(W, 1, kerFV.B.r, rng), kerFV.B);
          RMat fd = apF(d);
          Fel e0 = W.residue(g2(a, a));
          Fel e1 = W.residue(W.add(g2(a, d), g2(d, a)));
          Fel e2 = W.residue(g2(d, d));
          Fel h0 = W.residue(g2(a, fa)), h1 = W.residue(g2(a, fd));
          Fel h2 = W.residue(g2(d, fa)), h3 = W.residue(g2(d, fd));
          for (u64 iu = 0; iu < q && !jumped; ++iu) {
            Fel u = F.from_index(iu);
            Fel up = F.pow(u, W.p);
            Fel r1 = F.add(e0, F.mul(u, F.add(e1, F.mul(u, e2))));
            Fel r2 = F.add(F.add(h0, F.mul(up, h1)),
                           F.mul(u, F.add(h2, F.mul(up, h3))));
            if (!F.is_zero(r1) || !F.is_zero(r2)) continue;
            RMat b(1, N.rank);
            Zel tu = W.teichmuller(u);
            for (u32 j = 0; j < N.rank; ++j)
              b.at(0, j) = W.add(a.at(0, j), W.mul(tu, d.at(0, j)));
            Lat cand = lat_sum(W, M, lat_normalize(W, 0, b));
            for (;;) {
              Lat nxt = lat_sum(
                  W, cand, lat_sum(W, dieu_FL(N, cand), dieu_VL(N, cand)));
              if (lat_eq(W, nxt, cand)) break;
              cand = nxt;
            }
            i32 v = lat_vol(W, cand);
            if (v < target || v == lat_vol(W, M)) continue;
            if (!lat_pair_integral(N, shift, cand)) continue;
            M = cand;
            jumped = true;
          }
        }
      }
    }
  }
  while (lat_vol(W, M) > target) {
    // a step vector must keep M stable (preimage conditions) and pair
    // integrally with all of M (phi-dual condition); only the isotropy
    // of the vector itself is left to rejection
    Lat steps = lat_intersect(
        W, lat_intersect(W, std0, dieu_phi_dual(N, shift, M)),
        lat_intersect(W, dieu_F_preimage(N, M), dieu_V_preimage(N, M)));
    bool advanced = false;
    for (u32 attempt = 0; attempt < 400 && !advanced; ++attempt) {
      RMat row = mat_mul(W, mat_random(W, 1, steps.B.r, rng), steps.B);
      Lat cand = lat_sum(W, M, lat_normalize(W, steps.e, row));
      i32 v = lat_vol(W, cand);
      if (v < target || v == lat_vol(W, M)) continue;
      if (!lat_pair_integral(N, shift, cand)) continue;
      M = cand;
      advanced = true;
    }
    if (!advanced) return std::nullopt;
  }
  require(lat_eq(W, M, dieu_phi_dual(N, shift, M)),
          "sampler: integral midpoint is not self-dual");
  return M;
}

// perfect self-dual module in the genus of the given standard
// decomposition (whose true form is p^{-shift} times its Gram), built
// at extra internal precision and truncated to n; optionally rejected
// until its elementary profile matches `want`
inline std::optional<DieuMod> sample_perfect_module(
    u32 p, u32 m, u32 n, const ShapeGenus& genus, Rng& rng, u32 tries = 400,
    const std::optional<std::vector<u32>>& want = std::nullopt) {
  ZqPtr Wi = ZqCtx::get(p, m, n + 6);
  DieuMod N = build_standard(Wi, genus.specs);
  if (genus.shift == 0 && dieu_dual_length(N, 0) == 0) {
    DieuMod M = dieu_truncate(N, n);
    if (want && ss_elementary_profile(M, 0) != *want) return std::nullopt;
    return dieu_shuffle_basis(M, rng);
  }
  for (u32 t = 0; t < tries; ++t) {
    auto Ml = selfdual_intermediate_try(N, genus.shift, rng);
    if (!Ml) continue;
    DieuMod Mi = dieu_change_basis(N, *Ml);
    // undo the p^{-shift} scaling: self-duality makes the rebased Gram
    // exactly divisible by p^shift
    require((i32)mat_min_val(*Wi, *Mi.gram) >= genus.shift,
            "sampler: rebased Gram not divisible by the shift");
    Mi.gram = mat_div_pk(*Wi, *Mi.gram, (u32)genus.shift);
    DieuMod M = dieu_truncate(Mi, n);
    require(dieu_dual_length(M, 0) == 0, "sampler: rebased module not perfect");
    if (want && ss_elementary_profile(M, 0) != *want) continue;
    return dieu_shuffle_basis(M, rng);
  }
  return std::nullopt;
}

inline std::optional<DieuMod> rank8_sample_ss(
    u32 p, u32 m, u32 n, SSShape s, Rng& rng, u32 tries = 400,
    const std::optional<std::vector<u32>>& want = std::nullopt) {
  return sample_perfect_module(p, m, n, rank8_shape_specs(s), rng, tries, want);
}

// ---------------------------------------------------------------------------
// non-supersingular classifier (rank 8, perfect symmetric, crisdisc 1)
// ---------------------------------------------------------------------------
enum class NonSSLabel { four_i0, two_i0_i1, i0_ii_iii, i0_i2, i3 };

inline const char* nonss_label_str(NonSSLabel l) {
  switch (l) {
    case NonSSLabel::four_i0:
      return "4x(i.0)";
    case NonSSLabel::two_i0_i1:
      return "2x(i.0)+(i.1)";
    case NonSSLabel::i0_ii_iii:
      return "(i.0)+(ii)+(iii)";
    case NonSSLabel::i0_i2:
      return "(i.0)+(i.2)";
    case NonSSLabel::i3:
      return "(i.3)";
  }
  return "?";
}

// stable image of F^k (unit-root part); the slope-positive directions die
// off at the working precision
inline Lat dieu_unit_root_part(const DieuMod& M) {
  Lat L = dieu_std(M);
  for (u32 k = 0; k < 2 * M.W->n + 2; ++k) L = dieu_FL(M, L);
  return L;
}
inline Lat dieu_mult_part(const DieuMod& M) {
  Lat L = dieu_std(M);
  for (u32 k = 0; k < 2 * M.W->n + 2; ++k) L = dieu_VL(M, L);
  return L;
}

// split off the local-local (slope in (0,1)) orthogonal summand of a
// perfect module; returns it as a module of its own rank
inline DieuMod nonss_ll_part(const DieuMod& M, u32& f_out) {
  const ZqCtx& W = *M.W;
  require(M.gram.has_value(), "ll_part: no pairing");
  Lat U = dieu_unit_root_part(M);
  Lat Mu = dieu_mult_part(M);
  u32 f = lat_rank(U);
  require(lat_rank(Mu) == f, "ll_part: unit-root and mult ranks differ");
  f_out = f;
  u32 r6 = M.rank - 2 * f;
  require(r6 > 0, "ll_part: no local-local part");
  RMat BS = mat_vstack(U.B, Mu.B);
  RMat C = mat_mul(W, *M.gram, mat_transpose(BS));
  RMat Kr = left_kernel(W, C);
  require(Kr.r == r6, "ll_part: complement has wrong rank");
  RMat Bfull = mat_vstack(BS, Kr);
  require(W.val(det(W, Bfull)) == 0, "ll_part: splitting not unimodular");
  DieuMod Mb = dieu_change_basis(M, Lat{0, Bfull});
  // the two summands are F,V-stable and orthogonal: off blocks must vanish
  u32 noise = W.n;
  auto offmin = [&](const RMat& A) {
    for (u32 i = 0; i < M.rank; ++i)
      for (u32 j = 0; j < M.rank; ++j) {
        bool itop = i < 2 * f, jtop = j < 2 * f;
        if (itop == jtop) continue;
        if (!W.is_zero(A.at(i, j))) noise = std::min(noise, W.val(A.at(i, j)));
      }
  };
  offmin(Mb.AF);
  offmin(Mb.AV);
  offmin(*Mb.gram);
  require(noise + 2 >= W.n, "ll_part: summands fail to split");
  DieuMod R;
  R.W = M.W;
  R.rank = r6;
  R.AF = RMat(r6, r6);
  R.AV = RMat(r6, r6);
  RMat G(r6, r6);
  for (u32 i = 0; i < r6; ++i)
    for (u32 j = 0; j < r6; ++j) {
      R.AF.at(i, j) = Mb.AF.at(2 * f + i, 2 * f + j);
      R.AV.at(i, j) = Mb.AV.at(2 * f + i, 2 * f + j);
      G.at(i, j) = Mb.gram->at(2 * f + i, 2 * f + j);
    }
  R.gram = G;
  R.prec = std::min(Mb.eff_prec(), noise);
  return R;
}

inline NonSSLabel classify_nonss(const DieuMod& M, i32 shift = 0) {
  const ZqCtx& W = *M.W;
  require(M.rank == 8, "nonss: wrong rank");
  require(M.gram.has_value(), "nonss: no pairing");
  require(dieu_check(M, true), "nonss: operator axioms fail");
  require(mat_symmetric(W, *M.gram), "nonss: pairing not symmetric");
  require(dieu_is_perfect(M, shift), "nonss: pairing not perfect");
  require(!dieu_is_supersingular(M), "nonss: supersingular input");
  CrisDisc c = crisdisc(M, shift);
  require(c.p_parity == 0 && c.unit_class == 0, "nonss: crisdisc is not 1");

  u32 f = dieu_p_rank(M);
  auto sl = dieu_newton_slopes(M);
  using SV = std::vector<std::pair<u32, u32>>;
  auto rep = [](std::initializer_list<std::pair<std::pair<u32, u32>, u32>> l) {
    SV v;
    for (auto& [s, k] : l)
      for (u32 i = 0; i < k; ++i) v.push_back(s);
    return v;
  };
  if (sl == rep({{{0, 1}, 4}, {{1, 1}, 4}})) {
    require(f == 4, "nonss: ordinary slopes with wrong p-rank");
    return NonSSLabel::four_i0;
  }
  if (sl == rep({{{0, 1}, 2}, {{1, 2}, 4}, {{1, 1}, 2}})) {
    require(f == 2, "nonss: p-rank mismatch (2x(i.0)+(i.1))");
    return NonSSLabel::two_i0_i1;
  }
  if (sl == rep({{{0, 1}, 1}, {{1, 2}, 6}, {{1, 1}, 1}})) {
    require(f == 1, "nonss: p-rank mismatch ((i.0)+(ii)+(iii))");
    u32 fll = 0;
    DieuMod ll = nonss_ll_part(M, fll);
    require(fll == 1, "nonss: unit-root rank mismatch");
    auto pr = ss_elementary_profile(ll, 0);
    require(pr == std::vector<u32>({0, 1, 1}),
            "nonss: local-local profile is not (0,1,1)");
    return NonSSLabel::i0_ii_iii;
  }
  if (sl == rep({{{0, 1}, 1}, {{1, 3}, 3}, {{2, 3}, 3}, {{1, 1}, 1}})) {
    require(f == 1, "nonss: p-rank mismatch ((i.0)+(i.2))");
    return NonSSLabel::i0_i2;
  }
  if (sl == rep({{{1, 4}, 4}, {{3, 4}, 4}})) {
    require(f == 0, "nonss: p-rank mismatch ((i.3))");
    return NonSSLabel::i3;
  }
  require(false, "nonss: slope type outside the five combinations");
  return NonSSLabel::four_i0;
}

// ---------------------------------------------------------------------------
// witness constructors for the five combinations
// ---------------------------------------------------------------------------

// M (+) its linear dual, paired hyperbolically: gram [[0,I],[I,0]].
// The dual carries A_F' = sigma(A_V)^T, A_V' = sigma^{-1}(A_F)^T.
inline DieuMod dieu_dual_pair(const DieuMod& A) {
  const ZqCtx& W = *A.W;
  u32 r = A.rank;
  DieuMod B;
  B.W = A.W;
  B.rank = r;
  B.AF = mat_frob(W, mat_transpose(A.AV), 1);
  B.AV = mat_frob(W, mat_transpose(A.AF), -1);
  DieuMod A0 = A;
  A0.gram.reset();
  DieuMod M = dieu_direct_sum(A0, B);
  RMat G(2 * r, 2 * r);
  for (u32 i = 0; i < r; ++i) {
    G.at(i, r + i) = W.one();
    G.at(r + i, i) = W.one();
  }
  M.gram = G;
  M.prec = A.prec;
  return M;
}

// the slope-(n/(n+1), 1/(n+1)) self-dual block "(i.n)" of rank 2(n+1)
inline DieuMod nonss_block_i(ZqPtr W, u32 nn) {
  return dieu_dual_pair(dieu_cyclic(W, 1, nn));
}

inline std::optional<DieuMod> nonss_witness(u32 p, u32 m, u32 n, NonSSLabel l,
                                            Rng& rng, u32 tries = 400) {
  ZqPtr W = ZqCtx::get(p, m, n);
  DieuMod M;
  switch (l) {
    case NonSSLabel::four_i0: {
      DieuMod b = nonss_block_i(W, 0);
      M = dieu_direct_sum(dieu_direct_sum(b, b), dieu_direct_sum(b, b));
      break;
    }
    case NonSSLabel::two_i0_i1: {
      DieuMod b = nonss_block_i(W, 0);
      DieuMod ss = build_standard(W, {{1, 0, false}, {1, 0, false}});
      M = dieu_direct_sum(dieu_direct_sum(b, b), ss);
      break;
    }
    case NonSSLabel::i0_ii_iii: {
      // the rank-6 part needs elementary profile (0,1,1), which requires
      // sigma^2-orbits of dimension 2 and hence a base field of degree >= 4
      if (m < 4) return std::nullopt;
      auto M6 = sample_perfect_module(
          p, m, n,
          ShapeGenus{{{1, 1, false}, {2, 0, false}, {2, 0, true}}, 1}, rng,
          tries, std::vector<u32>({0, 1, 1}));
      if (!M6) return std::nullopt;
      M = dieu_direct_sum(nonss_block_i(W, 0), *M6);
      break;
    }
    case NonSSLabel::i0_i2:
      M = dieu_direct_sum(nonss_block_i(W, 0), nonss_block_i(W, 2));
      break;
    case NonSSLabel::i3:
      M = nonss_block_i(W, 3);
      break;
  }
  return dieu_shuffle_basis(M, rng);
}

inline std::optional<std::pair<DieuMod, NonSSLabel>> rank8_sample_nonss(
    u32 p, u32 m, u32 n, Rng& rng) {
  // i0_ii_iii needs field degree >= 4 (see nonss_witness); skip it otherwise
  u32 k = rng.below(m >= 4 ? 5u : 4u);
  if (m < 4 && k >= (u32)NonSSLabel::i0_ii_iii) ++k;
  NonSSLabel l = (NonSSLabel)k;
  auto M = nonss_witness(p, m, n, l, rng);
  if (!M) return std::nullopt;
  return std::make_pair(*M, l);
}

// ---------------------------------------------------------------------------
// exhaustive rank-2 census.  A rank-2 supersingular module-with-pairing is
// determined by the anti-invariant quaternion h = Phi(x,x) = t a0 + b sigma
// (a0 over W(F_p), b over W(F_{p^2})) up to the isometry action
// h -> lambda h iota(lambda).  The reduction below performs that action
// explicitly: for even v(h) it kills the sigma-part with lambda = 1 + v sigma,
// v = b/(2a); for odd v(h) it kills the scalar part with v = -a/(2p b^F).
// Certification (optional, sampled): the residual unit is then absorbed by
// a norm solution (even case) or a square root (odd case), pinning the
// canonical representative exactly.
// ---------------------------------------------------------------------------
struct CensusClass {
  u32 r = 0;    // colength = quaternion valuation of h
  u32 cls = 0;  // 0: even type; 1: odd, eps square; 2: odd, eps nonsquare
  auto operator<=>(const CensusClass&) const = default;
};

inline CensusClass rank2_pairing_class(const QuatCtx& Q, QEl h,
                                       bool certify = false) {
  const ZqCtx& W = *Q.W;
  u32 r = Q.v(h);
  require(r < Q.vmax(), "census: degenerate pairing");
  u32 guard = 0;
  for (;;) {
    require(++guard <= 4 * W.n, "census: reduction does not terminate");
    if (r % 2 == 0) {
      if (W.is_zero(h.b)) break;
      Zel v = zdiv_exact(W, h.b, W.smul(2, h.a));
      QEl lam = Q.make(W.one(), v);
      h = Q.mul(Q.mul(lam, h), Q.iota(lam));
      if (W.is_zero(h.b)) break;
    } else {
      if (W.is_zero(h.a)) break;
      Zel den = W.smul(2 * (u64)W.p, W.frob(h.b));
      Zel v = W.neg(zdiv_exact(W, h.a, den));
      QEl lam = Q.make(W.one(), v);
      h = Q.mul(Q.mul(lam, h), Q.iota(lam));
      if (W.is_zero(h.a)) break;
    }
    require(Q.v(h) == r, "census: valuation drifted");
  }
  require(Q.v(h) == r, "census: valuation drifted after reduction");
  CensusClass out;
  out.r = r;
  if (r % 2 == 0) {
    // h = t c p^{r/2}
    Zel c = W.div_pk(W.div(h.a, Q.t), r / 2);
    require(W.in_subring(c, 1), "census: even unit not sigma-invariant");
    if (certify) {
      Zel u = zq_solve_norm(W, c);
      require(W.mul(u, W.frob(u)) == c, "census: norm certificate failed");
    }
    out.cls = 0;
  } else {
    // h = t eps p^{(r-1)/2} sigma
    Zel eps = W.div_pk(W.div(h.b, Q.t), (r - 1) / 2);
    bool sq = W.fq->is_square(W.residue(eps));
    out.cls = sq ? 1 : 2;
    if (certify) {
      Zel eps0 = sq ? W.one() : W.teichmuller(W.fq->gen());
      Zel u = zq_sqrt(W, W.div(eps0, eps));
      require(W.mul(W.mul(u, u), eps) == eps0,
              "census: square certificate failed");
    }
  }
  return out;
}

struct CensusResult {
  u64 scanned = 0;     // all (a0, b) pairs
  u64 classified = 0;  // pairs with v(h) <= rmax
  std::map<u32, std::set<u32>> classes;        // r -> observed class codes
  std::map<std::pair<u32, u32>, u64> counts;   // (r, cls) -> count
};

inline CensusResult rank2_census(u32 p, u32 n, u32 rmax,
                                 u32 certify_stride = 1024) {
  QuatCtx Q(p, n);
  const ZqCtx& W = *Q.W;
  const FqCtx& F = *W.fq;
  ZqPtr W1p = ZqCtx::get(p, 1, n);
  const ZqCtx& W1 = *W1p;
  // all of t * W(F_p), precomputed
  u64 pn = pow_u64(p, n);
  std::vector<Zel> ta0(pn);
  for (u64 code = 0; code < pn; ++code) {
    std::vector<Fel> ds(n);
    u64 cc = code;
    for (u32 i = 0; i < n; ++i) {
      ds[i] = W1.fq->from_index(cc % p);
      cc /= p;
    }
    ta0[code] = W.mul(Q.t, W.embed_from(W1, W1.from_digits(ds)));
  }
  u64 qn = pow_u64(F.q(), n);
  CensusResult res;
  for (u64 bc = 0; bc < qn; ++bc) {
    std::vector<Fel> ds(n);
    u64 cc = bc;
    for (u32 i = 0; i < n; ++i) {
      ds[i] = F.from_index(cc % F.q());
      cc /= F.q();
    }
    Zel b = W.from_digits(ds);
    for (u64 ac = 0; ac < pn; ++ac) {
      if (bc == 0 && ac == 0) continue;
      ++res.scanned;
      QEl h = Q.make(ta0[ac], b);
      u32 r = Q.v(h);
      if (r > rmax) continue;
      ++res.classified;
      bool certify = res.classified % certify_stride == 0;
      CensusClass cl = rank2_pairing_class(Q, h, certify);
      require(cl.r == r, "census: class colength mismatch");
      res.classes[r].insert(cl.cls);
      ++res.counts[{r, cl.cls}];
    }
  }
  return res;
}

// the module carried by a census point: standard supersingular rank-2
// frame (x, Fx) with the Gram matrix reconstructed from Phi(x,x) = h
inline DieuMod module_from_quat(const QuatCtx& Q, const QEl& h) {
  const ZqCtx& W = *Q.W;
  ZqPtr Wp = ZqCtx::get(W.p, W.m, W.n);
  DieuMod M;
  M.W = Wp;
  M.rank = 2;
  M.AF = RMat(2, 2);
  M.AV = RMat(2, 2);
  M.AF.at(0, 1) = W.one();
  M.AF.at(1, 0) = W.from_int((i64)W.p);
  M.AV = M.AF;
  Zel ti = W.inv(Q.t);
  RMat G(2, 2);
  G.at(0, 0) = W.mul(ti, h.b);
  G.at(0, 1) = W.neg(W.mul(ti, h.a));
  G.at(1, 0) = G.at(0, 1);
  G.at(1, 1) = W.neg(W.mul_pk(W.mul(ti, W.frob(h.b)), 1));
  M.gram = G;
  return M;
}

}  // namespace dieulat
