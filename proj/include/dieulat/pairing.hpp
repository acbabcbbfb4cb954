#pragma once

#include "dieulat/dieudonne.hpp"
#include "dieulat/quat.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace dieulat {

// ===========================================================================
// Symmetric pairings on Dieudonne modules.
//
// A pairing is carried as a numerator Gram matrix M.gram together with an
// integer `shift`: the true form is phi = p^{-shift} * gram.  This keeps all
// matrix arithmetic integral; shifts only enter valuation bookkeeping.
//
// The central algorithm turns a superspecial module N into an orthogonal sum
// of rank-2 pieces: the skeleton {x : Fx = Vx} is a free module over the
// maximal quaternionic order O = W(F_{p^2})<s>, phi sesquilinearizes to an
// O-valued form Phi on it, and Gram-Schmidt over O with Hensel normalization
// produces generators on which Phi is a power of s times a unit.
// ===========================================================================

// ---------------------------------------------------------------------------
// vector helpers (row vectors over the module ring)
// ---------------------------------------------------------------------------
inline std::vector<Zel> vec_zero(const ZqCtx& W, u32 r) {
  return std::vector<Zel>(r, W.zero());
}
inline std::vector<Zel> vec_add(const ZqCtx& W, const std::vector<Zel>& a,
                                const std::vector<Zel>& b) {
  require(a.size() == b.size(), "vec_add: shape");
  std::vector<Zel> r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = W.add(a[i], b[i]);
  return r;
}
inline std::vector<Zel> vec_sub(const ZqCtx& W, const std::vector<Zel>& a,
                                const std::vector<Zel>& b) {
  require(a.size() == b.size(), "vec_sub: shape");
  std::vector<Zel> r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = W.sub(a[i], b[i]);
  return r;
}
inline std::vector<Zel> vec_scale(const ZqCtx& W, const Zel& c,
                                  const std::vector<Zel>& a) {
  std::vector<Zel> r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = W.mul(c, a[i]);
  return r;
}
inline RMat mat_from_rows(const ZqCtx& W,
                          const std::vector<std::vector<Zel>>& rows) {
  require(!rows.empty(), "mat_from_rows: empty");
  RMat A((u32)rows.size(), (u32)rows[0].size());
  for (u32 i = 0; i < A.r; ++i) {
    require(rows[i].size() == A.c, "mat_from_rows: ragged");
    for (u32 j = 0; j < A.c; ++j) A.at(i, j) = rows[i][j];
  }
  (void)W;
  return A;
}

// ---------------------------------------------------------------------------
// CrisDisc: the class of the crystalline discriminant in
// Q_p^x / (Z_p^x)^2 Q_p^{x2} = {1, t^2, p, p t^2}, written additively as a
// bit pair.  Signs are folded in via the quadratic character of -1 mod p.
// ---------------------------------------------------------------------------
struct CrisDisc {
  u32 p_parity = 0;    // exponent of p, mod 2
  u32 unit_class = 0;  // 0 -> trivial, 1 -> the nonsquare-unit class t^2
  friend bool operator==(const CrisDisc&, const CrisDisc&) = default;
};
inline CrisDisc cd_one() { return {}; }
inline CrisDisc cd_t2() { return {0, 1}; }
inline CrisDisc cd_p() { return {1, 0}; }
inline CrisDisc cd_pt2() { return {1, 1}; }
inline CrisDisc cd_mul(const CrisDisc& a, const CrisDisc& b) {
  return {a.p_parity ^ b.p_parity, a.unit_class ^ b.unit_class};
}
inline CrisDisc cd_pow(const CrisDisc& a, u64 k) {
  return k % 2 ? a : cd_one();
}
inline CrisDisc cd_neg_one(u32 p) { return {0, p % 4 == 3 ? 1u : 0u}; }
inline std::string cd_str(const CrisDisc& c) {
  return c.p_parity ? (c.unit_class ? "pt2" : "p")
                    : (c.unit_class ? "t2" : "1");
}
inline std::optional<CrisDisc> cd_parse(const std::string& s) {
  if (s == "1") return cd_one();
  if (s == "t2") return cd_t2();
  if (s == "p") return cd_p();
  if (s == "pt2") return cd_pt2();
  return std::nullopt;
}
// class of a unit of W(F_p) presented by its residue inside F_q
inline CrisDisc cd_fp_unit(const FqCtx& F, const Fel& a) {
  auto Fp = FqCtx::get(F.p, 1);
  Fel r = F.project_to(*Fp, a);
  require(!Fp->is_zero(r), "cd_fp_unit: zero residue");
  return {0, Fp->is_square(r) ? 0u : 1u};
}

// ---------------------------------------------------------------------------
// scalar extension and precision plumbing
// ---------------------------------------------------------------------------
inline RMat mat_embed_from(const ZqCtx& W2, const ZqCtx& W, const RMat& A) {
  RMat B(A.r, A.c);
  for (u32 i = 0; i < A.r; ++i)
    for (u32 j = 0; j < A.c; ++j) B.at(i, j) = W2.embed_from(W, A.at(i, j));
  return B;
}
inline RMat mat_to_precision(const ZqCtx& Wdst, const ZqCtx& W, const RMat& A) {
  RMat B(A.r, A.c);
  for (u32 i = 0; i < A.r; ++i)
    for (u32 j = 0; j < A.c; ++j) B.at(i, j) = W.to_precision(Wdst, A.at(i, j));
  return B;
}
inline DieuMod dieu_extend_scalars(const DieuMod& M, u32 mnew) {
  const ZqCtx& W = *M.W;
  require(mnew % W.m == 0, "extend_scalars: bad degree");
  if (mnew == W.m) return M;
  ZqPtr W2 = ZqCtx::get(W.p, mnew, W.n);
  DieuMod R;
  R.W = W2;
  R.rank = M.rank;
  R.prec = M.prec;
  R.AF = mat_embed_from(*W2, W, M.AF);
  R.AV = mat_embed_from(*W2, W, M.AV);
  if (M.gram) R.gram = mat_embed_from(*W2, W, *M.gram);
  return R;
}

// read off a representative in W_n(F_{p^l}) from the first `pr` digits;
// those digits must land in the subfield (noise above pr is discarded)
inline Zel project_subring(const ZqCtx& W, const ZqCtx& Wsub, const Zel& z,
                           u32 pr) {
  require(Wsub.p == W.p && Wsub.n == W.n && W.m % Wsub.m == 0,
          "project_subring: rings");
  pr = std::min(pr, W.n);
  auto ds = W.digits(z);
  std::vector<Fel> es(pr);
  for (u32 i = 0; i < pr; ++i) {
    require(W.fq->in_subfield(ds[i], Wsub.m),
            "pairing: value left the expected subring");
    es[i] = W.fq->project_to(*Wsub.fq, ds[i]);
  }
  return Wsub.from_digits(es);
}

// ---------------------------------------------------------------------------
// phi-duals.  phi = p^{-shift} gram; the phi-dual of a lattice L is
// p^{shift} times its gram-dual.
// ---------------------------------------------------------------------------
inline Lat dieu_phi_dual(const DieuMod& M, i32 shift, const Lat& L) {
  require(M.gram.has_value(), "phi_dual: no pairing");
  return lat_scale_pk(*M.W, lat_dual(*M.W, L, *M.gram), shift);
}
inline bool dieu_is_perfect(const DieuMod& M, i32 shift = 0) {
  return lat_eq(*M.W, dieu_phi_dual(M, shift, dieu_std(M)), dieu_std(M));
}
// signed length of M^t / M (negative if M^t is smaller), mod 2 callers
inline i32 dieu_dual_length(const DieuMod& M, i32 shift = 0) {
  return -lat_vol(*M.W, dieu_phi_dual(M, shift, dieu_std(M)));
}

// re-express (M, phi) on an F,V-stable lattice L, keeping the Gram integral
// by adjusting the shift
struct PairedMod {
  DieuMod M;
  i32 shift = 0;
};
inline PairedMod dieu_rebase_pairing(const DieuMod& M, i32 shift,
                                     const Lat& L) {
  const ZqCtx& W = *M.W;
  require(M.gram.has_value(), "rebase_pairing: no pairing");
  DieuMod Mng = M;
  RMat G = *M.gram;
  Mng.gram.reset();
  DieuMod N = dieu_change_basis(Mng, L);
  RMat Gn = mat_mul(W, mat_mul(W, L.B, G), mat_transpose(L.B));
  i32 s = shift + 2 * L.e;
  u32 mv = mat_min_val(W, Gn);
  u32 drop = std::min<u32>(mv, (u32)std::max<i32>(s, 0));
  if (drop) {
    Gn = mat_div_pk(W, Gn, drop);
    s -= (i32)drop;
  }
  if (s < 0) {
    Gn = mat_mul_pk(W, Gn, (u32)(-s));
    s = 0;
  }
  N.gram = Gn;
  return {N, s};
}

// the same module in random unimodular coordinates (an isometric twin)
inline DieuMod dieu_shuffle_basis(const DieuMod& M, Rng& rng) {
  const ZqCtx& W = *M.W;
  for (;;) {
    RMat U = mat_random(W, M.rank, M.rank, rng);
    if (W.is_unit(det(W, U))) return dieu_change_basis(M, Lat{0, U});
  }
}

// ---------------------------------------------------------------------------
// skeleton: {x in M : Fx = Vx}, a module over W(F_{p^2}) embedded in M.
// Solved as a semilinear kernel over W(F_p) at the effective precision.
// Returns a W(F_{p^2})-basis (rank vectors) on success.
// ---------------------------------------------------------------------------
inline bool dieu_skeleton_basis_try(const DieuMod& M,
                                    std::vector<std::vector<Zel>>& out) {
  const ZqCtx& W = *M.W;
  require(W.m % 2 == 0, "skeleton: base must contain F_{p^2}");
  out.clear();
  if (M.rank == 0) return true;
  u32 pr = M.eff_prec();
  require(pr >= 2, "skeleton: no working precision");
  ZqPtr Wr = ZqCtx::get(W.p, W.m, pr);
  ZqPtr Wpr = ZqCtx::get(W.p, 1, pr);
  // condition on y = sigma^{-1}(x):  sigma^2(y) AF = y AV
  RMat R = mat_sub(*Wpr,
                   restrict_scalars(*Wr, *Wpr, mat_to_precision(*Wr, W, M.AF), 2),
                   restrict_scalars(*Wr, *Wpr, mat_to_precision(*Wr, W, M.AV), 0));
  Howell K = howell_form(*Wpr, left_kernel(*Wpr, R));
  u32 tau = pr / 2;
  std::vector<std::vector<Zel>> sols;  // over W at full precision
  for (u32 i = 0; i < K.H.r; ++i) {
    if (K.piv_val[i] > tau) continue;
    if (K.piv_val[i] != 0) return false;  // non-saturated kernel: not split
    std::vector<Zel> row(K.H.c);
    for (u32 j = 0; j < K.H.c; ++j) row[j] = K.H.at(i, j);
    auto y = unrestrict_vector(*Wr, row, M.rank);
    std::vector<Zel> x(M.rank);
    for (u32 j = 0; j < M.rank; ++j)
      x[j] = W.frob(Wr->to_precision(W, y[j]));
    sols.push_back(std::move(x));
  }
  if (sols.size() != 2 * (size_t)M.rank) return false;
  // select an F_{p^2}-basis: residues must stay independent over F_q
  FMat acc(0, M.rank);
  for (auto& x : sols) {
    if (out.size() == M.rank) break;
    FMat cand(acc.r + 1, acc.c);
    for (u32 i = 0; i < acc.r; ++i)
      for (u32 j = 0; j < acc.c; ++j) cand.at(i, j) = acc.at(i, j);
    for (u32 j = 0; j < M.rank; ++j) cand.at(acc.r, j) = W.residue(x[j]);
    if (fmat_rank(*W.fq, cand) == cand.r) {
      acc = cand;
      out.push_back(x);
    }
  }
  return out.size() == M.rank;
}
inline std::vector<std::vector<Zel>> dieu_skeleton_basis(const DieuMod& M) {
  std::vector<std::vector<Zel>> xs;
  require(dieu_skeleton_basis_try(M, xs), "skeleton: not full over W(F_{p^2})");
  return xs;
}

// ---------------------------------------------------------------------------
// sesquilinearization: Phi(x, y) = phi(x, s t y) - phi(x, y) s t, an
// O-valued form on the skeleton (s acts as F there).  In components,
// Phi(x,y) = -t phi(x, Fy)  +  t phi(x, y) s .
// Values are numerators: the true form is p^{-shift} times them.
// ---------------------------------------------------------------------------
inline QEl sesq_pair(const DieuMod& M, const QuatCtx& Q, u32 pr,
                     const std::vector<Zel>& x, const std::vector<Zel>& y) {
  const ZqCtx& W = *M.W;
  const ZqCtx& W2 = *Q.W;
  Zel pxy = project_subring(W, W2, dieu_pair(M, x, y), pr);
  Zel pxFy = project_subring(W, W2, dieu_pair(M, x, dieu_F(M, y)), pr);
  return QEl{W2.neg(W2.mul(Q.t, pxFy)), W2.mul(Q.t, pxy)};
}
// left action of lambda = u + v s on a skeleton vector: u x + v Fx
inline std::vector<Zel> sesq_act(const DieuMod& M, const QuatCtx& Q,
                                 const QEl& lam, const std::vector<Zel>& x) {
  const ZqCtx& W = *M.W;
  auto r = vec_scale(W, W.embed_from(*Q.W, lam.a), x);
  if (!Q.W->is_zero(lam.b))
    r = vec_add(W, r, vec_scale(W, W.embed_from(*Q.W, lam.b), dieu_F(M, x)));
  return r;
}

// ---------------------------------------------------------------------------
// diagonalization
// ---------------------------------------------------------------------------
struct DiagFactor {
  u32 kind = 1;   // 1: phi(x,x)=phi(y,y)=0, phi(x,y)=p^{n_i}
                  // 2: phi(x,y)=0, phi(x,x)=eps p^{n_i}, phi(y,y)=eps^F p^{n_i+1}
  i64 n_i = 0;    // exponent against the true (shift-corrected) form
  i64 r = 0;      // s-adic valuation of Phi(x,x): 2 n_i or 2 n_i + 1
  bool eps_nonsquare = false;  // kind 2: quadratic class of eps in F_{p^2}
  Zel eps;                     // kind 2: the normalized unit, module ring
  std::vector<Zel> x;          // generator in module coordinates; y = Fx
};
struct SSDecomp {
  std::vector<DiagFactor> factors;
  u32 trusted_prec = 0;  // digits to which the normalized Gram identities hold
};
// sorted multiset of (kind, n_i, eps-class): the full isometry invariant
inline std::vector<std::tuple<u32, i64, u32>> decomp_signature(
    const SSDecomp& d) {
  std::vector<std::tuple<u32, i64, u32>> s;
  for (auto& f : d.factors)
    s.emplace_back(f.kind, f.n_i, f.kind == 2 && f.eps_nonsquare ? 1u : 0u);
  std::sort(s.begin(), s.end());
  return s;
}

namespace detail {

// exact representative of a value known to lie in W(F_{p^l}) modulo p^pr
inline Zel clean_subring(const ZqCtx& W, u32 l, const Zel& z, u32 pr) {
  pr = std::min(pr, W.n);
  auto ds = W.digits(z);
  std::vector<Fel> es(pr);
  for (u32 i = 0; i < pr; ++i) {
    require(W.fq->in_subfield(ds[i], l), "pairing: unit left its subring");
    es[i] = ds[i];
  }
  return W.from_digits(es);
}

// Hensel-normalize one orthogonal generator so that the numerator values
// become exactly phi(x,Fx) = p^na (kind 1) or phi(x,x) = eps0 p^nb with
// eps0 in {1, zeta} (kind 2).  `pr` is the trusted digit budget and is
// reduced by the divisions performed here.
inline DiagFactor normalize_factor(const DieuMod& M, const QuatCtx& Q,
                                   i32 shift, std::vector<Zel> x, u32& pr) {
  const ZqCtx& W = *M.W;
  const ZqCtx& W2 = *Q.W;
  QEl h = sesq_pair(M, Q, pr, x, x);
  u32 r = Q.v(h);
  require(r + 6 < 2 * pr, "diagonalize: precision exhausted (increase n)");
  DiagFactor f;
  f.kind = r % 2 ? 2 : 1;
  if (f.kind == 1) {
    u32 na = r / 2;
    u32 stop = pr - na;
    for (u32 it = 0; it < 2 * W.n; ++it) {
      if (W2.is_zero(h.b) || W2.val(h.b) >= stop) break;
      // lambda = 1 + v s with v = b / (2a) strictly raises val(b)
      Zel v = W2.div(W2.div_pk(h.b, na),
                     W2.mul(W2.from_int(2), W2.div_pk(h.a, na)));
      x = vec_add(W, x, vec_scale(W, W.embed_from(W2, v), dieu_F(M, x)));
      h = sesq_pair(M, Q, stop, x, x);
    }
    require(W2.is_zero(h.b) || W2.val(h.b) >= stop,
            "diagonalize: kind-1 reduction stalled");
    // a = t c p^na with c a unit of W(F_p); scale by u with N(u) = -1/c
    Zel c = W2.div(W2.div_pk(h.a, na), Q.t);
    c = clean_subring(W2, 1, c, stop);
    Zel u = zq_solve_norm(W2, W2.neg(W2.inv(c)));
    x = vec_scale(W, W.embed_from(W2, u), x);
    f.n_i = (i64)na - shift;
    f.r = 2 * f.n_i;
    pr = stop;
  } else {
    u32 nb = (r - 1) / 2;
    u32 stop = pr - nb - 1;
    for (u32 it = 0; it < 2 * W.n; ++it) {
      if (W2.is_zero(h.a) || W2.val(h.a) >= stop) break;
      // lambda = 1 + v s with v = -a / (2 p b^F) strictly raises val(a)
      Zel v = W2.neg(W2.div(
          W2.div_pk(h.a, nb + 1),
          W2.mul(W2.from_int(2), W2.frob(W2.div_pk(h.b, nb)))));
      x = vec_add(W, x, vec_scale(W, W.embed_from(W2, v), dieu_F(M, x)));
      h = sesq_pair(M, Q, stop, x, x);
    }
    require(W2.is_zero(h.a) || W2.val(h.a) >= stop,
            "diagonalize: kind-2 reduction stalled");
    // b = t eps p^nb; normalize eps into {1, zeta} within its square class
    Zel eps = W2.div(W2.div_pk(h.b, nb), Q.t);
    eps = clean_subring(W2, 2, eps, stop);
    f.eps_nonsquare = !W2.fq->is_square(W2.residue(eps));
    Zel eps0 = f.eps_nonsquare ? W2.teichmuller(W2.fq->gen()) : W2.one();
    Zel u = zq_sqrt(W2, W2.div(eps0, eps));
    x = vec_scale(W, W.embed_from(W2, u), x);
    f.eps = W.embed_from(W2, eps0);
    f.n_i = (i64)nb - shift;
    f.r = 2 * f.n_i + 1;
    pr = stop;
  }
  f.x = std::move(x);
  return f;
}

}  // namespace detail

// Orthogonally split a superspecial paired module into rank-2 factors.
// phi = p^{-shift} gram.  If the skeleton is not split over the given base
// field, scalars are extended (total degree capped by cap_ext).
inline SSDecomp dieu_diagonalize(const DieuMod& Min, i32 shift = 0,
                                 u32 cap_ext = 8, Rng* rng_in = nullptr) {
  require(Min.gram.has_value(), "diagonalize: no pairing");
  require(Min.W->p != 2, "diagonalize: p must be odd");
  DieuMod M = Min.W->m % 2 ? dieu_extend_scalars(Min, 2 * Min.W->m) : Min;
  std::vector<std::vector<Zel>> skel;
  while (!dieu_skeleton_basis_try(M, skel)) {
    require(2 * M.W->m <= cap_ext,
            "diagonalize: skeleton not split within the extension cap");
    M = dieu_extend_scalars(M, 2 * M.W->m);
  }
  const ZqCtx& W = *M.W;
  Rng local(0x0d1a60);
  Rng& rng = rng_in ? *rng_in : local;
  SSDecomp out;
  if (M.rank == 0) {
    out.trusted_prec = M.eff_prec();
    return out;
  }
  require(M.rank % 2 == 0, "diagonalize: odd rank");
  u32 k = M.rank / 2;
  QuatCtx Q(W.p, W.n);
  const ZqCtx& W2 = *Q.W;
  // the top digit of a pairing value is not provably in W(F_{p^2}) (the
  // sigma-invariance argument divides by p once), so trust one digit less
  u32 pr = M.eff_prec() - 1;

  // pick O-module generators: x with {x, Fx} extending a residue basis
  std::vector<std::vector<Zel>> gens;
  {
    FMat acc(0, M.rank);
    auto try_accept = [&](const std::vector<Zel>& x) {
      if (gens.size() == k) return;
      FMat cand(acc.r + 2, acc.c);
      for (u32 i = 0; i < acc.r; ++i)
        for (u32 j = 0; j < acc.c; ++j) cand.at(i, j) = acc.at(i, j);
      auto Fx = dieu_F(M, x);
      for (u32 j = 0; j < M.rank; ++j) {
        cand.at(acc.r, j) = W.residue(x[j]);
        cand.at(acc.r + 1, j) = W.residue(Fx[j]);
      }
      if (fmat_rank(*W.fq, cand) == cand.r) {
        acc = cand;
        gens.push_back(x);
      }
    };
    for (auto& x : skel) try_accept(x);
    for (u32 it = 0; it < 400 && gens.size() < k; ++it) {
      std::vector<Zel> x = vec_zero(W, M.rank);
      for (auto& s : skel) {
        Zel c = W.embed_from(W2, W2.random(rng));
        x = vec_add(W, x, vec_scale(W, c, s));
      }
      try_accept(x);
    }
    require(gens.size() == k, "diagonalize: generator search exhausted");
  }

  // Gram-Schmidt over O at the minimum s-adic valuation
  std::vector<std::pair<std::vector<Zel>, u32>> raw;  // (x0, pr at split)
  while (!gens.empty()) {
    u32 kk = (u32)gens.size();
    std::vector<std::vector<QEl>> P(kk, std::vector<QEl>(kk));
    u32 r0 = Q.vmax();
    for (u32 i = 0; i < kk; ++i)
      for (u32 j = 0; j < kk; ++j) {
        P[i][j] = sesq_pair(M, Q, pr, gens[i], gens[j]);
        r0 = std::min(r0, Q.v(P[i][j]));
      }
    require(r0 + 6 < 2 * pr, "diagonalize: precision exhausted (increase n)");
    // find x0 with v(Phi(x0,x0)) = r0: a diagonal entry, or a mixture of
    // two generators meeting at the minimum
    std::optional<std::pair<u32, std::vector<Zel>>> pick;
    for (u32 i = 0; i < kk && !pick; ++i)
      if (Q.v(P[i][i]) == r0) pick = {i, gens[i]};
    if (!pick) {
      std::vector<QEl> cands = {Q.one(), Q.scal(Q.t), Q.sg(),
                                Q.mul(Q.scal(Q.t), Q.sg())};
      for (u32 it = 0; it < 64; ++it) cands.push_back(Q.random_unit(rng));
      for (u32 i = 0; i < kk && !pick; ++i)
        for (u32 j = 0; j < kk && !pick; ++j) {
          if (i == j || Q.v(P[i][j]) != r0) continue;
          for (auto& c : cands) {
            auto x = vec_add(W, gens[i], sesq_act(M, Q, c, gens[j]));
            if (Q.v(sesq_pair(M, Q, pr, x, x)) == r0) {
              pick = {i, x};
              break;
            }
          }
        }
    }
    require(pick.has_value(), "diagonalize: minimum search budget exhausted");
    auto [drop, x0] = *pick;
    QEl h = sesq_pair(M, Q, pr, x0, x0);
    require(Q.v(h) == r0, "diagonalize: minimum slipped");
    std::vector<std::vector<Zel>> rest;
    for (u32 i = 0; i < kk; ++i) {
      if (i == drop) continue;
      QEl alpha = Q.div_right(sesq_pair(M, Q, pr, gens[i], x0), h);
      rest.push_back(
          vec_sub(W, gens[i], sesq_act(M, Q, alpha, x0)));
    }
    raw.emplace_back(std::move(x0), pr);
    pr -= r0;  // the division by Phi(x0,x0) thins this many digits
    gens = std::move(rest);
  }

  for (auto& [x0, _] : raw)
    out.factors.push_back(detail::normalize_factor(M, Q, shift, x0, pr));
  out.trusted_prec = pr;

  // certify: the generators and their F-images form a basis on which the
  // numerator Gram is exactly block diagonal with the normalized values
  {
    std::vector<std::vector<Zel>> rows;
    for (auto& f : out.factors) {
      rows.push_back(f.x);
      rows.push_back(dieu_F(M, f.x));
    }
    RMat B = mat_from_rows(W, rows);
    require(W.is_unit(det(W, B)), "diagonalize: factors do not span");
    for (u32 a = 0; a < out.factors.size(); ++a)
      for (u32 b = 0; b < out.factors.size(); ++b) {
        auto& fa = out.factors[a];
        auto& fb = out.factors[b];
        auto check = [&](const std::vector<Zel>& u, const std::vector<Zel>& v,
                         const Zel& want) {
          Zel dlt = W.sub(dieu_pair(M, u, v), want);
          require(W.is_zero(dlt) || W.val(dlt) >= pr,
                  "diagonalize: certification failed");
        };
        std::vector<Zel> Fa = dieu_F(M, fa.x), Fb = dieu_F(M, fb.x);
        if (a != b) {
          check(fa.x, fb.x, W.zero());
          check(fa.x, Fb, W.zero());
          check(Fa, fb.x, W.zero());
          check(Fa, Fb, W.zero());
          continue;
        }
        u32 nn = (u32)(fa.n_i + shift);
        if (fa.kind == 1) {
          check(fa.x, fa.x, W.zero());
          check(fa.x, Fa, W.mul_pk(W.one(), nn));
          check(Fa, Fa, W.zero());
        } else {
          check(fa.x, fa.x, W.mul_pk(fa.eps, nn));
          check(fa.x, Fa, W.zero());
          check(Fa, Fa, W.mul_pk(W.frob(fa.eps), nn + 1));
        }
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// crystalline discriminant
// ---------------------------------------------------------------------------
inline CrisDisc crisdisc_factor(u32 p, const DiagFactor& f) {
  if (f.kind == 1) return cd_mul(cd_neg_one(p), cd_t2());  // -t^2
  // p t^2 eps eps^F; N(eps) is a nonsquare of Z_p iff eps is one of F_{p^2}
  CrisDisc c = cd_pt2();
  if (f.eps_nonsquare) c = cd_mul(c, cd_t2());
  return c;
}
inline CrisDisc crisdisc_product(u32 p, const SSDecomp& d) {
  CrisDisc c = cd_one();
  for (auto& f : d.factors) c = cd_mul(c, crisdisc_factor(p, f));
  return c;
}
// perfect symmetric case: (-1)^{g} t^{2 a(M)} with g the half rank
inline CrisDisc crisdisc_perfect(const DieuMod& M) {
  require(dieu_is_perfect(M, 0), "crisdisc_perfect: form not perfect");
  u32 g = M.rank / 2;
  CrisDisc c = cd_pow(cd_neg_one(M.W->p), g);
  if (dieu_a_number(M) % 2) c = cd_mul(c, cd_t2());
  return c;
}
// general supersingular case: push to the superspecial hull S^0(M),
// diagonalize there, and multiply the factor values
inline CrisDisc crisdisc(const DieuMod& M, i32 shift = 0, u32 cap_ext = 8) {
  require(M.gram.has_value(), "crisdisc: no pairing");
  if (dieu_is_perfect(M, shift)) {
    // Fact-style perfect formula; depends only on the half rank and a(M)
    CrisDisc c = cd_pow(cd_neg_one(M.W->p), M.rank / 2);
    if (dieu_a_number(M) % 2) c = cd_mul(c, cd_t2());
    return c;
  }
  FlaggedLat s0 = dieu_s0_upper(M);
  require(s0.supersingular, "crisdisc: module is not supersingular");
  PairedMod N = dieu_rebase_pairing(M, shift, s0.L);
  return crisdisc_product(M.W->p, dieu_diagonalize(N.M, N.shift, cap_ext));
}
// cross-check oracle: for a maximal phi-isotropic subspace A of M (x) K,
// crisdisc = (-1)^{g} t^{2 dim(A + FA / A)}.  A is given by a basis lattice.
inline u32 parity_flip_dimension(const DieuMod& M, i32 shift, const Lat& A) {
  const ZqCtx& W = *M.W;
  require(A.B.r * 2 == M.rank, "parity_flip: A must have half rank");
  // isotropy of the K-span: all pairings within A vanish to working precision
  for (u32 i = 0; i < A.B.r; ++i)
    for (u32 j = 0; j < A.B.r; ++j) {
      std::vector<Zel> u(A.B.c), v(A.B.c);
      for (u32 l = 0; l < A.B.c; ++l) {
        u[l] = A.B.at(i, l);
        v[l] = A.B.at(j, l);
      }
      Zel z = dieu_pair(M, u, v);
      require(W.is_zero(z) || W.val(z) + 2 >= W.n,
              "parity_flip: subspace is not isotropic");
      (void)shift;
    }
  RMat FA = mat_mul(W, mat_frob(W, A.B, 1), M.AF);
  Howell h = howell_form(W, mat_vstack(A.B, FA));
  u32 dim_sum = 0;
  for (u32 i = 0; i < h.H.r; ++i)
    if (h.piv_val[i] < W.n) ++dim_sum;  // K-dimension of span(A + FA)
  return (dim_sum - A.B.r) % 2;
}
inline CrisDisc crisdisc_parity_flip(const DieuMod& M, i32 shift,
                                     const Lat& A) {
  CrisDisc c = cd_pow(cd_neg_one(M.W->p), M.rank / 2);
  if (parity_flip_dimension(M, shift, A)) c = cd_mul(c, cd_t2());
  u32 pp = (u32)((dieu_dual_length(M, shift) % 2 + 2) % 2);
  if (pp) c = cd_mul(c, cd_p());
  return c;
}

// ---------------------------------------------------------------------------
// standard constructors
// ---------------------------------------------------------------------------
struct FactorSpec {
  u32 kind = 1;
  u32 n_i = 0;
  bool eps_nonsquare = false;
};
inline DieuMod build_standard(ZqPtr Wp, const std::vector<FactorSpec>& fs) {
  const ZqCtx& W = *Wp;
  require(W.m % 2 == 0, "build_standard: base must contain F_{p^2}");
  DieuMod acc;
  acc.W = Wp;
  acc.rank = 0;
  acc.AF = RMat(0, 0);
  acc.AV = RMat(0, 0);
  acc.gram = RMat(0, 0);
  ZqPtr W2p = ZqCtx::get(W.p, 2, W.n);
  for (auto& f : fs) {
    DieuMod b;
    b.W = Wp;
    b.rank = 2;
    RMat J(2, 2);
    J.at(0, 1) = W.one();
    J.at(1, 0) = W.from_int((i64)W.p);
    b.AF = J;
    b.AV = J;
    RMat G(2, 2);
    if (f.kind == 1) {
      G.at(0, 1) = W.mul_pk(W.one(), f.n_i);
      G.at(1, 0) = G.at(0, 1);
    } else {
      Zel eps = f.eps_nonsquare
                    ? W.embed_from(*W2p, W2p->teichmuller(W2p->fq->gen()))
                    : W.one();
      G.at(0, 0) = W.mul_pk(eps, f.n_i);
      G.at(1, 1) = W.mul_pk(W.frob(eps), f.n_i + 1);
    }
    b.gram = G;
    acc = acc.rank ? dieu_direct_sum(acc, b) : b;
  }
  require(dieu_check(acc, acc.rank > 0), "build_standard: axiom check");
  return acc;
}
// an orthogonal pair of isometric rank-2 pieces written in its hyperbolic
// basis (e, Fe, f, Ff); w = Phi(e,f) has s-adic valuation r
inline DieuMod build_hyperbolic_pair(ZqPtr Wp, u32 r) {
  const ZqCtx& W = *Wp;
  DieuMod b;
  b.W = Wp;
  b.rank = 4;
  RMat A(4, 4);
  A.at(0, 1) = W.one();
  A.at(1, 0) = W.from_int((i64)W.p);
  A.at(2, 3) = W.one();
  A.at(3, 2) = W.from_int((i64)W.p);
  b.AF = A;
  b.AV = A;
  RMat G(4, 4);
  if (r % 2 == 0) {
    Zel w = W.mul_pk(W.one(), r / 2);
    G.at(0, 3) = w;
    G.at(3, 0) = w;
    G.at(1, 2) = w;
    G.at(2, 1) = w;
  } else {
    Zel w = W.mul_pk(W.one(), (r - 1) / 2);
    G.at(0, 2) = w;
    G.at(2, 0) = w;
    G.at(1, 3) = W.mul_pk(w, 1);
    G.at(3, 1) = G.at(1, 3);
  }
  b.gram = G;
  require(dieu_check(b, true), "build_hyperbolic_pair: axiom check");
  return b;
}

// ---------------------------------------------------------------------------
// hyperbolic recognition: diagonalize, pair up isometric factors, refuse on
// odd multiplicities.  Each pair (z1, z2) yields e = z1 + lambda z2,
// f = z1 - lambda z2 with Phi(e,e) = Phi(f,f) = 0 and Phi(e,f) = 2 Phi(z1,z1).
// ---------------------------------------------------------------------------
struct HypPair {
  std::vector<Zel> e, f;
  i64 r = 0;  // s-adic valuation of Phi(e, f) against the true form
};
inline std::optional<std::vector<HypPair>> hyperbolic_basis(
    const DieuMod& Nin, i32 shift = 0, u32 cap_ext = 8) {
  SSDecomp d = dieu_diagonalize(Nin, shift, cap_ext);
  const ZqCtx& W = *Nin.W;
  ZqPtr W2p = ZqCtx::get(W.p, 2, W.n);
  std::map<std::tuple<u32, i64, u32>, std::vector<const DiagFactor*>> groups;
  for (auto& f : d.factors)
    groups[{f.kind, f.n_i, f.kind == 2 && f.eps_nonsquare ? 1u : 0u}]
        .push_back(&f);
  for (auto& [key, v] : groups)
    if (v.size() % 2) return std::nullopt;
  std::vector<HypPair> out;
  for (auto& [key, v] : groups)
    for (size_t i = 0; i + 1 < v.size(); i += 2) {
      const DiagFactor& z1 = *v[i];
      const DiagFactor& z2 = *v[i + 1];
      Zel lam;
      if (z1.kind == 1)
        lam = W.embed_from(*W2p, zq_solve_norm(*W2p, W2p->neg(W2p->one())));
      else
        lam = W.embed_from(*W2p, zq_sqrt(*W2p, W2p->neg(W2p->one())));
      HypPair hp;
      hp.e = vec_add(W, z1.x, vec_scale(W, lam, z2.x));
      hp.f = vec_sub(W, z1.x, vec_scale(W, lam, z2.x));
      hp.r = z1.r;
      out.push_back(std::move(hp));
    }
  return out;
}
inline bool is_hyperbolic(const DieuMod& N, i32 shift = 0, u32 cap_ext = 8) {
  return hyperbolic_basis(N, shift, cap_ext).has_value();
}

// ---------------------------------------------------------------------------
// rank-2 isometry invariant: (colength of N inside its dual, crisdisc)
// ---------------------------------------------------------------------------
struct Rank2Class {
  u32 colength = 0;
  CrisDisc cd;
  friend bool operator==(const Rank2Class&, const Rank2Class&) = default;
};
inline Rank2Class isometry_class_rank2(const DieuMod& N, i32 shift = 0,
                                       u32 cap_ext = 8) {
  require(N.rank == 2, "isometry_class_rank2: rank");
  i32 len = dieu_dual_length(N, shift);
  require(len >= 0, "isometry_class_rank2: module exceeds its dual");
  return {(u32)len, crisdisc(N, shift, cap_ext)};
}

// ---------------------------------------------------------------------------
// Morita doubling: (M, phi) -> (M + M, psi) with psi = [[0, G], [-G, 0]],
// which is perfect antisymmetric iff phi is perfect symmetric; the 2x2
// matrix units act by block bookkeeping and commute with F and V.
// ---------------------------------------------------------------------------
struct MoritaDouble {
  DieuMod M2;        // doubled module, no symmetric gram attached
  RMat psi;          // antisymmetric numerator Gram
  std::array<RMat, 4> eu;  // matrix units e11, e12, e21, e22 on row vectors
};
inline MoritaDouble morita_double(const DieuMod& M) {
  const ZqCtx& W = *M.W;
  require(M.gram.has_value(), "morita_double: no pairing");
  u32 r = M.rank;
  MoritaDouble D;
  D.M2.W = M.W;
  D.M2.rank = 2 * r;
  D.M2.prec = M.prec;
  auto dbl = [&](const RMat& A) {
    RMat B(2 * r, 2 * r);
    for (u32 i = 0; i < r; ++i)
      for (u32 j = 0; j < r; ++j) {
        B.at(i, j) = A.at(i, j);
        B.at(r + i, r + j) = A.at(i, j);
      }
    return B;
  };
  D.M2.AF = dbl(M.AF);
  D.M2.AV = dbl(M.AV);
  D.psi = RMat(2 * r, 2 * r);
  for (u32 i = 0; i < r; ++i)
    for (u32 j = 0; j < r; ++j) {
      D.psi.at(i, r + j) = M.gram->at(i, j);
      D.psi.at(r + i, j) = W.neg(M.gram->at(i, j));
    }
  for (u32 a = 0; a < 2; ++a)
    for (u32 b = 0; b < 2; ++b) {
      RMat E(2 * r, 2 * r);
      for (u32 i = 0; i < r; ++i) E.at(a * r + i, b * r + i) = W.one();
      D.eu[2 * a + b] = E;
    }
  return D;
}
inline DieuMod morita_undouble(const MoritaDouble& D) {
  const ZqCtx& W = *D.M2.W;
  u32 r = D.M2.rank / 2;
  DieuMod M;
  M.W = D.M2.W;
  M.rank = r;
  M.prec = D.M2.prec;
  auto cut = [&](const RMat& A) {
    RMat B(r, r);
    for (u32 i = 0; i < r; ++i)
      for (u32 j = 0; j < r; ++j) B.at(i, j) = A.at(i, j);
    return B;
  };
  M.AF = cut(D.M2.AF);
  M.AV = cut(D.M2.AV);
  RMat G(r, r);
  for (u32 i = 0; i < r; ++i)
    for (u32 j = 0; j < r; ++j) G.at(i, j) = D.psi.at(i, r + j);
  M.gram = G;
  (void)W;
  return M;
}

}  // namespace dieulat
