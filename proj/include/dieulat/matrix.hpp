#pragma once

#include "dieulat/galois_ring.hpp"

namespace dieulat {

// Dense matrix over a chain ring W_N(F_q).  All helpers take the ring
// context explicitly; the matrix itself is just storage.
struct RMat {
  u32 r = 0, c = 0;
  std::vector<Zel> a;

  RMat() = default;
  RMat(u32 r_, u32 c_) : r(r_), c(c_), a((size_t)r_ * c_) {}
  Zel& at(u32 i, u32 j) { return a[(size_t)i * c + j]; }
  const Zel& at(u32 i, u32 j) const { return a[(size_t)i * c + j]; }
  friend bool operator==(const RMat&, const RMat&) = default;
};

inline RMat mat_identity(const ZqCtx& W, u32 r) {
  RMat I(r, r);
  for (u32 i = 0; i < r; ++i) I.at(i, i) = W.one();
  return I;
}

inline RMat mat_add(const ZqCtx& W, const RMat& A, const RMat& B) {
  require(A.r == B.r && A.c == B.c, "mat_add: shape");
  RMat R(A.r, A.c);
  for (size_t i = 0; i < R.a.size(); ++i) R.a[i] = W.add(A.a[i], B.a[i]);
  return R;
}
inline RMat mat_sub(const ZqCtx& W, const RMat& A, const RMat& B) {
  require(A.r == B.r && A.c == B.c, "mat_sub: shape");
  RMat R(A.r, A.c);
  for (size_t i = 0; i < R.a.size(); ++i) R.a[i] = W.sub(A.a[i], B.a[i]);
  return R;
}
inline RMat mat_neg(const ZqCtx& W, const RMat& A) {
  RMat R(A.r, A.c);
  for (size_t i = 0; i < R.a.size(); ++i) R.a[i] = W.neg(A.a[i]);
  return R;
}
inline RMat mat_mul(const ZqCtx& W, const RMat& A, const RMat& B) {
  require(A.c == B.r, "mat_mul: shape");
  RMat R(A.r, B.c);
  for (u32 i = 0; i < A.r; ++i)
    for (u32 k = 0; k < A.c; ++k) {
      if (W.is_zero(A.at(i, k))) continue;
      for (u32 j = 0; j < B.c; ++j)
        R.at(i, j) = W.add(R.at(i, j), W.mul(A.at(i, k), B.at(k, j)));
    }
  return R;
}
inline RMat mat_scale(const ZqCtx& W, const Zel& s, const RMat& A) {
  RMat R(A.r, A.c);
  for (size_t i = 0; i < R.a.size(); ++i) R.a[i] = W.mul(s, A.a[i]);
  return R;
}
inline RMat mat_mul_pk(const ZqCtx& W, const RMat& A, u32 k) {
  RMat R(A.r, A.c);
  for (size_t i = 0; i < R.a.size(); ++i) R.a[i] = W.mul_pk(A.a[i], k);
  return R;
}
inline RMat mat_div_pk(const ZqCtx& W, const RMat& A, u32 k) {
  RMat R(A.r, A.c);
  for (size_t i = 0; i < R.a.size(); ++i) R.a[i] = W.div_pk(A.a[i], k);
  return R;
}
inline RMat mat_transpose(const RMat& A) {
  RMat R(A.c, A.r);
  for (u32 i = 0; i < A.r; ++i)
    for (u32 j = 0; j < A.c; ++j) R.at(j, i) = A.at(i, j);
  return R;
}
inline RMat mat_frob(const ZqCtx& W, const RMat& A, i64 k = 1) {
  RMat R(A.r, A.c);
  for (size_t i = 0; i < R.a.size(); ++i) R.a[i] = W.frob_k(A.a[i], k);
  return R;
}
inline bool mat_is_zero(const ZqCtx& W, const RMat& A) {
  for (auto& x : A.a)
    if (!W.is_zero(x)) return false;
  return true;
}
inline u32 mat_min_val(const ZqCtx& W, const RMat& A) {
  u32 v = W.n;
  for (auto& x : A.a) v = std::min(v, W.val(x));
  return v;
}
inline RMat mat_random(const ZqCtx& W, u32 r, u32 c, Rng& rng) {
  RMat R(r, c);
  for (auto& x : R.a) x = W.random(rng);
  return R;
}
inline RMat mat_vstack(const RMat& A, const RMat& B) {
  if (A.r == 0) return B;
  if (B.r == 0) return A;
  require(A.c == B.c, "mat_vstack: shape");
  RMat R(A.r + B.r, A.c);
  std::copy(A.a.begin(), A.a.end(), R.a.begin());
  std::copy(B.a.begin(), B.a.end(), R.a.begin() + A.a.size());
  return R;
}
inline RMat mat_hstack(const RMat& A, const RMat& B) {
  require(A.r == B.r, "mat_hstack: shape");
  RMat R(A.r, A.c + B.c);
  for (u32 i = 0; i < A.r; ++i) {
    for (u32 j = 0; j < A.c; ++j) R.at(i, j) = A.at(i, j);
    for (u32 j = 0; j < B.c; ++j) R.at(i, A.c + j) = B.at(i, j);
  }
  return R;
}

// Howell canonical form.  Pivot of each nonzero row is p^v for some v < N;
// entries above a pivot are reduced modulo that pivot.  The row span as a
// W_N-module is preserved and the form is unique, so equality of spans is
// equality of forms.
struct Howell {
  RMat H;                   // nonzero rows only
  std::vector<u32> piv_col;
  std::vector<u32> piv_val;
};

namespace detail {
// reduce x modulo p^v coefficient-wise; returns quotient via out param
inline Zel mod_pk(const ZqCtx& W, const Zel& x, u32 v, Zel& quot) {
  u64 pv = pow_u64(W.p, std::min(v, W.n));
  Zel r{}, q{};
  for (u32 i = 0; i < W.m; ++i) {
    r.c[i] = x.c[i] % pv;
    q.c[i] = x.c[i] / pv;
  }
  quot = q;
  return r;
}
}  // namespace detail

inline Howell howell_form(const ZqCtx& W, const RMat& M) {
  // worklist of rows; saturation rows p^{N-v} * row are pushed whenever a
  // pivot has positive valuation, which is what distinguishes the Howell
  // form from a mere echelon form over a ring with zero divisors
  std::vector<std::vector<Zel>> rows;
  rows.reserve(M.r);
  for (u32 i = 0; i < M.r; ++i)
    rows.emplace_back(M.a.begin() + (size_t)i * M.c,
                      M.a.begin() + (size_t)(i + 1) * M.c);
  struct PivRow {
    std::vector<Zel> row;
    u32 col, val;
  };
  std::vector<PivRow> done;  // one per pivot column, ordered by column
  std::vector<std::vector<Zel>> work = std::move(rows);
  while (!work.empty()) {
    std::vector<Zel> row = std::move(work.back());
    work.pop_back();
    for (;;) {
      // find leading column and valuation
      u32 col = M.c, val = W.n;
      for (u32 j = 0; j < M.c; ++j)
        if (!W.is_zero(row[j])) {
          col = j;
          val = W.val(row[j]);
          break;
        }
      if (col == M.c) break;  // zero row
      // existing pivot in this column?
      auto it = std::find_if(done.begin(), done.end(),
                             [&](const PivRow& pr) { return pr.col == col; });
      if (it == done.end()) {
        // normalize: make pivot exactly p^val
        Zel u = W.inv(W.div_pk(row[col], val));
        for (u32 j = col; j < M.c; ++j) row[j] = W.mul(u, row[j]);
        if (val > 0) {
          // saturation row
          std::vector<Zel> sat(M.c);
          for (u32 j = 0; j < M.c; ++j)
            sat[j] = W.mul_pk(row[j], W.n - val);
          work.push_back(std::move(sat));
        }
        done.push_back(PivRow{std::move(row), col, val});
        break;
      }
      if (it->val <= val) {
        // eliminate with the existing pivot
        Zel q = W.div_pk(row[col], it->val);
        for (u32 j = col; j < M.c; ++j)
          row[j] = W.sub(row[j], W.mul(q, it->row[j]));
      } else {
        // new row has a better pivot: swap them and re-queue the old one
        Zel u = W.inv(W.div_pk(row[col], val));
        for (u32 j = col; j < M.c; ++j) row[j] = W.mul(u, row[j]);
        std::swap(row, it->row);
        it->val = val;
        if (val > 0) {
          std::vector<Zel> sat(M.c);
          for (u32 j = 0; j < M.c; ++j)
            sat[j] = W.mul_pk(it->row[j], W.n - val);
          work.push_back(std::move(sat));
        }
        // fall through: keep reducing the displaced row
      }
    }
  }
  std::sort(done.begin(), done.end(),
            [](const PivRow& a, const PivRow& b) { return a.col < b.col; });
  // reduce entries above each pivot
  for (size_t i = 0; i < done.size(); ++i)
    for (size_t k = 0; k < i; ++k) {
      Zel q;
      detail::mod_pk(W, done[k].row[done[i].col], done[i].val, q);
      if (!W.is_zero(q))
        for (u32 j = done[i].col; j < M.c; ++j)
          done[k].row[j] =
              W.sub(done[k].row[j], W.mul(q, done[i].row[j]));
    }
  Howell h;
  h.H = RMat((u32)done.size(), M.c);
  for (u32 i = 0; i < h.H.r; ++i) {
    std::copy(done[i].row.begin(), done[i].row.end(),
              h.H.a.begin() + (size_t)i * M.c);
    h.piv_col.push_back(done[i].col);
    h.piv_val.push_back(done[i].val);
  }
  return h;
}

// is x in the row span? (uses back-substitution against the Howell form)
inline bool in_span(const ZqCtx& W, const Howell& h, std::vector<Zel> x) {
  for (u32 i = 0; i < h.H.r; ++i) {
    u32 col = h.piv_col[i];
    if (W.is_zero(x[col])) continue;
    if (W.val(x[col]) < h.piv_val[i]) return false;
    Zel q = W.div_pk(x[col], h.piv_val[i]);
    for (u32 j = col; j < h.H.c; ++j)
      x[j] = W.sub(x[j], W.mul(q, h.H.at(i, j)));
  }
  for (auto& e : x)
    if (!W.is_zero(e)) return false;
  return true;
}

// left kernel: all v with v M = 0 (over W_N), via Howell of [M | I]
inline RMat left_kernel(const ZqCtx& W, const RMat& M) {
  RMat aug = mat_hstack(M, mat_identity(W, M.r));
  Howell h = howell_form(W, aug);
  std::vector<u32> keep;
  for (u32 i = 0; i < h.H.r; ++i)
    if (h.piv_col[i] >= M.c) keep.push_back(i);
  RMat K((u32)keep.size(), M.r);
  for (u32 i = 0; i < K.r; ++i)
    for (u32 j = 0; j < M.r; ++j) K.at(i, j) = h.H.at(keep[i], M.c + j);
  return K;
}

// characteristic polynomial by the Samuelson-Berkowitz recursion
// (division-free, so exact over the chain ring); coeffs little-endian,
// monic of degree r
inline std::vector<Zel> charpoly(const ZqCtx& W, const RMat& A) {
  require(A.r == A.c, "charpoly: square only");
  u32 nn = A.r;
  std::vector<Zel> pb{W.neg(A.at(nn - 1, nn - 1)), W.one()};
  for (u32 s = 1; s < nn; ++s) {
    u32 t = nn - 1 - s;  // row/col index of the new leading corner
    // R = A[t][t+1..], C = A[t+1..][t], B = trailing s x s block
    std::vector<Zel> v(s), w(s);  // w_k = R B^k C
    for (u32 i = 0; i < s; ++i) v[i] = A.at(t + 1 + i, t);
    for (u32 k = 0; k < s; ++k) {
      Zel acc = W.zero();
      for (u32 i = 0; i < s; ++i)
        acc = W.add(acc, W.mul(A.at(t, t + 1 + i), v[i]));
      w[k] = acc;
      if (k + 1 == s) break;
      std::vector<Zel> nv(s, W.zero());
      for (u32 i = 0; i < s; ++i)
        for (u32 j = 0; j < s; ++j)
          nv[i] = W.add(nv[i], W.mul(A.at(t + 1 + i, t + 1 + j), v[j]));
      v = std::move(nv);
    }
    std::vector<Zel> pa(s + 2, W.zero());
    // (x - a) * pb
    for (u32 i = 0; i <= s; ++i) {
      pa[i + 1] = W.add(pa[i + 1], pb[i]);
      pa[i] = W.sub(pa[i], W.mul(A.at(t, t), pb[i]));
    }
    // - sum_j x^j sum_{i=j+1..s} pb[i] w[i-1-j]
    for (u32 j = 0; j < s; ++j) {
      Zel acc = W.zero();
      for (u32 i = j + 1; i <= s; ++i)
        acc = W.add(acc, W.mul(pb[i], w[i - 1 - j]));
      pa[j] = W.sub(pa[j], acc);
    }
    pb = std::move(pa);
  }
  return pb;
}

inline Zel det(const ZqCtx& W, const RMat& A) {
  auto cp = charpoly(W, A);
  Zel d = cp[0];
  return (A.r % 2) ? W.neg(d) : d;
}

// adjugate through Cayley-Hamilton: adj(A) = (-1)^{r-1} (A^{r-1} +
// c_{r-1} A^{r-2} + ... + c_1 I); exact (no divisions)
inline RMat adjugate(const ZqCtx& W, const RMat& A) {
  u32 r = A.r;
  if (r == 1) return mat_identity(W, 1);
  auto cp = charpoly(W, A);
  RMat acc = mat_identity(W, r);  // Horner on A
  for (u32 i = r - 1; i >= 1; --i) {
    acc = mat_mul(W, acc, A);
    for (u32 d = 0; d < r; ++d)
      acc.at(d, d) = W.add(acc.at(d, d), cp[i]);
  }
  return (r % 2) ? acc : mat_neg(W, acc);
}

// inverse of a matrix with unit determinant
inline RMat mat_inv(const ZqCtx& W, const RMat& A) {
  Zel d = det(W, A);
  require(W.is_unit(d), "mat_inv: determinant is not a unit");
  return mat_scale(W, W.inv(d), adjugate(W, A));
}

// F_q Gaussian elimination utilities (rank-one precision questions live in
// the residue field)
struct FMat {
  u32 r = 0, c = 0;
  std::vector<Fel> a;
  FMat() = default;
  FMat(u32 r_, u32 c_) : r(r_), c(c_), a((size_t)r_ * c_) {}
  Fel& at(u32 i, u32 j) { return a[(size_t)i * c + j]; }
  const Fel& at(u32 i, u32 j) const { return a[(size_t)i * c + j]; }
};

// reduced row echelon form in place; returns pivot columns
inline std::vector<u32> fmat_rref(const FqCtx& F, FMat& M) {
  std::vector<u32> pivots;
  u32 row = 0;
  for (u32 col = 0; col < M.c && row < M.r; ++col) {
    u32 pr = M.r;
    for (u32 i = row; i < M.r; ++i)
      if (!F.is_zero(M.at(i, col))) {
        pr = i;
        break;
      }
    if (pr == M.r) continue;
    for (u32 j = 0; j < M.c; ++j) std::swap(M.at(row, j), M.at(pr, j));
    Fel inv = F.inv(M.at(row, col));
    for (u32 j = 0; j < M.c; ++j) M.at(row, j) = F.mul(inv, M.at(row, j));
    for (u32 i = 0; i < M.r; ++i) {
      if (i == row || F.is_zero(M.at(i, col))) continue;
      Fel f = M.at(i, col);
      for (u32 j = 0; j < M.c; ++j)
        M.at(i, j) = F.sub(M.at(i, j), F.mul(f, M.at(row, j)));
    }
    pivots.push_back(col);
    ++row;
  }
  return pivots;
}

inline u32 fmat_rank(const FqCtx& F, FMat M) {
  return (u32)fmat_rref(F, M).size();
}

// right kernel basis of an F_q matrix (solutions x of M x^T = 0, returned
// as rows)
inline FMat fmat_right_kernel(const FqCtx& F, FMat M) {
  auto piv = fmat_rref(F, M);
  std::vector<bool> is_piv(M.c, false);
  for (u32 cpos : piv) is_piv[cpos] = true;
  FMat K(M.c - (u32)piv.size(), M.c);
  u32 kr = 0;
  for (u32 j = 0; j < M.c; ++j) {
    if (is_piv[j]) continue;
    K.at(kr, j) = F.one();
    for (u32 i = 0; i < (u32)piv.size(); ++i)
      K.at(kr, piv[i]) = F.neg(M.at(i, j));
    ++kr;
  }
  return K;
}

// residue matrix of a chain-ring matrix
inline FMat mat_residue(const ZqCtx& W, const RMat& A) {
  FMat R(A.r, A.c);
  for (size_t i = 0; i < A.a.size(); ++i) R.a[i] = W.residue(A.a[i]);
  return R;
}

// Restriction of scalars: the W_N(F_p)-matrix of x |-> sigma^t(x) * A
// acting on row vectors, in the power basis of the ring generator.  Block
// (k,l) of the output represents the entry A[k][l].
inline RMat restrict_scalars(const ZqCtx& W, const ZqCtx& W1, const RMat& A,
                             i64 twist) {
  require(W1.m == 1 && W1.p == W.p && W1.n == W.n, "restrict_scalars: base");
  u32 m = W.m;
  // basis images under sigma^t
  std::vector<Zel> sig(m);
  for (u32 j = 0; j < m; ++j) {
    Zel gj{};
    gj.c[j] = 1;
    sig[j] = W.frob_k(gj, twist);
  }
  RMat B(A.r * m, A.c * m);
  for (u32 k = 0; k < A.r; ++k)
    for (u32 l = 0; l < A.c; ++l) {
      if (W.is_zero(A.at(k, l))) continue;
      for (u32 j = 0; j < m; ++j) {
        Zel img = W.mul(sig[j], A.at(k, l));  // image of g^j e_k in e_l slot
        for (u32 i = 0; i < m; ++i) {
          Zel v{};
          v.c[0] = img.c[i];
          B.at(k * m + j, l * m + i) = v;
        }
      }
    }
  return B;
}

// map a row vector over W_N(F_p) of length r*m back to length-r vector
// over W_N(F_q)
inline std::vector<Zel> unrestrict_vector(const ZqCtx& W,
                                          const std::vector<Zel>& v, u32 r) {
  std::vector<Zel> out(r, W.zero());
  for (u32 k = 0; k < r; ++k)
    for (u32 j = 0; j < W.m; ++j) out[k].c[j] = v[k * W.m + j].c[0];
  return out;
}

}  // namespace dieulat
