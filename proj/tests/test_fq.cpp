#include <doctest.h>

#include "dieulat/fq.hpp"

using namespace dieulat;

static std::vector<u32> mod_coeffs(const FqCtx& F) {
  return std::vector<u32>(F.modulus.begin(), F.modulus.begin() + F.m + 1);
}

TEST_CASE("minimal polynomials match the standard compatible system") {
  // little-endian coefficient lists
  CHECK(mod_coeffs(*FqCtx::get(3, 1)) == std::vector<u32>{1, 1});
  CHECK(mod_coeffs(*FqCtx::get(3, 2)) == std::vector<u32>{2, 2, 1});
  CHECK(mod_coeffs(*FqCtx::get(3, 4)) == std::vector<u32>{2, 0, 0, 2, 1});
  CHECK(mod_coeffs(*FqCtx::get(5, 1)) == std::vector<u32>{3, 1});
  CHECK(mod_coeffs(*FqCtx::get(5, 2)) == std::vector<u32>{2, 4, 1});
}

TEST_CASE("field arithmetic axioms on random elements") {
  for (auto [p, m] : {std::pair<u32, u32>{3, 2}, {3, 4}, {5, 2}, {3, 1}}) {
    auto F = FqCtx::get(p, m);
    Rng rng(17 * p + m);
    for (int it = 0; it < 50; ++it) {
      Fel a = F->random(rng), b = F->random(rng), c = F->random(rng);
      CHECK(F->mul(a, F->add(b, c)) == F->add(F->mul(a, b), F->mul(a, c)));
      CHECK(F->mul(a, b) == F->mul(b, a));
      CHECK(F->sub(a, a) == F->zero());
      if (!F->is_zero(a)) {
        CHECK(F->mul(a, F->inv(a)) == F->one());
      }
    }
    // multiplicative generator really generates
    u64 q = F->q();
    CHECK(F->pow(F->gen(), q - 1) == F->one());
    for (u64 l : factor_trial(q - 1)) {
      CHECK_FALSE(F->pow(F->gen(), (q - 1) / l) == F->one());
    }
  }
}

TEST_CASE("frobenius is the p-power map and has order m") {
  for (auto [p, m] : {std::pair<u32, u32>{3, 4}, {5, 2}, {3, 6}}) {
    auto F = FqCtx::get(p, m);
    Rng rng(99 + p + m);
    for (int it = 0; it < 30; ++it) {
      Fel a = F->random(rng);
      CHECK(F->frob(a) == F->pow(a, p));
      CHECK(F->frob_k(a, m) == a);
      CHECK(F->frob_k(F->frob_k(a, -1), 1) == a);
    }
  }
}

TEST_CASE("subfield embeddings are compatible ring maps") {
  auto F2 = FqCtx::get(3, 2);
  auto F4 = FqCtx::get(3, 4);
  Rng rng(5);
  for (int it = 0; it < 40; ++it) {
    Fel a = F2->random(rng), b = F2->random(rng);
    Fel ea = F4->embed_from(*F2, a), eb = F4->embed_from(*F2, b);
    CHECK(F4->mul(ea, eb) == F4->embed_from(*F2, F2->mul(a, b)));
    CHECK(F4->add(ea, eb) == F4->embed_from(*F2, F2->add(a, b)));
    CHECK(F4->in_subfield(ea, 2));
    CHECK(F4->project_to(*F2, ea) == a);
  }
  // the compatibility norm relation between the two generators
  Fel g4 = F4->gen();
  u64 q4 = F4->q(), q2 = F2->q();
  CHECK(F4->pow(g4, (q4 - 1) / (q2 - 1)) == F4->embed_from(*F2, F2->gen()));
  // prime field embeds as constants
  auto F1 = FqCtx::get(3, 1);
  CHECK(F4->embed_from(*F1, F1->from_int(2)) == F4->from_int(2));
}

TEST_CASE("index round trips and squareness") {
  auto F = FqCtx::get(3, 2);
  for (u64 i = 0; i < F->q(); ++i) {
    CHECK(F->to_index(F->from_index(i)) == i);
  }
  // in F_9 exactly (q-1)/2 = 4 nonzero squares
  int sq = 0;
  for (u64 i = 1; i < F->q(); ++i)
    if (F->is_square(F->from_index(i))) ++sq;
  CHECK(sq == 4);
}
