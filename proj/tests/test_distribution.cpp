#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <vector>

#include "mixfield/distribution.hpp"
#include "mixfield/errors.hpp"

using namespace mixfield;

namespace {

FiniteDistribution coin(Rational p_heads) {
  return FiniteDistribution::from_pairs(
      {{{0}, Rational(1) - p_heads}, {{1}, p_heads}});
}

}  // namespace

TEST_CASE("from_pairs validates and normalizes") {
  FiniteDistribution d = FiniteDistribution::from_pairs(
      {{{1}, Rational(1, 2)}, {{0}, Rational(1, 2)}});
  REQUIRE(d.size() == 2);
  CHECK(d.atoms()[0].first == Label{0});  // sorted by label
  CHECK(d.atoms()[1].first == Label{1});

  // zero-mass atoms are dropped
  FiniteDistribution z = FiniteDistribution::from_pairs(
      {{{0}, Rational(1)}, {{1}, Rational(0)}});
  CHECK(z.size() == 1);
  CHECK(z.prob({1}) == Rational(0));

  CHECK_THROWS_AS(FiniteDistribution::from_pairs({{{0}, Rational(1, 2)}}),
                  SumNotOne);
  CHECK_THROWS_AS(FiniteDistribution::from_pairs(
                      {{{0}, Rational(3, 2)}, {{1}, Rational(-1, 2)}}),
                  NegativeProb);
  CHECK_THROWS_AS(FiniteDistribution::from_pairs(
                      {{{0}, Rational(1, 2)}, {{0}, Rational(1, 2)}}),
                  DuplicateLabel);
}

TEST_CASE("prob and arity") {
  FiniteDistribution d = FiniteDistribution::from_pairs(
      {{{0, 0}, Rational(1, 4)}, {{0, 1}, Rational(1, 4)}, {{1, 0}, Rational(1, 2)}});
  CHECK(d.prob({0, 0}) == Rational(1, 4));
  CHECK(d.prob({1, 0}) == Rational(1, 2));
  CHECK(d.prob({1, 1}) == Rational(0));
  CHECK(d.arity() == 2);
}

TEST_CASE("DistBuilder merges duplicate labels") {
  DistBuilder b;
  b.add({0}, Rational(1, 4));
  b.add({1}, Rational(1, 2));
  b.add({0}, Rational(1, 4));
  FiniteDistribution d = b.build();
  CHECK(d.size() == 2);
  CHECK(d.prob({0}) == Rational(1, 2));
  CHECK(d.prob({1}) == Rational(1, 2));
}

TEST_CASE("marginal selects and reorders coordinates") {
  // joint on (X, Y) with X fair and Y = X
  FiniteDistribution d = FiniteDistribution::from_pairs(
      {{{0, 0}, Rational(1, 2)}, {{1, 1}, Rational(1, 2)}});
  std::vector<int> first{0};
  FiniteDistribution mx = marginal(d, first);
  CHECK(mx == coin(Rational(1, 2)));

  std::vector<int> swapped{1, 0};
  FiniteDistribution ms = marginal(d, swapped);
  CHECK(ms == d);  // symmetric support survives the swap

  std::vector<int> bad{2};
  CHECK_THROWS_AS(marginal(d, bad), BadArity);
  std::vector<int> dup{0, 0};
  CHECK_THROWS_AS(marginal(d, dup), BadArity);
}

TEST_CASE("marginal of a product recovers the factors") {
  std::vector<FiniteDistribution> fs{coin(Rational(1, 3)), coin(Rational(1, 4))};
  FiniteDistribution p = product(fs);
  CHECK(p.arity() == 2);
  std::vector<int> c0{0}, c1{1};
  CHECK(marginal(p, c0) == fs[0]);
  CHECK(marginal(p, c1) == fs[1]);
  CHECK(p.prob({1, 1}) == Rational(1, 12));
}

TEST_CASE("push_forward adds mass of merged images") {
  FiniteDistribution d = FiniteDistribution::from_pairs(
      {{{-1}, Rational(1, 4)}, {{0}, Rational(1, 4)}, {{1}, Rational(1, 2)}});
  FiniteDistribution img =
      push_forward(d, [](const Label& l) { return Label{l[0] * l[0]}; });
  CHECK(img.prob({0}) == Rational(1, 4));
  CHECK(img.prob({1}) == Rational(3, 4));
}

TEST_CASE("is_independent is an exact factorization test") {
  std::vector<FiniteDistribution> fs{coin(Rational(1, 2)), coin(Rational(1, 3))};
  FiniteDistribution p = product(fs);
  CHECK(is_independent(p, {{0}, {1}}));
  CHECK(is_independent(p, {{0, 1}}));  // trivial grouping

  // perfectly correlated pair
  FiniteDistribution corr = FiniteDistribution::from_pairs(
      {{{0, 0}, Rational(1, 2)}, {{1, 1}, Rational(1, 2)}});
  CHECK_FALSE(is_independent(corr, {{0}, {1}}));

  // pairwise independent but not jointly: (X, Y, X XOR Y)
  DistBuilder b;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      b.add({x, y, x ^ y}, Rational(1, 4));
  FiniteDistribution xorj = b.build();
  CHECK(is_independent(marginal(xorj, std::vector<int>{0, 1}), {{0}, {1}}));
  CHECK(is_independent(marginal(xorj, std::vector<int>{0, 2}), {{0}, {1}}));
  CHECK(is_independent(marginal(xorj, std::vector<int>{1, 2}), {{0}, {1}}));
  CHECK_FALSE(is_independent(xorj, {{0}, {1}, {2}}));
  CHECK_FALSE(is_independent(xorj, {{0, 1}, {2}}));

  CHECK_THROWS_AS(is_independent(p, {{0}}), BadArity);        // not a partition
  CHECK_THROWS_AS(is_independent(p, {{0}, {0, 1}}), BadArity);
}

TEST_CASE("product of three factors has multiplicative probabilities") {
  std::vector<FiniteDistribution> fs{coin(Rational(1, 2)), coin(Rational(1, 3)),
                                     coin(Rational(1, 5))};
  FiniteDistribution p = product(fs);
  CHECK(p.size() == 8);
  CHECK(p.prob({1, 0, 1}) == Rational(1, 2) * Rational(2, 3) * Rational(1, 5));
  CHECK(is_independent(p, {{0}, {1}, {2}}));
}

TEST_CASE("uniform_signs is the fair sign vector law") {
  FiniteDistribution u = uniform_signs(3);
  CHECK(u.size() == 8);
  CHECK(u.arity() == 3);
  for (const auto& [l, p] : u.atoms()) {
    CHECK(p == Rational(1, 8));
    for (Value v : l) CHECK((v == -1 || v == 1));
  }
  CHECK(u.prob({-1, 1, -1}) == Rational(1, 8));
  CHECK_THROWS_AS(uniform_signs(-1), TooManyAtoms);
  CHECK_THROWS_AS(uniform_signs(21), TooManyAtoms);
}

TEST_CASE("ProductSpace counts atoms without materializing") {
  ProductSpace ps;
  for (int i = 0; i < 3; ++i) ps.factors.push_back(uniform_signs(4));
  CHECK(static_cast<unsigned long long>(ps.atom_count()) == 4096ULL);
  FiniteDistribution full = ps.materialize();
  CHECK(full.size() == 4096);
  CHECK(full.arity() == 12);
  CHECK(full.prob(Label(12, 1)) == Rational(1, 4096));
}

TEST_CASE("random seeded distributions keep exact total mass") {
  std::mt19937_64 gen(777);
  for (int trial = 0; trial < 50; ++trial) {
    int k = 2 + static_cast<int>(gen() % 7);
    DistBuilder b;
    Rational left(1);
    for (int i = 0; i + 1 < k; ++i) {
      Rational w = left * Rational(1, 1 + static_cast<std::int64_t>(gen() % 4));
      b.add({i}, w);
      left -= w;
    }
    b.add({k - 1}, left);
    FiniteDistribution d = b.build();
    Rational total(0);
    for (const auto& [l, p] : d.atoms()) total += p;
    CHECK(total == Rational(1));
  }
}
