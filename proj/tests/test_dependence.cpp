#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <random>
#include <vector>

#include "mixfield/dependence.hpp"
#include "mixfield/errors.hpp"
#include "mixfield/nu.hpp"

using namespace mixfield;

namespace {

// Row/column labels 0..k-1 as singleton tuples.
std::vector<Label> labels(int k) {
  std::vector<Label> out;
  for (int i = 0; i < k; ++i) out.push_back({i});
  return out;
}

JointTable fair_product() {
  Rational q(1, 4);
  return JointTable::from_cells(labels(2), labels(2), {{q, q}, {q, q}});
}

JointTable diagonal() {
  Rational h(1, 2), z(0);
  return JointTable::from_cells(labels(2), labels(2), {{h, z}, {z, h}});
}

// Random joint table with exact rational cells summing to 1: draws integer
// weights and normalizes by the total.
JointTable random_table(std::mt19937_64& gen, int max_side) {
  int r = 2 + static_cast<int>(gen() % static_cast<std::uint64_t>(max_side - 1));
  int c = 2 + static_cast<int>(gen() % static_cast<std::uint64_t>(max_side - 1));
  std::vector<std::vector<std::int64_t>> w(r, std::vector<std::int64_t>(c));
  std::int64_t total = 0;
  for (auto& row : w)
    for (auto& x : row) {
      x = static_cast<std::int64_t>(gen() % 10);
      total += x;
    }
  if (total == 0) {
    w[0][0] = 1;
    total = 1;
  }
  std::vector<std::vector<Rational>> cells(r, std::vector<Rational>(c));
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) cells[i][j] = Rational(w[i][j], total);
  return JointTable::from_cells(labels(r), labels(c), std::move(cells));
}

}  // namespace

TEST_CASE("from_cells validates, derives marginals, drops empty lines") {
  JointTable t = fair_product();
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 2);
  CHECK(t.row_probs[0] == Rational(1, 2));
  CHECK(t.col_probs[1] == Rational(1, 2));

  // an all-zero column disappears
  Rational h(1, 2), z(0);
  JointTable d =
      JointTable::from_cells(labels(2), labels(3), {{h, z, z}, {z, h, z}});
  CHECK(d.cols() == 2);
  CHECK(d.rows() == 2);

  CHECK_THROWS_AS(
      JointTable::from_cells(labels(2), labels(2),
                             {{Rational(1, 2), Rational(1, 2)},
                              {Rational(1, 2), Rational(-1, 2)}}),
      NegativeProb);
  CHECK_THROWS_AS(JointTable::from_cells(labels(2), labels(2),
                                         {{h, z}, {z, z}}),
                  SumNotOne);
}

TEST_CASE("from_split splits a joint law into a pair") {
  // (X, Y, Z) uniform on {0,1}^3; pair (X) vs (Y,Z) is independent
  DistBuilder b;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) b.add({x, y, z}, Rational(1, 8));
  FiniteDistribution cube = b.build();

  std::vector<int> rows{0}, cols{1, 2};
  JointTable t = JointTable::from_split(cube, rows, cols);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 4);
  CHECK(t.cells[0][0] == Rational(1, 8));

  // unsplit coordinates are summed out
  std::vector<int> r1{0}, c1{2};
  JointTable s = JointTable::from_split(cube, r1, c1);
  CHECK(s.rows() == 2);
  CHECK(s.cols() == 2);
  CHECK(s.cells[0][0] == Rational(1, 4));

  std::vector<int> overlap{0};
  CHECK_THROWS_AS(JointTable::from_split(cube, overlap, overlap), BadArity);
}

TEST_CASE("transpose flips the table") {
  JointTable t = diagonal();
  JointTable tt = t.transposed();
  CHECK(tt.rows() == t.cols());
  CHECK(tt.cells[0][1] == t.cells[1][0]);
  CHECK(tt.transposed() == t);
}

TEST_CASE("alpha of an independent pair is zero") {
  CHECK(alpha_exact(fair_product()) == Rational(0));
  CHECK(alpha_bruteforce(fair_product()) == Rational(0));
}

TEST_CASE("alpha of the fair diagonal pair is 1/4") {
  CHECK(alpha_exact(diagonal()) == Rational(1, 4));
  CHECK(alpha_bruteforce(diagonal()) == Rational(1, 4));
}

TEST_CASE("alpha of the sign-law split at theta = 1/2 is 1/8") {
  FiniteDistribution d = nu_dist(NuSpec(3, Rational(1, 2)));
  std::vector<int> rows{0}, cols{1, 2};
  JointTable t = JointTable::from_split(d, rows, cols);
  CHECK(alpha_exact(t) == Rational(1, 8));
  CHECK(alpha_bruteforce(t) == Rational(1, 8));
}

TEST_CASE("alpha of the full-parity split at m=4 is 1/4") {
  FiniteDistribution d = nu_dist(NuSpec(4, Rational(1)));
  std::vector<int> rows{0, 1}, cols{2, 3};
  JointTable t = JointTable::from_split(d, rows, cols);
  CHECK(alpha_exact(t) == Rational(1, 4));
  CHECK(alpha_bruteforce(t) == Rational(1, 4));
}

TEST_CASE("single-atom row variable gives alpha zero") {
  JointTable t = JointTable::from_cells(
      labels(1), labels(2), {{Rational(1, 3), Rational(2, 3)}});
  CHECK(alpha_exact(t) == Rational(0));
  CHECK(alpha_bruteforce(t) == Rational(0));
}

TEST_CASE("alpha caps throw instead of truncating") {
  // 13x13 identity-style table exceeds the brute-force default cap
  int k = 13;
  std::vector<std::vector<Rational>> cells(k, std::vector<Rational>(k, Rational(0)));
  for (int i = 0; i < k; ++i) cells[i][i] = Rational(1, k);
  JointTable t = JointTable::from_cells(labels(k), labels(k), cells);
  CHECK_THROWS_AS(alpha_bruteforce(t), TooManyAtoms);
  CHECK_NOTHROW(alpha_exact(t));
  CHECK_THROWS_AS(alpha_exact(t, 12), TooManyAtoms);
}

TEST_CASE("rho of an independent pair is zero and of the diagonal is one") {
  CHECK(rho_svd(fair_product()) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rho_svd(diagonal()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rho of a sign-law split equals the bias") {
  FiniteDistribution d = nu_dist(NuSpec(5, Rational(3, 4)));
  std::vector<int> rows{0, 2}, cols{1, 3, 4};
  JointTable t = JointTable::from_split(d, rows, cols);
  CHECK(rho_svd(t) == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("rho of a 1xN table is zero") {
  JointTable t = JointTable::from_cells(
      labels(1), labels(3),
      {{Rational(1, 3), Rational(1, 3), Rational(1, 3)}});
  CHECK(rho_svd(t) == 0.0);
}

TEST_CASE("rho functions achieve the reported correlation") {
  FiniteDistribution d = nu_dist(NuSpec(3, Rational(1, 2)));
  std::vector<int> rows{0}, cols{1, 2};
  JointTable t = JointTable::from_split(d, rows, cols);
  RhoFunctions rf = rho_svd_functions(t);
  CHECK(rf.rho == doctest::Approx(0.5).epsilon(1e-9));
  REQUIRE(rf.f_row.size() == t.rows());
  REQUIRE(rf.g_col.size() == t.cols());

  // empirical correlation of (f, g) under the table equals rho; both have
  // mean 0 and variance 1 under their marginals
  double mean_f = 0, mean_g = 0, var_f = 0, var_g = 0, cov = 0;
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c)
      cov += t.cells[r][c].to_double() * rf.f_row[r] * rf.g_col[c];
  for (std::size_t r = 0; r < t.rows(); ++r) {
    mean_f += t.row_probs[r].to_double() * rf.f_row[r];
    var_f += t.row_probs[r].to_double() * rf.f_row[r] * rf.f_row[r];
  }
  for (std::size_t c = 0; c < t.cols(); ++c) {
    mean_g += t.col_probs[c].to_double() * rf.g_col[c];
    var_g += t.col_probs[c].to_double() * rf.g_col[c] * rf.g_col[c];
  }
  CHECK(mean_f == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(mean_g == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(var_f == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(var_g == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(cov) == doctest::Approx(rf.rho).epsilon(1e-9));
}

TEST_CASE("tensor product multiplies cells and respects the cap") {
  std::vector<JointTable> fs{diagonal(), fair_product()};
  JointTable p = tensor_product(fs);
  CHECK(p.rows() == 4);
  CHECK(p.cols() == 4);
  CHECK(p.cells[0][0] == Rational(1, 8));
  CHECK_THROWS_AS(tensor_product(fs, 8), TooManyAtoms);
}

TEST_CASE("maximal correlation of independent joins is the factor maximum") {
  auto split_table = [](Rational theta) {
    FiniteDistribution d = nu_dist(NuSpec(3, theta));
    std::vector<int> rows{0}, cols{1, 2};
    return JointTable::from_split(d, rows, cols);
  };
  std::vector<JointTable> fs{split_table(Rational(1, 2)),
                             split_table(Rational(1, 4))};
  CHECK(csaki_fischer_join(fs) == doctest::Approx(0.5).epsilon(1e-9));

  CsakiFischerCheck chk = csaki_fischer_verify(fs);
  CHECK(chk.factor_max == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(chk.delta < 1e-8);

  std::vector<JointTable> one{split_table(Rational(1, 3))};
  CHECK(csaki_fischer_join(one) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-9));

  std::vector<JointTable> zeros{fair_product(), fair_product(), fair_product()};
  CHECK(csaki_fischer_join(zeros) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("fuzz: exact alpha equals brute force and 4 alpha <= rho") {
  std::mt19937_64 gen(0xA1FA);
  for (int trial = 0; trial < 300; ++trial) {
    JointTable t = random_table(gen, 5);
    Rational a = alpha_exact(t);
    CHECK(a == alpha_bruteforce(t));
    double rho = rho_svd(t);
    CHECK(4.0 * a.to_double() <= rho + 1e-9);
    // alpha and rho are symmetric in the two variables
    CHECK(alpha_exact(t.transposed()) == a);
    CHECK(rho_svd(t.transposed()) == doctest::Approx(rho).epsilon(1e-9));
  }
}

TEST_CASE("alpha is invariant under row and column permutations") {
  std::mt19937_64 gen(0xBEEF);
  for (int trial = 0; trial < 50; ++trial) {
    JointTable t = random_table(gen, 5);
    // rotate rows by one position
    std::vector<std::vector<Rational>> cells = t.cells;
    std::rotate(cells.begin(), cells.begin() + 1, cells.end());
    std::vector<Label> rl = t.row_labels;
    std::rotate(rl.begin(), rl.begin() + 1, rl.end());
    JointTable rot = JointTable::from_cells(rl, t.col_labels, cells);
    CHECK(alpha_exact(rot) == alpha_exact(t));
    CHECK(rho_svd(rot) == doctest::Approx(rho_svd(t)).epsilon(1e-9));
  }
}
