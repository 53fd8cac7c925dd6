#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "mixfield/dependence.hpp"
#include "mixfield/errors.hpp"
#include "mixfield/field.hpp"
#include "mixfield/nu.hpp"
#include "mixfield/sampler.hpp"

using namespace mixfield;

namespace {

IndexPoint pt(std::vector<std::int32_t> c) { return IndexPoint(std::move(c)); }

}  // namespace

TEST_CASE("counter stream reproduces itself and separates substreams") {
  PhiloxStream a(42, 1, 2, 3), b(42, 1, 2, 3), c(42, 1, 2, 4);
  bool same = true, diff = false;
  for (int i = 0; i < 64; ++i) {
    std::uint32_t x = a.next_u32();
    same = same && (x == b.next_u32());
    diff = diff || (x != c.next_u32());
  }
  CHECK(same);
  CHECK(diff);

  PhiloxStream d(7, 0, 0, 0);
  for (int i = 0; i < 1000; ++i) {
    double u = d.next_double53();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  PhiloxStream e(7, 0, 0, 1);
  for (int i = 0; i < 1000; ++i) CHECK(e.next_below(6) < 6);
  CHECK(e.next_below(1) == 0);
  CHECK_THROWS_AS(e.next_below(0), Error);

  PhiloxStream g(7, 0, 0, 2);
  for (int i = 0; i < 50; ++i) {
    CHECK(g.bernoulli(Rational(1)));
    CHECK_FALSE(g.bernoulli(Rational(0)));
  }
  PhiloxStream h(7, 0, 0, 3);
  int heads = 0;
  for (int i = 0; i < 10000; ++i) heads += h.bernoulli(Rational(1, 2)) ? 1 : 0;
  CHECK(std::abs(heads - 5000) < 250);  // 5 sigma
  CHECK_THROWS_AS(h.bernoulli(Rational(3, 2)), Error);
}

TEST_CASE("sampling is bit-identical across runs and thread counts") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));
  IndexSet w = parse_window("{0..4}^1");
  SampleBatch one = sample_window(f, w, 400, 99, 1);
  for (int threads : {1, 2, 8}) {
    SampleBatch again = sample_window(f, w, 400, 99, threads);
    CHECK(again.rows == one.rows);
  }
  SampleBatch other = sample_window(f, w, 400, 100, 1);
  CHECK(other.rows != one.rows);

  CHECK_THROWS_AS(sample_window(f, IndexSet{}, 1, 0), Error);
  CHECK_THROWS_AS(sample_window(f, parse_window("{0..1}^2"), 1, 0),
                  DimensionMismatch);
}

TEST_CASE("unbiased field has uniform site codes") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(0));
  IndexSet w = parse_window("{0..4}^1");
  const std::size_t n = 100000;
  SampleBatch batch = sample_window(f, w, n, 2024);
  for (std::size_t s = 0; s < w.size(); ++s) {
    std::vector<std::size_t> count(8, 0);
    for (const auto& row : batch.rows)
      ++count[static_cast<std::size_t>(static_cast<std::uint64_t>(row[s]))];
    const double p = 1.0 / 8.0;
    const double sigma = std::sqrt(p * (1 - p) * static_cast<double>(n));
    for (std::size_t v = 0; v < 8; ++v)
      CHECK(std::abs(static_cast<double>(count[v]) -
                     p * static_cast<double>(n)) < 4.0 * sigma);
  }
}

TEST_CASE("fully biased copies always multiply to plus one") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(1));
  IndexSet w = parse_window("{0..6}^1");
  SampleBatch batch = sample_window(f, w, 1500, 5);
  for (std::size_t r = 0; r < batch.rows.size(); ++r) {
    for (std::int32_t off : {0, 1, 2}) {  // translates {0,2,4}+off fit in the window
      std::vector<int> signs = copy_signs(f, batch, r, 0, pt({off}));
      int prod = 1;
      for (int s : signs) prod *= s;
      CHECK(prod == 1);
    }
  }
  CHECK_THROWS_AS(copy_signs(f, batch, 0, 0, pt({3})), BadSubset);
}

TEST_CASE("empirical correlation of the optimal pair functions matches rho") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));
  IndexSet s = IndexSet::of({pt({0})}), t = IndexSet::of({pt({2}), pt({4})});
  JointTable table = joint_table(f, s, t);
  RhoFunctions fns = rho_svd_functions(table);
  REQUIRE(fns.rho == doctest::Approx(0.75).epsilon(1e-9));

  std::map<Label, std::size_t> row_of, col_of;
  for (std::size_t i = 0; i < table.rows(); ++i) row_of[table.row_labels[i]] = i;
  for (std::size_t j = 0; j < table.cols(); ++j) col_of[table.col_labels[j]] = j;

  IndexSet w = s.united(t);  // sites in sorted order: 0, 2, 4
  const std::size_t n = 100000;
  SampleBatch batch = sample_window(f, w, n, 17);
  double acc = 0.0;
  for (const auto& row : batch.rows) {
    Label ls{static_cast<Value>(static_cast<std::uint64_t>(row[0]))};
    Label lt{static_cast<Value>(static_cast<std::uint64_t>(row[1])),
             static_cast<Value>(static_cast<std::uint64_t>(row[2]))};
    acc += fns.f_row.at(row_of.at(ls)) * fns.g_col.at(col_of.at(lt));
  }
  CHECK(std::abs(acc / static_cast<double>(n) - 0.75) < 0.02);
}

TEST_CASE("uniformized values stay in their cells and look uniform") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));
  IndexSet w = parse_window("{0..4}^1");
  const std::size_t n = 100000;
  SampleBatch batch = uniformize(sample_window(f, w, n, 31), f, 77);
  REQUIRE(batch.uniformized.has_value());

  CHECK(deuniformize_check(batch, f));

  // per-site and pooled distance to the uniform law on [0,1)
  const double bound = 1.63 / std::sqrt(static_cast<double>(n));
  std::vector<double> pooled;
  pooled.reserve(n * w.size());
  for (std::size_t s = 0; s < w.size(); ++s) {
    std::vector<double> col(n);
    for (std::size_t r = 0; r < n; ++r)
      pooled.push_back(col[r] = (*batch.uniformized)[r][s]);
    CHECK(ks_uniform_statistic(col) < bound);
  }
  CHECK(ks_uniform_statistic(pooled) < bound);

  // the transform is a deterministic function of (seed2, row, column)
  SampleBatch again = uniformize(sample_window(f, w, n, 31), f, 77);
  CHECK(*again.uniformized == *batch.uniformized);

  // shifting a value into another cell breaks the exact inversion
  SampleBatch broken = batch;
  (*broken.uniformized)[0][0] = std::fmod((*broken.uniformized)[0][0] + 0.5, 1.0);
  CHECK_FALSE(deuniformize_check(broken, f));

  SampleBatch bare = sample_window(f, w, 10, 31);
  CHECK_THROWS_AS(deuniformize_check(bare, f), MissingUniformized);

  FieldModel wide = lemma42_field(2, 2, 3);  // 75-bit site alphabet
  SampleBatch small = sample_window(wide, IndexSet::of({pt({0, 0})}), 2, 1);
  CHECK_THROWS_AS(uniformize(small, wide, 1), TooManyAtoms);
}

TEST_CASE("empirical laws converge: site marginal and copy joint") {
  // single-site code frequencies against the exact marginal
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));
  IndexSet w = parse_window("{0..4}^1");
  const std::size_t n = 100000;
  SampleBatch batch = sample_window(f, w, n, 8);
  FiniteDistribution marg = marginal_of_point(f, pt({2}));
  std::size_t site = *w.index_of(pt({2}));
  std::map<Value, std::size_t> freq;
  for (const auto& row : batch.rows)
    ++freq[static_cast<Value>(static_cast<std::uint64_t>(row[site]))];
  double tv = 0.0;
  for (Value v = 0; v < 8; ++v) {
    double emp = static_cast<double>(freq[v]) / static_cast<double>(n);
    tv += std::abs(emp - marg.prob(Label{v}).to_double());
  }
  CHECK(tv / 2.0 < 0.01);

  // sign vectors of one fully visible copy against the biased law
  FieldModel g = lemma31_field(2, 2, 1, Rational(3, 4));  // carrier {0,1}^2
  IndexSet wg = parse_window("{0..1}^2");
  SampleBatch bg = sample_window(g, wg, n, 21);
  std::map<Label, std::size_t> joint;
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<int> signs = copy_signs(g, bg, r, 0, pt({0, 0}));
    ++joint[Label(signs.begin(), signs.end())];
  }
  FiniteDistribution nu = nu_dist(NuSpec(4, Rational(3, 4)));
  double tv2 = 0.0;
  for (std::uint32_t code = 0; code < 16; ++code) {
    Label l(4);
    for (int b = 0; b < 4; ++b) l[b] = ((code >> b) & 1) ? 1 : -1;
    double emp = 0.0;
    if (auto it = joint.find(l); it != joint.end())
      emp = static_cast<double>(it->second) / static_cast<double>(n);
    tv2 += std::abs(emp - nu.prob(l).to_double());
  }
  CHECK(tv2 / 2.0 < 0.02);
}

TEST_CASE("independence screen accepts pairwise-independent codes") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));
  SampleBatch batch = sample_window(f, parse_window("{0..4}^1"), 6000, 11);
  IndependenceReport rep = empirical_independence(batch, 2);
  CHECK(rep.tuples_tested == 10);
  CHECK_FALSE(rep.any_flagged);
  for (const auto& t : rep.tests) CHECK(t.method == "chi_square");
}

TEST_CASE("independence screen flags the deterministic triple") {
  FieldModel f = lemma31_field(1, 2, 1, Rational(1));  // carrier {0,1,2}
  SampleBatch batch = sample_window(f, parse_window("{0..2}^1"), 6000, 13);
  IndependenceReport rep = empirical_independence(batch, 2);
  CHECK_FALSE(rep.any_flagged);  // pairs stay independent
  IndependenceReport rep3 = empirical_independence(batch, 3);
  CHECK(rep3.tuples_tested == 1);
  CHECK(rep3.any_flagged);
  CHECK(rep3.tests.at(0).p_value < 1e-3);

  nlohmann::ordered_json j = rep3.to_json();
  CHECK(j["tuple_size"] == 3);
  CHECK(j["any_flagged"] == true);
  CHECK(j["tests"].size() == 1);
  CHECK(j["tests"][0]["sites"] == "(0);(1);(2)");
}

TEST_CASE("independence screen accepts unbiased codes") {
  FieldModel f = lemma31_field(1, 2, 1, Rational(0));
  SampleBatch batch = sample_window(f, parse_window("{0..2}^1"), 6000, 19);
  for (int tuple : {2, 3}) {
    IndependenceReport rep = empirical_independence(batch, tuple);
    CHECK_FALSE(rep.any_flagged);
  }
  CHECK_THROWS_AS(empirical_independence(batch, 1), Error);
  SampleBatch tiny = sample_window(f, parse_window("{0..2}^1"), 1, 19);
  CHECK_THROWS_AS(empirical_independence(tiny, 2), InsufficientSamples);
}

TEST_CASE("sample files round-trip through CSV") {
  FieldModel f = lemma31_field(2, 2, 1, Rational(1, 2));
  IndexSet w = parse_window("{0..1}^2");
  SampleBatch batch = uniformize(sample_window(f, w, 25, 3), f, 4);

  std::stringstream ss;
  write_csv(batch, ss);
  std::string text = ss.str();
  CHECK(text.rfind("\"k=(0,0)\",\"k=(0,1)\"", 0) == 0);
  CHECK(text.find("_u\"") != std::string::npos);

  std::stringstream in(text);
  SampleBatch back = read_csv(in);
  CHECK(back.window == batch.window);
  CHECK(back.rows == batch.rows);
  REQUIRE(back.uniformized.has_value());
  CHECK(*back.uniformized == *batch.uniformized);  // %.17g round-trips exactly

  std::stringstream empty("");
  CHECK_THROWS_AS(read_csv(empty), ParseError);
  std::stringstream bad("\"x=(0)\"\n3\n");
  CHECK_THROWS_AS(read_csv(bad), ParseError);
  std::stringstream mixed("\"k=(0)_u\",\"k=(0)\"\n0.25,3\n");
  CHECK_THROWS_AS(read_csv(mixed), ParseError);
}
