#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mixfield/coefficients.hpp"
#include "mixfield/errors.hpp"
#include "mixfield/field.hpp"

using namespace mixfield;

namespace {

IndexPoint pt(std::vector<std::int32_t> c) { return IndexPoint(std::move(c)); }

CoefficientReport coef(const FieldModel& f, CoefficientKind kind, int n,
                       const IndexSet& w, CoefMethod m,
                       const EngineOptions& opts = {}) {
  return windowed_coefficient(f, kind, n, w, m, opts);
}

double val(const FieldModel& f, CoefficientKind kind, int n, const IndexSet& w,
           CoefMethod m) {
  return coef(f, kind, n, w, m).value;
}

}  // namespace

TEST_CASE("kind and method names round-trip") {
  for (CoefficientKind k : {CoefficientKind::alpha, CoefficientKind::rho,
                            CoefficientKind::rho_prime, CoefficientKind::rho_star})
    CHECK(kind_from_name(kind_name(k)) == k);
  CHECK_THROWS_AS(kind_from_name("sigma"), ParseError);
  for (CoefMethod m : {CoefMethod::structural, CoefMethod::numeric})
    CHECK(method_from_name(method_name(m)) == m);
  CHECK_THROWS_AS(method_from_name("guess"), ParseError);
}

TEST_CASE("auto window dilates the carrier box by the gap") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));  // carrier {0,2,4}
  IndexSet w1 = auto_window(f, 1);
  auto [lo1, hi1] = w1.bounding_box();
  CHECK(lo1 == pt({-1}));
  CHECK(hi1 == pt({5}));
  IndexSet w3 = auto_window(f, 3);
  CHECK(w3.size() == 11);  // {-3..7}
}

TEST_CASE("direct pair correlation from the carrier geometry") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 5));  // carrier {0,2,4}
  CHECK(rho_structural(f, IndexSet::of({pt({0})}),
                       IndexSet::of({pt({2}), pt({4})})) == Rational(3, 5));
  // carrier translate not fully covered: no contribution
  CHECK(rho_structural(f, IndexSet::of({pt({0})}), IndexSet::of({pt({2})})) ==
        Rational(0));
  // disjoint supports: product law
  CHECK(rho_structural(f, IndexSet::of({pt({0})}), IndexSet::of({pt({5})})) ==
        Rational(0));
  CHECK_THROWS_AS(rho_structural(f, IndexSet::of({pt({0})}),
                                 IndexSet::of({pt({0}), pt({1})})),
                  BadSubset);
}

TEST_CASE("windowed rho_star on the block field attains theta then vanishes") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));
  IndexSet w = parse_window("{0..6}^1");

  CoefficientReport r1 = coef(f, CoefficientKind::rho_star, 1, w,
                              CoefMethod::structural);
  CHECK(r1.value == doctest::Approx(0.75));
  CHECK(r1.exact == Rational(3, 4));
  // the witness splits one carrier translate between the sides
  CHECK(r1.witness_s.size() + r1.witness_t.size() >= 3);

  CoefficientReport r3 = coef(f, CoefficientKind::rho_star, 3, w,
                              CoefMethod::structural);
  CHECK(r3.exact == Rational(0));

  // numeric route agrees on this window
  CHECK(val(f, CoefficientKind::rho_star, 1, w, CoefMethod::numeric) ==
        doctest::Approx(0.75).epsilon(1e-9));
  CHECK(val(f, CoefficientKind::rho_star, 3, w, CoefMethod::numeric) ==
        doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("independent field has zero coefficients of every kind") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(0));
  IndexSet w = parse_window("{0..5}^1");
  for (CoefficientKind k : {CoefficientKind::alpha, CoefficientKind::rho,
                            CoefficientKind::rho_prime, CoefficientKind::rho_star}) {
    CHECK(val(f, k, 1, w, CoefMethod::structural) == 0.0);
    CHECK(val(f, k, 1, w, CoefMethod::numeric) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("structural alpha reports a tight bracket at a quarter of rho") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));
  CoefficientReport r = coef(f, CoefficientKind::alpha, 2, auto_window(f, 2),
                             CoefMethod::structural);
  REQUIRE(r.bracket.has_value());
  CHECK(r.bracket->tight());
  CHECK(r.bracket->lower == Rational(3, 16));
  CHECK(r.exact == Rational(3, 16));
}

TEST_CASE("coefficient chain and monotonicity on one window") {
  FieldModel f = thm14_field(1, 2, RateSequence::parse("3/4,1/2,1/4"));
  IndexSet w = parse_window("{0..6}^1");
  double prev_star = 2.0;
  for (int n = 1; n <= 4; ++n) {
    double a = val(f, CoefficientKind::alpha, n, w, CoefMethod::structural);
    double rho = val(f, CoefficientKind::rho, n, w, CoefMethod::structural);
    double rp = val(f, CoefficientKind::rho_prime, n, w, CoefMethod::structural);
    double rs = val(f, CoefficientKind::rho_star, n, w, CoefMethod::structural);
    CHECK(4.0 * a <= rho + 1e-12);
    CHECK(rho <= rp + 1e-12);
    CHECK(rp <= rs + 1e-12);
    CHECK(rs <= prev_star + 1e-12);  // nonincreasing in the gap
    prev_star = rs;
  }
}

TEST_CASE("decay profile of the stacked block construction") {
  FieldModel f = thm14_field(1, 2, RateSequence::parse("3/4,1/2,1/4"));
  for (int n = 1; n <= 3; ++n) {
    IndexSet w = auto_window(f, n);
    Rational expected = f.levels[static_cast<std::size_t>(n - 1)].theta;
    for (CoefficientKind k : {CoefficientKind::rho, CoefficientKind::rho_prime,
                              CoefficientKind::rho_star}) {
      CoefficientReport r = coef(f, k, n, w, CoefMethod::structural);
      CHECK(r.exact == expected);
    }
    CoefficientReport a = coef(f, CoefficientKind::alpha, n, w,
                               CoefMethod::structural);
    CHECK(a.exact == expected * Rational(1, 4));
  }
  // beyond the deepest level everything vanishes
  CHECK(val(f, CoefficientKind::rho_star, 4, auto_window(f, 4),
            CoefMethod::structural) == 0.0);
}

TEST_CASE("extreme rate sequences") {
  FieldModel z = thm14_field(1, 2, RateSequence::parse("0"));
  CHECK(val(z, CoefficientKind::rho_star, 1, auto_window(z, 1),
            CoefMethod::structural) == 0.0);

  FieldModel ones = thm14_field(1, 2, RateSequence::parse("1,1"));
  CHECK(coef(ones, CoefficientKind::rho_star, 1, auto_window(ones, 1),
             CoefMethod::structural)
            .exact == Rational(1));
  CHECK(coef(ones, CoefficientKind::rho_star, 2, auto_window(ones, 2),
             CoefMethod::structural)
            .exact == Rational(1));
}

TEST_CASE("stacking realizes the level-wise maximum") {
  FieldModel a = lemma31_field(1, 2, 1, Rational(3, 4));
  FieldModel b = lemma31_field(1, 2, 2, Rational(1, 2));
  std::vector<FieldModel> parts{a, b};
  FieldModel s = stack_fields(parts);
  IndexSet w = parse_window("{0..4}^1");
  CHECK(coef(s, CoefficientKind::rho_star, 1, w, CoefMethod::structural).exact ==
        Rational(3, 4));
  CHECK(coef(s, CoefficientKind::rho_star, 2, w, CoefMethod::structural).exact ==
        Rational(1, 2));
  // numeric agreement on the same window for the two-level stack
  CHECK(val(s, CoefficientKind::rho_star, 1, w, CoefMethod::numeric) ==
        doctest::Approx(0.75).epsilon(1e-8));
  CHECK(val(s, CoefficientKind::rho_star, 2, w, CoefMethod::numeric) ==
        doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("shell construction: full correlation at short range, cutoff at two") {
  FieldModel f = lemma41_field(2, 2, 2);  // shell at lifted n = 3
  IndexSet w = auto_window(f, 2);
  CoefficientReport star = coef(f, CoefficientKind::rho_star, 2, w,
                                CoefMethod::structural);
  CHECK(star.exact == Rational(1));
  CHECK(star.witness_s == IndexSet::of({pt({0, 0})}));
  CHECK(star.witness_t.size() == 24);  // the shell itself

  CHECK(coef(f, CoefficientKind::rho, 1, auto_window(f, 1),
             CoefMethod::structural)
            .exact == Rational(1));
  CHECK(coef(f, CoefficientKind::rho, 2, w, CoefMethod::structural).exact ==
        Rational(0));
  CHECK(coef(f, CoefficientKind::rho_prime, 2, w, CoefMethod::structural).exact ==
        Rational(0));
}

TEST_CASE("shell stack keeps rho_star at one while rho cuts off") {
  FieldModel f = lemma42_field(2, 2, 2);
  CHECK(coef(f, CoefficientKind::rho_star, 1, auto_window(f, 1),
             CoefMethod::structural)
            .exact == Rational(1));
  CHECK(coef(f, CoefficientKind::rho_star, 2, auto_window(f, 2),
             CoefMethod::structural)
            .exact == Rational(1));
  CHECK(coef(f, CoefficientKind::rho, 2, auto_window(f, 2),
             CoefMethod::structural)
            .exact == Rational(0));
  CHECK(coef(f, CoefficientKind::rho_prime, 2, auto_window(f, 2),
             CoefMethod::structural)
            .exact == Rational(0));
}

TEST_CASE("combined construction: slow rho decay under rho_star pinned at one") {
  FieldModel f = thm15_field(2, 2, RateSequence::parse("1,1/2,1/4"), 3);
  for (int n = 1; n <= 3; ++n)
    CHECK(coef(f, CoefficientKind::rho_star, n, auto_window(f, n),
               CoefMethod::structural)
              .exact == Rational(1));
  CHECK(coef(f, CoefficientKind::rho, 2, auto_window(f, 2),
             CoefMethod::structural)
            .exact == Rational(1, 2));
  CHECK(coef(f, CoefficientKind::rho, 3, auto_window(f, 3),
             CoefMethod::structural)
            .exact == Rational(1, 4));
  CHECK(coef(f, CoefficientKind::rho_prime, 2, auto_window(f, 2),
             CoefMethod::structural)
            .exact == Rational(1, 2));

  // zero rates: the half-space coefficient dies while rho_star stays at one
  FieldModel z = thm15_field(2, 2, RateSequence::parse("0"), 2);
  CHECK(coef(z, CoefficientKind::rho, 2, auto_window(z, 2),
             CoefMethod::structural)
            .exact == Rational(0));
  CHECK(coef(z, CoefficientKind::rho_star, 2, auto_window(z, 2),
             CoefMethod::structural)
            .exact == Rational(1));
}

TEST_CASE("windows only see translates that fit inside them") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));
  // a 3-point window cannot contain a split translate plus separation 3
  IndexSet tiny = parse_window("{0..2}^1");
  CHECK(val(f, CoefficientKind::rho_star, 3, tiny, CoefMethod::structural) == 0.0);
  // no valid pair at all: gap larger than the window diameter
  CoefficientReport r = coef(f, CoefficientKind::rho_star, 9, tiny,
                             CoefMethod::structural);
  CHECK(r.value == 0.0);
  CHECK(r.witness_s.empty());
}

TEST_CASE("structural results are invariant under translation and axis swap") {
  FieldModel f = lemma31_field(2, 2, 2, Rational(2, 3));
  IndexSet w = parse_window("{0..2}^2");
  IndexSet wt = w.translated(pt({5, -7}));
  for (CoefficientKind k : {CoefficientKind::rho, CoefficientKind::rho_prime,
                            CoefficientKind::rho_star}) {
    for (int n = 1; n <= 3; ++n) {
      CoefficientReport a = coef(f, k, n, w, CoefMethod::structural);
      CoefficientReport b = coef(f, k, n, wt, CoefMethod::structural);
      CHECK(a.exact == b.exact);
    }
  }
  // axis swap: the carrier is symmetric, so a transposed window sees the same
  std::vector<IndexPoint> swapped;
  IndexSet wr = parse_window("{0..1}^2").united(IndexSet::of({pt({3, 0})}));
  for (const auto& p : wr.pts) swapped.push_back(pt({p.c[1], p.c[0]}));
  IndexSet wrs = IndexSet::of(swapped);
  for (int n = 1; n <= 2; ++n) {
    CHECK(coef(f, CoefficientKind::rho_star, n, wr, CoefMethod::structural).exact ==
          coef(f, CoefficientKind::rho_star, n, wrs, CoefMethod::structural).exact);
  }
}

TEST_CASE("numeric and structural agree across kinds on feasible windows") {
  FieldModel f = thm14_field(1, 2, RateSequence::parse("3/4,1/2"));
  IndexSet w = parse_window("{0..4}^1");
  for (CoefficientKind k : {CoefficientKind::alpha, CoefficientKind::rho,
                            CoefficientKind::rho_prime, CoefficientKind::rho_star}) {
    for (int n = 1; n <= 3; ++n) {
      CoefficientReport st = coef(f, k, n, w, CoefMethod::structural);
      CoefficientReport nu = coef(f, k, n, w, CoefMethod::numeric);
      CHECK(std::abs(st.value - nu.value) < 1e-9);
    }
  }

  FieldModel g = lemma31_field(2, 2, 2, Rational(3, 4));
  IndexSet wg = parse_window("(0,0);(0,2);(2,0);(2,2)");
  CoefficientReport st = coef(g, CoefficientKind::rho_star, 1, wg,
                              CoefMethod::structural);
  CoefficientReport nu = coef(g, CoefficientKind::rho_star, 1, wg,
                              CoefMethod::numeric);
  CHECK(st.exact == Rational(3, 4));
  CHECK(std::abs(st.value - nu.value) < 1e-9);
}

TEST_CASE("numeric alpha is exact on the block field") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));
  IndexSet w = parse_window("{0..4}^1");
  CoefficientReport r = coef(f, CoefficientKind::alpha, 2, w, CoefMethod::numeric);
  CHECK(r.exact == Rational(3, 16));
  CHECK(r.pairs_considered > 0);
}

TEST_CASE("numeric bookkeeping: skipped candidates and cap errors") {
  // the shell field's sign law needs 2^25 atoms: every candidate is beyond
  // the caps, which must surface as an error rather than a silent zero
  FieldModel f = lemma41_field(2, 2, 2);
  IndexSet w = auto_window(f, 1);
  CHECK_THROWS_AS(
      coef(f, CoefficientKind::rho, 1, w, CoefMethod::numeric),
      TooManyAtoms);

  // rho_star enumeration refuses oversized windows
  FieldModel g = lemma31_field(1, 2, 2, Rational(1, 2));
  CHECK_THROWS_AS(coef(g, CoefficientKind::rho_star, 1, parse_window("{0..19}^1"),
                       CoefMethod::numeric),
                  WindowTooLarge);

  // slab enumeration refuses axes with too many distinct coordinates
  EngineOptions tight;
  tight.slab_coord_cap = 3;
  CHECK_THROWS_AS(coef(g, CoefficientKind::rho_prime, 1, parse_window("{0..4}^1"),
                       CoefMethod::numeric, tight),
                  WindowTooLarge);
}

TEST_CASE("report JSON carries the result and the witness") {
  FieldModel f = lemma31_field(1, 2, 2, Rational(3, 4));
  CoefficientReport r = coef(f, CoefficientKind::rho_star, 1,
                             parse_window("{0..4}^1"), CoefMethod::structural);
  nlohmann::ordered_json j = r.to_json();
  CHECK(j["kind"] == "rho_star");
  CHECK(j["n"] == 1);
  CHECK(j["method"] == "structural");
  CHECK(j["value"] == doctest::Approx(0.75));
  CHECK(j["exact"] == "3/4");
  CHECK(j.contains("witness_s"));
  CHECK(j.contains("witness_t"));
}

TEST_CASE("argument validation") {
  FieldModel f = lemma31_field(1, 2, 1, Rational(1, 2));
  IndexSet w = parse_window("{0..3}^1");
  CHECK_THROWS_AS(coef(f, CoefficientKind::rho, 0, w, CoefMethod::structural),
                  Error);
  CHECK_THROWS_AS(coef(f, CoefficientKind::rho, 1, IndexSet{},
                       CoefMethod::structural),
                  Error);
  CHECK_THROWS_AS(coef(f, CoefficientKind::rho, 1, parse_window("{0..3}^2"),
                       CoefMethod::structural),
                  DimensionMismatch);
}
