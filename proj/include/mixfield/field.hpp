#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixfield/dependence.hpp"
#include "mixfield/distribution.hpp"
#include "json.hpp"

namespace mixfield {

// A point of the integer lattice Z^d.
struct IndexPoint {
  std::vector<std::int32_t> c;

  IndexPoint() = default;
  explicit IndexPoint(std::vector<std::int32_t> coords) : c(std::move(coords)) {}

  int dim() const { return static_cast<int>(c.size()); }
  auto operator<=>(const IndexPoint&) const = default;  // lexicographic

  IndexPoint operator+(const IndexPoint& o) const;
  IndexPoint operator-(const IndexPoint& o) const;
  std::string str() const;  // "(a,b)"
};

// Squared Euclidean distance; all geometric thresholds compare against n^2
// so distances stay exact integers.
long long dist2(const IndexPoint& a, const IndexPoint& b);

// A finite subset of Z^d, stored sorted and duplicate-free.
struct IndexSet {
  std::vector<IndexPoint> pts;

  static IndexSet of(std::vector<IndexPoint> pts);  // sorts, dedups, checks dims
  static IndexSet box(const IndexPoint& lo, const IndexPoint& hi);

  int dim() const { return pts.empty() ? 0 : pts.front().dim(); }
  std::size_t size() const { return pts.size(); }
  bool empty() const { return pts.empty(); }
  bool contains(const IndexPoint& p) const;
  std::optional<std::size_t> index_of(const IndexPoint& p) const;

  IndexSet translated(const IndexPoint& v) const;
  IndexSet united(const IndexSet& o) const;
  std::pair<IndexPoint, IndexPoint> bounding_box() const;
  long long dist2_to(const IndexSet& o) const;  // min over point pairs

  auto operator<=>(const IndexSet&) const = default;
  std::string str() const;  // "(0,0);(1,2)"
};

// Window grammar: either a cube "{a..b}^d" or an explicit point list
// "(x,y);(u,v)".  expect_dim = 0 accepts any dimension.
IndexSet parse_window(std::string_view text, int expect_dim = 0);
IndexPoint parse_point(std::string_view text);  // "(a,b)"

// One building-block layer of a field: a biased sign law on the carrier set,
// instantiated independently at every lattice translate.  The encoding fixes
// which bit of the layer's contribution each carrier point feeds.
struct Level {
  IndexSet carrier;
  Rational theta;
  std::vector<IndexPoint> encoding;  // bit i of the value <- carrier point encoding[i]

  static Level make(IndexSet carrier, Rational theta);  // lexicographic encoding

  int bits() const { return static_cast<int>(encoding.size()); }
  int bit_of(const IndexPoint& j) const;  // inverse of the encoding
};

// A translation-invariant random field on Z^d assembled from independent
// levels.  The value at a site is the concatenation of its per-level values;
// level l contributes bit b whenever the carrier point encoding[b], shifted
// by some offset u, lands on the site (each (level, offset) copy draws its
// own sign vector).
struct FieldModel {
  int d = 1;
  int N = 2;  // tuple size whose joint laws must stay independent
  std::vector<Level> levels;
  std::string construction = "custom";  // lemma31|lemma41|lemma42|thm14|thm15|custom
  nlohmann::ordered_json params = nlohmann::ordered_json::object();

  void validate() const;
  int value_bits() const;              // sum of level widths
  int level_bit_offset(int level) const;

  nlohmann::ordered_json to_json() const;
  static FieldModel from_json(const nlohmann::ordered_json& j);

  bool operator==(const FieldModel& o) const;
};

// Rate targets for the stacked constructions: a nonincreasing sequence of
// probabilities.  Throws BadRates otherwise.
struct RateSequence {
  std::vector<Rational> values;

  static RateSequence of(std::vector<Rational> values);
  static RateSequence parse(std::string_view text);  // comma-separated "p/q"
};

// Carrier geometries.
IndexSet lattice_block_lambda(int d, int M, int n);  // {0, n, ..., (M-1)n}^d
IndexSet shell_gamma(int d, int n);  // boundary shell of {-n..n}^d plus the origin

// Constructions.
FieldModel single_level_field(IndexSet carrier, Rational theta, int N);
FieldModel lemma31_field(int d, int N, int n, Rational theta);
FieldModel lemma41_field(int d, int N, int n);  // lifts n to max(n, N+1)
FieldModel stack_fields(std::span<const FieldModel> parts);
FieldModel thm14_field(int d, int N, const RateSequence& rates);
FieldModel lemma42_field(int d, int N, int L);
FieldModel thm15_field(int d, int N, const RateSequence& rates, int L);

// Enumeration caps for the exact table assembly.
struct TableCaps {
  std::size_t side_cap = 4096;            // atoms per side of a pair table
  std::size_t leaf_cap = std::size_t(1) << 22;  // joint support atoms
  std::size_t cell_cap = std::size_t(1) << 22;  // dense cells of a pair table
};

// One (level, offset) copy of a building block that meets the given sites,
// with the visible part of its carrier.
struct CopyRef {
  int level = 0;
  IndexPoint offset;
  std::vector<int> bit_idx;   // visible encoding positions (ascending)
  std::vector<int> site_idx;  // parallel: which site each visible bit feeds
  bool full = false;          // whole carrier visible
};
std::vector<CopyRef> relevant_copies(const FieldModel& f,
                                     const std::vector<IndexPoint>& sites);

// Exact joint law of the field restricted to the given sites.  Labels are
// site-major, level-minor value tuples: arity = |sites| * |levels|.
FiniteDistribution joint_law(const FieldModel& f, const IndexSet& sites,
                             const TableCaps& caps = {});

// Exact pair table of (values on S, values on T); S and T must be disjoint
// and nonempty.
JointTable joint_table(const FieldModel& f, const IndexSet& s, const IndexSet& t,
                       const TableCaps& caps = {});

// Pair table reduced to the copies that feed both sides.  One-sided copies
// only tensor independent uniform factors onto the pair, which changes
// neither dependence coefficient, so this table has the same alpha and rho
// as the full one while staying inside the caps far more often.
JointTable core_pair_table(const FieldModel& f, const IndexSet& s,
                           const IndexSet& t, const TableCaps& caps = {});

// Law of the value at a single site, as scalar codes: always uniform over
// the full alphabet.  Guarded by max_bits (the alphabet is 2^bits).
FiniteDistribution marginal_of_point(const FieldModel& f, const IndexPoint& k,
                                     int max_bits = 20);

// Scalar codes: per-level values packed at their bit offsets.  The code of a
// site value fits 126 bits, hence the 128-bit carriers and the decimal
// string helpers used by the CSV layer.
unsigned __int128 pack_code(const FieldModel& f, std::span<const Value> level_values);
std::vector<Value> unpack_code(const FieldModel& f, unsigned __int128 code);
std::string u128_str(unsigned __int128 v);
unsigned __int128 u128_parse(std::string_view s);

// N-tuplewise independence over a window: checks that every subset of
// exactly tuple_size sites (default: the field's N) has an independent joint
// law.  Uses exact enumeration when the support fits the caps, otherwise the
// exact structural criterion (a dependent tuple exists iff some positively
// biased carrier translate lands entirely inside it); the two routes agree.
struct NtupleCheck {
  bool ok = true;
  std::vector<IndexPoint> witness;  // a dependent tuple, when ok is false
  std::size_t tuples_checked = 0;
};
NtupleCheck check_ntuplewise(const FieldModel& f, const IndexSet& window,
                             int tuple_size = 0, const TableCaps& caps = {});

}  // namespace mixfield
