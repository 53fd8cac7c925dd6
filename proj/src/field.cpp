#include "mixfield/field.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

namespace mixfield {

IndexPoint IndexPoint::operator+(const IndexPoint& o) const {
  IndexPoint r = *this;
  for (int i = 0; i < dim(); ++i) r.c[i] += o.c[i];
  return r;
}

IndexPoint IndexPoint::operator-(const IndexPoint& o) const {
  IndexPoint r = *this;
  for (int i = 0; i < dim(); ++i) r.c[i] -= o.c[i];
  return r;
}

std::string IndexPoint::str() const {
  std::string s = "(";
  for (int i = 0; i < dim(); ++i) {
    if (i) s += ',';
    s += std::to_string(c[i]);
  }
  s += ')';
  return s;
}

long long dist2(const IndexPoint& a, const IndexPoint& b) {
  long long s = 0;
  for (int i = 0; i < a.dim(); ++i) {
    long long d = static_cast<long long>(a.c[i]) - b.c[i];
    s += d * d;
  }
  return s;
}

IndexSet IndexSet::of(std::vector<IndexPoint> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  for (const auto& p : pts)
    if (p.dim() != pts.front().dim())
      throw DimensionMismatch("points of mixed dimension in one set");
  IndexSet s;
  s.pts = std::move(pts);
  return s;
}

IndexSet IndexSet::box(const IndexPoint& lo, const IndexPoint& hi) {
  if (lo.dim() != hi.dim()) throw DimensionMismatch("box corners of mixed dimension");
  int d = lo.dim();
  unsigned __int128 count = 1;
  for (int i = 0; i < d; ++i) {
    if (lo.c[i] > hi.c[i]) throw Error("empty box range");
    count *= static_cast<unsigned>(hi.c[i] - lo.c[i] + 1);
    if (count > (1u << 21)) throw WindowTooLarge("box would contain too many points");
  }
  IndexSet s;
  s.pts.reserve(static_cast<std::size_t>(count));
  IndexPoint cur = lo;
  while (true) {
    s.pts.push_back(cur);
    int axis = d - 1;
    while (axis >= 0 && cur.c[axis] == hi.c[axis]) {
      cur.c[axis] = lo.c[axis];
      --axis;
    }
    if (axis < 0) break;
    ++cur.c[axis];
  }
  std::sort(s.pts.begin(), s.pts.end());
  return s;
}

bool IndexSet::contains(const IndexPoint& p) const {
  return std::binary_search(pts.begin(), pts.end(), p);
}

std::optional<std::size_t> IndexSet::index_of(const IndexPoint& p) const {
  auto it = std::lower_bound(pts.begin(), pts.end(), p);
  if (it != pts.end() && *it == p) return static_cast<std::size_t>(it - pts.begin());
  return std::nullopt;
}

IndexSet IndexSet::translated(const IndexPoint& v) const {
  IndexSet s;
  s.pts.reserve(pts.size());
  for (const auto& p : pts) s.pts.push_back(p + v);
  return s;  // translation preserves lexicographic order
}

IndexSet IndexSet::united(const IndexSet& o) const {
  std::vector<IndexPoint> all = pts;
  all.insert(all.end(), o.pts.begin(), o.pts.end());
  return of(std::move(all));
}

std::pair<IndexPoint, IndexPoint> IndexSet::bounding_box() const {
  if (pts.empty()) throw Error("bounding box of an empty set");
  IndexPoint lo = pts.front(), hi = pts.front();
  for (const auto& p : pts)
    for (int i = 0; i < p.dim(); ++i) {
      lo.c[i] = std::min(lo.c[i], p.c[i]);
      hi.c[i] = std::max(hi.c[i], p.c[i]);
    }
  return {lo, hi};
}

long long IndexSet::dist2_to(const IndexSet& o) const {
  if (empty() || o.empty()) throw Error("distance to an empty set");
  long long best = -1;
  for (const auto& a : pts)
    for (const auto& b : o.pts) {
      long long d = dist2(a, b);
      if (best < 0 || d < best) best = d;
    }
  return best;
}

std::string IndexSet::str() const {
  std::string s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ';';
    s += pts[i].str();
  }
  return s;
}

namespace {

int parse_int(std::string_view t) {
  int v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size())
    throw ParseError("not an integer: '" + std::string(t) + "'");
  return v;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

IndexPoint parse_point(std::string_view t) {
  t = strip(t);
  if (t.size() < 3 || t.front() != '(' || t.back() != ')')
    throw ParseError("point must look like (a,b): '" + std::string(t) + "'");
  t = t.substr(1, t.size() - 2);
  std::vector<std::int32_t> coords;
  while (true) {
    std::size_t comma = t.find(',');
    coords.push_back(parse_int(strip(t.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    t = t.substr(comma + 1);
  }
  return IndexPoint(std::move(coords));
}

IndexSet parse_window(std::string_view text, int expect_dim) {
  std::string_view t = strip(text);
  if (t.empty()) throw ParseError("empty window");
  IndexSet w;
  if (t.front() == '{') {
    // "{a..b}^d"
    std::size_t close = t.find('}');
    std::size_t dots = t.find("..");
    if (close == std::string_view::npos || dots == std::string_view::npos ||
        dots > close || close + 1 >= t.size() || t[close + 1] != '^')
      throw ParseError("cube window must look like {a..b}^d: '" + std::string(t) + "'");
    int a = parse_int(strip(t.substr(1, dots - 1)));
    int b = parse_int(strip(t.substr(dots + 2, close - dots - 2)));
    int d = parse_int(strip(t.substr(close + 2)));
    if (d < 1 || d > 6) throw ParseError("cube window dimension out of range");
    if (a > b) throw ParseError("cube window range is empty");
    IndexPoint lo(std::vector<std::int32_t>(d, a)), hi(std::vector<std::int32_t>(d, b));
    w = IndexSet::box(lo, hi);
  } else {
    std::vector<IndexPoint> pts;
    while (true) {
      std::size_t semi = t.find(';');
      pts.push_back(parse_point(t.substr(0, semi)));
      if (semi == std::string_view::npos) break;
      t = t.substr(semi + 1);
    }
    w = IndexSet::of(std::move(pts));
  }
  if (expect_dim && w.dim() != expect_dim)
    throw DimensionMismatch("window has dimension " + std::to_string(w.dim()) +
                            ", expected " + std::to_string(expect_dim));
  return w;
}

Level Level::make(IndexSet carrier, Rational theta) {
  if (carrier.size() < 3)
    throw CarrierTooSmall("carrier needs at least 3 points, got " +
                          std::to_string(carrier.size()));
  if (carrier.size() > 62)
    throw TooManyAtoms("carrier width capped at 62 bits");
  if (!theta.is_probability())
    throw Error("level bias must lie in [0,1], got " + theta.str());
  Level l;
  l.encoding = carrier.pts;  // bit order = lexicographic carrier order
  l.carrier = std::move(carrier);
  l.theta = theta;
  return l;
}

int Level::bit_of(const IndexPoint& j) const {
  for (int i = 0; i < bits(); ++i)
    if (encoding[i] == j) return i;
  throw Error("point " + j.str() + " is not on the carrier");
}

void FieldModel::validate() const {
  if (d < 1) throw BadDimension("field dimension must be positive");
  if (N < 2) throw Error("tuple size must be at least 2");
  if (levels.empty()) throw Error("field needs at least one level");
  for (const auto& l : levels) {
    if (l.carrier.dim() != d)
      throw DimensionMismatch("carrier dimension differs from field dimension");
    if (l.carrier.size() < 3) throw CarrierTooSmall("carrier needs at least 3 points");
    if (static_cast<int>(l.carrier.size()) - 1 < N)
      throw CarrierTooSmall("carrier of " + std::to_string(l.carrier.size()) +
                            " points cannot protect " + std::to_string(N) +
                            "-tuples");
    if (!l.theta.is_probability()) throw Error("level bias must lie in [0,1]");
    if (l.encoding.size() != l.carrier.size())
      throw Error("encoding must enumerate the carrier exactly once");
    IndexSet enc = IndexSet::of(l.encoding);
    if (!(enc == l.carrier)) throw Error("encoding is not a bijection onto the carrier");
  }
  if (value_bits() > 126) throw TooManyAtoms("stacked value exceeds 126 bits");
}

int FieldModel::value_bits() const {
  int b = 0;
  for (const auto& l : levels) b += l.bits();
  return b;
}

int FieldModel::level_bit_offset(int level) const {
  int b = 0;
  for (int i = 0; i < level; ++i) b += levels[i].bits();
  return b;
}

bool FieldModel::operator==(const FieldModel& o) const {
  if (d != o.d || N != o.N || construction != o.construction || params != o.params ||
      levels.size() != o.levels.size())
    return false;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i].carrier == o.levels[i].carrier) ||
        levels[i].theta != o.levels[i].theta ||
        levels[i].encoding != o.levels[i].encoding)
      return false;
  }
  return true;
}

namespace {

nlohmann::ordered_json point_json(const IndexPoint& p) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (int x : p.c) a.push_back(x);
  return a;
}

IndexPoint point_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("lattice point must be an array");
  std::vector<std::int32_t> c;
  for (const auto& x : j) {
    if (!x.is_number_integer()) throw ParseError("lattice coordinate must be an integer");
    c.push_back(x.get<std::int32_t>());
  }
  return IndexPoint(std::move(c));
}

}  // namespace

nlohmann::ordered_json FieldModel::to_json() const {
  nlohmann::ordered_json j;
  j["d"] = d;
  j["N"] = N;
  j["construction"] = construction;
  j["params"] = params;
  j["levels"] = nlohmann::ordered_json::array();
  for (const auto& l : levels) {
    nlohmann::ordered_json jl;
    jl["carrier"] = nlohmann::ordered_json::array();
    for (const auto& p : l.carrier.pts) jl["carrier"].push_back(point_json(p));
    jl["theta"] = l.theta.str();
    jl["encoding"] = nlohmann::ordered_json::array();
    for (const auto& p : l.encoding) jl["encoding"].push_back(point_json(p));
    j["levels"].push_back(std::move(jl));
  }
  return j;
}

FieldModel FieldModel::from_json(const nlohmann::ordered_json& j) {
  FieldModel f;
  try {
    f.d = j.at("d").get<int>();
    f.N = j.at("N").get<int>();
    f.construction = j.at("construction").get<std::string>();
    f.params = j.at("params");
    for (const auto& jl : j.at("levels")) {
      Level l;
      std::vector<IndexPoint> carrier;
      for (const auto& p : jl.at("carrier")) carrier.push_back(point_from_json(p));
      l.carrier = IndexSet::of(std::move(carrier));
      l.theta = Rational::parse(jl.at("theta").get<std::string>());
      for (const auto& p : jl.at("encoding")) l.encoding.push_back(point_from_json(p));
      f.levels.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad field description: ") + e.what());
  }
  f.validate();
  return f;
}

RateSequence RateSequence::of(std::vector<Rational> values) {
  if (values.empty()) throw BadRates("rate sequence is empty");
  for (const auto& v : values)
    if (!v.is_probability()) throw BadRates("rate " + v.str() + " outside [0,1]");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[i - 1])
      throw BadRates("rates must be nonincreasing, got " + values[i - 1].str() +
                     " then " + values[i].str());
  RateSequence r;
  r.values = std::move(values);
  return r;
}

RateSequence RateSequence::parse(std::string_view text) {
  if (strip(text).empty()) throw BadRates("rate sequence is empty");
  std::vector<Rational> vals;
  std::string_view t = text;
  while (true) {
    std::size_t comma = t.find(',');
    vals.push_back(Rational::parse(std::string(strip(t.substr(0, comma)))));
    if (comma == std::string_view::npos) break;
    t = t.substr(comma + 1);
  }
  return of(std::move(vals));
}

IndexSet lattice_block_lambda(int d, int M, int n) {
  if (d < 1) throw BadDimension("lattice block needs dimension >= 1");
  if (M < 2) throw Error("lattice block needs at least 2 points per axis");
  if (n < 1) throw Error("lattice block spacing must be positive");
  std::vector<std::int32_t> lo(d, 0), hi(d, M - 1);
  IndexSet unit = IndexSet::box(IndexPoint(lo), IndexPoint(hi));
  for (auto& p : unit.pts)
    for (auto& x : p.c) x *= n;
  return unit;  // scaling by n > 0 preserves order
}

IndexSet shell_gamma(int d, int n) {
  if (d < 2) throw BadDimension("shell carrier needs dimension >= 2");
  if (n < 1) throw Error("shell radius must be positive");
  std::vector<std::int32_t> lo(d, -n), hi(d, n);
  IndexSet cube = IndexSet::box(IndexPoint(lo), IndexPoint(hi));
  std::vector<IndexPoint> pts;
  for (const auto& p : cube.pts) {
    bool on_shell = false;
    for (int i = 0; i < d; ++i)
      if (p.c[i] == -n || p.c[i] == n) on_shell = true;
    if (on_shell) pts.push_back(p);
  }
  pts.push_back(IndexPoint(std::vector<std::int32_t>(d, 0)));
  return IndexSet::of(std::move(pts));
}

FieldModel single_level_field(IndexSet carrier, Rational theta, int N) {
  FieldModel f;
  f.d = carrier.dim();
  f.N = N;
  if (static_cast<int>(carrier.size()) - 1 < N)
    throw CarrierTooSmall("carrier of " + std::to_string(carrier.size()) +
                          " points cannot protect " + std::to_string(N) + "-tuples");
  f.levels.push_back(Level::make(std::move(carrier), theta));
  f.construction = "custom";
  f.params["theta"] = theta.str();
  f.validate();
  return f;
}

FieldModel lemma31_field(int d, int N, int n, Rational theta) {
  if (d < 1) throw BadDimension("lemma31 requires d >= 1");
  if (N < 2) throw Error("lemma31 requires N >= 2");
  if (n < 1) throw Error("lemma31 requires n >= 1");
  if (!theta.is_probability())
    throw Error("lemma31 requires theta in [0,1], got " + theta.str());
  // smallest M >= 2 with M^d - 1 >= N
  auto cardinality = [d](int M) {
    long long card = 1;
    for (int i = 0; i < d; ++i) {
      card *= M;
      if (card > (1LL << 40)) break;  // saturate, already far beyond any N
    }
    return card;
  };
  int M = 2;
  while (cardinality(M) - 1 < N) ++M;
  FieldModel f = single_level_field(lattice_block_lambda(d, M, n), theta, N);
  f.construction = "lemma31";
  f.params = nlohmann::ordered_json::object();
  f.params["d"] = d;
  f.params["N"] = N;
  f.params["n"] = n;
  f.params["M"] = M;
  f.params["theta"] = theta.str();
  return f;
}

FieldModel lemma41_field(int d, int N, int n) {
  if (d < 2) throw BadDimension("lemma41 requires d >= 2");
  if (N < 2) throw Error("lemma41 requires N >= 2");
  if (n < 1) throw Error("lemma41 requires n >= 1");
  int n_eff = std::max(n, N + 1);  // separation must exceed the tuple order
  FieldModel f = single_level_field(shell_gamma(d, n_eff), Rational(1), N);
  f.construction = "lemma41";
  f.params = nlohmann::ordered_json::object();
  f.params["d"] = d;
  f.params["N"] = N;
  f.params["n_requested"] = n;
  f.params["n"] = n_eff;
  return f;
}

FieldModel stack_fields(std::span<const FieldModel> parts) {
  if (parts.empty()) throw Error("stack of no fields");
  FieldModel f;
  f.d = parts[0].d;
  f.N = parts[0].N;
  for (const auto& p : parts) {
    if (p.d != f.d)
      throw DimensionMismatch("stacked fields must share the lattice dimension");
    f.N = std::min(f.N, p.N);
    for (const auto& l : p.levels) f.levels.push_back(l);
  }
  f.construction = "custom";
  f.params = nlohmann::ordered_json::object();
  f.validate();
  return f;
}

FieldModel thm14_field(int d, int N, const RateSequence& rates) {
  if (d < 1) throw BadDimension("thm14 requires d >= 1");
  if (N < 2) throw Error("thm14 requires N >= 2");
  std::vector<FieldModel> parts;
  for (std::size_t i = 0; i < rates.values.size(); ++i)
    parts.push_back(lemma31_field(d, N, static_cast<int>(i + 1), rates.values[i]));
  FieldModel f = stack_fields(parts);
  f.construction = "thm14";
  f.params = nlohmann::ordered_json::object();
  f.params["d"] = d;
  f.params["N"] = N;
  f.params["rates"] = nlohmann::ordered_json::array();
  for (const auto& r : rates.values) f.params["rates"].push_back(r.str());
  return f;
}

FieldModel lemma42_field(int d, int N, int L) {
  if (d < 2) throw BadDimension("lemma42 requires d >= 2");
  if (L < 1) throw Error("lemma42 requires levels >= 1");
  std::vector<FieldModel> parts;
  for (int j = 1; j <= L; ++j) parts.push_back(lemma41_field(d, N, j));
  FieldModel f = stack_fields(parts);
  f.construction = "lemma42";
  f.params = nlohmann::ordered_json::object();
  f.params["d"] = d;
  f.params["N"] = N;
  f.params["L"] = L;
  return f;
}

FieldModel thm15_field(int d, int N, const RateSequence& rates, int L) {
  if (d < 2) throw BadDimension("thm15 requires d >= 2");
  if (L < 1) throw Error("thm15 requires levels >= 1");
  FieldModel parts[2] = {thm14_field(d, N, rates), lemma42_field(d, N, L)};
  FieldModel f = stack_fields(parts);
  f.construction = "thm15";
  f.params = nlohmann::ordered_json::object();
  f.params["d"] = d;
  f.params["N"] = N;
  f.params["rates"] = nlohmann::ordered_json::array();
  for (const auto& r : rates.values) f.params["rates"].push_back(r.str());
  f.params["L"] = L;
  return f;
}

std::vector<CopyRef> relevant_copies(const FieldModel& f,
                                     const std::vector<IndexPoint>& sites) {
  IndexSet site_set = IndexSet::of(sites);
  std::vector<CopyRef> out;
  for (std::size_t li = 0; li < f.levels.size(); ++li) {
    const Level& lev = f.levels[li];
    std::vector<IndexPoint> offsets;
    for (const auto& s : site_set.pts)
      for (const auto& j : lev.carrier.pts) offsets.push_back(s - j);
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    for (const auto& u : offsets) {
      CopyRef cr;
      cr.level = static_cast<int>(li);
      cr.offset = u;
      for (int b = 0; b < lev.bits(); ++b) {
        if (auto idx = site_set.index_of(lev.encoding[b] + u)) {
          cr.bit_idx.push_back(b);
          cr.site_idx.push_back(static_cast<int>(*idx));
        }
      }
      if (cr.bit_idx.empty()) continue;
      cr.full = cr.bit_idx.size() == lev.carrier.size();
      out.push_back(std::move(cr));
    }
  }
  return out;
}

namespace {

// log2 of the joint support size implied by the copies (exact integer).
int support_bits(const FieldModel& f, const std::vector<CopyRef>& copies) {
  int bits = 0;
  for (const auto& cr : copies) {
    bits += static_cast<int>(cr.bit_idx.size());
    if (cr.full && f.levels[cr.level].theta == Rational(1)) bits -= 1;
  }
  return bits;
}

}  // namespace

namespace {

// Exact law of the visible bits of the given copies over the sites; labels
// are per-(site, level) values assembled from those bits alone.
FiniteDistribution assemble_law(const FieldModel& f, const IndexSet& sites,
                                const std::vector<CopyRef>& copies,
                                const TableCaps& caps) {
  int bits = support_bits(f, copies);
  if (bits >= 63 || (std::size_t(1) << bits) > caps.leaf_cap)
    throw TooManyAtoms("joint support of 2^" + std::to_string(bits) +
                       " atoms exceeds the enumeration cap");

  const std::size_t ns = sites.size(), nl = f.levels.size();
  std::vector<std::pair<Label, Rational>> atoms;
  atoms.reserve(std::size_t(1) << bits);
  std::vector<Value> val(ns * nl, 0);  // val[site * nl + level]

  std::function<void(std::size_t, const Rational&)> rec =
      [&](std::size_t ci, const Rational& prob) {
        if (ci == copies.size()) {
          atoms.emplace_back(Label(val), prob);
          return;
        }
        const CopyRef& cr = copies[ci];
        const Level& lev = f.levels[cr.level];
        const int m = lev.bits();
        const int v = static_cast<int>(cr.bit_idx.size());
        if (cr.full && !lev.theta.is_zero()) {
          Rational base(1, std::int64_t(1) << m);
          Rational even = base * (Rational(1) + lev.theta);
          Rational odd = base * (Rational(1) - lev.theta);
          for (std::uint64_t code = 0; code < (std::uint64_t(1) << m); ++code) {
            // bit b set <-> sign +1 at carrier position b; the parity of the
            // sign product is determined by the count of -1 entries
            bool even_parity = ((m - std::popcount(code)) % 2) == 0;
            const Rational& pc = even_parity ? even : odd;
            if (pc.is_zero()) continue;
            for (int k = 0; k < v; ++k)
              if ((code >> cr.bit_idx[k]) & 1)
                val[cr.site_idx[k] * nl + cr.level] |= Value(1) << cr.bit_idx[k];
            rec(ci + 1, prob * pc);
            for (int k = 0; k < v; ++k)
              val[cr.site_idx[k] * nl + cr.level] &= ~(Value(1) << cr.bit_idx[k]);
          }
        } else {
          // partially visible (or unbiased) copy: visible bits are iid fair
          Rational pc = prob * Rational(1, std::int64_t(1) << v);
          for (std::uint64_t code = 0; code < (std::uint64_t(1) << v); ++code) {
            for (int k = 0; k < v; ++k)
              if ((code >> k) & 1)
                val[cr.site_idx[k] * nl + cr.level] |= Value(1) << cr.bit_idx[k];
            rec(ci + 1, pc);
            for (int k = 0; k < v; ++k)
              val[cr.site_idx[k] * nl + cr.level] &= ~(Value(1) << cr.bit_idx[k]);
          }
        }
      };
  rec(0, Rational(1));

  // Distinct branches set distinct visible bits, so labels are unique; the
  // final mass check in from_sorted still guards the assembly.
  std::sort(atoms.begin(), atoms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return FiniteDistribution::from_sorted(std::move(atoms));
}

}  // namespace

FiniteDistribution joint_law(const FieldModel& f, const IndexSet& sites,
                             const TableCaps& caps) {
  f.validate();
  if (sites.empty()) throw Error("joint law over no sites");
  if (sites.dim() != f.d)
    throw DimensionMismatch("sites dimension differs from field dimension");
  return assemble_law(f, sites, relevant_copies(f, sites.pts), caps);
}

namespace {

JointTable split_pair_law(const FieldModel& f, const IndexSet& s,
                          const IndexSet& sites, const FiniteDistribution& law,
                          const TableCaps& caps) {
  const std::size_t nl = f.levels.size();
  std::vector<int> row_coords, col_coords;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    auto& dst = s.contains(sites.pts[i]) ? row_coords : col_coords;
    for (std::size_t l = 0; l < nl; ++l)
      dst.push_back(static_cast<int>(i * nl + l));
  }

  // Pre-check the table shape against the caps before the dense allocation.
  {
    std::map<Label, char> rset, cset;
    auto select = [](const Label& l, const std::vector<int>& coords) {
      Label out;
      out.reserve(coords.size());
      for (int c : coords) out.push_back(l[c]);
      return out;
    };
    for (const auto& [l, p] : law.atoms()) {
      rset.emplace(select(l, row_coords), 0);
      cset.emplace(select(l, col_coords), 0);
    }
    if (rset.size() > caps.side_cap || cset.size() > caps.side_cap)
      throw TooManyAtoms("pair table side exceeds cap of " +
                         std::to_string(caps.side_cap) + " atoms");
    if (rset.size() * cset.size() > caps.cell_cap)
      throw TooManyAtoms("pair table exceeds cell cap");
  }
  return JointTable::from_split(law, row_coords, col_coords);
}

void check_pair_sides(const IndexSet& s, const IndexSet& t) {
  if (s.empty() || t.empty()) throw BadSubset("both sides need at least one site");
  for (const auto& p : s.pts)
    if (t.contains(p)) throw BadSubset("sides of a pair must be disjoint");
}

}  // namespace

JointTable joint_table(const FieldModel& f, const IndexSet& s, const IndexSet& t,
                       const TableCaps& caps) {
  check_pair_sides(s, t);
  IndexSet sites = s.united(t);
  FiniteDistribution law = joint_law(f, sites, caps);
  return split_pair_law(f, s, sites, law, caps);
}

JointTable core_pair_table(const FieldModel& f, const IndexSet& s,
                           const IndexSet& t, const TableCaps& caps) {
  f.validate();
  check_pair_sides(s, t);
  IndexSet sites = s.united(t);
  if (sites.dim() != f.d)
    throw DimensionMismatch("sites dimension differs from field dimension");
  // Copies feeding only one side are independent of everything else, so they
  // tensor a one-sided uniform factor onto the pair: neither the maximal
  // correlation nor the strong mixing coefficient of the pair moves.  Keeping
  // only the copies that straddle both sides measures the same coefficients
  // on a far smaller table.
  std::vector<CopyRef> copies = relevant_copies(f, sites.pts);
  std::erase_if(copies, [&](const CopyRef& cr) {
    bool meets_s = false, meets_t = false;
    for (int si : cr.site_idx) {
      if (s.contains(sites.pts[static_cast<std::size_t>(si)])) meets_s = true;
      else meets_t = true;
    }
    return !(meets_s && meets_t);
  });
  FiniteDistribution law = assemble_law(f, sites, copies, caps);
  return split_pair_law(f, s, sites, law, caps);
}

FiniteDistribution marginal_of_point(const FieldModel& f, const IndexPoint& k,
                                     int max_bits) {
  f.validate();
  if (k.dim() != f.d) throw DimensionMismatch("site dimension differs from field");
  int bits = f.value_bits();
  if (bits > max_bits)
    throw TooManyAtoms("site alphabet of 2^" + std::to_string(bits) +
                       " values exceeds the cap");
  // Every bit of the value comes from a distinct independent copy and each
  // single coordinate of a copy is a fair sign, so the value is uniform.
  std::vector<FiniteDistribution::Atom> atoms;
  atoms.reserve(std::size_t(1) << bits);
  Rational w(1, std::int64_t(1) << bits);
  for (std::int64_t code = 0; code < (std::int64_t(1) << bits); ++code)
    atoms.emplace_back(Label{code}, w);
  return FiniteDistribution::from_sorted(std::move(atoms));
}

unsigned __int128 pack_code(const FieldModel& f, std::span<const Value> level_values) {
  if (level_values.size() != f.levels.size())
    throw BadArity("expected one value per level");
  unsigned __int128 code = 0;
  for (std::size_t l = 0; l < f.levels.size(); ++l) {
    Value v = level_values[l];
    if (v < 0 || (f.levels[l].bits() < 62 && v >= (Value(1) << f.levels[l].bits())))
      throw Error("level value out of range");
    code |= static_cast<unsigned __int128>(static_cast<std::uint64_t>(v))
            << f.level_bit_offset(static_cast<int>(l));
  }
  return code;
}

std::vector<Value> unpack_code(const FieldModel& f, unsigned __int128 code) {
  std::vector<Value> vals(f.levels.size());
  for (std::size_t l = 0; l < f.levels.size(); ++l) {
    int b = f.levels[l].bits();
    vals[l] = static_cast<Value>(
        static_cast<std::uint64_t>(code >> f.level_bit_offset(static_cast<int>(l))) &
        ((std::uint64_t(1) << b) - 1));
  }
  return vals;
}

std::string u128_str(unsigned __int128 v) {
  if (v == 0) return "0";
  std::string s;
  while (v > 0) {
    s += static_cast<char>('0' + static_cast<int>(v % 10));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

unsigned __int128 u128_parse(std::string_view s) {
  if (s.empty()) throw ParseError("empty integer");
  unsigned __int128 v = 0;
  for (char ch : s) {
    if (ch < '0' || ch > '9') throw ParseError("not a nonnegative integer: '" +
                                               std::string(s) + "'");
    unsigned __int128 next = v * 10 + (ch - '0');
    if (next < v) throw ParseError("integer out of range");
    v = next;
  }
  return v;
}

NtupleCheck check_ntuplewise(const FieldModel& f, const IndexSet& window,
                             int tuple_size, const TableCaps& caps) {
  f.validate();
  int k = tuple_size ? tuple_size : f.N;
  if (k < 2) throw Error("tuple size must be at least 2");
  NtupleCheck out;
  if (window.size() < static_cast<std::size_t>(k)) return out;

  // Guard the combination count.
  {
    unsigned __int128 count = 1;
    for (int i = 0; i < k; ++i) {
      count = count * (window.size() - i) / (i + 1);
      if (count > (std::size_t(1) << 20))
        throw TooManyAtoms("too many tuples to enumerate");
    }
  }

  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t nl = f.levels.size();
  while (true) {
    std::vector<IndexPoint> pts;
    pts.reserve(k);
    for (std::size_t i : idx) pts.push_back(window.pts[i]);
    IndexSet tuple = IndexSet::of(pts);

    std::vector<CopyRef> copies = relevant_copies(f, tuple.pts);
    bool structurally_dependent = false;
    for (const auto& cr : copies)
      if (cr.full && !f.levels[cr.level].theta.is_zero()) structurally_dependent = true;

    bool dependent = structurally_dependent;
    if (support_bits(f, copies) <= 18) {
      // both routes are exact; cross-check them
      FiniteDistribution law = joint_law(f, tuple, caps);
      std::vector<std::vector<int>> groups;
      for (int s = 0; s < k; ++s) {
        std::vector<int> g;
        for (std::size_t l = 0; l < nl; ++l)
          g.push_back(static_cast<int>(s * nl + l));
        groups.push_back(std::move(g));
      }
      bool independent = is_independent(law, groups);
      if (independent == structurally_dependent)
        throw Error("internal: structural and enumerated independence disagree");
      dependent = !independent;
    }
    ++out.tuples_checked;
    if (dependent) {
      out.ok = false;
      out.witness = tuple.pts;
      return out;
    }

    // next combination
    int pos = k - 1;
    while (pos >= 0 && idx[pos] == window.size() - k + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
  }
  return out;
}

}  // namespace mixfield
