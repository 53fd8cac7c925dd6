#include "mixfield/coefficients.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>

#include "mixfield/dependence.hpp"
#include "mixfield/nu.hpp"
#include "mixfield/parallel.hpp"

namespace mixfield {

std::string_view kind_name(CoefficientKind k) {
  switch (k) {
    case CoefficientKind::alpha: return "alpha";
    case CoefficientKind::rho: return "rho";
    case CoefficientKind::rho_prime: return "rho_prime";
    case CoefficientKind::rho_star: return "rho_star";
  }
  throw Error("unknown coefficient kind");
}

CoefficientKind kind_from_name(std::string_view s) {
  if (s == "alpha") return CoefficientKind::alpha;
  if (s == "rho") return CoefficientKind::rho;
  if (s == "rho_prime") return CoefficientKind::rho_prime;
  if (s == "rho_star") return CoefficientKind::rho_star;
  throw ParseError("unknown coefficient kind: '" + std::string(s) + "'");
}

std::string_view method_name(CoefMethod m) {
  return m == CoefMethod::structural ? "structural" : "numeric";
}

CoefMethod method_from_name(std::string_view s) {
  if (s == "structural") return CoefMethod::structural;
  if (s == "numeric") return CoefMethod::numeric;
  throw ParseError("unknown method: '" + std::string(s) + "'");
}

nlohmann::ordered_json CoefficientReport::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = std::string(kind_name(kind));
  j["n"] = n;
  j["method"] = std::string(method_name(method));
  j["window"] = window.str();
  j["value"] = value;
  if (exact) j["exact"] = exact->str();
  if (bracket) {
    j["bracket"] = {{"lower", bracket->lower.str()}, {"upper", bracket->upper.str()}};
  }
  j["witness_s"] = witness_s.str();
  j["witness_t"] = witness_t.str();
  j["pairs_considered"] = pairs_considered;
  j["pairs_skipped"] = pairs_skipped;
  return j;
}

IndexSet auto_window(const FieldModel& f, int n) {
  f.validate();
  if (n < 0) throw Error("window dilation must be nonnegative");
  IndexSet w;
  for (const auto& lev : f.levels) {
    auto [lo, hi] = lev.carrier.bounding_box();
    for (auto& x : lo.c) x -= n;
    for (auto& x : hi.c) x += n;
    w = w.empty() ? IndexSet::box(lo, hi) : w.united(IndexSet::box(lo, hi));
  }
  return w;
}

namespace {

using Mask = std::uint32_t;

// Lexicographic order on index sets encoded as bitmasks, matching the order
// of the sets written out as sorted element lists (proper prefixes first).
bool mask_lex_less(Mask a, Mask b) {
  while (a != 0 && b != 0) {
    int ia = std::countr_zero(a);
    int ib = std::countr_zero(b);
    if (ia != ib) return ia < ib;
    a &= a - 1;
    b &= b - 1;
  }
  return b != 0;
}

// Offsets u with carrier + u contained in the window, in lexicographic
// order.  Anchoring the first carrier point on each window point is enough.
std::vector<IndexPoint> admissible_shifts(const Level& lev, const IndexSet& w) {
  std::vector<IndexPoint> out;
  const IndexPoint& j0 = lev.carrier.pts.front();
  for (const auto& p : w.pts) {
    IndexPoint u = p - j0;
    bool ok = true;
    for (const auto& j : lev.carrier.pts)
      if (!w.contains(j + u)) {
        ok = false;
        break;
      }
    if (ok) out.push_back(u);
  }
  return out;
}

// Witness shift: the untranslated copy when it fits, else the
// lexicographically least admissible one.
const IndexPoint& witness_shift(const std::vector<IndexPoint>& shifts, int d) {
  IndexPoint zero(std::vector<std::int32_t>(d, 0));
  for (const auto& u : shifts)
    if (u == zero) return u;
  return shifts.front();
}

// Connected components of the carrier under "Euclidean distance < n" edges.
// Two components are always >= n apart, which is exactly what a valid pair
// at gap n needs.
std::vector<int> proximity_components(const IndexSet& c, int n, int* count_out) {
  const std::size_t k = c.size();
  std::vector<int> parent(k);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  const long long n2 = static_cast<long long>(n) * n;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      if (dist2(c.pts[i], c.pts[j]) < n2) parent[find(static_cast<int>(i))] = find(static_cast<int>(j));
  std::vector<int> comp(k, -1);
  int count = 0;
  for (std::size_t i = 0; i < k; ++i) {
    int root = find(static_cast<int>(i));
    if (comp[root] < 0) comp[root] = count++;
  }
  std::vector<int> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = comp[find(static_cast<int>(i))];
  if (count_out) *count_out = count;
  return out;
}

std::vector<std::int32_t> axis_coords(const IndexSet& w, int axis) {
  std::vector<std::int32_t> v;
  v.reserve(w.size());
  for (const auto& p : w.pts) v.push_back(p.c[axis]);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

IndexSet coord_slice(const IndexSet& w, int axis,
                     const std::vector<std::int32_t>& values) {
  std::vector<IndexPoint> pts;
  for (const auto& p : w.pts)
    if (std::binary_search(values.begin(), values.end(), p.c[axis]))
      pts.push_back(p);
  return IndexSet::of(std::move(pts));
}

// A candidate result; the strict total order below makes every reduction
// deterministic: higher value first, then lexicographically smallest pair.
struct Cand {
  double value = 0.0;
  std::optional<Rational> exact;
  IndexSet s, t;
};

bool cand_better(const Cand& a, const Cand& b) {
  if (a.exact && b.exact) {
    if (*a.exact != *b.exact) return *a.exact > *b.exact;
  } else if (a.value != b.value) {
    return a.value > b.value;
  }
  if (a.s.pts != b.s.pts) return a.s.pts < b.s.pts;
  return a.t.pts < b.t.pts;
}

// Half-space pairs at gap n: for each axis and cut, everything at coordinate
// <= cut against everything at coordinate >= cut + n.
std::vector<std::pair<IndexSet, IndexSet>> halfspace_pairs(const IndexSet& w, int n) {
  std::vector<std::pair<IndexSet, IndexSet>> out;
  for (int axis = 0; axis < w.dim(); ++axis) {
    for (std::int32_t cut : axis_coords(w, axis)) {
      std::vector<IndexPoint> s, t;
      for (const auto& p : w.pts) {
        if (p.c[axis] <= cut) s.push_back(p);
        if (p.c[axis] >= cut + n) t.push_back(p);
      }
      if (s.empty() || t.empty()) continue;
      out.emplace_back(IndexSet::of(std::move(s)), IndexSet::of(std::move(t)));
    }
  }
  return out;
}

// Enumerates slab pairs along one axis: each distinct coordinate value goes
// to G, to H, or to neither, all cross distances |g - h| must be >= n, and
// the lowest assigned coordinate goes to G (the pair is unordered).
template <typename Fn>
void for_each_slab_pair(const std::vector<std::int32_t>& coords, int n, Fn&& fn) {
  const int k = static_cast<int>(coords.size());
  std::vector<int> assign(k, 0);  // 0 none, 1 G, 2 H
  std::function<void(int, int, int)> rec = [&](int i, int last_g, int last_h) {
    if (i == k) {
      Mask g = 0, h = 0;
      for (int j = 0; j < k; ++j) {
        if (assign[j] == 1) g |= Mask(1) << j;
        if (assign[j] == 2) h |= Mask(1) << j;
      }
      if (g && h) fn(g, h);
      return;
    }
    assign[i] = 0;
    rec(i + 1, last_g, last_h);
    // coordinates are sorted, so only the nearest opposite member matters
    if (last_h < 0 || coords[i] - coords[last_h] >= n) {
      assign[i] = 1;
      rec(i + 1, i, last_h);
    }
    if (last_g >= 0 && coords[i] - coords[last_g] >= n) {
      assign[i] = 2;
      rec(i + 1, last_g, i);
    }
    assign[i] = 0;
  };
  rec(0, -1, -1);
}

std::vector<std::int32_t> mask_values(const std::vector<std::int32_t>& coords, Mask m) {
  std::vector<std::int32_t> out;
  for (int j = 0; j < static_cast<int>(coords.size()); ++j)
    if ((m >> j) & 1) out.push_back(coords[j]);
  return out;
}

// All valid pairs for the unrestricted coefficient: disjoint nonempty subsets
// of the window at Euclidean distance >= n, the first assigned point on the
// S side.
std::vector<std::pair<Mask, Mask>> rho_star_pairs(const IndexSet& w, int n,
                                                  std::size_t limit) {
  const int k = static_cast<int>(w.size());
  const long long n2 = static_cast<long long>(n) * n;
  std::vector<Mask> near(k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j && dist2(w.pts[i], w.pts[j]) < n2) near[i] |= Mask(1) << j;
  std::vector<std::pair<Mask, Mask>> out;
  std::function<void(int, Mask, Mask)> rec = [&](int i, Mask s, Mask t) {
    if (i == k) {
      if (s && t) {
        if (out.size() >= limit)
          throw WindowTooLarge("pair enumeration exceeds the candidate limit");
        out.emplace_back(s, t);
      }
      return;
    }
    Mask bit = Mask(1) << i;
    rec(i + 1, s, t);
    if ((near[i] & t) == 0) rec(i + 1, s | bit, t);
    if (s && (near[i] & s) == 0) rec(i + 1, s, t | bit);
  };
  rec(0, 0, 0);
  return out;
}

IndexSet mask_sites(const IndexSet& w, Mask m) {
  std::vector<IndexPoint> pts;
  for (std::size_t i = 0; i < w.size(); ++i)
    if ((m >> i) & 1) pts.push_back(w.pts[i]);
  return IndexSet::of(std::move(pts));
}

// Lexicographically smallest valid pair at gap n, used as the witness when
// the coefficient over the window is zero.
std::pair<IndexSet, IndexSet> smallest_valid_pair(const IndexSet& w, int n) {
  const long long n2 = static_cast<long long>(n) * n;
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (i == j) continue;
      if (dist2(w.pts[i], w.pts[j]) >= n2)
        return {IndexSet::of({w.pts[i]}), IndexSet::of({w.pts[j]})};
    }
  return {IndexSet{}, IndexSet{}};
}

// Split structure of a pair (S, T): one (level, smaller side, larger side)
// triple per biased copy whose carrier lies inside S ∪ T and meets both
// sides.  Copies feeding only one side, partially visible copies, and
// unbiased copies contribute independent factors to both marginals, which
// changes neither dependence coefficient, so the pair's table is -- for
// measurement purposes -- the tensor product of one sign-law split per
// listed triple.  Permutation invariance of the sign law means only the
// split sizes matter, making the structure a compact cache key.
using SplitParts = std::vector<std::array<int, 3>>;

SplitParts split_parts(const FieldModel& f, const IndexSet& s, const IndexSet& t) {
  SplitParts parts;
  IndexSet both = s.united(t);
  for (std::size_t li = 0; li < f.levels.size(); ++li) {
    const Level& lev = f.levels[li];
    if (lev.theta.is_zero()) continue;
    const IndexPoint& j0 = lev.carrier.pts.front();
    for (const auto& p : both.pts) {
      IndexPoint u = p - j0;
      int in_s = 0, in_t = 0;
      bool covered = true;
      for (const auto& j : lev.carrier.pts) {
        IndexPoint q = j + u;
        if (s.contains(q))
          ++in_s;
        else if (t.contains(q))
          ++in_t;
        else {
          covered = false;
          break;
        }
      }
      if (covered && in_s > 0 && in_t > 0)
        parts.push_back({static_cast<int>(li), std::min(in_s, in_t),
                         std::max(in_s, in_t)});
    }
  }
  std::sort(parts.begin(), parts.end());
  return parts;
}

struct SplitVal {
  double value = 0.0;
  std::optional<Rational> exact;
};

// Measures split structures, caching by structure so that the many candidate
// pairs sharing a structure cost one table each.  A missing result means the
// tensor table exceeded the caps and the candidate is skipped.
class SplitEvaluator {
 public:
  SplitEvaluator(const FieldModel& f, CoefficientKind kind, const EngineOptions& opts)
      : f_(f), kind_(kind), opts_(opts) {}

  std::optional<SplitVal> eval(const SplitParts& parts) {
    if (parts.empty()) {
      SplitVal v;
      v.exact = Rational(0);
      return v;
    }
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(parts);
    if (it != cache_.end()) return it->second;
    std::optional<SplitVal> out = measure(parts);
    cache_.emplace(parts, out);
    return out;
  }

 private:
  std::optional<SplitVal> measure(const SplitParts& parts) const {
    try {
      std::vector<JointTable> factors;
      factors.reserve(parts.size());
      for (const auto& part : parts) {
        const Level& lev = f_.levels[static_cast<std::size_t>(part[0])];
        FiniteDistribution law = nu_dist(NuSpec(lev.bits(), lev.theta));
        std::vector<int> rows(static_cast<std::size_t>(part[1]));
        std::vector<int> cols(static_cast<std::size_t>(part[2]));
        std::iota(rows.begin(), rows.end(), 0);
        std::iota(cols.begin(), cols.end(), part[1]);
        factors.push_back(JointTable::from_split(law, rows, cols));
      }
      JointTable table = tensor_product(factors, opts_.caps.cell_cap);
      SplitVal v;
      if (kind_ == CoefficientKind::alpha) {
        Rational a = alpha_exact(table, opts_.alpha_side_cap);
        v.exact = a;
        v.value = a.to_double();
      } else {
        v.value = rho_svd(table, opts_.svd_top_tol);
      }
      return v;
    } catch (const TooManyAtoms&) {
      return std::nullopt;
    }
  }

  const FieldModel& f_;
  CoefficientKind kind_;
  const EngineOptions& opts_;
  std::map<SplitParts, std::optional<SplitVal>> cache_;
  std::mutex mu_;
};

struct NumericOutcome {
  std::optional<Cand> best;
  std::size_t considered = 0;
  std::size_t skipped = 0;
};

// Evaluates explicitly listed candidate pairs (the half-space family).
NumericOutcome evaluate_pairs(const FieldModel& f, CoefficientKind kind,
                              const std::vector<std::pair<IndexSet, IndexSet>>& pairs,
                              const EngineOptions& opts) {
  NumericOutcome out;
  out.considered = pairs.size();
  SplitEvaluator ev(f, kind, opts);
  std::atomic<std::size_t> skipped{0};
  auto eval = [&](std::size_t i) -> std::optional<Cand> {
    const auto& [s, t] = pairs[i];
    std::optional<SplitVal> v = ev.eval(split_parts(f, s, t));
    if (!v) {
      skipped.fetch_add(1);
      return std::nullopt;
    }
    Cand c;
    c.value = v->value;
    c.exact = v->exact;
    c.s = s;
    c.t = t;
    return c;
  };
  out.best = parallel_best<Cand>(pairs.size(), opts.threads, eval, cand_better);
  out.skipped = skipped.load();
  return out;
}

// Candidate pairs held as bitmasks while searching; only the winner is
// materialized into index sets.
struct MaskCand {
  double value = 0.0;
  std::optional<Rational> exact;
  Mask s = 0;
  Mask t = 0;
};

bool mask_cand_better(const MaskCand& a, const MaskCand& b) {
  if (a.exact && b.exact) {
    if (*a.exact != *b.exact) return *a.exact > *b.exact;
  } else if (a.value != b.value) {
    return a.value > b.value;
  }
  if (a.s != b.s) return mask_lex_less(a.s, b.s);
  return mask_lex_less(a.t, b.t);
}

// Unrestricted-coefficient search over all valid mask pairs.  Each biased
// in-window copy becomes a site mask; a copy splits across (S, T) when its
// mask lies inside S | T and meets both, and the split sizes are popcounts.
NumericOutcome star_numeric_outcome(const FieldModel& f, const IndexSet& w, int n,
                                    const EngineOptions& opts) {
  std::vector<std::pair<Mask, Mask>> pairs =
      rho_star_pairs(w, n, opts.pair_candidate_cap);
  struct CopyMask {
    Mask sites = 0;
    int level = 0;
  };
  std::vector<CopyMask> copies;
  for (std::size_t li = 0; li < f.levels.size(); ++li) {
    const Level& lev = f.levels[li];
    if (lev.theta.is_zero()) continue;
    for (const auto& u : admissible_shifts(lev, w)) {
      CopyMask cm;
      cm.level = static_cast<int>(li);
      for (const auto& j : lev.carrier.pts) {
        std::size_t idx = 0;
        while (!(w.pts[idx] == j + u)) ++idx;
        cm.sites |= Mask(1) << idx;
      }
      copies.push_back(cm);
    }
  }
  NumericOutcome out;
  out.considered = pairs.size();
  SplitEvaluator ev(f, CoefficientKind::rho_star, opts);
  std::atomic<std::size_t> skipped{0};
  auto eval = [&](std::size_t i) -> std::optional<MaskCand> {
    const auto [s, t] = pairs[i];
    SplitParts parts;
    for (const auto& cm : copies) {
      if ((cm.sites & ~(s | t)) != 0) continue;
      int in_s = std::popcount(cm.sites & s);
      int in_t = std::popcount(cm.sites & t);
      if (in_s > 0 && in_t > 0)
        parts.push_back({cm.level, std::min(in_s, in_t), std::max(in_s, in_t)});
    }
    std::sort(parts.begin(), parts.end());
    std::optional<SplitVal> v = ev.eval(parts);
    if (!v) {
      skipped.fetch_add(1);
      return std::nullopt;
    }
    MaskCand c;
    c.value = v->value;
    c.exact = v->exact;
    c.s = s;
    c.t = t;
    return c;
  };
  std::optional<MaskCand> best =
      parallel_best<MaskCand>(pairs.size(), opts.threads, eval, mask_cand_better);
  out.skipped = skipped.load();
  if (best) {
    Cand c;
    c.value = best->value;
    c.exact = best->exact;
    c.s = mask_sites(w, best->s);
    c.t = mask_sites(w, best->t);
    out.best = c;
  }
  return out;
}

// Slab-union search, one axis at a time.  Candidates are pairs (G, H) of
// coordinate sets along the axis; a copy splits when every coordinate it
// occupies lies in G ∪ H with both met, and the split sizes add up the
// copy's per-coordinate site counts.
NumericOutcome slab_numeric_outcome(const FieldModel& f, const IndexSet& w, int n,
                                    const EngineOptions& opts) {
  NumericOutcome out;
  std::optional<Cand> best;
  for (int axis = 0; axis < w.dim(); ++axis) {
    std::vector<std::int32_t> coords = axis_coords(w, axis);
    if (coords.size() > opts.slab_coord_cap)
      throw WindowTooLarge("slab enumeration cap (" +
                           std::to_string(opts.slab_coord_cap) +
                           " distinct coordinates per axis) exceeded: axis " +
                           std::to_string(axis) + " has " +
                           std::to_string(coords.size()));
    struct SlabCopy {
      Mask need = 0;
      std::vector<int> count;
      int level = 0;
    };
    std::vector<SlabCopy> copies;
    for (std::size_t li = 0; li < f.levels.size(); ++li) {
      const Level& lev = f.levels[li];
      if (lev.theta.is_zero()) continue;
      for (const auto& u : admissible_shifts(lev, w)) {
        SlabCopy sc;
        sc.level = static_cast<int>(li);
        sc.count.assign(coords.size(), 0);
        for (const auto& j : lev.carrier.pts) {
          std::int32_t c = j.c[static_cast<std::size_t>(axis)] +
                           u.c[static_cast<std::size_t>(axis)];
          std::size_t ci = static_cast<std::size_t>(
              std::lower_bound(coords.begin(), coords.end(), c) - coords.begin());
          sc.need |= Mask(1) << ci;
          ++sc.count[ci];
        }
        copies.push_back(std::move(sc));
      }
    }
    std::vector<std::pair<Mask, Mask>> pairs;
    for_each_slab_pair(coords, n, [&](Mask g, Mask h) {
      if (pairs.size() >= opts.pair_candidate_cap)
        throw WindowTooLarge("pair enumeration exceeds the candidate limit");
      pairs.emplace_back(g, h);
    });
    out.considered += pairs.size();
    SplitEvaluator ev(f, CoefficientKind::rho_prime, opts);
    std::atomic<std::size_t> skipped{0};
    auto eval = [&](std::size_t i) -> std::optional<MaskCand> {
      const auto [g, h] = pairs[i];
      SplitParts parts;
      for (const auto& sc : copies) {
        if ((sc.need & ~(g | h)) != 0) continue;
        Mask gs = sc.need & g, hs = sc.need & h;
        if (gs == 0 || hs == 0) continue;
        int in_g = 0, in_h = 0;
        for (Mask m = gs; m != 0; m &= m - 1)
          in_g += sc.count[static_cast<std::size_t>(std::countr_zero(m))];
        for (Mask m = hs; m != 0; m &= m - 1)
          in_h += sc.count[static_cast<std::size_t>(std::countr_zero(m))];
        parts.push_back({sc.level, std::min(in_g, in_h), std::max(in_g, in_h)});
      }
      std::sort(parts.begin(), parts.end());
      std::optional<SplitVal> v = ev.eval(parts);
      if (!v) {
        skipped.fetch_add(1);
        return std::nullopt;
      }
      MaskCand c;
      c.value = v->value;
      c.exact = v->exact;
      c.s = g;
      c.t = h;
      return c;
    };
    std::optional<MaskCand> axis_best =
        parallel_best<MaskCand>(pairs.size(), opts.threads, eval, mask_cand_better);
    out.skipped += skipped.load();
    if (axis_best) {
      Cand c;
      c.value = axis_best->value;
      c.exact = axis_best->exact;
      c.s = coord_slice(w, axis, mask_values(coords, axis_best->s));
      c.t = coord_slice(w, axis, mask_values(coords, axis_best->t));
      if (!best || cand_better(c, *best)) best = c;
    }
  }
  out.best = best;
  return out;
}

}  // namespace

Rational rho_structural(const FieldModel& f, const IndexSet& s, const IndexSet& t) {
  if (s.empty() || t.empty()) throw BadSubset("both sides need at least one site");
  for (const auto& p : s.pts)
    if (t.contains(p)) throw BadSubset("sides of a pair must be disjoint");
  IndexSet both = s.united(t);
  Rational best(0);
  for (const auto& lev : f.levels) {
    if (lev.theta <= best) continue;
    const IndexPoint& j0 = lev.carrier.pts.front();
    for (const auto& p : both.pts) {
      IndexPoint u = p - j0;
      bool covered = true, meets_s = false, meets_t = false;
      for (const auto& j : lev.carrier.pts) {
        IndexPoint q = j + u;
        if (s.contains(q))
          meets_s = true;
        else if (t.contains(q))
          meets_t = true;
        else {
          covered = false;
          break;
        }
      }
      if (covered && meets_s && meets_t) {
        best = lev.theta;
        break;  // no larger value possible from this level
      }
    }
  }
  return best;
}

namespace {

// ---- structural paths ----

CoefficientReport structural_halfspace(const FieldModel& f, CoefficientKind kind,
                                       int n, const IndexSet& w) {
  auto pairs = halfspace_pairs(w, n);
  std::optional<Cand> best;
  for (const auto& [s, t] : pairs) {
    Cand c;
    c.exact = rho_structural(f, s, t);
    c.value = c.exact->to_double();
    c.s = s;
    c.t = t;
    if (!best || cand_better(c, *best)) best = std::move(c);
  }
  CoefficientReport rep;
  rep.kind = kind;
  rep.n = n;
  rep.method = CoefMethod::structural;
  rep.window = w;
  rep.pairs_considered = pairs.size();
  Rational value = best ? *best->exact : Rational(0);
  if (best) {
    rep.witness_s = best->s;
    rep.witness_t = best->t;
  }
  if (kind == CoefficientKind::alpha) {
    // The witness pair exhibits a restricted copy split, so its strong
    // mixing coefficient is exactly a quarter of the copy bias; the windowed
    // rho bounds alpha from above by the same amount.
    Rational a = value / Rational(4);
    rep.bracket = Bracket{a, a};
    rep.exact = a;
    rep.value = a.to_double();
  } else {
    rep.exact = value;
    rep.value = value.to_double();
  }
  return rep;
}

CoefficientReport structural_slab(const FieldModel& f, int n, const IndexSet& w) {
  CoefficientReport rep;
  rep.kind = CoefficientKind::rho_prime;
  rep.n = n;
  rep.method = CoefMethod::structural;
  rep.window = w;

  // A level can show through some slab pair on an axis exactly when its
  // projected coordinate list has a consecutive gap of at least n (split at
  // the gap) and a translate fits inside the window.
  std::optional<Cand> best;
  for (std::size_t li = 0; li < f.levels.size(); ++li) {
    const Level& lev = f.levels[li];
    if (lev.theta.is_zero()) continue;
    if (best && *best->exact >= lev.theta) continue;
    auto shifts = admissible_shifts(lev, w);
    if (shifts.empty()) continue;
    for (int axis = 0; axis < f.d && (!best || *best->exact < lev.theta); ++axis) {
      std::vector<std::int32_t> proj;
      for (const auto& j : lev.carrier.pts) proj.push_back(j.c[axis]);
      std::sort(proj.begin(), proj.end());
      proj.erase(std::unique(proj.begin(), proj.end()), proj.end());
      for (std::size_t g = 0; g + 1 < proj.size(); ++g) {
        ++rep.pairs_considered;
        if (proj[g + 1] - proj[g] < n) continue;
        const IndexPoint& u = witness_shift(shifts, f.d);
        std::vector<std::int32_t> gv, hv;
        for (std::size_t i = 0; i < proj.size(); ++i)
          (i <= g ? gv : hv).push_back(proj[i] + u.c[axis]);
        Cand c;
        c.exact = lev.theta;
        c.value = lev.theta.to_double();
        c.s = coord_slice(w, axis, gv);
        c.t = coord_slice(w, axis, hv);
        if (!best || cand_better(c, *best)) best = std::move(c);
        break;  // one split per axis is enough for the value
      }
    }
  }
  if (best) {
    rep.exact = best->exact;
    rep.value = best->value;
    rep.witness_s = best->s;
    rep.witness_t = best->t;
  } else {
    rep.exact = Rational(0);
    rep.value = 0.0;
    auto [s, t] = smallest_valid_pair(w, n);
    rep.witness_s = s;
    rep.witness_t = t;
  }
  return rep;
}

CoefficientReport structural_star(const FieldModel& f, int n, const IndexSet& w) {
  CoefficientReport rep;
  rep.kind = CoefficientKind::rho_star;
  rep.n = n;
  rep.method = CoefMethod::structural;
  rep.window = w;

  // A level shows through some pair exactly when its proximity graph at
  // threshold n is disconnected (components are >= n apart by definition)
  // and a translate fits inside the window.
  std::optional<Cand> best;
  for (std::size_t li = 0; li < f.levels.size(); ++li) {
    const Level& lev = f.levels[li];
    if (lev.theta.is_zero()) continue;
    if (best && *best->exact >= lev.theta) continue;
    ++rep.pairs_considered;
    int ncomp = 0;
    std::vector<int> comp = proximity_components(lev.carrier, n, &ncomp);
    if (ncomp < 2) continue;
    auto shifts = admissible_shifts(lev, w);
    if (shifts.empty()) continue;
    // components ordered by (size, lexicographically least point): the
    // smallest forms the S side of the witness
    std::vector<std::pair<std::pair<std::size_t, IndexPoint>, int>> order;
    for (int cidx = 0; cidx < ncomp; ++cidx) {
      std::size_t size = 0;
      IndexPoint first;
      for (std::size_t i = 0; i < lev.carrier.size(); ++i)
        if (comp[i] == cidx) {
          if (size == 0) first = lev.carrier.pts[i];
          ++size;
        }
      order.push_back({{size, first}, cidx});
    }
    std::sort(order.begin(), order.end());
    int s_comp = order.front().second;
    std::vector<IndexPoint> s_pts, t_pts;
    const IndexPoint& u = witness_shift(shifts, f.d);
    for (std::size_t i = 0; i < lev.carrier.size(); ++i)
      (comp[i] == s_comp ? s_pts : t_pts).push_back(lev.carrier.pts[i] + u);
    Cand c;
    c.exact = lev.theta;
    c.value = lev.theta.to_double();
    c.s = IndexSet::of(std::move(s_pts));
    c.t = IndexSet::of(std::move(t_pts));
    if (!best || cand_better(c, *best)) best = std::move(c);
  }
  if (best) {
    rep.exact = best->exact;
    rep.value = best->value;
    rep.witness_s = best->s;
    rep.witness_t = best->t;
  } else {
    rep.exact = Rational(0);
    rep.value = 0.0;
    auto [s, t] = smallest_valid_pair(w, n);
    rep.witness_s = s;
    rep.witness_t = t;
  }
  return rep;
}

// ---- numeric paths ----

CoefficientReport numeric_report(CoefficientKind kind, int n, const IndexSet& w,
                                 const NumericOutcome& out) {
  if (out.considered > 0 && out.skipped == out.considered)
    throw TooManyAtoms("every candidate pair exceeded the table caps");
  CoefficientReport rep;
  rep.kind = kind;
  rep.n = n;
  rep.method = CoefMethod::numeric;
  rep.window = w;
  rep.pairs_considered = out.considered;
  rep.pairs_skipped = out.skipped;
  if (out.best) {
    rep.value = out.best->value;
    rep.exact = out.best->exact;
    rep.witness_s = out.best->s;
    rep.witness_t = out.best->t;
  } else {
    auto [s, t] = smallest_valid_pair(w, n);
    rep.witness_s = s;
    rep.witness_t = t;
  }
  return rep;
}

}  // namespace

CoefficientReport windowed_coefficient(const FieldModel& f, CoefficientKind kind,
                                       int n, const IndexSet& window,
                                       CoefMethod method, const EngineOptions& opts) {
  f.validate();
  if (n < 1) throw Error("gap must be at least 1");
  if (window.empty()) throw Error("empty window");
  if (window.dim() != f.d)
    throw DimensionMismatch("window dimension differs from field dimension");

  if (method == CoefMethod::structural) {
    switch (kind) {
      case CoefficientKind::alpha:
      case CoefficientKind::rho:
        return structural_halfspace(f, kind, n, window);
      case CoefficientKind::rho_prime:
        return structural_slab(f, n, window);
      case CoefficientKind::rho_star:
        return structural_star(f, n, window);
    }
    throw Error("unknown coefficient kind");
  }

  switch (kind) {
    case CoefficientKind::alpha:
    case CoefficientKind::rho:
      return numeric_report(
          kind, n, window,
          evaluate_pairs(f, kind, halfspace_pairs(window, n), opts));
    case CoefficientKind::rho_prime:
      return numeric_report(kind, n, window,
                            slab_numeric_outcome(f, window, n, opts));
    case CoefficientKind::rho_star:
      if (window.size() > opts.pair_window_cap)
        throw WindowTooLarge("window of " + std::to_string(window.size()) +
                             " sites exceeds the pair enumeration cap of " +
                             std::to_string(opts.pair_window_cap));
      return numeric_report(kind, n, window,
                            star_numeric_outcome(f, window, n, opts));
  }
  throw Error("unknown coefficient kind");
}

}  // namespace mixfield
