#include "mixfield/sampler.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

#include "mixfield/parallel.hpp"

namespace mixfield {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::uint32_t ctr[4], const std::uint32_t key[2]) {
  std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
  std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
  std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  std::uint32_t out0 = hi1 ^ ctr[1] ^ key[0];
  std::uint32_t out1 = lo1;
  std::uint32_t out2 = hi0 ^ ctr[3] ^ key[1];
  std::uint32_t out3 = lo0;
  ctr[0] = out0;
  ctr[1] = out1;
  ctr[2] = out2;
  ctr[3] = out3;
}

}  // namespace

PhiloxStream::PhiloxStream(std::uint64_t seed, std::uint32_t sub0,
                           std::uint32_t sub1, std::uint32_t sub2) {
  key_[0] = static_cast<std::uint32_t>(seed);
  key_[1] = static_cast<std::uint32_t>(seed >> 32);
  ctr_[0] = sub0;
  ctr_[1] = sub1;
  ctr_[2] = sub2;
  ctr_[3] = 0;
}

void PhiloxStream::refill() {
  std::uint32_t block[4] = {ctr_[0], ctr_[1], ctr_[2], ctr_[3]};
  std::uint32_t key[2] = {key_[0], key_[1]};
  for (int round = 0; round < 10; ++round) {
    philox_round(block, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  out_[0] = block[0];
  out_[1] = block[1];
  out_[2] = block[2];
  out_[3] = block[3];
  have_ = 4;
  ++ctr_[3];
}

std::uint32_t PhiloxStream::next_u32() {
  if (have_ == 0) refill();
  return out_[4 - have_--];
}

std::uint64_t PhiloxStream::next_u64() {
  std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double PhiloxStream::next_double53() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t PhiloxStream::next_below(std::uint64_t bound) {
  if (bound == 0) throw Error("draw below zero");
  if (bound == 1) return 0;
  int bits = 64 - std::countl_zero(bound - 1);
  std::uint64_t mask = bits >= 64 ? ~std::uint64_t(0) : ((std::uint64_t(1) << bits) - 1);
  while (true) {
    std::uint64_t r;
    if (bits <= 32)
      r = next_u32() & mask;
    else
      r = next_u64() & mask;
    if (r < bound) return r;
  }
}

bool PhiloxStream::bernoulli(const Rational& p) {
  if (!p.is_probability()) throw Error("probability outside [0,1]");
  return next_below(static_cast<std::uint64_t>(p.den())) <
         static_cast<std::uint64_t>(p.num());
}

namespace {

// Packs a carrier offset into one 32-bit substream word (zig-zag per
// coordinate).  The admissible coordinate range shrinks with the dimension.
std::uint32_t pack_offset(const IndexPoint& u) {
  int d = u.dim();
  if (d < 1 || d > 4)
    throw Error("sampling supports lattice dimensions 1 through 4");
  int bits_per = 32 / d;
  std::int64_t limit = std::int64_t(1) << (bits_per - 1);
  std::uint32_t packed = 0;
  for (int i = 0; i < d; ++i) {
    std::int32_t x = u.c[i];
    if (x <= -limit || x >= limit)
      throw Error("carrier offset coordinate " + std::to_string(x) +
                  " out of the packable range for dimension " + std::to_string(d));
    std::uint32_t z = (static_cast<std::uint32_t>(x) << 1) ^
                      static_cast<std::uint32_t>(x >> 31);  // zig-zag
    std::uint32_t mask =
        static_cast<std::uint32_t>((std::uint64_t(1) << bits_per) - 1);
    packed |= (z & mask) << (i * bits_per);
  }
  return packed;
}

struct LevelDraw {
  int level;
  std::uint32_t sub1;
  std::uint32_t sub2;
  // visible part of the translated carrier
  std::vector<int> bit_idx;
  std::vector<int> site_idx;
  int m;  // full carrier width (all m signs are always drawn)
  Rational p_even;
};

std::vector<LevelDraw> plan_draws(const FieldModel& f, const IndexSet& w) {
  std::vector<LevelDraw> plan;
  for (std::size_t li = 0; li < f.levels.size(); ++li) {
    const Level& lev = f.levels[li];
    std::vector<IndexPoint> offsets;
    for (const auto& p : w.pts)
      for (const auto& j : lev.carrier.pts) offsets.push_back(p - j);
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    for (const auto& u : offsets) {
      LevelDraw d;
      d.level = static_cast<int>(li);
      d.sub1 = static_cast<std::uint32_t>(li);
      d.sub2 = pack_offset(u);
      for (int b = 0; b < lev.bits(); ++b) {
        if (auto idx = w.index_of(lev.encoding[b] + u)) {
          d.bit_idx.push_back(b);
          d.site_idx.push_back(static_cast<int>(*idx));
        }
      }
      if (d.bit_idx.empty()) continue;
      d.m = lev.bits();
      d.p_even = (Rational(1) + lev.theta) / Rational(2);
      plan.push_back(std::move(d));
    }
  }
  return plan;
}

}  // namespace

SampleBatch sample_window(const FieldModel& f, const IndexSet& window,
                          std::size_t count, std::uint64_t seed, int threads) {
  f.validate();
  if (window.empty()) throw Error("empty sampling window");
  if (window.dim() != f.d)
    throw DimensionMismatch("window dimension differs from field dimension");
  if (count > (std::size_t(1) << 31)) throw Error("replicate count out of range");

  SampleBatch batch;
  batch.window = window;
  batch.seed = seed;
  batch.rows.assign(count, std::vector<unsigned __int128>(window.size(), 0));

  std::vector<LevelDraw> plan = plan_draws(f, window);
  std::vector<int> level_offset(f.levels.size());
  for (std::size_t l = 0; l < f.levels.size(); ++l)
    level_offset[l] = f.level_bit_offset(static_cast<int>(l));

  parallel_for(count, threads, [&](std::size_t r) {
    auto& row = batch.rows[r];
    for (const auto& d : plan) {
      PhiloxStream stream(seed, static_cast<std::uint32_t>(r), d.sub1, d.sub2);
      // m-1 iid fair signs, then the last sign completes the product to the
      // biased parity draw; this reproduces the biased law exactly.
      std::uint64_t word = stream.next_u64();
      std::uint64_t signs = word & ((d.m >= 2 ? (std::uint64_t(1) << (d.m - 1)) : 1) - 1);
      bool want_even = stream.bernoulli(d.p_even);  // product of signs = +1
      int zeros = (d.m - 1) - std::popcount(signs);
      bool even_now = (zeros % 2) == 0;
      if (even_now == want_even) signs |= std::uint64_t(1) << (d.m - 1);
      for (std::size_t k = 0; k < d.bit_idx.size(); ++k)
        if ((signs >> d.bit_idx[k]) & 1)
          row[d.site_idx[k]] |= static_cast<unsigned __int128>(1)
                                << (level_offset[d.level] + d.bit_idx[k]);
    }
  });
  return batch;
}

std::vector<int> copy_signs(const FieldModel& f, const SampleBatch& batch,
                            std::size_t row, int level, const IndexPoint& offset) {
  const Level& lev = f.levels.at(level);
  std::vector<int> signs(lev.bits());
  int base = f.level_bit_offset(level);
  for (int b = 0; b < lev.bits(); ++b) {
    auto idx = batch.window.index_of(lev.encoding[b] + offset);
    if (!idx) throw BadSubset("translated carrier leaves the window");
    signs[b] =
        ((batch.rows.at(row)[*idx] >> (base + b)) & 1) ? 1 : -1;
  }
  return signs;
}

SampleBatch uniformize(SampleBatch batch, const FieldModel& f, std::uint64_t seed2) {
  int bits = f.value_bits();
  if (bits > 50)
    throw TooManyAtoms("uniformized transform capped at 50-bit alphabets");
  std::vector<std::vector<double>> u(batch.rows.size(),
                                     std::vector<double>(batch.window.size()));
  for (std::size_t r = 0; r < batch.rows.size(); ++r) {
    for (std::size_t s = 0; s < batch.window.size(); ++s) {
      unsigned __int128 code = batch.rows[r][s];
      if (code >> bits)
        throw Error("site code out of range for the field alphabet");
      PhiloxStream stream(seed2, static_cast<std::uint32_t>(r),
                          static_cast<std::uint32_t>(s), 0);
      double x = static_cast<double>(static_cast<std::uint64_t>(code));
      double t = x + stream.next_double53();
      if (t >= x + 1.0) t = std::nextafter(x + 1.0, x);  // keep the cell open
      u[r][s] = std::ldexp(t, -bits);
    }
  }
  batch.uniformized = std::move(u);
  return batch;
}

bool deuniformize_check(const SampleBatch& batch, const FieldModel& f) {
  if (!batch.uniformized)
    throw MissingUniformized("batch carries no uniformized values");
  int bits = f.value_bits();
  const auto& u = *batch.uniformized;
  if (u.size() != batch.rows.size()) return false;
  for (std::size_t r = 0; r < batch.rows.size(); ++r) {
    if (u[r].size() != batch.rows[r].size()) return false;
    for (std::size_t s = 0; s < u[r].size(); ++s) {
      double v = u[r][s];
      if (!(v >= 0.0 && v < 1.0)) return false;
      auto code = static_cast<unsigned __int128>(
          static_cast<std::uint64_t>(std::floor(std::ldexp(v, bits))));
      if (code != batch.rows[r][s]) return false;
    }
  }
  return true;
}

double ks_uniform_statistic(std::vector<double> values) {
  if (values.empty()) throw InsufficientSamples("no values for the distance");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - values[i]);
    d = std::max(d, values[i] - static_cast<double>(i) / n);
  }
  return d;
}

namespace {

// Distinct observed codes per site of a tuple, as category indices.
struct TupleCats {
  std::vector<std::vector<std::size_t>> cats;  // [site][replicate] -> category
  std::vector<std::size_t> sizes;
  std::vector<std::vector<std::size_t>> marg;  // [site][category] -> count
};

TupleCats categorize(const SampleBatch& batch, const std::vector<int>& sites) {
  TupleCats tc;
  const std::size_t n = batch.rows.size();
  for (int s : sites) {
    std::map<unsigned __int128, std::size_t> codes;
    for (std::size_t r = 0; r < n; ++r) codes.emplace(batch.rows[r][s], 0);
    std::size_t k = 0;
    for (auto& [c, idx] : codes) idx = k++;
    std::vector<std::size_t> col(n);
    std::vector<std::size_t> marg(codes.size(), 0);
    for (std::size_t r = 0; r < n; ++r) {
      col[r] = codes.at(batch.rows[r][s]);
      ++marg[col[r]];
    }
    tc.cats.push_back(std::move(col));
    tc.sizes.push_back(codes.size());
    tc.marg.push_back(std::move(marg));
  }
  return tc;
}

// Pearson statistic against the product of the given marginals.  Summing the
// expected mass of the empty cells as-is avoids enumerating them:
// sum_all (O-E)^2/E = sum_observed [(O-E)^2/E - E] + n.
double pearson_statistic(const std::unordered_map<std::uint64_t, std::size_t>& joint,
                         const TupleCats& tc,
                         const std::vector<std::vector<std::size_t>>& marg,
                         double n) {
  double stat = n;
  for (const auto& [key, count] : joint) {
    double e = n;
    std::uint64_t k = key;
    for (std::size_t s = 0; s < tc.sizes.size(); ++s) {
      e *= static_cast<double>(marg[s][k % tc.sizes[s]]) / n;
      k /= tc.sizes[s];
    }
    double o = static_cast<double>(count);
    stat += (o - e) * (o - e) / e - e;
  }
  return stat;
}

std::uint64_t joint_key(const TupleCats& tc, std::size_t r) {
  std::uint64_t key = 0, radix = 1;
  for (std::size_t s = 0; s < tc.cats.size(); ++s) {
    key += tc.cats[s][r] * radix;
    radix *= tc.sizes[s];
  }
  return key;
}

}  // namespace

IndependenceReport empirical_independence(const SampleBatch& batch, int tuple_size,
                                          double level, std::uint64_t mc_seed,
                                          std::size_t max_tuples,
                                          std::size_t mc_draws) {
  if (tuple_size < 2) throw Error("tuple size must be at least 2");
  if (batch.rows.size() < 2)
    throw InsufficientSamples("need at least 2 replicates");
  const std::size_t nsites = batch.window.size();
  const std::size_t n = batch.rows.size();

  IndependenceReport rep;
  rep.tuple_size = tuple_size;
  rep.level = level;
  if (nsites < static_cast<std::size_t>(tuple_size)) return rep;

  // Pick the tuples: everything when feasible, otherwise a fixed-seed sample.
  std::vector<std::vector<int>> tuples;
  unsigned __int128 total = 1;
  for (int i = 0; i < tuple_size; ++i)
    total = total * (nsites - i) / (i + 1);
  if (total <= (std::size_t(1) << 20)) {
    std::vector<int> idx(tuple_size);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      tuples.emplace_back(idx);
      int pos = tuple_size - 1;
      while (pos >= 0 && idx[pos] == static_cast<int>(nsites) - tuple_size + pos)
        --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int i = pos + 1; i < tuple_size; ++i) idx[i] = idx[i - 1] + 1;
    }
    if (tuples.size() > max_tuples) {
      PhiloxStream stream(mc_seed, 0x5e1ec7u, 0, 0);
      for (std::size_t i = tuples.size() - 1; i > 0; --i)
        std::swap(tuples[i], tuples[stream.next_below(i + 1)]);
      tuples.resize(max_tuples);
      std::sort(tuples.begin(), tuples.end());
    }
  } else {
    PhiloxStream stream(mc_seed, 0x5e1ec7u, 1, 0);
    std::set<std::vector<int>> seen;
    while (seen.size() < max_tuples) {
      std::set<int> pick;
      while (pick.size() < static_cast<std::size_t>(tuple_size))
        pick.insert(static_cast<int>(stream.next_below(nsites)));
      seen.emplace(pick.begin(), pick.end());
    }
    tuples.assign(seen.begin(), seen.end());
  }
  rep.tuples_tested = tuples.size();

  for (std::size_t ti = 0; ti < tuples.size(); ++ti) {
    const auto& sites = tuples[ti];
    IndependenceTest test;
    for (int s : sites) test.sites.push_back(batch.window.pts[s]);

    TupleCats tc = categorize(batch, sites);
    double cells = 1.0, df = 0.0;
    double min_marg_prob = 1.0;
    bool degenerate = false;
    for (std::size_t s = 0; s < tc.sizes.size(); ++s) {
      if (tc.sizes[s] < 2) degenerate = true;
      cells *= static_cast<double>(tc.sizes[s]);
      df += static_cast<double>(tc.sizes[s]) - 1.0;
      std::size_t mn = *std::min_element(tc.marg[s].begin(), tc.marg[s].end());
      min_marg_prob *= static_cast<double>(mn) / static_cast<double>(n);
    }
    df = cells - 1.0 - df;

    if (degenerate || df <= 0.0) {
      test.method = "degenerate";
      test.statistic = 0.0;
      test.df = 0.0;
      test.p_value = 1.0;
      rep.tests.push_back(std::move(test));
      continue;
    }

    std::unordered_map<std::uint64_t, std::size_t> joint;
    joint.reserve(n * 2);
    for (std::size_t r = 0; r < n; ++r) ++joint[joint_key(tc, r)];
    test.statistic = pearson_statistic(joint, tc, tc.marg, static_cast<double>(n));
    test.df = df;

    double min_expected = static_cast<double>(n) * min_marg_prob;
    if (min_expected >= 5.0) {
      test.method = "chi_square";
      boost::math::chi_squared dist(df);
      test.p_value = boost::math::cdf(boost::math::complement(dist, test.statistic));
    } else {
      // Resample the product of the empirical marginals (drawing each site
      // category with its exact empirical probability) and rank the observed
      // statistic among the simulated ones.
      test.method = "monte_carlo";
      std::vector<std::vector<std::size_t>> cdf(tc.sizes.size());
      for (std::size_t s = 0; s < tc.sizes.size(); ++s) {
        cdf[s].resize(tc.sizes[s]);
        std::size_t acc = 0;
        for (std::size_t c = 0; c < tc.sizes[s]; ++c) {
          acc += tc.marg[s][c];
          cdf[s][c] = acc;
        }
      }
      PhiloxStream stream(mc_seed, 0x7e57u, static_cast<std::uint32_t>(ti), 0);
      std::size_t at_least = 0;
      std::unordered_map<std::uint64_t, std::size_t> sim;
      std::vector<std::vector<std::size_t>> sim_marg(tc.sizes.size());
      for (std::size_t draw = 0; draw < mc_draws; ++draw) {
        sim.clear();
        for (std::size_t s = 0; s < tc.sizes.size(); ++s)
          sim_marg[s].assign(tc.sizes[s], 0);
        for (std::size_t r = 0; r < n; ++r) {
          std::uint64_t key = 0, radix = 1;
          for (std::size_t s = 0; s < tc.sizes.size(); ++s) {
            std::size_t u = stream.next_below(n);
            std::size_t cat =
                std::upper_bound(cdf[s].begin(), cdf[s].end(), u) - cdf[s].begin();
            ++sim_marg[s][cat];
            key += cat * radix;
            radix *= tc.sizes[s];
          }
          ++sim[key];
        }
        double stat = pearson_statistic(sim, tc, sim_marg, static_cast<double>(n));
        if (stat >= test.statistic) ++at_least;
      }
      test.p_value = static_cast<double>(1 + at_least) /
                     static_cast<double>(mc_draws + 1);
    }
    rep.tests.push_back(std::move(test));
  }

  double threshold = level / static_cast<double>(std::max<std::size_t>(1, rep.tuples_tested));
  for (auto& t : rep.tests) {
    t.flagged = t.p_value < threshold;
    if (t.flagged) rep.any_flagged = true;
  }
  return rep;
}

nlohmann::ordered_json IndependenceReport::to_json() const {
  nlohmann::ordered_json j;
  j["tuple_size"] = tuple_size;
  j["level"] = level;
  j["tuples_tested"] = tuples_tested;
  j["any_flagged"] = any_flagged;
  j["tests"] = nlohmann::ordered_json::array();
  for (const auto& t : tests) {
    nlohmann::ordered_json jt;
    std::string sites;
    for (std::size_t i = 0; i < t.sites.size(); ++i) {
      if (i) sites += ';';
      sites += t.sites[i].str();
    }
    jt["sites"] = sites;
    jt["statistic"] = t.statistic;
    jt["df"] = t.df;
    jt["p_value"] = t.p_value;
    jt["method"] = t.method;
    jt["flagged"] = t.flagged;
    j["tests"].push_back(std::move(jt));
  }
  return j;
}

namespace {

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

void write_csv(const SampleBatch& batch, std::ostream& os) {
  for (std::size_t s = 0; s < batch.window.size(); ++s) {
    if (s) os << ',';
    os << csv_quote("k=" + batch.window.pts[s].str());
  }
  if (batch.uniformized) {
    for (std::size_t s = 0; s < batch.window.size(); ++s)
      os << ',' << csv_quote("k=" + batch.window.pts[s].str() + "_u");
  }
  os << '\n';
  char buf[64];
  for (std::size_t r = 0; r < batch.rows.size(); ++r) {
    for (std::size_t s = 0; s < batch.window.size(); ++s) {
      if (s) os << ',';
      os << u128_str(batch.rows[r][s]);
    }
    if (batch.uniformized) {
      for (std::size_t s = 0; s < batch.window.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%.17g", (*batch.uniformized)[r][s]);
        os << ',' << buf;
      }
    }
    os << '\n';
  }
}

SampleBatch read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty sample file");
  std::vector<std::string> headers = csv_split(line);
  std::vector<IndexPoint> pts;
  std::size_t ncode = 0;
  bool in_u = false;
  std::vector<IndexPoint> upts;
  for (const auto& h : headers) {
    if (h.rfind("k=", 0) != 0)
      throw ParseError("sample header must start with k=: '" + h + "'");
    std::string body = h.substr(2);
    if (body.size() > 2 && body.substr(body.size() - 2) == "_u") {
      in_u = true;
      upts.push_back(parse_point(body.substr(0, body.size() - 2)));
    } else {
      if (in_u) throw ParseError("uniformized columns must come last");
      pts.push_back(parse_point(body));
      ++ncode;
    }
  }
  SampleBatch batch;
  batch.window = IndexSet::of(pts);
  if (batch.window.size() != ncode || batch.window.pts != pts)
    throw ParseError("sample columns must list distinct sites in sorted order");
  if (!upts.empty() && upts != pts)
    throw ParseError("uniformized columns must mirror the code columns");
  if (!upts.empty()) batch.uniformized.emplace();

  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields = csv_split(line);
    if (fields.size() != headers.size())
      throw ParseError("sample row has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(headers.size()));
    std::vector<unsigned __int128> row;
    row.reserve(ncode);
    for (std::size_t i = 0; i < ncode; ++i) row.push_back(u128_parse(fields[i]));
    batch.rows.push_back(std::move(row));
    if (batch.uniformized) {
      std::vector<double> urow;
      urow.reserve(ncode);
      for (std::size_t i = ncode; i < fields.size(); ++i) {
        try {
          urow.push_back(std::stod(fields[i]));
        } catch (const std::exception&) {
          throw ParseError("bad uniformized value: '" + fields[i] + "'");
        }
      }
      batch.uniformized->push_back(std::move(urow));
    }
  }
  return batch;
}

}  // namespace mixfield
