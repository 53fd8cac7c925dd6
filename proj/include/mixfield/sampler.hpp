#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mixfield/field.hpp"
#include "json.hpp"

namespace mixfield {

// Counter-based PRNG (Philox 4x32, 10 rounds).  A stream is identified by a
// 64-bit seed (the key) plus three 32-bit substream words (the initial
// counter); draws advance the remaining counter word.  Identical
// (seed, substream) always reproduces the same values, which is what makes
// sampling bit-identical under any thread schedule.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint32_t sub0, std::uint32_t sub1,
               std::uint32_t sub2);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  double next_double53();                         // uniform on [0,1), 53 bits
  std::uint64_t next_below(std::uint64_t bound);  // unbiased via rejection
  bool bernoulli(const Rational& p);              // exact probability

 private:
  void refill();

  std::uint32_t key_[2];
  std::uint32_t ctr_[4];
  std::uint32_t out_[4];
  int have_ = 0;
};

// A batch of fresh field samples restricted to a window: one row per
// replicate, one scalar site code per column (in window order).
struct SampleBatch {
  IndexSet window;
  std::uint64_t seed = 0;
  std::vector<std::vector<unsigned __int128>> rows;
  std::optional<std::vector<std::vector<double>>> uniformized;
};

// Draws count independent replicates of the field on the window.  Every
// (replicate, level, carrier offset) copy owns a private substream, so the
// result is bit-identical for any thread count.
SampleBatch sample_window(const FieldModel& f, const IndexSet& window,
                          std::size_t count, std::uint64_t seed, int threads = 0);

// Reads back the sign vector of one building-block copy from the assembled
// codes of a replicate (the whole translated carrier must lie in the window).
std::vector<int> copy_signs(const FieldModel& f, const SampleBatch& batch,
                            std::size_t row, int level, const IndexPoint& offset);

// Exactly uniform transformed values: U = (code + V) / 2^bits with V uniform
// on [0,1).  The site code is always recoverable as floor(U * 2^bits).
SampleBatch uniformize(SampleBatch batch, const FieldModel& f, std::uint64_t seed2);
bool deuniformize_check(const SampleBatch& batch, const FieldModel& f);

// Kolmogorov-Smirnov distance of the values against the uniform law on [0,1).
double ks_uniform_statistic(std::vector<double> values);

// Chi-square (or exact-resampling) independence screen over site tuples.
struct IndependenceTest {
  std::vector<IndexPoint> sites;
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  std::string method;  // "chi_square" | "monte_carlo" | "degenerate"
  bool flagged = false;
};

struct IndependenceReport {
  int tuple_size = 0;
  double level = 0.0;  // family-wise level; per-test threshold is level/tests
  std::size_t tuples_tested = 0;
  std::vector<IndependenceTest> tests;
  bool any_flagged = false;

  nlohmann::ordered_json to_json() const;
};

// Tests every tuple_size-subset of the window's sites (a fixed-seed sample
// of max_tuples subsets when there are more) for independence of the
// observed codes, Bonferroni-corrected at the given family-wise level.
// Falls back from the chi-square approximation to resampling the product of
// the empirical marginals whenever some expected cell count drops below 5.
IndependenceReport empirical_independence(const SampleBatch& batch, int tuple_size,
                                          double level = 1e-3,
                                          std::uint64_t mc_seed = 1,
                                          std::size_t max_tuples = 200,
                                          std::size_t mc_draws = 2000);

// CSV layout: one quoted header per site, "k=<point>", followed by the
// matching "k=<point>_u" columns when uniformized values are present; one
// row per replicate, codes in decimal.
void write_csv(const SampleBatch& batch, std::ostream& os);
SampleBatch read_csv(std::istream& is);

}  // namespace mixfield
