#pragma once

#include <optional>
#include <string_view>

#include "mixfield/field.hpp"
#include "json.hpp"

namespace mixfield {

// The four dependence coefficients measured over lattice windows.  "alpha"
// and "rho" range over half-space pairs separated by a gap of n along some
// axis, "rho_prime" over pairs of unions of coordinate slabs at axis distance
// at least n, and "rho_star" over arbitrary disjoint site sets at Euclidean
// distance at least n.
enum class CoefficientKind { alpha, rho, rho_prime, rho_star };
enum class CoefMethod { structural, numeric };

std::string_view kind_name(CoefficientKind k);
CoefficientKind kind_from_name(std::string_view s);  // ParseError on unknown
std::string_view method_name(CoefMethod m);
CoefMethod method_from_name(std::string_view s);

// Two-sided enclosure used by the structural alpha path: the lower end is
// exhibited by a concrete pair, the upper end follows from the coefficient
// ordering against the window's rho value.
struct Bracket {
  Rational lower;
  Rational upper;
  bool tight() const { return lower == upper; }
};

struct CoefficientReport {
  CoefficientKind kind = CoefficientKind::rho;
  int n = 0;
  CoefMethod method = CoefMethod::structural;
  IndexSet window;

  double value = 0.0;
  std::optional<Rational> exact;   // set whenever the value is exact
  std::optional<Bracket> bracket;  // structural alpha only

  IndexSet witness_s, witness_t;   // pair attaining the reported value
  std::size_t pairs_considered = 0;
  std::size_t pairs_skipped = 0;   // numeric candidates beyond the table caps

  nlohmann::ordered_json to_json() const;
};

struct EngineOptions {
  TableCaps caps{};
  std::size_t alpha_side_cap = 20;   // event enumeration inside alpha_exact
  std::size_t pair_window_cap = 14;  // window size for full pair enumeration
  std::size_t slab_coord_cap = 14;   // distinct axis coordinates for slab pairs
  std::size_t pair_candidate_cap = std::size_t(1) << 23;  // enumerated pairs
  double svd_top_tol = 1e-6;
  int threads = 0;                   // 0: MIXFIELD_THREADS or serial
};

// Default measurement window for gap n: the union of the carrier bounding
// boxes dilated by n in every direction.
IndexSet auto_window(const FieldModel& f, int n);

// Exact maximal correlation between the field restricted to S and to T,
// computed without any tables: the best bias among carrier translates lying
// inside S|T and meeting both sides (everything else contributes zero).
Rational rho_structural(const FieldModel& f, const IndexSet& s, const IndexSet& t);

// Windowed coefficient of the field at gap n over the given window.
// structural: exact rational values from the carrier geometry.
// numeric: assembles exact pair tables and measures them; candidate pairs
// whose tables exceed the caps are skipped and counted (TooManyAtoms if all
// of them are, WindowTooLarge when the enumeration itself is out of range).
CoefficientReport windowed_coefficient(const FieldModel& f, CoefficientKind kind,
                                       int n, const IndexSet& window,
                                       CoefMethod method,
                                       const EngineOptions& opts = {});

}  // namespace mixfield
