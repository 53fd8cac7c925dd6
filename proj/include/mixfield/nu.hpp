#pragma once

#include <vector>

#include "mixfield/distribution.hpp"
#include "json.hpp"

namespace mixfield {

// Parameters of the parity-biased sign law on {-1,+1}^m: outcomes whose
// coordinate product is +1 carry weight (1+theta)/2^m each, outcomes with
// product -1 carry (1-theta)/2^m.  theta = 0 is the iid fair law, theta = 1
// is uniform on the even-parity half.
struct NuSpec {
  int m;
  Rational theta;

  NuSpec(int m_, Rational theta_);  // validates m >= 3 and theta in [0,1]
};

// A point of {-1,+1}^m as a label; validates entries on construction.
struct SignVector {
  Label x;

  explicit SignVector(Label x_);
  int parity() const;  // product of the entries, +1 or -1
};

Rational nu_pmf(const NuSpec& spec, const Label& x);  // BadArity on bad x
FiniteDistribution nu_dist(const NuSpec& spec);
// Marginal law on a proper nonempty subset of the coordinates: always the
// iid fair sign law.  Throws BadSubset otherwise.
FiniteDistribution nu_restricted(const NuSpec& spec, const std::vector<int>& coords);

// Property report for the law: permutation invariance, fair one-dimensional
// marginals, independence of every proper coordinate subset, and the exact
// dependence coefficients across every two-block partition of the
// coordinates (4*alpha and rho both equal theta).
struct NuSplitCheck {
  std::vector<int> left;  // coordinate positions on the first side (always contains 0)
  Rational alpha;         // exact strong mixing coefficient of the split
  double rho;             // maximal correlation of the split
  bool pass;
};

struct NuCheckReport {
  int m = 0;
  Rational theta;
  double rho_tol = 0.0;

  bool permutation_invariant = false;
  int permutations_checked = 0;
  bool permutations_exhaustive = false;

  bool fair_marginals = false;
  bool proper_subsets_uniform = false;

  std::vector<NuSplitCheck> splits;
  bool splits_pass = false;

  bool all_pass() const {
    return permutation_invariant && fair_marginals && proper_subsets_uniform &&
           splits_pass;
  }
  nlohmann::ordered_json to_json() const;
};

// Exhaustive permutation check for m <= 6; beyond that a fixed-seed sample of
// 100 permutations.  Split coefficients use exact enumeration for alpha and
// the singular value computation for rho (tolerance rho_tol).
NuCheckReport check_nu_properties(const NuSpec& spec, double rho_tol = 1e-9);

}  // namespace mixfield
