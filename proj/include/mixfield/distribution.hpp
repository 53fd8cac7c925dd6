#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixfield/rational.hpp"

namespace mixfield {

// Atom labels are tuples of integers.  All structured labels in the library
// (sign vectors, site value tuples, concatenations of both) flatten to this.
using Value = std::int64_t;
using Label = std::vector<Value>;

std::string label_str(const Label& l);  // "(a,b,c)"

// A probability distribution with finitely many atoms and exact rational
// weights.  Invariants enforced at construction: every weight is positive
// (zero-weight atoms are dropped), labels are distinct, and the weights sum
// to exactly 1.  Atoms are kept sorted by label, so equality of distributions
// is plain member equality.
class FiniteDistribution {
 public:
  using Atom = std::pair<Label, Rational>;

  FiniteDistribution() = default;

  // Validating constructor: throws NegativeProb / DuplicateLabel / SumNotOne.
  static FiniteDistribution from_pairs(std::vector<Atom> atoms);

  // Fast path for internal builders that emit atoms already sorted by label
  // with no duplicates; still drops zeros and checks the total mass.
  static FiniteDistribution from_sorted(std::vector<Atom> atoms);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }

  // Probability of a label; exact zero if the label is not an atom.
  Rational prob(const Label& l) const;

  // Common label length.  All atoms of a valid distribution share it.
  std::size_t arity() const;

  bool operator==(const FiniteDistribution& o) const { return atoms_ == o.atoms_; }
  bool operator!=(const FiniteDistribution& o) const { return !(*this == o); }

 private:
  std::vector<Atom> atoms_;
};

// Accumulates mass per label (merging duplicates) and freezes the result.
class DistBuilder {
 public:
  void add(Label l, Rational p);
  FiniteDistribution build();

 private:
  std::vector<FiniteDistribution::Atom> acc_;
};

// Marginal onto the given coordinate positions, in the given order.
// Throws BadArity if a position is out of range or repeated.
FiniteDistribution marginal(const FiniteDistribution& joint,
                            std::span<const int> coords);

// Image distribution under an arbitrary label map (mass of equal images adds).
FiniteDistribution push_forward(const FiniteDistribution& dist,
                                const std::function<Label(const Label&)>& f);

// Exact test of mutual independence of the coordinate groups, which must
// partition {0, ..., arity-1}.  True iff the joint factorizes as the product
// of its group marginals, checked with exact arithmetic.
bool is_independent(const FiniteDistribution& joint,
                    const std::vector<std::vector<int>>& groups);

// Product of independent distributions, labels concatenated in order.
FiniteDistribution product(std::span<const FiniteDistribution> factors);

// A finite product space given by independent factors.  Materializing it
// enumerates the full product, so the atom count is exposed for cap checks.
struct ProductSpace {
  std::vector<FiniteDistribution> factors;

  unsigned __int128 atom_count() const;
  FiniteDistribution materialize() const;
};

// Uniform distribution on {-1,+1}^m (labels are the sign vectors).
FiniteDistribution uniform_signs(int m);

}  // namespace mixfield
