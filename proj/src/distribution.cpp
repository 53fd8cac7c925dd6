#include "mixfield/distribution.hpp"

#include <algorithm>
#include <map>

namespace mixfield {

std::string label_str(const Label& l) {
  std::string s = "(";
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(l[i]);
  }
  s += ')';
  return s;
}

namespace {

Rational checked_total(const std::vector<FiniteDistribution::Atom>& atoms) {
  Rational total;
  for (const auto& [l, p] : atoms) total += p;
  return total;
}

}  // namespace

FiniteDistribution FiniteDistribution::from_pairs(std::vector<Atom> atoms) {
  for (const auto& [l, p] : atoms) {
    if (p < Rational(0))
      throw NegativeProb("negative probability at " + label_str(l) + ": " + p.str());
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < atoms.size(); ++i) {
    if (atoms[i].first == atoms[i - 1].first)
      throw DuplicateLabel("duplicate atom label " + label_str(atoms[i].first));
  }
  return from_sorted(std::move(atoms));
}

FiniteDistribution FiniteDistribution::from_sorted(std::vector<Atom> atoms) {
  std::erase_if(atoms, [](const Atom& a) { return a.second.is_zero(); });
  Rational total = checked_total(atoms);
  if (total != Rational(1))
    throw SumNotOne("atom probabilities sum to " + total.str() + ", expected 1");
  FiniteDistribution d;
  d.atoms_ = std::move(atoms);
  return d;
}

Rational FiniteDistribution::prob(const Label& l) const {
  auto it = std::lower_bound(
      atoms_.begin(), atoms_.end(), l,
      [](const Atom& a, const Label& key) { return a.first < key; });
  if (it != atoms_.end() && it->first == l) return it->second;
  return Rational(0);
}

std::size_t FiniteDistribution::arity() const {
  if (atoms_.empty()) throw BadArity("arity of an empty distribution");
  std::size_t n = atoms_.front().first.size();
  for (const auto& [l, p] : atoms_) {
    if (l.size() != n) throw BadArity("atoms have mixed label lengths");
  }
  return n;
}

void DistBuilder::add(Label l, Rational p) {
  acc_.emplace_back(std::move(l), p);
}

FiniteDistribution DistBuilder::build() {
  std::sort(acc_.begin(), acc_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<FiniteDistribution::Atom> merged;
  merged.reserve(acc_.size());
  for (auto& atom : acc_) {
    if (atom.second < Rational(0))
      throw NegativeProb("negative probability at " + label_str(atom.first));
    if (!merged.empty() && merged.back().first == atom.first)
      merged.back().second += atom.second;
    else
      merged.push_back(std::move(atom));
  }
  acc_.clear();
  return FiniteDistribution::from_sorted(std::move(merged));
}

FiniteDistribution marginal(const FiniteDistribution& joint,
                            std::span<const int> coords) {
  std::size_t n = joint.arity();
  std::vector<bool> seen(n, false);
  for (int c : coords) {
    if (c < 0 || static_cast<std::size_t>(c) >= n)
      throw BadArity("marginal coordinate " + std::to_string(c) +
                     " out of range for arity " + std::to_string(n));
    if (seen[c]) throw BadArity("marginal coordinate repeated: " + std::to_string(c));
    seen[c] = true;
  }
  DistBuilder b;
  for (const auto& [l, p] : joint.atoms()) {
    Label sub;
    sub.reserve(coords.size());
    for (int c : coords) sub.push_back(l[c]);
    b.add(std::move(sub), p);
  }
  return b.build();
}

FiniteDistribution push_forward(const FiniteDistribution& dist,
                                const std::function<Label(const Label&)>& f) {
  DistBuilder b;
  for (const auto& [l, p] : dist.atoms()) b.add(f(l), p);
  return b.build();
}

bool is_independent(const FiniteDistribution& joint,
                    const std::vector<std::vector<int>>& groups) {
  std::size_t n = joint.arity();
  std::vector<bool> seen(n, false);
  for (const auto& g : groups) {
    if (g.empty()) throw BadArity("empty coordinate group");
    for (int c : g) {
      if (c < 0 || static_cast<std::size_t>(c) >= n || seen[c])
        throw BadArity("coordinate groups must partition the label positions");
      seen[c] = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw BadArity("coordinate groups must cover all label positions");

  std::vector<FiniteDistribution> margs;
  margs.reserve(groups.size());
  unsigned __int128 support_product = 1;
  for (const auto& g : groups) {
    margs.push_back(marginal(joint, g));
    support_product *= margs.back().size();
    if (support_product > (static_cast<unsigned __int128>(1) << 62))
      return false;  // cannot possibly match |support(joint)|
  }
  // The product measure has exactly prod |support_g| atoms; if the joint has
  // fewer, some product atom has probability zero in the joint and the joint
  // cannot factorize.  Together with the per-atom check below this is an
  // exact equivalence.
  if (support_product != joint.size()) return false;
  for (const auto& [l, p] : joint.atoms()) {
    Rational prod(1);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      Label sub;
      sub.reserve(groups[gi].size());
      for (int c : groups[gi]) sub.push_back(l[c]);
      prod *= margs[gi].prob(sub);
    }
    if (prod != p) return false;
  }
  return true;
}

FiniteDistribution product(std::span<const FiniteDistribution> factors) {
  std::vector<FiniteDistribution::Atom> acc{{Label{}, Rational(1)}};
  for (const auto& f : factors) {
    std::vector<FiniteDistribution::Atom> next;
    next.reserve(acc.size() * f.size());
    for (const auto& [l, p] : acc) {
      for (const auto& [fl, fp] : f.atoms()) {
        Label combined = l;
        combined.insert(combined.end(), fl.begin(), fl.end());
        next.emplace_back(std::move(combined), p * fp);
      }
    }
    acc = std::move(next);
  }
  // Factors are enumerated in sorted order, so the concatenated labels come
  // out sorted as well.
  return FiniteDistribution::from_sorted(std::move(acc));
}

unsigned __int128 ProductSpace::atom_count() const {
  unsigned __int128 n = 1;
  for (const auto& f : factors) n *= f.size();
  return n;
}

FiniteDistribution ProductSpace::materialize() const {
  return product(std::span<const FiniteDistribution>(factors));
}

FiniteDistribution uniform_signs(int m) {
  if (m < 0 || m > 20) throw TooManyAtoms("uniform sign vectors capped at m <= 20");
  std::vector<FiniteDistribution::Atom> atoms;
  atoms.reserve(std::size_t(1) << m);
  Rational w(1, std::int64_t(1) << m);
  for (std::uint64_t code = 0; code < (std::uint64_t(1) << m); ++code) {
    Label l(m);
    // bit i set -> +1; enumerate so that labels come out lexicographically
    // sorted: -1 < +1 means bit 0 of the label varies fastest... simply sort.
    for (int i = 0; i < m; ++i) l[i] = (code >> (m - 1 - i)) & 1 ? 1 : -1;
    atoms.emplace_back(std::move(l), w);
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return FiniteDistribution::from_sorted(std::move(atoms));
}

}  // namespace mixfield
