#include "mixfield/nu.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "mixfield/dependence.hpp"

namespace mixfield {

NuSpec::NuSpec(int m_, Rational theta_) : m(m_), theta(theta_) {
  if (m < 3) throw Error("sign law needs at least 3 coordinates, got " +
                         std::to_string(m));
  if (!theta.is_probability())
    throw Error("bias parameter must lie in [0,1], got " + theta.str());
}

SignVector::SignVector(Label x_) : x(std::move(x_)) {
  for (Value v : x)
    if (v != 1 && v != -1)
      throw BadArity("sign vector entries must be +1 or -1, got " + label_str(x));
}

int SignVector::parity() const {
  int p = 1;
  for (Value v : x) p *= static_cast<int>(v);
  return p;
}

Rational nu_pmf(const NuSpec& spec, const Label& x) {
  if (static_cast<int>(x.size()) != spec.m)
    throw BadArity("point has arity " + std::to_string(x.size()) +
                   ", law has arity " + std::to_string(spec.m));
  SignVector sv(x);
  Rational base(1, std::int64_t(1) << spec.m);
  return sv.parity() > 0 ? base * (Rational(1) + spec.theta)
                         : base * (Rational(1) - spec.theta);
}

FiniteDistribution nu_dist(const NuSpec& spec) {
  if (spec.m > 20) throw TooManyAtoms("sign law enumeration capped at m <= 20");
  std::vector<FiniteDistribution::Atom> atoms;
  atoms.reserve(std::size_t(1) << spec.m);
  for (std::uint64_t code = 0; code < (std::uint64_t(1) << spec.m); ++code) {
    Label x(spec.m);
    for (int i = 0; i < spec.m; ++i) x[i] = (code >> i) & 1 ? 1 : -1;
    Rational p = nu_pmf(spec, x);
    atoms.emplace_back(std::move(x), p);
  }
  return FiniteDistribution::from_pairs(std::move(atoms));
}

FiniteDistribution nu_restricted(const NuSpec& spec, const std::vector<int>& coords) {
  if (coords.empty() || static_cast<int>(coords.size()) >= spec.m)
    throw BadSubset("restriction requires a proper nonempty coordinate subset");
  std::vector<bool> seen(spec.m, false);
  for (int c : coords) {
    if (c < 0 || c >= spec.m || seen[c])
      throw BadSubset("restriction coordinates must be distinct and in range");
    seen[c] = true;
  }
  // Any proper subset of the coordinates is iid fair: the bias only shows in
  // the full product.
  return uniform_signs(static_cast<int>(coords.size()));
}

namespace {

FiniteDistribution permuted(const FiniteDistribution& d, const std::vector<int>& perm) {
  return push_forward(d, [&perm](const Label& l) {
    Label out(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) out[i] = l[perm[i]];
    return out;
  });
}

}  // namespace

NuCheckReport check_nu_properties(const NuSpec& spec, double rho_tol) {
  NuCheckReport rep;
  rep.m = spec.m;
  rep.theta = spec.theta;
  rep.rho_tol = rho_tol;

  FiniteDistribution dist = nu_dist(spec);

  // (a) invariance under coordinate permutations
  rep.permutation_invariant = true;
  std::vector<int> perm(spec.m);
  std::iota(perm.begin(), perm.end(), 0);
  if (spec.m <= 6) {
    rep.permutations_exhaustive = true;
    do {
      ++rep.permutations_checked;
      if (!(permuted(dist, perm) == dist)) rep.permutation_invariant = false;
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    rep.permutations_exhaustive = false;
    std::mt19937_64 rng(0x6d697866);  // fixed seed: reproducible sample
    for (int it = 0; it < 100; ++it) {
      // Fisher-Yates with explicit draws (std::shuffle is not portable).
      for (int i = spec.m - 1; i > 0; --i)
        std::swap(perm[i], perm[rng() % std::uint64_t(i + 1)]);
      ++rep.permutations_checked;
      if (!(permuted(dist, perm) == dist)) rep.permutation_invariant = false;
    }
  }

  // (b) every single coordinate is a fair sign
  rep.fair_marginals = true;
  for (int c = 0; c < spec.m; ++c) {
    int cs[1] = {c};
    if (!(marginal(dist, cs) == uniform_signs(1))) rep.fair_marginals = false;
  }

  // (c) every m-1 coordinates are iid fair (hence so is every smaller subset)
  rep.proper_subsets_uniform = true;
  FiniteDistribution fair = uniform_signs(spec.m - 1);
  for (int drop = 0; drop < spec.m; ++drop) {
    std::vector<int> coords;
    for (int c = 0; c < spec.m; ++c)
      if (c != drop) coords.push_back(c);
    if (!(marginal(dist, coords) == fair)) rep.proper_subsets_uniform = false;
    if (!(nu_restricted(spec, coords) == fair)) rep.proper_subsets_uniform = false;
  }

  // (d) across every two-block partition: 4 alpha = theta exactly and the
  // maximal correlation equals theta up to rho_tol
  rep.splits_pass = true;
  for (std::uint64_t smask = 0; smask < (std::uint64_t(1) << (spec.m - 1)); ++smask) {
    // coordinate 0 always on the left; masks index coordinates 1..m-1
    std::vector<int> left{0}, right;
    for (int c = 1; c < spec.m; ++c)
      ((smask >> (c - 1)) & 1 ? left : right).push_back(c);
    if (right.empty()) continue;
    JointTable table = JointTable::from_split(dist, left, right);
    NuSplitCheck chk;
    chk.left = left;
    chk.alpha = alpha_exact(table);
    chk.rho = rho_svd(table);
    chk.pass = (chk.alpha * Rational(4) == spec.theta) &&
               std::abs(chk.rho - spec.theta.to_double()) <= rho_tol;
    if (!chk.pass) rep.splits_pass = false;
    rep.splits.push_back(std::move(chk));
  }
  return rep;
}

nlohmann::ordered_json NuCheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["m"] = m;
  j["theta"] = theta.str();
  j["rho_tol"] = rho_tol;
  j["permutation_invariant"] = permutation_invariant;
  j["permutations_checked"] = permutations_checked;
  j["permutations_exhaustive"] = permutations_exhaustive;
  j["fair_marginals"] = fair_marginals;
  j["proper_subsets_uniform"] = proper_subsets_uniform;
  j["splits_pass"] = splits_pass;
  j["splits"] = nlohmann::ordered_json::array();
  for (const auto& s : splits) {
    nlohmann::ordered_json js;
    js["left"] = s.left;
    js["alpha"] = s.alpha.str();
    js["rho"] = s.rho;
    js["pass"] = s.pass;
    j["splits"].push_back(std::move(js));
  }
  j["all_pass"] = all_pass();
  return j;
}

}  // namespace mixfield
