#include "mixfield/dependence.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>

namespace mixfield {

namespace {

using i128 = __int128;

void check_mass_one(const Rational& total) {
  if (total != Rational(1))
    throw SumNotOne("table cells sum to " + total.str() + ", expected 1");
}

// Least common multiple of the cell denominators, or 0 if it would exceed
// 2^31 (the threshold that keeps D^2 inside int64 for the scaled paths).
std::int64_t common_denominator(const JointTable& t) {
  std::int64_t lcm = 1;
  for (const auto& row : t.cells) {
    for (const auto& p : row) {
      std::int64_t d = p.den();
      std::int64_t g = std::gcd(lcm, d);
      i128 l = i128(lcm) / g * d;
      if (l > (std::int64_t(1) << 31)) return 0;
      lcm = static_cast<std::int64_t>(l);
    }
  }
  return lcm;
}

std::vector<std::vector<std::int64_t>> scaled_cells(const JointTable& t,
                                                    std::int64_t denom) {
  std::vector<std::vector<std::int64_t>> s(t.rows(),
                                           std::vector<std::int64_t>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c)
      s[r][c] = t.cells[r][c].num() * (denom / t.cells[r][c].den());
  return s;
}

// Gray-code order: element flipped between subset(i-1) and subset(i).
inline int flipped_bit(std::uint64_t i) { return std::countr_zero(i); }

Rational alpha_cols_scaled(const JointTable& t, std::int64_t denom) {
  const std::size_t rows = t.rows(), cols = t.cols();
  auto s = scaled_cells(t, denom);
  std::vector<std::int64_t> colp(cols, 0), rowp(rows, 0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      colp[c] += s[r][c];
      rowp[r] += s[r][c];
    }
  std::vector<std::int64_t> acc(rows, 0);  // P(row & B) * denom
  std::int64_t pb = 0;                     // P(B) * denom
  std::uint64_t mask = 0;
  i128 best = 0;
  const std::uint64_t end = std::uint64_t(1) << cols;
  for (std::uint64_t i = 1; i < end; ++i) {
    int c = flipped_bit(i);
    std::uint64_t bit = std::uint64_t(1) << c;
    if (mask & bit) {
      pb -= colp[c];
      for (std::size_t r = 0; r < rows; ++r) acc[r] -= s[r][c];
    } else {
      pb += colp[c];
      for (std::size_t r = 0; r < rows; ++r) acc[r] += s[r][c];
    }
    mask ^= bit;
    // For fixed B the best row event keeps exactly the rows with positive
    // excess P(r & B) - P(r) P(B); the positive part equals the negative
    // part in absolute value, so one side suffices.
    i128 val = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      i128 excess = i128(acc[r]) * denom - i128(rowp[r]) * pb;
      if (excess > 0) val += excess;
    }
    if (val > best) best = val;
  }
  return Rational(static_cast<std::int64_t>(best), denom * denom);
}

Rational alpha_cols_exact(const JointTable& t) {
  const std::size_t rows = t.rows(), cols = t.cols();
  std::vector<Rational> acc(rows);
  Rational pb;
  std::uint64_t mask = 0;
  Rational best(0);
  const std::uint64_t end = std::uint64_t(1) << cols;
  for (std::uint64_t i = 1; i < end; ++i) {
    int c = flipped_bit(i);
    std::uint64_t bit = std::uint64_t(1) << c;
    if (mask & bit) {
      pb -= t.col_probs[c];
      for (std::size_t r = 0; r < rows; ++r) acc[r] -= t.cells[r][c];
    } else {
      pb += t.col_probs[c];
      for (std::size_t r = 0; r < rows; ++r) acc[r] += t.cells[r][c];
    }
    mask ^= bit;
    Rational val(0);
    for (std::size_t r = 0; r < rows; ++r) {
      Rational excess = acc[r] - t.row_probs[r] * pb;
      if (excess > Rational(0)) val += excess;
    }
    if (val > best) best = val;
  }
  return best;
}

Eigen::MatrixXd correlation_kernel(const JointTable& t) {
  Eigen::MatrixXd q(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double rp = t.row_probs[r].to_double();
    for (std::size_t c = 0; c < t.cols(); ++c) {
      double cp = t.col_probs[c].to_double();
      q(r, c) = t.cells[r][c].to_double() / std::sqrt(rp * cp);
    }
  }
  return q;
}

void check_top_singular(double sigma1, double top_tol) {
  if (!std::isfinite(sigma1) || std::abs(sigma1 - 1.0) > top_tol)
    throw NumericFailure("leading singular value " + std::to_string(sigma1) +
                         " deviates from 1 beyond tolerance");
}

}  // namespace

JointTable JointTable::from_cells(std::vector<Label> row_labels,
                                  std::vector<Label> col_labels,
                                  std::vector<std::vector<Rational>> cells) {
  if (cells.size() != row_labels.size())
    throw BadArity("cell row count does not match row label count");
  for (const auto& row : cells)
    if (row.size() != col_labels.size())
      throw BadArity("cell column count does not match column label count");

  const std::size_t nr = row_labels.size(), nc = col_labels.size();
  std::vector<Rational> rp(nr), cp(nc);
  Rational total;
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c) {
      const Rational& p = cells[r][c];
      if (p < Rational(0))
        throw NegativeProb("negative cell probability at (" + std::to_string(r) +
                           "," + std::to_string(c) + ")");
      rp[r] += p;
      cp[c] += p;
      total += p;
    }
  check_mass_one(total);

  // Drop rows/columns of zero marginal mass: they are not observable states.
  JointTable t;
  std::vector<std::size_t> keep_c;
  for (std::size_t c = 0; c < nc; ++c)
    if (!cp[c].is_zero()) keep_c.push_back(c);
  for (std::size_t r = 0; r < nr; ++r) {
    if (rp[r].is_zero()) continue;
    t.row_labels.push_back(std::move(row_labels[r]));
    t.row_probs.push_back(rp[r]);
    std::vector<Rational> row;
    row.reserve(keep_c.size());
    for (std::size_t c : keep_c) row.push_back(cells[r][c]);
    t.cells.push_back(std::move(row));
  }
  for (std::size_t c : keep_c) {
    t.col_labels.push_back(std::move(col_labels[c]));
    t.col_probs.push_back(cp[c]);
  }
  if (t.rows() == 0 || t.cols() == 0)
    throw SumNotOne("table has no mass");
  return t;
}

JointTable JointTable::from_split(const FiniteDistribution& joint,
                                  std::span<const int> row_coords,
                                  std::span<const int> col_coords) {
  std::size_t n = joint.arity();
  std::vector<bool> used(n, false);
  auto check = [&](std::span<const int> coords) {
    for (int c : coords) {
      if (c < 0 || static_cast<std::size_t>(c) >= n || used[c])
        throw BadArity("split coordinates must be disjoint and in range");
      used[c] = true;
    }
  };
  check(row_coords);
  check(col_coords);
  if (row_coords.empty() || col_coords.empty())
    throw BadArity("both sides of a split need at least one coordinate");

  auto select = [](const Label& l, std::span<const int> coords) {
    Label out;
    out.reserve(coords.size());
    for (int c : coords) out.push_back(l[c]);
    return out;
  };

  std::map<Label, std::size_t> ridx, cidx;
  for (const auto& [l, p] : joint.atoms()) {
    ridx.emplace(select(l, row_coords), 0);
    cidx.emplace(select(l, col_coords), 0);
  }
  std::size_t k = 0;
  for (auto& [l, i] : ridx) i = k++;
  k = 0;
  for (auto& [l, i] : cidx) i = k++;

  std::vector<std::vector<Rational>> cells(
      ridx.size(), std::vector<Rational>(cidx.size()));
  for (const auto& [l, p] : joint.atoms())
    cells[ridx.at(select(l, row_coords))][cidx.at(select(l, col_coords))] += p;

  std::vector<Label> rl(ridx.size()), cl(cidx.size());
  for (auto& [l, i] : ridx) rl[i] = l;
  for (auto& [l, i] : cidx) cl[i] = l;
  return from_cells(std::move(rl), std::move(cl), std::move(cells));
}

JointTable JointTable::transposed() const {
  JointTable t;
  t.row_labels = col_labels;
  t.col_labels = row_labels;
  t.row_probs = col_probs;
  t.col_probs = row_probs;
  t.cells.assign(cols(), std::vector<Rational>(rows()));
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols(); ++c) t.cells[c][r] = cells[r][c];
  return t;
}

Rational alpha_exact(const JointTable& t, std::size_t side_cap) {
  if (std::min(t.rows(), t.cols()) > side_cap)
    throw TooManyAtoms("alpha_exact: smaller side exceeds cap of " +
                       std::to_string(side_cap) + " atoms");
  const JointTable* work = &t;
  JointTable flipped;
  if (t.cols() > t.rows()) {
    flipped = t.transposed();
    work = &flipped;
  }
  std::int64_t denom = common_denominator(*work);
  return denom ? alpha_cols_scaled(*work, denom) : alpha_cols_exact(*work);
}

Rational alpha_bruteforce(const JointTable& t, std::size_t side_cap) {
  if (t.rows() > side_cap || t.cols() > side_cap)
    throw TooManyAtoms("alpha_bruteforce: side exceeds cap of " +
                       std::to_string(side_cap) + " atoms");
  const std::size_t rows = t.rows(), cols = t.cols();
  std::int64_t denom = common_denominator(t);

  if (denom) {
    auto s = scaled_cells(t, denom);
    std::vector<std::int64_t> colp(cols, 0), rowp(rows, 0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        colp[c] += s[r][c];
        rowp[r] += s[r][c];
      }
    std::vector<std::int64_t> colacc(cols, 0);  // P({c} & A) * denom
    std::int64_t pa = 0;
    std::uint64_t amask = 0;
    i128 best = 0;
    for (std::uint64_t i = 1; i < (std::uint64_t(1) << rows); ++i) {
      int r = flipped_bit(i);
      std::uint64_t bit = std::uint64_t(1) << r;
      int sign = (amask & bit) ? -1 : 1;
      pa += sign * rowp[r];
      for (std::size_t c = 0; c < cols; ++c) colacc[c] += sign * s[r][c];
      amask ^= bit;
      std::int64_t pab = 0, pb = 0;
      std::uint64_t bmask = 0;
      for (std::uint64_t j = 1; j < (std::uint64_t(1) << cols); ++j) {
        int c = flipped_bit(j);
        std::uint64_t cbit = std::uint64_t(1) << c;
        int csign = (bmask & cbit) ? -1 : 1;
        pab += csign * colacc[c];
        pb += csign * colp[c];
        bmask ^= cbit;
        i128 dev = i128(pab) * denom - i128(pa) * pb;
        if (dev < 0) dev = -dev;
        if (dev > best) best = dev;
      }
    }
    return Rational(static_cast<std::int64_t>(best), denom * denom);
  }

  // Exact fallback for awkward denominators.
  std::vector<Rational> colacc(cols);
  Rational pa;
  std::uint64_t amask = 0;
  Rational best(0);
  for (std::uint64_t i = 1; i < (std::uint64_t(1) << rows); ++i) {
    int r = flipped_bit(i);
    std::uint64_t bit = std::uint64_t(1) << r;
    bool add = !(amask & bit);
    if (add)
      pa += t.row_probs[r];
    else
      pa -= t.row_probs[r];
    for (std::size_t c = 0; c < cols; ++c) {
      if (add)
        colacc[c] += t.cells[r][c];
      else
        colacc[c] -= t.cells[r][c];
    }
    amask ^= bit;
    Rational pab, pb;
    std::uint64_t bmask = 0;
    for (std::uint64_t j = 1; j < (std::uint64_t(1) << cols); ++j) {
      int c = flipped_bit(j);
      std::uint64_t cbit = std::uint64_t(1) << c;
      bool cadd = !(bmask & cbit);
      if (cadd) {
        pab += colacc[c];
        pb += t.col_probs[c];
      } else {
        pab -= colacc[c];
        pb -= t.col_probs[c];
      }
      bmask ^= cbit;
      Rational dev = (pab - pa * pb).abs();
      if (dev > best) best = dev;
    }
  }
  return best;
}

double rho_svd(const JointTable& t, double top_tol) {
  return rho_svd_functions(t, top_tol).rho;
}

RhoFunctions rho_svd_functions(const JointTable& t, double top_tol) {
  Eigen::MatrixXd q = correlation_kernel(t);
  RhoFunctions out;
  if (t.rows() == 1 || t.cols() == 1) {
    // One side is deterministic: the only singular value must be 1 and the
    // maximal correlation is zero.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(q);
    check_top_singular(svd.singularValues()(0), top_tol);
    out.rho = 0.0;
    out.f_row.assign(t.rows(), 0.0);
    out.g_col.assign(t.cols(), 0.0);
    return out;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(q, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  check_top_singular(sv(0), top_tol);
  double rho = sv(1);
  if (!std::isfinite(rho)) throw NumericFailure("singular value is not finite");
  out.rho = std::clamp(rho, 0.0, 1.0);
  out.f_row.resize(t.rows());
  out.g_col.resize(t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r)
    out.f_row[r] = svd.matrixU()(r, 1) / std::sqrt(t.row_probs[r].to_double());
  for (std::size_t c = 0; c < t.cols(); ++c)
    out.g_col[c] = svd.matrixV()(c, 1) / std::sqrt(t.col_probs[c].to_double());
  // Fix an overall sign so results are reproducible: make the first
  // non-negligible f entry positive (flipping both keeps the correlation).
  for (double v : out.f_row) {
    if (std::abs(v) > 1e-12) {
      if (v < 0) {
        for (auto& x : out.f_row) x = -x;
        for (auto& x : out.g_col) x = -x;
      }
      break;
    }
  }
  return out;
}

JointTable tensor_product(std::span<const JointTable> factors,
                          std::size_t cell_cap) {
  if (factors.empty()) throw BadArity("tensor_product of no factors");
  JointTable acc = factors[0];
  for (std::size_t fi = 1; fi < factors.size(); ++fi) {
    const JointTable& f = factors[fi];
    unsigned __int128 cellcount = static_cast<unsigned __int128>(acc.rows()) *
                                  f.rows() * acc.cols() * f.cols();
    if (cellcount > cell_cap)
      throw TooManyAtoms("tensor_product exceeds cell cap of " +
                         std::to_string(cell_cap));
    JointTable next;
    auto concat = [](const Label& a, const Label& b) {
      Label out = a;
      out.insert(out.end(), b.begin(), b.end());
      return out;
    };
    for (std::size_t r1 = 0; r1 < acc.rows(); ++r1)
      for (std::size_t r2 = 0; r2 < f.rows(); ++r2) {
        next.row_labels.push_back(concat(acc.row_labels[r1], f.row_labels[r2]));
        next.row_probs.push_back(acc.row_probs[r1] * f.row_probs[r2]);
      }
    for (std::size_t c1 = 0; c1 < acc.cols(); ++c1)
      for (std::size_t c2 = 0; c2 < f.cols(); ++c2) {
        next.col_labels.push_back(concat(acc.col_labels[c1], f.col_labels[c2]));
        next.col_probs.push_back(acc.col_probs[c1] * f.col_probs[c2]);
      }
    next.cells.assign(next.row_labels.size(),
                      std::vector<Rational>(next.col_labels.size()));
    for (std::size_t r1 = 0; r1 < acc.rows(); ++r1)
      for (std::size_t r2 = 0; r2 < f.rows(); ++r2)
        for (std::size_t c1 = 0; c1 < acc.cols(); ++c1)
          for (std::size_t c2 = 0; c2 < f.cols(); ++c2)
            next.cells[r1 * f.rows() + r2][c1 * f.cols() + c2] =
                acc.cells[r1][c1] * f.cells[r2][c2];
    acc = std::move(next);
  }
  return acc;
}

double csaki_fischer_join(std::span<const JointTable> factors, double top_tol) {
  if (factors.empty()) throw BadArity("csaki_fischer_join of no factors");
  double best = 0.0;
  for (const auto& f : factors) best = std::max(best, rho_svd(f, top_tol));
  return best;
}

CsakiFischerCheck csaki_fischer_verify(std::span<const JointTable> factors,
                                       std::size_t max_factors,
                                       std::size_t cell_cap, double top_tol) {
  if (factors.size() > max_factors)
    throw TooManyAtoms("verification mode is capped at " +
                       std::to_string(max_factors) + " factors");
  CsakiFischerCheck out;
  out.factor_max = csaki_fischer_join(factors, top_tol);
  out.product_rho = rho_svd(tensor_product(factors, cell_cap), top_tol);
  out.delta = std::abs(out.product_rho - out.factor_max);
  return out;
}

}  // namespace mixfield
