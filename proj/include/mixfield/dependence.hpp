#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mixfield/distribution.hpp"

namespace mixfield {

// Joint law of a pair of discrete variables as a dense table of exact cell
// probabilities.  Invariants: cells are nonnegative and sum to 1, and both
// marginals are strictly positive (empty rows/columns are not representable
// states of the pair).
struct JointTable {
  std::vector<Label> row_labels;
  std::vector<Label> col_labels;
  std::vector<Rational> row_probs;             // marginal of the row variable
  std::vector<Rational> col_probs;             // marginal of the column variable
  std::vector<std::vector<Rational>> cells;    // cells[r][c]

  std::size_t rows() const { return row_labels.size(); }
  std::size_t cols() const { return col_labels.size(); }

  // Builds from cell probabilities, deriving marginals and dropping all-zero
  // rows/columns.  Validates nonnegativity and total mass.
  static JointTable from_cells(std::vector<Label> row_labels,
                               std::vector<Label> col_labels,
                               std::vector<std::vector<Rational>> cells);

  // Splits a joint distribution into the pair (coordinates in row_coords,
  // coordinates in col_coords).  The two position lists must be disjoint;
  // they need not cover all positions (others are summed out).
  static JointTable from_split(const FiniteDistribution& joint,
                               std::span<const int> row_coords,
                               std::span<const int> col_coords);

  JointTable transposed() const;

  bool operator==(const JointTable&) const = default;
};

// Strong mixing coefficient of the pair: the largest deviation
// |P(A & B) - P(A)P(B)| over events A of the row variable and B of the
// column variable.  Exact.  Enumerates the 2^k events on the smaller side
// (k capped, default 20 -> TooManyAtoms beyond) and optimizes the other side
// in closed form per event.
Rational alpha_exact(const JointTable& t, std::size_t side_cap = 20);

// Reference implementation enumerating every pair of events on both sides.
// Cap applies to each side (default 12).
Rational alpha_bruteforce(const JointTable& t, std::size_t side_cap = 12);

// Maximal correlation of the pair: the second singular value of the matrix
// Q[a,b] = P(a,b) / sqrt(P(a) P(b)).  The leading singular value of Q is 1
// by construction; if it drifts from 1 by more than top_tol the computation
// throws NumericFailure (drift inside [1e-9, top_tol] is repaired silently).
// The result is clamped to [0, 1].
double rho_svd(const JointTable& t, double top_tol = 1e-6);

// Same computation, also returning the pair of unit-variance functions
// (f on rows, g on columns) achieving the maximal correlation.
struct RhoFunctions {
  double rho = 0.0;
  std::vector<double> f_row;
  std::vector<double> g_col;
};
RhoFunctions rho_svd_functions(const JointTable& t, double top_tol = 1e-6);

// Joint table of independent pairs observed jointly: labels concatenate,
// probabilities multiply.  Throws TooManyAtoms past cell_cap cells.
JointTable tensor_product(std::span<const JointTable> factors,
                          std::size_t cell_cap = std::size_t(1) << 22);

// Maximal correlation across a finite family of independent pairs: equals
// the largest per-pair maximal correlation.
double csaki_fischer_join(std::span<const JointTable> factors, double top_tol = 1e-6);

// Verification mode: materializes the product pair and computes its maximal
// correlation directly, reporting the deviation from the per-factor maximum.
struct CsakiFischerCheck {
  double factor_max = 0.0;
  double product_rho = 0.0;
  double delta = 0.0;  // |product_rho - factor_max|
};
CsakiFischerCheck csaki_fischer_verify(std::span<const JointTable> factors,
                                       std::size_t max_factors = 3,
                                       std::size_t cell_cap = std::size_t(1) << 22,
                                       double top_tol = 1e-6);

}  // namespace mixfield
