#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "zen/errors.hpp"

namespace zen::lp {

/// maximize c.x  s.t.  A x = b,  lower <= x <= upper  (all bounds finite).
/// A is dense row-major, rows x cols.
struct BoundedLp {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;
  std::vector<double> lower;
  std::vector<double> upper;

  double at(std::size_t r, std::size_t j) const { return a[r * cols + j]; }
  void validate() const;
};

inline constexpr double kFeasTol = 1e-9;

/// Result of the right-hand-side ratio test along the perturbation direction.
struct RatioStep {
  /// Row whose basic variable reaches a bound first; empty when no basic variable
  /// moves toward a bound (the basis stays optimal for every lambda >= 0).
  std::optional<std::size_t> row;
  double lambda = std::numeric_limits<double>::infinity();
  /// True when that basic variable is heading for its lower bound.
  bool toward_lower = true;
};

/// Simplex tableau over a BoundedLp whose right-hand side is b + lambda * b'.
///
/// The constraint matrix is augmented with one artificial column per row, boxed
/// to [0, 0]. The initial basis is the artificial identity; since every column is
/// boxed, placing each nonbasic at the bound favoured by its reduced cost makes any
/// basis dual feasible, and the dual simplex then drives the artificials out.
class Tableau {
 public:
  Tableau(BoundedLp lp, std::vector<double> rhs_direction);

  /// Runs dual simplex iterations until primal feasible. Leaving row and entering
  /// column both follow the lowest-index rule. Throws PrimalInfeasible when a row
  /// has no eligible entering column.
  void dual_simplex();

  /// Ratio test over rows of B^-1 b': the largest lambda step for which the current
  /// basis remains primal feasible.
  RatioStep ratio_step() const;

  /// Shift the right-hand side by `lambda` along b' without changing the basis.
  void shift_rhs(double lambda);

  /// Remove the basic variable of `row` at the bound it is heading toward and
  /// bring in the column chosen by the dual ratio test.
  void pivot_out(std::size_t row, bool to_lower);

  bool primal_feasible(double tol = kFeasTol) const;
  bool dual_feasible(double tol = kFeasTol) const;

  /// Values of the structural variables (artificials excluded). Values within
  /// tolerance of a bound are reported at the bound.
  std::vector<double> solution() const;
  double objective() const;

  /// Basic column index for each row (artificial columns are >= structural count).
  const std::vector<std::size_t>& basis() const { return basis_; }
  const std::vector<double>& rhs() const { return b_; }
  const std::vector<double>& rhs_direction() const { return b_dir_; }
  const std::vector<double>& basic_values() const { return x_basic_; }
  /// B^-1 b' per row.
  std::vector<double> direction_in_basis() const;
  std::vector<double> reduced_costs() const;
  std::size_t structural_count() const { return n_struct_; }
  std::size_t pivots() const { return pivots_; }

 private:
  double col(std::size_t r, std::size_t j) const { return a_[r * n_ + j]; }
  void refactor();
  std::vector<double> tableau_row(std::size_t r) const;
  std::optional<std::size_t> choose_entering(std::size_t r, bool increase_basic) const;
  void pivot(std::size_t r, std::size_t entering, bool leaving_to_lower);

  std::size_t m_ = 0;
  std::size_t n_ = 0;        // structural + artificial
  std::size_t n_struct_ = 0;
  std::vector<double> a_;
  std::vector<double> b_;
  std::vector<double> b_dir_;
  std::vector<double> c_;
  std::vector<double> lo_;
  std::vector<double> up_;

  std::vector<std::size_t> basis_;
  std::vector<char> is_basic_;
  std::vector<char> at_upper_;   // nonbasic status
  std::vector<double> binv_;     // m x m
  std::vector<double> x_basic_;
  std::size_t pivots_ = 0;
};

/// Move the right-hand side by `lambda` along b', re-optimising with the dual simplex
/// at every breakpoint crossed. With no basic variable heading to a bound the
/// tableau only shifts. Throws PrimalInfeasible when the target right-hand side
/// admits no feasible point.
Tableau dual_simplex_reoptimize(const Tableau& t, double lambda);

}  // namespace zen::lp
