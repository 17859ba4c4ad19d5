#include "zen/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace zen::lp {

namespace {

constexpr double kPivotTol = 1e-12;
constexpr double kSnapTol = 1e-11;
constexpr std::size_t kMaxIterations = 100000;

// Gauss-Jordan inverse with partial pivoting; m is tiny here (one row per
// coupling constraint).
std::vector<double> invert(std::vector<double> m, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(m[r * n + col]) > std::abs(m[piv * n + col])) piv = r;
    }
    if (std::abs(m[piv * n + col]) < kPivotTol) {
      throw Error("singular basis matrix");
    }
    if (piv != col) {
      for (std::size_t k = 0; k < n; ++k) {
        std::swap(m[piv * n + k], m[col * n + k]);
        std::swap(inv[piv * n + k], inv[col * n + k]);
      }
    }
    const double d = m[col * n + col];
    for (std::size_t k = 0; k < n; ++k) {
      m[col * n + k] /= d;
      inv[col * n + k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m[r * n + col];
      if (f == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        m[r * n + k] -= f * m[col * n + k];
        inv[r * n + k] -= f * inv[col * n + k];
      }
    }
  }
  return inv;
}

}  // namespace

void BoundedLp::validate() const {
  if (a.size() != rows * cols || b.size() != rows || c.size() != cols ||
      lower.size() != cols || upper.size() != cols) {
    throw DimensionMismatch("bounded LP arrays do not match its dimensions");
  }
  for (std::size_t j = 0; j < cols; ++j) {
    if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]) || lower[j] > upper[j]) {
      throw InvalidArgument("column " + std::to_string(j) + " needs finite bounds lower <= upper");
    }
  }
}

Tableau::Tableau(BoundedLp lp, std::vector<double> rhs_direction) {
  lp.validate();
  if (rhs_direction.size() != lp.rows) {
    throw DimensionMismatch("rhs direction length differs from row count");
  }
  m_ = lp.rows;
  n_struct_ = lp.cols;
  n_ = n_struct_ + m_;
  a_.assign(m_ * n_, 0.0);
  for (std::size_t r = 0; r < m_; ++r) {
    for (std::size_t j = 0; j < n_struct_; ++j) a_[r * n_ + j] = lp.at(r, j);
    a_[r * n_ + n_struct_ + r] = 1.0;
  }
  b_ = std::move(lp.b);
  b_dir_ = std::move(rhs_direction);
  c_ = std::move(lp.c);
  c_.resize(n_, 0.0);
  lo_ = std::move(lp.lower);
  up_ = std::move(lp.upper);
  lo_.resize(n_, 0.0);
  up_.resize(n_, 0.0);

  basis_.resize(m_);
  is_basic_.assign(n_, 0);
  at_upper_.assign(n_, 0);
  for (std::size_t r = 0; r < m_; ++r) {
    basis_[r] = n_struct_ + r;
    is_basic_[n_struct_ + r] = 1;
  }
  // With the artificial basis the duals are zero, so d_j = c_j.
  for (std::size_t j = 0; j < n_struct_; ++j) at_upper_[j] = c_[j] > 0.0 ? 1 : 0;
  refactor();
}

void Tableau::refactor() {
  std::vector<double> bmat(m_ * m_);
  for (std::size_t r = 0; r < m_; ++r) {
    for (std::size_t k = 0; k < m_; ++k) bmat[r * m_ + k] = col(r, basis_[k]);
  }
  binv_ = invert(std::move(bmat), m_);

  std::vector<double> residual = b_;
  for (std::size_t j = 0; j < n_; ++j) {
    if (is_basic_[j]) continue;
    const double xj = at_upper_[j] ? up_[j] : lo_[j];
    if (xj == 0.0) continue;
    for (std::size_t r = 0; r < m_; ++r) residual[r] -= col(r, j) * xj;
  }
  x_basic_.assign(m_, 0.0);
  for (std::size_t r = 0; r < m_; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < m_; ++k) s += binv_[r * m_ + k] * residual[k];
    x_basic_[r] = s;
  }
}

std::vector<double> Tableau::tableau_row(std::size_t r) const {
  std::vector<double> row(n_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < m_; ++k) s += binv_[r * m_ + k] * col(k, j);
    row[j] = s;
  }
  return row;
}

std::vector<double> Tableau::reduced_costs() const {
  std::vector<double> y(m_, 0.0);
  for (std::size_t k = 0; k < m_; ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < m_; ++r) s += c_[basis_[r]] * binv_[r * m_ + k];
    y[k] = s;
  }
  std::vector<double> d(n_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    if (is_basic_[j]) continue;
    double s = c_[j];
    for (std::size_t k = 0; k < m_; ++k) s -= y[k] * col(k, j);
    d[j] = s;
  }
  return d;
}

std::vector<double> Tableau::direction_in_basis() const {
  std::vector<double> dir(m_, 0.0);
  for (std::size_t r = 0; r < m_; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < m_; ++k) s += binv_[r * m_ + k] * b_dir_[k];
    dir[r] = s;
  }
  return dir;
}

std::optional<std::size_t> Tableau::choose_entering(std::size_t r, bool increase_basic) const {
  const auto row = tableau_row(r);
  const auto d = reduced_costs();
  std::optional<std::size_t> best;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n_; ++j) {
    if (is_basic_[j] || up_[j] - lo_[j] <= 0.0) continue;
    const double alpha = row[j];
    const bool at_up = at_upper_[j] != 0;
    // x_r = beta_r - sum alpha_rj * dx_j; a nonbasic at lower can only rise,
    // one at upper can only fall.
    const bool eligible = increase_basic ? ((!at_up && alpha < -kPivotTol) || (at_up && alpha > kPivotTol))
                                         : ((!at_up && alpha > kPivotTol) || (at_up && alpha < -kPivotTol));
    if (!eligible) continue;
    const double ratio = std::abs(d[j]) / std::abs(alpha);
    if (!best || ratio < best_ratio - 1e-12 * std::max(1.0, best_ratio)) {
      best = j;
      best_ratio = ratio;
    }
  }
  return best;
}

void Tableau::pivot(std::size_t r, std::size_t entering, bool leaving_to_lower) {
  const std::size_t leaving = basis_[r];
  is_basic_[leaving] = 0;
  at_upper_[leaving] = leaving_to_lower ? 0 : 1;
  basis_[r] = entering;
  is_basic_[entering] = 1;
  at_upper_[entering] = 0;
  ++pivots_;
  refactor();
}

void Tableau::dual_simplex() {
  for (std::size_t iter = 0; iter < kMaxIterations; ++iter) {
    std::optional<std::size_t> leave;
    bool below = false;
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t q = basis_[r];
      const double x = x_basic_[r];
      const double tol = kFeasTol * std::max(1.0, std::max(std::abs(lo_[q]), std::abs(up_[q])));
      const bool lo_viol = x < lo_[q] - tol;
      const bool up_viol = x > up_[q] + tol;
      if ((lo_viol || up_viol) && (!leave || q < basis_[*leave])) {
        leave = r;
        below = lo_viol;
      }
    }
    if (!leave) return;
    const auto entering = choose_entering(*leave, below);
    if (!entering) {
      throw PrimalInfeasible("row " + std::to_string(*leave) + " has no entering column");
    }
    pivot(*leave, *entering, below);
  }
  throw Error("dual simplex iteration limit reached");
}

RatioStep Tableau::ratio_step() const {
  RatioStep step;
  const auto dir = direction_in_basis();
  for (std::size_t r = 0; r < m_; ++r) {
    const std::size_t q = basis_[r];
    double ratio;
    bool toward_lower;
    if (dir[r] < -kPivotTol) {
      ratio = (x_basic_[r] - lo_[q]) / (-dir[r]);
      toward_lower = true;
    } else if (dir[r] > kPivotTol) {
      ratio = (up_[q] - x_basic_[r]) / dir[r];
      toward_lower = false;
    } else {
      continue;
    }
    ratio = std::max(0.0, ratio);
    const bool better = !step.row || ratio < step.lambda - 1e-12 * std::max(1.0, step.lambda) ||
                        (ratio <= step.lambda + 1e-12 * std::max(1.0, step.lambda) &&
                         q < basis_[*step.row]);
    if (better) {
      step.row = r;
      step.lambda = ratio;
      step.toward_lower = toward_lower;
    }
  }
  return step;
}

void Tableau::shift_rhs(double lambda) {
  if (lambda == 0.0) return;
  for (std::size_t r = 0; r < m_; ++r) b_[r] += lambda * b_dir_[r];
  refactor();
}

void Tableau::pivot_out(std::size_t row, bool to_lower) {
  const auto entering = choose_entering(row, to_lower);
  if (!entering) {
    throw PrimalInfeasible("no entering column for row " + std::to_string(row));
  }
  pivot(row, *entering, to_lower);
}

bool Tableau::primal_feasible(double tol) const {
  for (std::size_t r = 0; r < m_; ++r) {
    const std::size_t q = basis_[r];
    const double t = tol * std::max(1.0, std::max(std::abs(lo_[q]), std::abs(up_[q])));
    if (x_basic_[r] < lo_[q] - t || x_basic_[r] > up_[q] + t) return false;
  }
  return true;
}

bool Tableau::dual_feasible(double tol) const {
  const auto d = reduced_costs();
  for (std::size_t j = 0; j < n_; ++j) {
    if (is_basic_[j] || up_[j] - lo_[j] <= 0.0) continue;
    if (at_upper_[j] ? d[j] < -tol : d[j] > tol) return false;
  }
  return true;
}

std::vector<double> Tableau::solution() const {
  std::vector<double> x(n_struct_, 0.0);
  for (std::size_t j = 0; j < n_struct_; ++j) {
    if (!is_basic_[j]) x[j] = at_upper_[j] ? up_[j] : lo_[j];
  }
  for (std::size_t r = 0; r < m_; ++r) {
    const std::size_t q = basis_[r];
    if (q >= n_struct_) continue;
    double v = x_basic_[r];
    if (std::abs(v - lo_[q]) <= kSnapTol) v = lo_[q];
    if (std::abs(v - up_[q]) <= kSnapTol) v = up_[q];
    x[q] = v;
  }
  return x;
}

double Tableau::objective() const {
  const auto x = solution();
  double u = 0.0;
  for (std::size_t j = 0; j < n_struct_; ++j) u += c_[j] * x[j];
  return u;
}

Tableau dual_simplex_reoptimize(const Tableau& t, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  Tableau out = t;
  double remaining = lambda;
  const double end_tol = 1e-12 * std::max(1.0, lambda);
  for (std::size_t iter = 0; iter < kMaxIterations; ++iter) {
    const RatioStep step = out.ratio_step();
    if (!step.row || step.lambda >= remaining - end_tol) {
      out.shift_rhs(remaining);
      return out;
    }
    out.shift_rhs(step.lambda);
    remaining -= step.lambda;
    out.pivot_out(*step.row, step.toward_lower);
  }
  throw Error("parametric re-optimisation iteration limit reached");
}

}  // namespace zen::lp
