#include "zen/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

namespace zen {

namespace {

double budget_tol(const PolicyLp& lp) { return 1e-9 * std::max(1.0, lp.max_spend()); }

lp::BoundedLp to_bounded(const PolicyLp& p, double rhs) {
  const std::size_t m = p.policy_count();
  lp::BoundedLp out;
  out.rows = 1;
  out.cols = m + 1;
  out.a.reserve(m + 1);
  for (const auto& e : p.costs) out.a.push_back(e.microjoules());
  out.a.push_back(p.duty_energy.microjoules());
  out.b = {rhs};
  out.c = p.weights;
  out.c.push_back(p.duty_weight);
  out.lower.assign(m, 0.0);
  out.lower.push_back(p.delta_lower);
  out.upper.assign(m, 1.0);
  out.upper.push_back(p.delta_upper);
  return out;
}

void check_v(const PolicyLp& lp, double v) {
  const double x = lp.budget.microjoules();
  if (!(v >= 0.0 && v <= x)) {
    throw InvalidArgument("residual target " + std::to_string(v) + " uJ outside [0, " +
                          std::to_string(x) + "]");
  }
}

void check_spend(const PolicyLp& lp, double spend) {
  const double tol = budget_tol(lp);
  if (spend > lp.max_spend() + tol) {
    throw Infeasible("cannot spend " + std::to_string(spend) + " uJ; bounds allow at most " +
                     std::to_string(lp.max_spend()));
  }
  if (spend < lp.min_spend() - tol) {
    throw Infeasible("spend " + std::to_string(spend) + " uJ is below the forced minimum " +
                     std::to_string(lp.min_spend()));
  }
}

lp::Tableau optimal_tableau(const PolicyLp& lp, double v) {
  check_spend(lp, lp.budget.microjoules() - v);
  lp::Tableau t(to_bounded(lp, lp.budget.microjoules() - v), {-1.0});
  try {
    t.dual_simplex();
  } catch (const PrimalInfeasible& e) {
    throw Infeasible(e.what());
  }
  return t;
}

OptResult result_from(const lp::Tableau& t, std::size_t m) {
  OptResult r;
  auto x = t.solution();
  r.delta = x[m];
  x.pop_back();
  r.alpha = std::move(x);
  r.utility = t.objective();
  return r;
}

}  // namespace

double PolicyLp::max_spend() const {
  double s = duty_energy.microjoules() * delta_upper;
  for (const auto& e : costs) s += e.microjoules();
  return s;
}

double PolicyLp::min_spend() const { return duty_energy.microjoules() * delta_lower; }

PolicyLp build_opt(std::vector<double> weights, std::vector<EnergyAmount> costs, EnergyAmount e_dc,
                   double w_delta, EnergyAmount x_k) {
  if (weights.size() != costs.size()) {
    throw DimensionMismatch(std::to_string(weights.size()) + " weights but " +
                            std::to_string(costs.size()) + " costs");
  }
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (costs[i].microjoules() <= 0.0) {
      throw NonPositiveCost("policy " + std::to_string(i) + " has zero cost");
    }
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw InvalidArgument("policy " + std::to_string(i) + " has a negative weight");
    }
  }
  if (e_dc.microjoules() <= 0.0) throw NonPositiveCost("duty energy must be positive");
  if (!(w_delta >= 0.0) || !std::isfinite(w_delta)) {
    throw InvalidArgument("duty weight must be non-negative");
  }
  PolicyLp lp;
  lp.weights = std::move(weights);
  lp.costs = std::move(costs);
  lp.duty_energy = e_dc;
  lp.duty_weight = w_delta;
  lp.budget = x_k;
  return lp;
}

double default_duty_weight(const std::vector<double>& weights,
                           const std::vector<EnergyAmount>& costs, EnergyAmount e_dc) {
  double min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weights.size() && i < costs.size(); ++i) {
    if (weights[i] > 0.0 && costs[i].microjoules() > 0.0) {
      min_ratio = std::min(min_ratio, weights[i] / costs[i].microjoules());
    }
  }
  if (!std::isfinite(min_ratio)) return 0.0;
  return 0.1 * min_ratio * e_dc.microjoules();
}

double OptResult::spend(const PolicyLp& lp) const {
  double s = delta * lp.duty_energy.microjoules();
  for (std::size_t i = 0; i < alpha.size(); ++i) s += alpha[i] * lp.costs[i].microjoules();
  return s;
}

OptResult solve_for_v(const PolicyLp& lp, EnergyAmount v) {
  check_v(lp, v.microjoules());
  return result_from(optimal_tableau(lp, v.microjoules()), lp.policy_count());
}

OptResult greedy_oracle(const PolicyLp& lp, EnergyAmount v) {
  check_v(lp, v.microjoules());
  const double budget = lp.budget.microjoules() - v.microjoules();
  check_spend(lp, budget);

  const std::size_t m = lp.policy_count();
  std::vector<double> cost(m + 1), weight(m + 1), lo(m + 1, 0.0), hi(m + 1, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    cost[i] = lp.costs[i].microjoules();
    weight[i] = lp.weights[i];
  }
  cost[m] = lp.duty_energy.microjoules();
  weight[m] = lp.duty_weight;
  lo[m] = lp.delta_lower;
  hi[m] = lp.delta_upper;

  std::vector<double> x = lo;
  double left = budget - lp.min_spend();
  std::vector<std::size_t> order(m + 1);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return weight[a] / cost[a] > weight[b] / cost[b];
  });
  for (std::size_t j : order) {
    if (left <= 0.0) break;
    const double take = std::min(hi[j] - lo[j], left / cost[j]);
    x[j] += take;
    left -= take * cost[j];
  }

  OptResult r;
  r.delta = x[m];
  r.alpha.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m));
  for (std::size_t j = 0; j <= m; ++j) r.utility += weight[j] * x[j];
  return r;
}

TradeoffCurve parametric_sweep(const PolicyLp& lp, EnergyAmount v_lo, EnergyAmount v_hi) {
  const double lo = v_lo.microjoules();
  const double hi = v_hi.microjoules();
  check_v(lp, lo);
  check_v(lp, hi);
  if (lo > hi) throw InvalidArgument("sweep needs v_lo <= v_hi");
  // The spend range is an interval, so checking both ends covers the sweep.
  check_spend(lp, lp.budget.microjoules() - hi);

  const std::size_t m = lp.policy_count();
  lp::Tableau t = optimal_tableau(lp, lo);
  TradeoffCurve curve;

  auto add_point = [&](double v) {
    auto r = result_from(t, m);
    CurvePoint p{v, r.utility, std::move(r.alpha), r.delta};
    auto& pts = curve.points;
    if (!pts.empty() && v - pts.back().v <= 0.0) return;
    // a basis change with an unchanged slope is not a breakpoint of f(V)
    if (pts.size() >= 2) {
      const auto& a = pts[pts.size() - 2];
      const auto& b = pts.back();
      const double s1 = (b.u - a.u) / (b.v - a.v);
      const double s2 = (p.u - b.u) / (p.v - b.v);
      if (std::abs(s1 - s2) <= 1e-12 * std::max(1.0, std::max(std::abs(s1), std::abs(s2)))) {
        pts.back() = std::move(p);
        return;
      }
    }
    pts.push_back(std::move(p));
  };

  // a breakpoint within rounding of v_hi is the end of the sweep
  const double end_tol = 1e-12 * std::max(1.0, hi);
  double v = lo;
  add_point(v);
  while (true) {
    const lp::RatioStep step = t.ratio_step();
    const double begin = v;
    if (!step.row || v + step.lambda >= hi - end_tol) {
      t.shift_rhs(hi - v);
      v = hi;
      if (hi > begin) curve.segments.push_back({begin, hi, t.basis()});
      add_point(v);
      break;
    }
    if (step.lambda > 0.0) {
      t.shift_rhs(step.lambda);
      v += step.lambda;
      curve.segments.push_back({begin, v, t.basis()});
      add_point(v);
    }
    try {
      t.pivot_out(*step.row, step.toward_lower);
    } catch (const PrimalInfeasible& e) {
      throw Infeasible(std::string("sweep left the feasible range: ") + e.what());
    }
  }
  curve.pivots = t.pivots();
  return curve;
}

double evaluate_curve(const TradeoffCurve& curve, double v) {
  const auto& pts = curve.points;
  if (pts.empty() || !(v >= pts.front().v && v <= pts.back().v)) {
    throw OutOfDomain("V = " + std::to_string(v) + " uJ is outside the curve domain");
  }
  auto it = std::lower_bound(pts.begin(), pts.end(), v,
                             [](const CurvePoint& p, double x) { return p.v < x; });
  if (it->v == v) return it->u;
  const auto& b = *it;
  const auto& a = *std::prev(it);
  return a.u + (b.u - a.u) * (v - a.v) / (b.v - a.v);
}

void write_curve_csv(std::ostream& os, const TradeoffCurve& curve) {
  const std::size_t m = curve.points.empty() ? 0 : curve.points.front().alpha.size();
  os << "v_microjoules,u";
  for (std::size_t i = 1; i <= m; ++i) os << ",alpha_" << i;
  os << ",delta\n";
  const auto old = os.precision(12);
  for (const auto& p : curve.points) {
    os << p.v << ',' << p.u;
    for (double a : p.alpha) os << ',' << a;
    os << ',' << p.delta << '\n';
  }
  os.precision(old);
}

}  // namespace zen
