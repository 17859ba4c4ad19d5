#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "zen/energy.hpp"
#include "zen/lp.hpp"

namespace zen {

/// maximize  sum w_i a_i + w_d d
/// s.t.      sum E_i a_i + E_DC d = X - V,  0 <= a_i <= 1,  d in [delta_lower, delta_upper]
struct PolicyLp {
  std::vector<double> weights;
  std::vector<EnergyAmount> costs;
  EnergyAmount duty_energy;
  double duty_weight = 0.0;
  EnergyAmount budget;
  double delta_lower = 0.0;
  double delta_upper = 1.0;

  std::size_t policy_count() const { return weights.size(); }
  /// Largest spend the box bounds allow.
  double max_spend() const;
  /// Smallest spend the box bounds force.
  double min_spend() const;
};

PolicyLp build_opt(std::vector<double> weights, std::vector<EnergyAmount> costs, EnergyAmount e_dc,
                   double w_delta, EnergyAmount x_k);

/// 0.1 x the smallest weight/cost ratio among the policies, expressed as a weight on d
/// (so d's ratio w_d / E_DC is a tenth of the cheapest policy utility per uJ).
double default_duty_weight(const std::vector<double>& weights,
                           const std::vector<EnergyAmount>& costs, EnergyAmount e_dc);

enum class OptStatus { Optimal, Infeasible };

struct OptResult {
  double utility = 0.0;
  std::vector<double> alpha;
  double delta = 0.0;
  OptStatus status = OptStatus::Optimal;

  double spend(const PolicyLp& lp) const;
};

/// Solves at residual target v (uJ). Throws Infeasible when X - v lies outside the
/// spend range the bounds allow, InvalidArgument when v is outside [0, X].
OptResult solve_for_v(const PolicyLp& lp, EnergyAmount v);

/// Fractional knapsack over the same LP. Used as an independent check on the simplex.
OptResult greedy_oracle(const PolicyLp& lp, EnergyAmount v);

struct CurvePoint {
  double v = 0.0;  // uJ
  double u = 0.0;
  std::vector<double> alpha;
  double delta = 0.0;
};

struct CurveSegment {
  double v_begin = 0.0;
  double v_end = 0.0;
  /// Basic column per row: i < m for a_i, m for d, > m for an artificial.
  std::vector<std::size_t> basis;
};

struct TradeoffCurve {
  std::vector<CurvePoint> points;
  std::vector<CurveSegment> segments;
  std::size_t pivots = 0;

  double v_min() const { return points.front().v; }
  double v_max() const { return points.back().v; }
};

/// Sweeps V from v_lo to v_hi by parametric right-hand-side analysis, re-optimising
/// with dual simplex pivots at every basis change. Throws Infeasible if any part of
/// the range is infeasible.
TradeoffCurve parametric_sweep(const PolicyLp& lp, EnergyAmount v_lo, EnergyAmount v_hi);

/// Linear interpolation on the containing segment. Throws OutOfDomain outside the curve.
double evaluate_curve(const TradeoffCurve& curve, double v);

/// `v_microjoules,u,alpha_1..alpha_m,delta`, one row per breakpoint.
void write_curve_csv(std::ostream& os, const TradeoffCurve& curve);

}  // namespace zen
