#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mlmcdrop/analytic.hpp"
#include "mlmcdrop/mlmc.hpp"

namespace mlmcdrop {

/// Pricing of one level-l replicate in forward passes.
/// coupled:   a_0 = T_0, a_l = T_l - T_{l-1}  (prefix draws reused)
/// uncoupled: a_l = T_l                        (fine estimator paid in full)
enum class CostModelKind { coupled, uncoupled };

inline std::vector<std::uint64_t> cost_weights(const FidelityLadder& ladder,
                                               CostModelKind kind) {
  ladder.validate();
  std::vector<std::uint64_t> a(ladder.level_count());
  a[0] = ladder.ts[0];
  for (std::size_t l = 1; l < a.size(); ++l)
    a[l] = kind == CostModelKind::coupled ? ladder.ts[l] - ladder.ts[l - 1]
                                          : ladder.ts[l];
  return a;
}

/// Per-level outer sample counts, continuous while being optimised and
/// integral once realised, tagged with the cost model that priced them.
struct Allocation {
  std::vector<double> ms;
  CostModelKind kind = CostModelKind::coupled;

  bool is_integral() const {
    for (double m : ms)
      if (m != std::floor(m)) return false;
    return true;
  }

  std::vector<std::uint64_t> counts() const {
    if (!is_integral())
      throw std::logic_error("allocation: not integral");
    std::vector<std::uint64_t> out(ms.size());
    for (std::size_t l = 0; l < ms.size(); ++l)
      out[l] = static_cast<std::uint64_t>(ms[l]);
    return out;
  }
};

inline std::uint64_t cost(const FidelityLadder& ladder,
                          std::span<const std::uint64_t> ms,
                          CostModelKind kind) {
  const auto a = cost_weights(ladder, kind);
  if (ms.size() != a.size())
    throw std::invalid_argument("cost: allocation size mismatch");
  std::uint64_t total = 0;
  for (std::size_t l = 0; l < a.size(); ++l) total += a[l] * ms[l];
  return total;
}

inline double cost_continuous(const FidelityLadder& ladder,
                              std::span<const double> ms,
                              CostModelKind kind) {
  const auto a = cost_weights(ladder, kind);
  if (ms.size() != a.size())
    throw std::invalid_argument("cost: allocation size mismatch");
  double total = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l)
    total += static_cast<double>(a[l]) * ms[l];
  return total;
}

/// Geometric ladder T_l = ceil(t0 r^l) truncated at t_max. Entries that
/// would repeat or leave a gap below 2 are advanced to the previous level
/// plus 2, so the result always satisfies the ladder invariants.
inline FidelityLadder make_geometric_ladder(std::uint32_t t0, double r,
                                            std::uint32_t t_max) {
  if (t0 < 2) throw std::invalid_argument("ladder: t0 must be >= 2");
  if (!(r > 1.0)) throw std::invalid_argument("ladder: ratio must be > 1");
  if (t_max < t0)
    throw std::invalid_argument("ladder: t_max must be at least t0");
  FidelityLadder ladder;
  ladder.ts.push_back(t0);
  double geometric = static_cast<double>(t0);
  for (;;) {
    geometric *= r;
    std::uint64_t next = static_cast<std::uint64_t>(std::ceil(geometric));
    next = std::max<std::uint64_t>(next, ladder.ts.back() + 2);
    if (next > t_max) break;
    ladder.ts.push_back(static_cast<std::uint32_t>(next));
  }
  ladder.validate();
  return ladder;
}

namespace detail {

// Normalised level weights for the two targets; constant factors cancel in
// the allocation formula.
//   mean:     v_0 = 1/T_0,       v_l = 1/T_{l-1} - 1/T_l
//   variance: w_l from the increment-variance formulas, or with the
//             zero-excess-kurtosis closure w_0 = 1/(T_0-1),
//             w_l = 1/(T_{l-1}-1) - 1/(T_l-1).
inline std::vector<double> mean_level_weights(const FidelityLadder& ladder) {
  std::vector<double> v(ladder.level_count());
  v[0] = 1.0 / ladder.ts[0];
  for (std::size_t l = 1; l < v.size(); ++l)
    v[l] = 1.0 / ladder.ts[l - 1] - 1.0 / ladder.ts[l];
  return v;
}

inline std::vector<double> variance_level_weights(
    const FidelityLadder& ladder, const std::optional<MomentSet>& moments) {
  std::vector<double> w(ladder.level_count());
  if (moments) {
    if (moments->mu4 < moments->mu2 * moments->mu2)
      throw std::invalid_argument(
          "allocate_variance: moments violate mu4 >= mu2^2");
    w[0] = theoretical_single_variances(*moments, ladder.ts[0]).var_v;
    for (std::size_t l = 1; l < w.size(); ++l)
      w[l] = theoretical_increment_variances(*moments, ladder.ts[l - 1],
                                             ladder.ts[l])
                 .var_dv;
  } else {
    w[0] = 1.0 / (ladder.ts[0] - 1.0);
    for (std::size_t l = 1; l < w.size(); ++l)
      w[l] = 1.0 / (ladder.ts[l - 1] - 1.0) - 1.0 / (ladder.ts[l] - 1.0);
  }
  return w;
}

// Continuous minimiser of sum(weight_l / M_l) under sum(a_l M_l) = budget:
//   M_l* = budget * sqrt(weight_l / a_l) / sum_k sqrt(weight_k a_k)
inline Allocation lagrangian_allocation(const FidelityLadder& ladder,
                                        double budget, CostModelKind kind,
                                        std::span<const double> weights) {
  if (!(budget > 0.0))
    throw std::invalid_argument("allocation: budget must be positive");
  const auto a = cost_weights(ladder, kind);
  double denom = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l)
    denom += std::sqrt(weights[l] * static_cast<double>(a[l]));
  Allocation alloc;
  alloc.kind = kind;
  alloc.ms.resize(a.size());
  for (std::size_t l = 0; l < a.size(); ++l)
    alloc.ms[l] =
        budget * std::sqrt(weights[l] / static_cast<double>(a[l])) / denom;
  return alloc;
}

}  // namespace detail

/// Continuous optimum for the mean target; independent of mu2.
inline Allocation allocate_mean(const FidelityLadder& ladder, double budget,
                                CostModelKind kind) {
  ladder.validate();
  const auto v = detail::mean_level_weights(ladder);
  return detail::lagrangian_allocation(ladder, budget, kind, v);
}

/// Continuous optimum for the variance target. With explicit moments the
/// level weights are the increment variances; without them the
/// zero-excess-kurtosis closure is used and the result depends only on the
/// ladder.
inline Allocation allocate_variance(
    const FidelityLadder& ladder, double budget, CostModelKind kind,
    const std::optional<MomentSet>& moments = std::nullopt) {
  ladder.validate();
  const auto w = detail::variance_level_weights(ladder, moments);
  return detail::lagrangian_allocation(ladder, budget, kind, w);
}

/// Rounds a continuous allocation to integers: floor to at least 2, then
/// spend what remains of the budget one replicate at a time on the level
/// with the best variance reduction per unit cost. Final cost is at most
/// the budget and within max_l(a_l) of it.
inline Allocation round_allocation(const Allocation& continuous,
                                   const FidelityLadder& ladder, double budget,
                                   CostModelKind kind) {
  ladder.validate();
  if (continuous.ms.size() != ladder.level_count())
    throw std::invalid_argument("round_allocation: size mismatch");
  const auto a = cost_weights(ladder, kind);

  // The continuous optimum satisfies M_l ~ sqrt(weight_l / a_l), so
  // weight_l can be recovered (up to scale) as a_l M_l^2.
  std::vector<double> weight(a.size());
  for (std::size_t l = 0; l < a.size(); ++l)
    weight[l] =
        static_cast<double>(a[l]) * continuous.ms[l] * continuous.ms[l];

  Allocation out;
  out.kind = kind;
  out.ms.resize(a.size());
  double spent = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    out.ms[l] = std::max(2.0, std::floor(continuous.ms[l]));
    spent += out.ms[l] * static_cast<double>(a[l]);
  }
  if (spent > budget)
    throw std::invalid_argument(
        "round_allocation: budget cannot afford M_l = 2 at every level");

  for (;;) {
    double best_gain = 0.0;
    std::size_t best = a.size();
    for (std::size_t l = 0; l < a.size(); ++l) {
      if (spent + static_cast<double>(a[l]) > budget) continue;
      const double m = out.ms[l];
      const double gain =
          (weight[l] / m - weight[l] / (m + 1.0)) / static_cast<double>(a[l]);
      if (gain > best_gain) {
        best_gain = gain;
        best = l;
      }
    }
    if (best == a.size()) break;
    out.ms[best] += 1.0;
    spent += static_cast<double>(a[best]);
  }
  return out;
}

/// All integer allocations with M_l >= min_m that hit the budget exactly,
/// ordered lexicographically by (M_1, ..., M_L); M_0 is the residual and a
/// tuple is emitted only when that residual is a whole count >= min_m.
inline std::vector<Allocation> enumerate_fixed_cost(const FidelityLadder& ladder,
                                                    std::uint64_t budget,
                                                    CostModelKind kind,
                                                    std::uint32_t min_m) {
  ladder.validate();
  if (min_m < 1)
    throw std::invalid_argument("enumerate_fixed_cost: min_m must be >= 1");
  const auto a = cost_weights(ladder, kind);
  const std::size_t levels = a.size();
  std::vector<Allocation> out;

  std::vector<std::uint64_t> ms(levels, min_m);
  // depth-first over (M_1 .. M_L) with pruning on the fixed tail cost
  std::vector<std::uint64_t> tail_min(levels + 1, 0);
  for (std::size_t l = levels; l-- > 1;)
    tail_min[l] = tail_min[l + 1] + a[l] * min_m;

  const std::uint64_t head_min = a[0] * min_m;
  auto rec = [&](auto&& self, std::size_t l, std::uint64_t used) -> void {
    if (l == levels) {
      const std::uint64_t residual = budget - used;
      if (residual % a[0] == 0 && residual / a[0] >= min_m) {
        Allocation alloc;
        alloc.kind = kind;
        alloc.ms.resize(levels);
        alloc.ms[0] = static_cast<double>(residual / a[0]);
        for (std::size_t k = 1; k < levels; ++k)
          alloc.ms[k] = static_cast<double>(ms[k]);
        out.push_back(std::move(alloc));
      }
      return;
    }
    for (std::uint64_t m = min_m;; ++m) {
      const std::uint64_t used_here = used + a[l] * m;
      if (used_here + tail_min[l + 1] + head_min > budget) break;
      ms[l] = m;
      self(self, l + 1, used_here);
    }
  };
  if (levels == 1) {
    if (budget % a[0] == 0 && budget / a[0] >= min_m) {
      Allocation alloc;
      alloc.kind = kind;
      alloc.ms = {static_cast<double>(budget / a[0])};
      out.push_back(std::move(alloc));
    }
  } else {
    rec(rec, 1, 0);
  }
  return out;
}

struct StoppingCheck {
  bool stop_mean = false;
  bool stop_variance = false;
};

/// Ladder-growth stopping rule: refinement stops once the finest level's
/// contribution to the empirical estimator variance is below the threshold
/// fraction of the whole, for every output component.
inline StoppingCheck stopping_check(const MlmcEstimate& est,
                                    double threshold = 0.1) {
  if (est.level_stats.size() < 2)
    throw std::invalid_argument("stopping_check: needs at least one level");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("stopping_check: threshold must be in (0,1)");
  const LevelStats& finest = est.level_stats.back();
  const double m = static_cast<double>(finest.m);
  StoppingCheck out{true, true};
  for (std::size_t c = 0; c < est.s2_y.size(); ++c) {
    if (finest.y_var[c] / m > threshold * est.s2_y[c]) out.stop_mean = false;
    if (finest.v_var[c] / m > threshold * est.s2_v[c])
      out.stop_variance = false;
  }
  return out;
}

}  // namespace mlmcdrop
