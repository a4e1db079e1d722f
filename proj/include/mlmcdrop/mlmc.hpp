#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlmcdrop/analytic.hpp"
#include "mlmcdrop/evaluator.hpp"
#include "mlmcdrop/moments.hpp"
#include "mlmcdrop/stream.hpp"
#include "mlmcdrop/welford.hpp"

namespace mlmcdrop {

/// Strictly increasing inner fidelities T_0 < ... < T_L with T_0 >= 2 and
/// every gap at least 2, so each refinement block supports its own sample
/// variance.
struct FidelityLadder {
  std::vector<std::uint32_t> ts;

  std::size_t level_count() const { return ts.size(); }

  void validate() const {
    if (ts.empty()) throw std::invalid_argument("ladder: empty");
    if (ts.front() < 2)
      throw std::invalid_argument("ladder: T_0 must be >= 2");
    for (std::size_t l = 1; l < ts.size(); ++l)
      if (ts[l] < ts[l - 1] + 2)
        throw std::invalid_argument(
            "ladder: levels must increase by at least 2 (level " +
            std::to_string(l) + ")");
  }
};

struct CoupledPair {
  SingleFidelityEstimate coarse;
  SingleFidelityEstimate fine;
};

/// Coarse and fine estimates from one draw sequence of length t_fine: the
/// coarse statistics are a snapshot of the running accumulator after
/// t_coarse draws, so they are bit-identical to an uncoupled
/// estimate_single(t_coarse) under the same key. Costs t_fine passes.
inline CoupledPair coupled_pair(const StochasticEvaluator& ev,
                                std::span<const double> x,
                                std::uint32_t t_coarse, std::uint32_t t_fine,
                                const StreamKey& key) {
  if (t_coarse < 2)
    throw std::invalid_argument("coupled_pair: t_coarse must be >= 2");
  if (t_fine < t_coarse + 2)
    throw std::invalid_argument(
        "coupled_pair: t_fine must exceed t_coarse by at least 2");
  const std::size_t dim = ev.output_dim();
  MeanVarVec acc(dim);
  std::vector<double> draw(dim);
  CoupledPair pair;
  for (std::uint32_t i = 1; i <= t_fine; ++i) {
    ev.eval(x, key.with_inner(i), draw);
    acc.add(draw);
    if (i == t_coarse) {
      // snapshot equals an uncoupled estimate_single(t_coarse) in every
      // field; the prefix draws are shared, so the pair still costs only
      // t_fine actual passes
      pair.coarse.y = acc.means();
      pair.coarse.v = acc.variances();
      pair.coarse.t = t_coarse;
      pair.coarse.evals = t_coarse;
    }
  }
  pair.fine.y = acc.means();
  pair.fine.v = acc.variances();
  pair.fine.t = t_fine;
  pair.fine.evals = t_fine;
  return pair;
}

struct PooledUpdate {
  double v_fine = 0.0;
  double y_fine = 0.0;
};

/// Merges coarse statistics with a fresh block through the pooled-variance
/// identity
///   (n_f - 1) V_f = (n_c - 1) V_c + (n_b - 1) V_b
///                   + (n_c n_b / n_f) (ybar_c - ybar_b)^2
/// and returns the mean and unbiased variance over the union.
inline PooledUpdate pooled_variance_update(double v_coarse, double y_coarse,
                                           std::uint64_t n_coarse,
                                           std::span<const double> block) {
  if (n_coarse < 2)
    throw std::invalid_argument("pooled_variance_update: n_coarse >= 2");
  if (block.size() < 2)
    throw std::invalid_argument(
        "pooled_variance_update: block needs at least 2 draws");
  MeanVar acc;
  for (double d : block) acc.add(d);
  const double nc = static_cast<double>(n_coarse);
  const double nb = static_cast<double>(block.size());
  const double nf = nc + nb;
  const double dmean = y_coarse - acc.mean();
  PooledUpdate out;
  out.y_fine = (nc * y_coarse + nb * acc.mean()) / nf;
  out.v_fine = ((nc - 1.0) * v_coarse + acc.sum_sq_dev() +
                nc * nb / nf * dmean * dmean) /
               (nf - 1.0);
  return out;
}

/// Per-level replicate statistics. Level 0 holds means and sample variances
/// of the base estimators Y, V; levels >= 1 hold those of the increments
/// dY, dV. One entry per output component.
struct LevelStats {
  std::vector<double> y_mean;
  std::vector<double> y_var;
  std::vector<double> v_mean;
  std::vector<double> v_var;
  std::uint32_t m = 0;
};

struct MlmcEstimate {
  std::vector<double> y_mlmc;
  std::vector<double> v_mlmc;
  std::vector<double> s2_y;
  std::vector<double> s2_v;
  std::vector<LevelStats> level_stats;
  std::vector<std::uint32_t> ts;
  std::vector<std::uint64_t> ms;
  std::uint64_t evals_coupled = 0;
  std::uint64_t evals_uncoupled_equivalent = 0;
};

/// The telescoped estimators over the ladder: level 0 runs independent
/// single-fidelity estimates at T_0, level l >= 1 runs coupled pairs
/// (T_{l-1}, T_l). Replicate streams are keyed (seed, m, l), so levels and
/// replicates are independent and the result does not depend on execution
/// order. Coupled cost: T_0 M_0 + sum (T_l - T_{l-1}) M_l.
inline MlmcEstimate mlmc_estimate(const StochasticEvaluator& ev,
                                  std::span<const double> x,
                                  const FidelityLadder& ladder,
                                  std::span<const std::uint64_t> ms,
                                  std::uint64_t seed) {
  ladder.validate();
  if (ms.size() != ladder.level_count())
    throw std::invalid_argument("mlmc_estimate: allocation size mismatch");
  for (std::uint64_t m : ms)
    if (m < 2)
      throw std::invalid_argument("mlmc_estimate: every M_l must be >= 2");

  const std::size_t dim = ev.output_dim();
  const std::size_t levels = ladder.level_count();
  MlmcEstimate est;
  est.ts = ladder.ts;
  est.ms.assign(ms.begin(), ms.end());
  est.level_stats.reserve(levels);

  std::vector<double> dy(dim), dv(dim);
  for (std::size_t l = 0; l < levels; ++l) {
    MeanVarVec acc_y(dim);
    MeanVarVec acc_v(dim);
    const std::uint32_t level = static_cast<std::uint32_t>(l);
    for (std::uint64_t m = 1; m <= ms[l]; ++m) {
      const StreamKey key{seed, static_cast<std::uint32_t>(m), level, 0,
                          Lane::noise};
      if (l == 0) {
        const auto base = estimate_single(ev, x, ladder.ts[0], key);
        acc_y.add(base.y);
        acc_v.add(base.v);
      } else {
        const auto pair =
            coupled_pair(ev, x, ladder.ts[l - 1], ladder.ts[l], key);
        for (std::size_t c = 0; c < dim; ++c) {
          dy[c] = pair.fine.y[c] - pair.coarse.y[c];
          dv[c] = pair.fine.v[c] - pair.coarse.v[c];
        }
        acc_y.add(dy);
        acc_v.add(dv);
      }
    }
    LevelStats stats;
    stats.y_mean = acc_y.means();
    stats.y_var = acc_y.variances();
    stats.v_mean = acc_v.means();
    stats.v_var = acc_v.variances();
    stats.m = static_cast<std::uint32_t>(ms[l]);
    est.level_stats.push_back(std::move(stats));
  }

  est.y_mlmc.assign(dim, 0.0);
  est.v_mlmc.assign(dim, 0.0);
  est.s2_y.assign(dim, 0.0);
  est.s2_v.assign(dim, 0.0);
  for (const LevelStats& stats : est.level_stats) {
    const double m = static_cast<double>(stats.m);
    for (std::size_t c = 0; c < dim; ++c) {
      est.y_mlmc[c] += stats.y_mean[c];
      est.v_mlmc[c] += stats.v_mean[c];
      est.s2_y[c] += stats.y_var[c] / m;
      est.s2_v[c] += stats.v_var[c] / m;
    }
  }

  est.evals_coupled = static_cast<std::uint64_t>(ladder.ts[0]) * ms[0];
  est.evals_uncoupled_equivalent =
      static_cast<std::uint64_t>(ladder.ts[0]) * ms[0];
  for (std::size_t l = 1; l < levels; ++l) {
    est.evals_coupled +=
        static_cast<std::uint64_t>(ladder.ts[l] - ladder.ts[l - 1]) * ms[l];
    est.evals_uncoupled_equivalent +=
        static_cast<std::uint64_t>(ladder.ts[l]) * ms[l];
  }
  return est;
}

struct IncrementVariances {
  double var_dy = 0.0;
  double var_dv = 0.0;
};

/// Sampling variances of the coupled increments between fidelities
/// t_coarse < t_fine sharing their prefix draws:
///   Var[dY] = mu2 (1/t_c - 1/t_f)
///   Var[dV] = (1/t_c - 1/t_f)(mu4 - 3 mu2^2)
///             + 2 (1/(t_c - 1) - 1/(t_f - 1)) mu2^2
inline IncrementVariances theoretical_increment_variances(
    const MomentSet& m, std::uint32_t t_coarse, std::uint32_t t_fine) {
  if (t_coarse < 2 || t_fine < t_coarse + 2)
    throw std::invalid_argument(
        "theoretical_increment_variances: invalid fidelities");
  const double tc = static_cast<double>(t_coarse);
  const double tf = static_cast<double>(t_fine);
  const double mu22 = m.mu2 * m.mu2;
  IncrementVariances out;
  out.var_dy = m.mu2 * (1.0 / tc - 1.0 / tf);
  out.var_dv = (1.0 / tc - 1.0 / tf) * (m.mu4 - 3.0 * mu22) +
               2.0 * (1.0 / (tc - 1.0) - 1.0 / (tf - 1.0)) * mu22;
  return out;
}

/// Covariance of the unbiased sample variances V(t_fine) and V(t_coarse)
/// when the coarse sample is a prefix of the fine one.
inline double cov_overlap(const MomentSet& m, std::uint32_t t_coarse,
                          std::uint32_t t_fine) {
  if (t_coarse < 2 || t_fine <= t_coarse)
    throw std::invalid_argument("cov_overlap: need 2 <= t_coarse < t_fine");
  const double tc = static_cast<double>(t_coarse);
  const double tf = static_cast<double>(t_fine);
  const double var_vc = theoretical_single_variances(m, t_coarse).var_v;
  return (tc - 1.0) / (tf - 1.0) * var_vc +
         (tf - tc) / (tc * tf * (tf - 1.0)) * (m.mu4 - 3.0 * m.mu2 * m.mu2);
}

struct MlmcVariances {
  double e_s2_y = 0.0;
  double e_s2_v = 0.0;
};

/// Expected empirical variances of the multilevel estimators for a given
/// ladder and (possibly continuous) allocation.
inline MlmcVariances theoretical_mlmc_variances(const MomentSet& m,
                                                const FidelityLadder& ladder,
                                                std::span<const double> ms) {
  ladder.validate();
  if (ms.size() != ladder.level_count())
    throw std::invalid_argument(
        "theoretical_mlmc_variances: allocation size mismatch");
  for (double v : ms)
    if (!(v > 0.0))
      throw std::invalid_argument(
          "theoretical_mlmc_variances: allocation must be positive");

  const auto base = theoretical_single_variances(m, ladder.ts[0]);
  MlmcVariances out;
  out.e_s2_y = base.var_y / ms[0];
  out.e_s2_v = base.var_v / ms[0];
  for (std::size_t l = 1; l < ladder.level_count(); ++l) {
    const auto inc =
        theoretical_increment_variances(m, ladder.ts[l - 1], ladder.ts[l]);
    out.e_s2_y += inc.var_dy / ms[l];
    out.e_s2_v += inc.var_dv / ms[l];
  }
  return out;
}

}  // namespace mlmcdrop
