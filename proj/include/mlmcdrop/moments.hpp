#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mlmcdrop/analytic.hpp"
#include "mlmcdrop/evaluator.hpp"
#include "mlmcdrop/stream.hpp"
#include "mlmcdrop/welford.hpp"

namespace mlmcdrop {

/// Sample mean and unbiased sample variance of the evaluator output over t
/// inner draws, per output component.
struct SingleFidelityEstimate {
  std::vector<double> y;
  std::vector<double> v;
  std::uint32_t t = 0;
  std::uint64_t evals = 0;
};

/// Outer replication of the single-fidelity estimators: means over m
/// replicates and unbiased sample variances across replicates.
struct OuterReplicates {
  std::vector<double> y_bar;
  std::vector<double> v_bar;
  std::vector<double> s2_y;
  std::vector<double> s2_v;
  std::uint32_t m = 0;
  std::uint32_t t = 0;
  std::uint64_t evals = 0;
};

/// Mean of t draws with inner indices 1..t under the key, and their unbiased
/// sample variance. Draw t' of this run is the exact value any coupled
/// routine obtains for the same (key, inner index).
inline SingleFidelityEstimate estimate_single(const StochasticEvaluator& ev,
                                              std::span<const double> x,
                                              std::uint32_t t,
                                              const StreamKey& key) {
  if (t < 2)
    throw std::invalid_argument(
        "estimate_single: sample variance needs t >= 2");
  const std::size_t dim = ev.output_dim();
  MeanVarVec acc(dim);
  std::vector<double> draw(dim);
  for (std::uint32_t i = 1; i <= t; ++i) {
    ev.eval(x, key.with_inner(i), draw);
    acc.add(draw);
  }
  SingleFidelityEstimate est;
  est.y = acc.means();
  est.v = acc.variances();
  est.t = t;
  est.evals = t;
  return est;
}

/// m independent replicates of estimate_single with replicate indices 1..m
/// at level 0 under the seed. Total cost is m*t forward passes.
inline OuterReplicates outer_replicate(const StochasticEvaluator& ev,
                                       std::span<const double> x,
                                       std::uint32_t m, std::uint32_t t,
                                       std::uint64_t seed) {
  if (m < 2)
    throw std::invalid_argument("outer_replicate: needs m >= 2");
  const std::size_t dim = ev.output_dim();
  MeanVarVec acc_y(dim);
  MeanVarVec acc_v(dim);
  for (std::uint32_t r = 1; r <= m; ++r) {
    const StreamKey key{seed, r, 0, 0, Lane::noise};
    const auto est = estimate_single(ev, x, t, key);
    acc_y.add(est.y);
    acc_v.add(est.v);
  }
  OuterReplicates out;
  out.y_bar = acc_y.means();
  out.v_bar = acc_v.means();
  out.s2_y = acc_y.variances();
  out.s2_v = acc_v.variances();
  out.m = m;
  out.t = t;
  out.evals = static_cast<std::uint64_t>(m) * t;
  return out;
}

struct SingleVariances {
  double var_y = 0.0;
  double var_v = 0.0;
};

/// Sampling variances of the single-fidelity estimators:
///   Var[Y(T)] = mu2 / T
///   Var[V(T)] = (mu4 - ((T-3)/(T-1)) mu2^2) / T
inline SingleVariances theoretical_single_variances(const MomentSet& m,
                                                    std::uint32_t t) {
  if (t < 2)
    throw std::invalid_argument(
        "theoretical_single_variances: needs t >= 2");
  const double td = static_cast<double>(t);
  SingleVariances out;
  out.var_y = m.mu2 / td;
  out.var_v = (m.mu4 - (td - 3.0) / (td - 1.0) * m.mu2 * m.mu2) / td;
  return out;
}

}  // namespace mlmcdrop
