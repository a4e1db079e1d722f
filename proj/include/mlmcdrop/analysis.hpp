#pragma once

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mlmcdrop/allocation.hpp"
#include "mlmcdrop/evaluator.hpp"
#include "mlmcdrop/mlmc.hpp"
#include "mlmcdrop/moments.hpp"
#include "mlmcdrop/stream.hpp"

namespace mlmcdrop {

/// Values on a uniform grid. For a single-point grid the quadrature weight
/// is 1, so the norm degenerates to the absolute value at that point.
struct GridFunction {
  std::vector<double> xs;
  std::vector<double> values;

  double dx() const {
    if (xs.size() < 2) return 1.0;
    return xs[1] - xs[0];
  }

  void validate() const {
    if (xs.empty() || xs.size() != values.size())
      throw std::invalid_argument("grid function: size mismatch");
    if (xs.size() < 2) return;
    const double step = xs[1] - xs[0];
    if (!(step > 0.0))
      throw std::invalid_argument("grid function: xs must increase");
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const double d = xs[i] - xs[i - 1];
      if (std::abs(d - step) > 1e-12 * std::max(std::abs(step), 1.0))
        throw std::invalid_argument("grid function: nonuniform spacing");
    }
  }
};

/// n >= 2 gives the inclusive uniform grid over [lo, hi]; n == 1 evaluates
/// at the midpoint with unit weight.
inline std::vector<double> make_uniform_grid(std::size_t n, double lo = 0.0,
                                             double hi = 1.0) {
  if (n == 0) throw std::invalid_argument("grid: need at least one point");
  if (!(hi >= lo)) throw std::invalid_argument("grid: hi < lo");
  if (n == 1) return {0.5 * (lo + hi)};
  std::vector<double> xs(n);
  const double dx = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = lo + dx * static_cast<double>(i);
  return xs;
}

/// Discrete L1 proxy: every grid value weighted by the spacing.
inline double l1_norm(const GridFunction& g) {
  g.validate();
  double acc = 0.0;
  for (double v : g.values) acc += std::abs(v);
  return acc * g.dx();
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double confidence = 0.99;
};

/// Least-squares fit of log y against log t with a t-distribution confidence
/// interval for the slope (n - 2 degrees of freedom).
inline SlopeFit loglog_slope_fit(std::span<const double> ts,
                                 std::span<const double> ys,
                                 double confidence = 0.99) {
  if (ts.size() != ys.size() || ts.size() < 3)
    throw std::invalid_argument("slope fit: need at least 3 points");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("slope fit: confidence must be in (0,1)");
  const std::size_t n = ts.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ts[i] > 0.0) || !(ys[i] > 0.0))
      throw std::invalid_argument("slope fit: inputs must be positive");
    lx[i] = std::log(ts[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0))
    throw std::invalid_argument("slope fit: degenerate abscissae");

  SlopeFit fit;
  fit.confidence = confidence;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    rss += r * r;
  }
  const double dof = static_cast<double>(n - 2);
  const double se = std::sqrt(std::max(rss, 0.0) / dof / sxx);
  const boost::math::students_t dist(dof);
  const double tq =
      boost::math::quantile(dist, 1.0 - 0.5 * (1.0 - confidence));
  fit.ci_lower = fit.slope - tq * se;
  fit.ci_upper = fit.slope + tq * se;
  return fit;
}

enum class OracleStatistic { y, v, dy, dv };

struct OracleParams {
  std::uint32_t t = 2;         // fidelity for y / v
  std::uint32_t t_coarse = 0;  // fidelities for dy / dv
  std::uint32_t t_fine = 0;
};

struct OracleResult {
  double variance = 0.0;
  double std_error = 0.0;  // jackknife standard error of the variance
};

/// Brute-force sampling variance of one estimator statistic over fresh
/// replicate streams. Backs every closed-form variance identity with an
/// estimate that shares no code path with the formulas.
inline OracleResult empirical_variance_oracle(const StochasticEvaluator& ev,
                                              double x, OracleStatistic stat,
                                              const OracleParams& params,
                                              std::uint32_t replications,
                                              std::uint64_t seed) {
  if (replications < 100)
    throw std::invalid_argument("variance oracle: needs R >= 100");
  std::vector<double> z(replications);
  const std::span<const double> xs{&x, 1};
  for (std::uint32_t r = 1; r <= replications; ++r) {
    const StreamKey key{seed, r, 0, 0, Lane::noise};
    switch (stat) {
      case OracleStatistic::y:
        z[r - 1] = estimate_single(ev, xs, params.t, key).y[0];
        break;
      case OracleStatistic::v:
        z[r - 1] = estimate_single(ev, xs, params.t, key).v[0];
        break;
      case OracleStatistic::dy: {
        const auto pair =
            coupled_pair(ev, xs, params.t_coarse, params.t_fine, key);
        z[r - 1] = pair.fine.y[0] - pair.coarse.y[0];
        break;
      }
      case OracleStatistic::dv: {
        const auto pair =
            coupled_pair(ev, xs, params.t_coarse, params.t_fine, key);
        z[r - 1] = pair.fine.v[0] - pair.coarse.v[0];
        break;
      }
      default:
        throw std::invalid_argument("variance oracle: unknown statistic");
    }
  }

  const double n = static_cast<double>(replications);
  double s1 = 0.0, s2 = 0.0;
  for (double v : z) {
    s1 += v;
    s2 += v * v;
  }
  OracleResult out;
  out.variance = (s2 - s1 * s1 / n) / (n - 1.0);

  // jackknife over leave-one-out variances
  const double nn = n - 1.0;
  double jsum = 0.0, jsq = 0.0;
  std::vector<double> loo(replications);
  for (std::uint32_t i = 0; i < replications; ++i) {
    const double s1i = s1 - z[i];
    const double s2i = s2 - z[i] * z[i];
    loo[i] = (s2i - s1i * s1i / nn) / (nn - 1.0);
    jsum += loo[i];
  }
  const double jmean = jsum / n;
  for (double v : loo) jsq += (v - jmean) * (v - jmean);
  out.std_error = std::sqrt((n - 1.0) / n * jsq);
  return out;
}

/// Rate study: for each fidelity in t_list, outer-replicate at every grid
/// point, take L1 norms of the empirical estimator variances, and fit
/// log-log slopes on the seed-averaged norms. Per-component throughout.
struct RateStudy {
  std::vector<std::uint32_t> ts;
  // [seed][fidelity][component]
  std::vector<std::vector<std::vector<double>>> norm_s2_y;
  std::vector<std::vector<std::vector<double>>> norm_s2_v;
  // [fidelity][component]
  std::vector<std::vector<double>> avg_norm_s2_y;
  std::vector<std::vector<double>> avg_norm_s2_v;
  // [component]; empty optionals when a norm sequence is degenerate
  std::vector<std::optional<SlopeFit>> fit_y;
  std::vector<std::optional<SlopeFit>> fit_v;
  bool degenerate = false;
};

inline RateStudy rate_study(const StochasticEvaluator& ev,
                            std::span<const double> xs,
                            std::span<const std::uint32_t> t_list,
                            std::uint32_t m_outer,
                            std::span<const std::uint64_t> seeds,
                            double confidence = 0.99) {
  if (t_list.empty()) throw std::invalid_argument("rate study: empty t list");
  if (m_outer < 2) throw std::invalid_argument("rate study: m_outer >= 2");
  if (seeds.empty()) throw std::invalid_argument("rate study: no seeds");
  for (std::uint32_t t : t_list)
    if (t < 2) throw std::invalid_argument("rate study: every t must be >= 2");

  const std::size_t dim = ev.output_dim();
  RateStudy study;
  study.ts.assign(t_list.begin(), t_list.end());
  study.norm_s2_y.resize(seeds.size());
  study.norm_s2_v.resize(seeds.size());

  for (std::size_t s = 0; s < seeds.size(); ++s) {
    study.norm_s2_y[s].resize(t_list.size());
    study.norm_s2_v[s].resize(t_list.size());
    for (std::size_t k = 0; k < t_list.size(); ++k) {
      std::vector<GridFunction> gy(dim), gv(dim);
      for (std::size_t c = 0; c < dim; ++c) {
        gy[c].xs.assign(xs.begin(), xs.end());
        gv[c].xs.assign(xs.begin(), xs.end());
        gy[c].values.resize(xs.size());
        gv[c].values.resize(xs.size());
      }
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::uint64_t point_seed = derive_seed(seeds[s], i, k);
        const auto rep =
            outer_replicate(ev, {&xs[i], 1}, m_outer, t_list[k], point_seed);
        for (std::size_t c = 0; c < dim; ++c) {
          gy[c].values[i] = rep.s2_y[c];
          gv[c].values[i] = rep.s2_v[c];
        }
      }
      study.norm_s2_y[s][k].resize(dim);
      study.norm_s2_v[s][k].resize(dim);
      for (std::size_t c = 0; c < dim; ++c) {
        study.norm_s2_y[s][k][c] = l1_norm(gy[c]);
        study.norm_s2_v[s][k][c] = l1_norm(gv[c]);
      }
    }
  }

  study.avg_norm_s2_y.assign(t_list.size(), std::vector<double>(dim, 0.0));
  study.avg_norm_s2_v.assign(t_list.size(), std::vector<double>(dim, 0.0));
  for (std::size_t s = 0; s < seeds.size(); ++s)
    for (std::size_t k = 0; k < t_list.size(); ++k)
      for (std::size_t c = 0; c < dim; ++c) {
        study.avg_norm_s2_y[k][c] +=
            study.norm_s2_y[s][k][c] / static_cast<double>(seeds.size());
        study.avg_norm_s2_v[k][c] +=
            study.norm_s2_v[s][k][c] / static_cast<double>(seeds.size());
      }

  std::vector<double> td(t_list.size());
  for (std::size_t k = 0; k < t_list.size(); ++k)
    td[k] = static_cast<double>(t_list[k]);
  study.fit_y.resize(dim);
  study.fit_v.resize(dim);
  for (std::size_t c = 0; c < dim; ++c) {
    std::vector<double> ny(t_list.size()), nv(t_list.size());
    bool ok_y = t_list.size() >= 3, ok_v = t_list.size() >= 3;
    for (std::size_t k = 0; k < t_list.size(); ++k) {
      ny[k] = study.avg_norm_s2_y[k][c];
      nv[k] = study.avg_norm_s2_v[k][c];
      ok_y = ok_y && ny[k] > 0.0;
      ok_v = ok_v && nv[k] > 0.0;
    }
    if (ok_y) study.fit_y[c] = loglog_slope_fit(td, ny, confidence);
    if (ok_v) study.fit_v[c] = loglog_slope_fit(td, nv, confidence);
    study.degenerate = study.degenerate || !ok_y || !ok_v;
  }
  return study;
}

/// Fixed-cost surface: one row per feasible integer allocation with
/// seed-averaged L1 norms of the empirical MLMC variances, plus every
/// empirical minimiser (enumeration order, which is lexicographic) and the
/// continuous optima for side-by-side comparison.
struct SurfaceRow {
  std::vector<std::uint64_t> ms;
  std::vector<double> norm_s2_y;  // per component
  std::vector<double> norm_s2_v;
};

struct VarianceSurface {
  std::vector<SurfaceRow> rows;
  std::vector<std::vector<std::size_t>> argmin_y;  // [component] -> row ids
  std::vector<std::vector<std::size_t>> argmin_v;
  Allocation continuous_mean;
  Allocation continuous_variance;
};

inline VarianceSurface variance_surface(const StochasticEvaluator& ev,
                                        std::span<const double> xs,
                                        const FidelityLadder& ladder,
                                        std::uint64_t budget,
                                        CostModelKind kind,
                                        std::uint32_t min_m,
                                        std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("surface: no seeds");
  const auto allocations = enumerate_fixed_cost(ladder, budget, kind, min_m);
  if (allocations.empty())
    throw std::invalid_argument("surface: infeasible budget");
  const std::size_t dim = ev.output_dim();

  VarianceSurface surface;
  surface.continuous_mean =
      allocate_mean(ladder, static_cast<double>(budget), kind);
  surface.continuous_variance =
      allocate_variance(ladder, static_cast<double>(budget), kind);
  surface.rows.reserve(allocations.size());

  for (const Allocation& alloc : allocations) {
    const auto ms = alloc.counts();
    SurfaceRow row;
    row.ms = ms;
    row.norm_s2_y.assign(dim, 0.0);
    row.norm_s2_v.assign(dim, 0.0);
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      std::vector<GridFunction> gy(dim), gv(dim);
      for (std::size_t c = 0; c < dim; ++c) {
        gy[c].xs.assign(xs.begin(), xs.end());
        gv[c].xs.assign(xs.begin(), xs.end());
        gy[c].values.resize(xs.size());
        gv[c].values.resize(xs.size());
      }
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto est = mlmc_estimate(ev, {&xs[i], 1}, ladder, ms,
                                       derive_seed(seeds[s], i));
        for (std::size_t c = 0; c < dim; ++c) {
          gy[c].values[i] = est.s2_y[c];
          gv[c].values[i] = est.s2_v[c];
        }
      }
      for (std::size_t c = 0; c < dim; ++c) {
        row.norm_s2_y[c] += l1_norm(gy[c]) / static_cast<double>(seeds.size());
        row.norm_s2_v[c] += l1_norm(gv[c]) / static_cast<double>(seeds.size());
      }
    }
    surface.rows.push_back(std::move(row));
  }

  surface.argmin_y.resize(dim);
  surface.argmin_v.resize(dim);
  for (std::size_t c = 0; c < dim; ++c) {
    double best_y = surface.rows[0].norm_s2_y[c];
    double best_v = surface.rows[0].norm_s2_v[c];
    for (const SurfaceRow& row : surface.rows) {
      best_y = std::min(best_y, row.norm_s2_y[c]);
      best_v = std::min(best_v, row.norm_s2_v[c]);
    }
    for (std::size_t r = 0; r < surface.rows.size(); ++r) {
      if (surface.rows[r].norm_s2_y[c] == best_y)
        surface.argmin_y[c].push_back(r);
      if (surface.rows[r].norm_s2_v[c] == best_v)
        surface.argmin_v[c].push_back(r);
    }
  }
  return surface;
}

}  // namespace mlmcdrop
