#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mlmcdrop/evaluator.hpp"
#include "mlmcdrop/stream.hpp"

namespace mlmcdrop {

/// Known central moments of a predictor's output distribution at one point.
struct MomentSet {
  double mu = 0.0;
  double mu2 = 0.0;
  double mu4 = 0.0;
};

enum class AnalyticKind {
  uniform_scaled_sine_u,    // (1+w) sin(pi x),      w ~ Unif(-delta/2, delta/2)
  uniform_scaled_sine_f,    // (1+w) pi^2 sin(pi x), w ~ Unif(-delta/2, delta/2)
  gaussian_location,        // mu + sigma Z,         Z ~ N(0,1)
  boundary_layer_noisefree  // exact boundary-layer solution, no randomness
};

struct AnalyticFamily {
  AnalyticKind kind = AnalyticKind::gaussian_location;
  double delta = 0.0;    // uniform noise width
  double mu = 0.0;       // gaussian location
  double sigma = 0.0;    // gaussian standard deviation
  double epsilon = 1.0;  // boundary-layer parameter

  void validate() const {
    switch (kind) {
      case AnalyticKind::uniform_scaled_sine_u:
      case AnalyticKind::uniform_scaled_sine_f:
        if (!(delta > 0.0))
          throw std::invalid_argument("analytic family: delta must be > 0");
        break;
      case AnalyticKind::gaussian_location:
        if (!(sigma >= 0.0))
          throw std::invalid_argument("analytic family: sigma must be >= 0");
        break;
      case AnalyticKind::boundary_layer_noisefree:
        if (!(epsilon > 0.0))
          throw std::invalid_argument("analytic family: epsilon must be > 0");
        break;
    }
  }
};

/// Solution of u - eps^2 u'' = 1 on (0,1) with u(0)=u(1)=0. Evaluated with
/// all exponents nonpositive so small eps cannot overflow.
inline double exact_boundary_layer(double x, double epsilon) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("exact_boundary_layer: epsilon must be > 0");
  const double a = std::exp((x - 1.0) / epsilon);
  const double b = std::exp(-x / epsilon);
  const double d = std::exp(-1.0 / epsilon);
  return 1.0 - (a + b) / (d + 1.0);
}

/// One draw from the family at x. The noise realisation is a pure function
/// of the key's noise lane.
inline double eval_analytic(const AnalyticFamily& family, double x,
                            const StreamKey& key) {
  family.validate();
  CounterRng rng(key.with_lane(Lane::noise));
  switch (family.kind) {
    case AnalyticKind::uniform_scaled_sine_u: {
      const double w = family.delta * (rng.next_unit() - 0.5);
      return (1.0 + w) * std::sin(std::numbers::pi * x);
    }
    case AnalyticKind::uniform_scaled_sine_f: {
      const double w = family.delta * (rng.next_unit() - 0.5);
      const double pi2 = std::numbers::pi * std::numbers::pi;
      return (1.0 + w) * pi2 * std::sin(std::numbers::pi * x);
    }
    case AnalyticKind::gaussian_location:
      return family.mu + family.sigma * rng.next_gaussian();
    case AnalyticKind::boundary_layer_noisefree:
      return exact_boundary_layer(x, family.epsilon);
  }
  throw std::logic_error("eval_analytic: unknown kind");
}

/// Exact (mu, mu2, mu4) of the family at x.
/// Unif(-d/2, d/2) has E[w^2] = d^2/12 and E[w^4] = d^4/80.
inline MomentSet analytic_moments(const AnalyticFamily& family, double x) {
  family.validate();
  switch (family.kind) {
    case AnalyticKind::uniform_scaled_sine_u: {
      const double s = std::sin(std::numbers::pi * x);
      const double d2 = family.delta * family.delta;
      return {s, d2 / 12.0 * s * s, d2 * d2 / 80.0 * s * s * s * s};
    }
    case AnalyticKind::uniform_scaled_sine_f: {
      const double pi2 = std::numbers::pi * std::numbers::pi;
      const double s = pi2 * std::sin(std::numbers::pi * x);
      const double d2 = family.delta * family.delta;
      return {s, d2 / 12.0 * s * s, d2 * d2 / 80.0 * s * s * s * s};
    }
    case AnalyticKind::gaussian_location: {
      const double s2 = family.sigma * family.sigma;
      return {family.mu, s2, 3.0 * s2 * s2};
    }
    case AnalyticKind::boundary_layer_noisefree:
      return {exact_boundary_layer(x, family.epsilon), 0.0, 0.0};
  }
  throw std::logic_error("analytic_moments: unknown kind");
}

class AnalyticEvaluator final : public StochasticEvaluator {
 public:
  explicit AnalyticEvaluator(AnalyticFamily family) : family_(family) {
    family_.validate();
  }

  std::size_t output_dim() const override { return 1; }

  void eval(std::span<const double> x, const StreamKey& key,
            std::span<double> out) const override {
    out[0] = eval_analytic(family_, x[0], key);
  }

  const AnalyticFamily& family() const { return family_; }

 private:
  AnalyticFamily family_;
};

}  // namespace mlmcdrop
