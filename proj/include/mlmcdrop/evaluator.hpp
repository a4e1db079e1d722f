#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "mlmcdrop/stream.hpp"

namespace mlmcdrop {

/// A randomised predictor: one call is one stochastic draw at input x, with
/// all randomness derived from the key. Implementations hold no mutable
/// state, so concurrent calls are safe and results depend only on arguments.
class StochasticEvaluator {
 public:
  virtual ~StochasticEvaluator() = default;

  virtual std::size_t output_dim() const = 0;

  /// Writes one draw into out (size output_dim()). A single call prices as
  /// one forward pass regardless of output dimension.
  virtual void eval(std::span<const double> x, const StreamKey& key,
                    std::span<double> out) const = 0;

  double eval_scalar(double x, const StreamKey& key) const {
    double out = 0.0;
    eval({&x, 1}, key, {&out, 1});
    return out;
  }
};

/// Wrapper counting forward passes; used to audit reported evaluation costs.
class CountingEvaluator final : public StochasticEvaluator {
 public:
  explicit CountingEvaluator(const StochasticEvaluator& inner)
      : inner_(&inner) {}

  std::size_t output_dim() const override { return inner_->output_dim(); }

  void eval(std::span<const double> x, const StreamKey& key,
            std::span<double> out) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    inner_->eval(x, key, out);
  }

  std::uint64_t count() const { return calls_.load(std::memory_order_relaxed); }
  void reset() { calls_.store(0, std::memory_order_relaxed); }

 private:
  const StochasticEvaluator* inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

}  // namespace mlmcdrop
