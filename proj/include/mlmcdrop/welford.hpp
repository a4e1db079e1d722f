#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace mlmcdrop {

/// One-pass mean and sum-of-squared-deviations accumulator. Feeding the same
/// values in the same order always reproduces the same state bit for bit,
/// which is what ties coupled prefixes to their uncoupled counterparts.
class MeanVar {
 public:
  void add(double value) {
    ++n_;
    const double d = value - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (value - mean_);
  }

  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double sum_sq_dev() const { return m2_; }

  /// Unbiased sample variance; requires at least two values.
  double variance() const {
    if (n_ < 2) throw std::logic_error("MeanVar: variance needs n >= 2");
    return m2_ / static_cast<double>(n_ - 1);
  }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Componentwise MeanVar over fixed-dimension samples.
class MeanVarVec {
 public:
  explicit MeanVarVec(std::size_t dim) : acc_(dim) {}

  void add(std::span<const double> values) {
    if (values.size() != acc_.size())
      throw std::invalid_argument("MeanVarVec: dimension mismatch");
    for (std::size_t c = 0; c < acc_.size(); ++c) acc_[c].add(values[c]);
  }

  std::size_t dim() const { return acc_.size(); }
  std::uint64_t count() const { return acc_.empty() ? 0 : acc_[0].count(); }

  std::vector<double> means() const {
    std::vector<double> out(acc_.size());
    for (std::size_t c = 0; c < acc_.size(); ++c) out[c] = acc_[c].mean();
    return out;
  }

  std::vector<double> variances() const {
    std::vector<double> out(acc_.size());
    for (std::size_t c = 0; c < acc_.size(); ++c) out[c] = acc_[c].variance();
    return out;
  }

 private:
  std::vector<MeanVar> acc_;
};

}  // namespace mlmcdrop
