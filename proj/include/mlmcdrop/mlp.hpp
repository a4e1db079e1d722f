#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlmcdrop/evaluator.hpp"
#include "mlmcdrop/stream.hpp"

namespace mlmcdrop {

enum class Activation { tanh, relu };

/// Architecture of a feedforward MLP evaluated with dropout kept active.
/// layer_widths = (input, hidden..., output); dropout_layer_flags has one
/// entry per hidden layer and masks are applied to the activated output of
/// the flagged layer.
struct MlpSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::tanh;
  std::vector<std::uint8_t> dropout_layer_flags;
  double p_drop = 0.1;

  std::size_t hidden_count() const {
    return layer_widths.size() >= 2 ? layer_widths.size() - 2 : 0;
  }
  std::size_t affine_count() const {
    return layer_widths.empty() ? 0 : layer_widths.size() - 1;
  }

  void validate() const {
    if (layer_widths.size() < 2)
      throw std::invalid_argument("mlp spec: need input and output widths");
    for (std::size_t w : layer_widths)
      if (w == 0) throw std::invalid_argument("mlp spec: zero layer width");
    if (dropout_layer_flags.size() != hidden_count())
      throw std::invalid_argument(
          "mlp spec: dropout_layer_flags must have one entry per hidden layer");
    bool any = false;
    for (std::uint8_t f : dropout_layer_flags) any = any || (f != 0);
    if (!any)
      throw std::invalid_argument(
          "mlp spec: at least one dropout layer required");
    if (!(p_drop > 0.0 && p_drop < 1.0))
      throw std::invalid_argument("mlp spec: p_drop must lie in (0,1)");
  }
};

/// Trained parameters, shapes fixed by the spec. weights[k] is row-major
/// with layer_widths[k+1] rows and layer_widths[k] columns.
struct MlpWeights {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  void validate_shapes(const MlpSpec& spec) const {
    if (weights.size() != spec.affine_count() ||
        biases.size() != spec.affine_count())
      throw std::invalid_argument("mlp weights: layer count mismatch");
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const std::size_t rows = spec.layer_widths[k + 1];
      const std::size_t cols = spec.layer_widths[k];
      if (weights[k].size() != rows * cols)
        throw std::invalid_argument("mlp weights: W" + std::to_string(k) +
                                    " shape mismatch");
      if (biases[k].size() != rows)
        throw std::invalid_argument("mlp weights: b" + std::to_string(k) +
                                    " shape mismatch");
    }
  }

  void validate_against(const MlpSpec& spec) const {
    validate_shapes(spec);
    for (std::size_t k = 0; k < weights.size(); ++k) {
      for (double v : weights[k])
        if (!std::isfinite(v))
          throw std::invalid_argument("mlp weights: non-finite entry");
      for (double v : biases[k])
        if (!std::isfinite(v))
          throw std::invalid_argument("mlp weights: non-finite entry");
    }
  }
};

/// Bernoulli(1 - p_drop) mask of the given width. Deterministic in
/// (key, substream); entries are independent across positions.
inline std::vector<std::uint8_t> draw_mask(std::size_t width, double p_drop,
                                           const StreamKey& key,
                                           std::uint64_t substream = 0) {
  if (!(p_drop > 0.0 && p_drop < 1.0))
    throw std::invalid_argument("draw_mask: p_drop must lie in (0,1)");
  CounterRng rng(key.with_lane(Lane::mask), substream);
  std::vector<std::uint8_t> mask(width);
  for (std::size_t j = 0; j < width; ++j)
    mask[j] = rng.next_unit() > p_drop ? 1 : 0;
  return mask;
}

namespace detail {

inline double activate(Activation a, double v) {
  return a == Activation::tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
}

inline void affine(std::span<const double> w, std::span<const double> b,
                   std::span<const double> in, std::span<double> out) {
  const std::size_t rows = b.size();
  const std::size_t cols = in.size();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* wr = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * in[c];
    out[r] = acc;
  }
}

template <bool WithDropout>
void forward_impl(const MlpSpec& spec, const MlpWeights& wts,
                  std::span<const double> x, const StreamKey& key,
                  std::span<double> out) {
  wts.validate_shapes(spec);
  if (x.size() != spec.layer_widths.front())
    throw std::invalid_argument("forward: input size mismatch");
  if (out.size() != spec.layer_widths.back())
    throw std::invalid_argument("forward: output size mismatch");
  if (WithDropout && !(spec.p_drop > 0.0 && spec.p_drop < 1.0))
    throw std::invalid_argument("forward: p_drop must lie in (0,1)");

  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  const double keep_scale = 1.0 / (1.0 - spec.p_drop);
  for (std::size_t k = 0; k < spec.hidden_count(); ++k) {
    next.assign(spec.layer_widths[k + 1], 0.0);
    affine(wts.weights[k], wts.biases[k], cur, next);
    for (double& v : next) v = activate(spec.activation, v);
    if (WithDropout && spec.dropout_layer_flags[k]) {
      // Inverted dropout over the activated layer; same stream and draw
      // order as draw_mask(width, p_drop, key, k), so masks are bit-identical
      // to the standalone op.
      CounterRng rng(key.with_lane(Lane::mask), k);
      for (double& v : next)
        v = rng.next_unit() > spec.p_drop ? v * keep_scale : 0.0;
    }
    cur.swap(next);
  }
  const std::size_t last = spec.affine_count() - 1;
  affine(wts.weights[last], wts.biases[last], cur, out);
}

}  // namespace detail

/// One stochastic forward pass; each flagged hidden layer draws a fresh mask
/// from a per-layer substream of the pass key.
inline void forward_dropout(const MlpSpec& spec, const MlpWeights& wts,
                            std::span<const double> x, const StreamKey& key,
                            std::span<double> out) {
  detail::forward_impl<true>(spec, wts, x, key, out);
}

/// Forward pass with dropout disabled (all units kept, no rescale).
inline void forward_deterministic(const MlpSpec& spec, const MlpWeights& wts,
                                  std::span<const double> x,
                                  std::span<double> out) {
  detail::forward_impl<false>(spec, wts, x, StreamKey{}, out);
}

/// Untrained weights drawn from a seeded stream, scaled by 1/sqrt(fan_in).
inline MlpWeights random_weights(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  MlpWeights w;
  w.weights.resize(spec.affine_count());
  w.biases.resize(spec.affine_count());
  for (std::size_t k = 0; k < spec.affine_count(); ++k) {
    const std::size_t rows = spec.layer_widths[k + 1];
    const std::size_t cols = spec.layer_widths[k];
    CounterRng rng(StreamKey{seed, 0, 0, 0, Lane::noise}, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    w.weights[k].resize(rows * cols);
    for (double& v : w.weights[k]) v = scale * (2.0 * rng.next_unit() - 1.0);
    w.biases[k].resize(rows);
    for (double& v : w.biases[k]) v = 0.1 * (2.0 * rng.next_unit() - 1.0);
  }
  return w;
}

// ---- weight file format ----------------------------------------------------
//
//   mlmcdrop-weights v1
//   layer_widths: 1 64 64 1
//   activation: tanh
//   dropout_flags: 1 1
//   p_drop: 0.1
//   W0: <widths[1]*widths[0] doubles, row-major>
//   b0: <widths[1] doubles>
//   ...
//
// Whitespace separated decimal values; shapes must agree with the header.

inline void save_weights(std::ostream& os, const MlpSpec& spec,
                         const MlpWeights& wts) {
  spec.validate();
  wts.validate_against(spec);
  os << "mlmcdrop-weights v1\n";
  os << "layer_widths:";
  for (std::size_t w : spec.layer_widths) os << ' ' << w;
  os << "\nactivation: "
     << (spec.activation == Activation::tanh ? "tanh" : "relu");
  os << "\ndropout_flags:";
  for (std::uint8_t f : spec.dropout_layer_flags) os << ' ' << int(f);
  os.precision(17);
  os << "\np_drop: " << spec.p_drop << '\n';
  for (std::size_t k = 0; k < spec.affine_count(); ++k) {
    os << 'W' << k << ':';
    for (double v : wts.weights[k]) os << ' ' << v;
    os << '\n' << 'b' << k << ':';
    for (double v : wts.biases[k]) os << ' ' << v;
    os << '\n';
  }
}

namespace detail {

inline std::string expect_label(std::istream& is, const std::string& what) {
  std::string tok;
  if (!(is >> tok) || tok != what)
    throw std::runtime_error("weight file: expected '" + what + "', got '" +
                             tok + "'");
  return tok;
}

}  // namespace detail

inline std::pair<MlpSpec, MlpWeights> load_weights(std::istream& is) {
  std::string magic, version;
  if (!(is >> magic >> version) || magic != "mlmcdrop-weights" ||
      version != "v1")
    throw std::runtime_error("weight file: bad header");

  MlpSpec spec;
  detail::expect_label(is, "layer_widths:");
  {
    std::string line;
    std::getline(is, line);
    std::istringstream ls(line);
    std::size_t w;
    while (ls >> w) spec.layer_widths.push_back(w);
  }
  if (spec.layer_widths.size() < 2)
    throw std::runtime_error("weight file: need at least two layer widths");

  detail::expect_label(is, "activation:");
  std::string act;
  is >> act;
  if (act == "tanh")
    spec.activation = Activation::tanh;
  else if (act == "relu")
    spec.activation = Activation::relu;
  else
    throw std::runtime_error("weight file: unknown activation '" + act + "'");

  detail::expect_label(is, "dropout_flags:");
  {
    std::string line;
    std::getline(is, line);
    std::istringstream ls(line);
    int f;
    while (ls >> f) spec.dropout_layer_flags.push_back(f != 0 ? 1 : 0);
  }

  detail::expect_label(is, "p_drop:");
  if (!(is >> spec.p_drop))
    throw std::runtime_error("weight file: missing p_drop value");
  spec.validate();

  MlpWeights wts;
  wts.weights.resize(spec.affine_count());
  wts.biases.resize(spec.affine_count());
  for (std::size_t k = 0; k < spec.affine_count(); ++k) {
    const std::size_t rows = spec.layer_widths[k + 1];
    const std::size_t cols = spec.layer_widths[k];
    detail::expect_label(is, "W" + std::to_string(k) + ":");
    wts.weights[k].resize(rows * cols);
    for (double& v : wts.weights[k])
      if (!(is >> v))
        throw std::runtime_error("weight file: W" + std::to_string(k) +
                                 " has fewer entries than the header implies");
    detail::expect_label(is, "b" + std::to_string(k) + ":");
    wts.biases[k].resize(rows);
    for (double& v : wts.biases[k])
      if (!(is >> v))
        throw std::runtime_error("weight file: b" + std::to_string(k) +
                                 " has fewer entries than the header implies");
  }
  std::string trailing;
  if (is >> trailing)
    throw std::runtime_error("weight file: trailing data '" + trailing + "'");
  wts.validate_against(spec);
  return {spec, wts};
}

inline std::pair<MlpSpec, MlpWeights> load_weights_file(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open weight file: " + path);
  return load_weights(f);
}

class MlpEvaluator final : public StochasticEvaluator {
 public:
  MlpEvaluator(MlpSpec spec, MlpWeights weights)
      : spec_(std::move(spec)), weights_(std::move(weights)) {
    spec_.validate();
    weights_.validate_against(spec_);
  }

  std::size_t output_dim() const override { return spec_.layer_widths.back(); }

  void eval(std::span<const double> x, const StreamKey& key,
            std::span<double> out) const override {
    forward_dropout(spec_, weights_, x, key, out);
  }

  const MlpSpec& spec() const { return spec_; }
  const MlpWeights& weights() const { return weights_; }

 private:
  MlpSpec spec_;
  MlpWeights weights_;
};

}  // namespace mlmcdrop
