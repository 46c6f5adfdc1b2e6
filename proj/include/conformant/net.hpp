#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "conformant/bounds.hpp"
#include "conformant/types.hpp"

// Trainable MLP (tanh hidden layers, linear output) with explicit
// backpropagation and Adam, plus the constraining wrapper in both its
// sigmoid (training) and projection (analysis) forms.
namespace conformant {

struct Mlp {
  std::vector<Mat> weights;  // weights[l]: out_l x in_l
  std::vector<Vec> biases;
  // Fixed affine input standardization (x - shift) / scale applied before
  // the first layer; set from training data, not trained.
  Vec input_shift;
  Vec input_scale;

  int layer_count() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  std::vector<int> hidden_sizes() const;

  void set_input_standardization(const Mat& inputs);
};

/// Glorot-uniform weights, zero biases, seeded.
Mlp make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
             std::uint64_t seed);

enum class OutputMode {
  Raw,        // plain MLP output
  Wrapped,    // lo + sigmoid(raw) * (hi - lo), per cell
  Projected,  // raw clamped into the cell interval
};

std::string to_string(OutputMode mode);
OutputMode output_mode_from_string(const std::string& name);

/// Activations and wrapper state retained by forward for the backward pass.
struct ForwardCache {
  std::vector<Mat> activations;  // activations[0] = input, back() = raw output
  bool wrapped = false;
  Mat sigma;  // sigmoid(raw) when wrapped
  Mat lo;     // per-sample interval bounds when wrapped
  Mat hi;
};

/// Raw MLP forward over sample columns.
Mat forward(const Mlp& net, const Mat& inputs, ForwardCache* cache = nullptr);

/// Sigmoid-wrapped forward: every output lies strictly inside its cell's
/// interval for any parameter setting.
Mat forward_wrapped(const Mlp& net, const ConstraintMap& cmap, const Mat& inputs,
                    ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  static Gradients zeros_like(const Mlp& net);
  void accumulate(const Gradients& other);
};

/// Exact parameter gradients of sum_i grad_output_i . output_i for the
/// forward pass that produced `cache` (raw or wrapped).
Gradients backward(const Mlp& net, const ForwardCache& cache, const Mat& grad_output);

/// Per-dimension clamp of values (columns) into [lo, hi].
Vec project(const Vec& value, const Vec& lo, const Vec& hi);
Mat project_columns(const Mat& values, const Mat& lo, const Mat& hi);

struct AdamState {
  std::vector<Mat> m_weights, v_weights;
  std::vector<Vec> m_biases, v_biases;
  long step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(const Mlp& net, double lr);
};

/// One bias-corrected Adam update; deterministic.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

/// A trained network together with the constraint map it respects and the
/// output mode used when evaluating it.
struct ConstrainedModel {
  Mlp net;
  const ConstraintMap* cmap = nullptr;  // required unless mode == Raw
  OutputMode mode = OutputMode::Raw;

  Mat predict(const Mat& inputs) const;
};

std::function<Mat(const Mat&)> predictor(const ConstrainedModel& model);

}  // namespace conformant
