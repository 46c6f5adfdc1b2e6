#include "conformant/net.hpp"

#include <cmath>

#include "conformant/partition.hpp"
#include "conformant/rng.hpp"

namespace conformant {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::vector<int> Mlp::hidden_sizes() const {
  std::vector<int> sizes;
  for (int l = 0; l + 1 < layer_count(); ++l) {
    sizes.push_back(static_cast<int>(weights[l].rows()));
  }
  return sizes;
}

void Mlp::set_input_standardization(const Mat& inputs) {
  require(inputs.rows() == input_dim() && inputs.cols() > 0,
          "set_input_standardization: shape mismatch");
  input_shift = inputs.rowwise().mean();
  const Mat centered = inputs.colwise() - input_shift;
  input_scale = (centered.array().square().rowwise().mean()).sqrt().matrix();
  input_scale = input_scale.cwiseMax(1e-8);
}

Mlp make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
             std::uint64_t seed) {
  require(input_dim > 0 && output_dim > 0, "make_mlp: bad dimensions");
  Rng rng(substream_seed(seed, "init"));
  Mlp net;
  std::vector<int> sizes;
  sizes.push_back(input_dim);
  for (int h : hidden) {
    require(h > 0, "make_mlp: bad hidden size");
    sizes.push_back(h);
  }
  sizes.push_back(output_dim);
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Mat w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-limit, limit);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vec::Zero(fan_out));
  }
  net.input_shift = Vec::Zero(input_dim);
  net.input_scale = Vec::Ones(input_dim);
  return net;
}

std::string to_string(OutputMode mode) {
  switch (mode) {
    case OutputMode::Raw: return "raw";
    case OutputMode::Wrapped: return "wrapped";
    case OutputMode::Projected: return "projected";
  }
  return "unknown";
}

OutputMode output_mode_from_string(const std::string& name) {
  if (name == "raw") return OutputMode::Raw;
  if (name == "wrapped") return OutputMode::Wrapped;
  if (name == "projected") return OutputMode::Projected;
  throw ConfigError("unknown output mode: " + name);
}

Mat forward(const Mlp& net, const Mat& inputs, ForwardCache* cache) {
  require(inputs.rows() == net.input_dim(), "forward: input dimension mismatch");
  Mat a = inputs;
  if (net.input_shift.size() == inputs.rows()) {
    a = ((inputs.colwise() - net.input_shift).array().colwise() /
         net.input_scale.array())
            .matrix();
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(a);
    cache->wrapped = false;
  }
  for (int l = 0; l < net.layer_count(); ++l) {
    Mat z = (net.weights[l] * a).colwise() + net.biases[l];
    a = (l + 1 < net.layer_count()) ? z.array().tanh().matrix() : z;
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Mat forward_wrapped(const Mlp& net, const ConstraintMap& cmap, const Mat& inputs,
                    ForwardCache* cache) {
  require(cmap.input_dim() == inputs.rows(), "forward_wrapped: cmap dimension mismatch");
  ForwardCache local;
  ForwardCache* cc = cache ? cache : &local;
  const Mat raw = forward(net, inputs, cc);

  const Eigen::VectorXi cells = cells_of(cmap.memories, inputs);
  const int d = cmap.output_dim();
  const int n = static_cast<int>(inputs.cols());
  Mat lo(d, n), hi(d, n), out(d, n);
  for (int c = 0; c < n; ++c) {
    lo.col(c) = cmap.lower.row(cells[c]).transpose();
    hi.col(c) = cmap.upper.row(cells[c]).transpose();
  }
  Mat sig(d, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < d; ++r) sig(r, c) = sigmoid(raw(r, c));
  }
  out = lo + (sig.array() * (hi - lo).array()).matrix();
  cc->wrapped = true;
  cc->sigma = sig;
  cc->lo = lo;
  cc->hi = hi;
  return out;
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (const Mat& w : net.weights) g.weights.push_back(Mat::Zero(w.rows(), w.cols()));
  for (const Vec& b : net.biases) g.biases.push_back(Vec::Zero(b.size()));
  return g;
}

void Gradients::accumulate(const Gradients& other) {
  for (size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
}

Gradients backward(const Mlp& net, const ForwardCache& cache, const Mat& grad_output) {
  const int layers = net.layer_count();
  require(static_cast<int>(cache.activations.size()) == layers + 1,
          "backward: cache does not match network");

  // Chain through the wrapper: d out / d raw = (hi - lo) * sigma * (1 - sigma).
  // Cell membership is constant in the input, so lo/hi carry no gradient.
  Mat delta = grad_output;
  if (cache.wrapped) {
    delta = (grad_output.array() * (cache.hi - cache.lo).array() *
             cache.sigma.array() * (1.0 - cache.sigma.array()))
                .matrix();
  }

  Gradients grads;
  grads.weights.resize(layers);
  grads.biases.resize(layers);
  for (int l = layers - 1; l >= 0; --l) {
    grads.weights[l] = delta * cache.activations[l].transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      const Mat& act = cache.activations[l];  // tanh activations
      delta = ((net.weights[l].transpose() * delta).array() *
               (1.0 - act.array().square()))
                  .matrix();
    }
  }
  return grads;
}

Vec project(const Vec& value, const Vec& lo, const Vec& hi) {
  require(value.size() == lo.size() && value.size() == hi.size(),
          "project: dimension mismatch");
  return value.cwiseMax(lo).cwiseMin(hi);
}

Mat project_columns(const Mat& values, const Mat& lo, const Mat& hi) {
  return values.cwiseMax(lo).cwiseMin(hi);
}

AdamState AdamState::init(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (const Mat& w : net.weights) {
    s.m_weights.push_back(Mat::Zero(w.rows(), w.cols()));
    s.v_weights.push_back(Mat::Zero(w.rows(), w.cols()));
  }
  for (const Vec& b : net.biases) {
    s.m_biases.push_back(Vec::Zero(b.size()));
    s.v_biases.push_back(Vec::Zero(b.size()));
  }
  return s;
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
  require(grads.weights.size() == net.weights.size(), "adam_step: shape mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (size_t l = 0; l < net.weights.size(); ++l) {
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = (state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square()).matrix();
      param.array() -=
          state.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
    };
    update(net.weights[l], state.m_weights[l], state.v_weights[l], grads.weights[l]);
    update(net.biases[l], state.m_biases[l], state.v_biases[l], grads.biases[l]);
  }
}

Mat ConstrainedModel::predict(const Mat& inputs) const {
  switch (mode) {
    case OutputMode::Raw:
      return forward(net, inputs);
    case OutputMode::Wrapped:
      require(cmap != nullptr, "ConstrainedModel: wrapped mode needs a constraint map");
      return forward_wrapped(net, *cmap, inputs);
    case OutputMode::Projected: {
      require(cmap != nullptr, "ConstrainedModel: projected mode needs a constraint map");
      const Mat raw = forward(net, inputs);
      const Eigen::VectorXi cells = cells_of(cmap->memories, inputs);
      Mat lo(raw.rows(), raw.cols()), hi(raw.rows(), raw.cols());
      for (int c = 0; c < raw.cols(); ++c) {
        lo.col(c) = cmap->lower.row(cells[c]).transpose();
        hi.col(c) = cmap->upper.row(cells[c]).transpose();
      }
      return project_columns(raw, lo, hi);
    }
  }
  throw ConfigError("ConstrainedModel: unknown mode");
}

std::function<Mat(const Mat&)> predictor(const ConstrainedModel& model) {
  return [&model](const Mat& inputs) { return model.predict(inputs); };
}

}  // namespace conformant
