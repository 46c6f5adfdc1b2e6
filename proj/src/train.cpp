#include "conformant/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "conformant/partition.hpp"
#include "conformant/rng.hpp"

namespace conformant {

void update_multipliers(Multipliers& m, double mean_labeled, double mean_unlabeled) {
  require(mean_labeled >= 0.0 && mean_unlabeled >= 0.0,
          "update_multipliers: mean violations must be nonnegative");
  m.lambda1 += 2.0 * m.mu1 * mean_labeled;
  m.lambda2 += 2.0 * m.mu2 * mean_unlabeled;
  if (mean_labeled > 0.0 && m.prev_mean_labeled >= 0.0 &&
      mean_labeled > 0.9 * m.prev_mean_labeled) {
    m.mu1 = std::min(m.growth * m.mu1, m.mu_cap);
  }
  if (mean_unlabeled > 0.0 && m.prev_mean_unlabeled >= 0.0 &&
      mean_unlabeled > 0.9 * m.prev_mean_unlabeled) {
    m.mu2 = std::min(m.growth * m.mu2, m.mu_cap);
  }
  m.prev_mean_labeled = mean_labeled;
  m.prev_mean_unlabeled = mean_unlabeled;
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Vanilla: return "vanilla";
    case TrainMode::AugLagrangian: return "auglag";
    case TrainMode::Constrained: return "constrained";
  }
  return "unknown";
}

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "vanilla") return TrainMode::Vanilla;
  if (name == "auglag") return TrainMode::AugLagrangian;
  if (name == "constrained") return TrainMode::Constrained;
  throw ConfigError("unknown train mode: " + name);
}

namespace {

Mat predict_with_cache(const Mlp& net, OutputMode mode, const ConstraintMap* cmap,
                       const Mat& inputs, ForwardCache& cache) {
  if (mode == OutputMode::Wrapped) {
    require(cmap != nullptr, "predict: wrapped mode needs a constraint map");
    return forward_wrapped(net, *cmap, inputs, &cache);
  }
  return forward(net, inputs, &cache);
}

// Mean Euclidean-norm loss and its gradient w.r.t. the predictions.
double approx_loss_and_grad(const Mat& preds, const Mat& labels, Mat& grad_out) {
  const int n = static_cast<int>(preds.cols());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec diff = preds.col(i) - labels.col(i);
    const double norm = diff.norm();
    loss += norm;
    if (norm > 1e-12) grad_out.col(i) += diff / (norm * n);
  }
  return loss / n;
}

// Violation magnitudes of a batch and the corresponding prediction gradient
// contribution (lambda + 2 mu c) * subgradient(c). The infinity norm funnels
// each sample's gradient into its worst output dimension.
double violations_and_grad(const Mat& preds, const Mat& model_values, double delta,
                           double lambda, double mu, Mat& grad_out, double& sum_sq) {
  const int n = static_cast<int>(preds.cols());
  double sum = 0.0;
  sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    int worst = 0;
    double worst_abs = 0.0;
    for (int j = 0; j < preds.rows(); ++j) {
      const double a = std::abs(preds(j, i) - model_values(j, i));
      if (a > worst_abs) {
        worst_abs = a;
        worst = j;
      }
    }
    const double c = std::max(0.0, worst_abs - delta);
    sum += c;
    sum_sq += c * c;
    if (c > 0.0) {
      const double sign = preds(worst, i) >= model_values(worst, i) ? 1.0 : -1.0;
      grad_out(worst, i) += (lambda + 2.0 * mu * c) * sign / n;
    }
  }
  sum /= n;
  sum_sq /= n;
  return sum;
}

}  // namespace

LossResult mse_loss(const Mlp& net, OutputMode mode, const ConstraintMap* cmap,
                    const Mat& inputs, const Mat& labels) {
  require(inputs.cols() == labels.cols() && inputs.cols() > 0,
          "mse_loss: batch shape mismatch");
  ForwardCache cache;
  const Mat preds = predict_with_cache(net, mode, cmap, inputs, cache);
  Mat grad_out = Mat::Zero(preds.rows(), preds.cols());
  LossResult result;
  result.approx = approx_loss_and_grad(preds, labels, grad_out);
  result.loss = result.approx;
  result.grads = backward(net, cache, grad_out);
  return result;
}

double violation(const SystemSpec& model, const Vec& s, const Vec& f_value,
                 double delta) {
  return std::max(0.0, -conformance_margin(model, f_value, s, delta));
}

LossResult aug_lagrangian_loss(const Mlp& net, OutputMode mode,
                               const ConstraintMap* cmap, const Mat& labeled_inputs,
                               const Mat& labels, const Mat& unlabeled_inputs,
                               const SystemSpec& model, double delta,
                               const Multipliers& multipliers) {
  require(labeled_inputs.cols() == labels.cols() && labeled_inputs.cols() > 0,
          "aug_lagrangian_loss: labeled batch shape mismatch");
  LossResult result;

  ForwardCache cache_labeled;
  const Mat preds = predict_with_cache(net, mode, cmap, labeled_inputs, cache_labeled);
  const Mat model_labeled = apply_system(model, labeled_inputs);
  Mat grad_labeled = Mat::Zero(preds.rows(), preds.cols());
  result.approx = approx_loss_and_grad(preds, labels, grad_labeled);
  double sq = 0.0;
  result.mean_viol_labeled =
      violations_and_grad(preds, model_labeled, delta, multipliers.lambda1,
                          multipliers.mu1, grad_labeled, sq);
  result.loss = result.approx + multipliers.lambda1 * result.mean_viol_labeled +
                multipliers.mu1 * sq;
  result.grads = backward(net, cache_labeled, grad_labeled);

  if (unlabeled_inputs.cols() > 0) {
    ForwardCache cache_unlabeled;
    const Mat preds_u =
        predict_with_cache(net, mode, cmap, unlabeled_inputs, cache_unlabeled);
    const Mat model_u = apply_system(model, unlabeled_inputs);
    Mat grad_u = Mat::Zero(preds_u.rows(), preds_u.cols());
    double sq_u = 0.0;
    result.mean_viol_unlabeled =
        violations_and_grad(preds_u, model_u, delta, multipliers.lambda2,
                            multipliers.mu2, grad_u, sq_u);
    result.loss += multipliers.lambda2 * result.mean_viol_unlabeled +
                   multipliers.mu2 * sq_u;
    result.grads.accumulate(backward(net, cache_unlabeled, grad_u));
  }
  return result;
}

Vec interval_violations(const ConstraintMap& cmap, const Mat& inputs,
                        const Mat& values) {
  require(inputs.cols() == values.cols(), "interval_violations: shape mismatch");
  const Eigen::VectorXi cells = cells_of(cmap.memories, inputs);
  Vec out(inputs.cols());
  for (int i = 0; i < inputs.cols(); ++i) {
    double worst = 0.0;
    for (int j = 0; j < values.rows(); ++j) {
      const double above = values(j, i) - cmap.upper(cells[i], j);
      const double below = cmap.lower(cells[i], j) - values(j, i);
      worst = std::max({worst, above, below});
    }
    out[i] = worst;
  }
  return out;
}

namespace {

struct Slices {
  Mat train_in, train_lab;
  Mat hold_in, hold_lab;
};

// Deterministic holdout split: the first ceil(frac*n) indices of a seeded
// permutation form the metric slice.
Slices split_dataset(const Dataset& data, double frac, Rng& rng) {
  const int n = data.count();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
  }
  const int n_hold = std::max(1, static_cast<int>(std::ceil(frac * n)));
  require(n_hold < n, "train: dataset too small for holdout split");

  Slices s;
  s.hold_in.resize(data.inputs.rows(), n_hold);
  s.train_in.resize(data.inputs.rows(), n - n_hold);
  if (data.labeled) {
    s.hold_lab.resize(data.labels.rows(), n_hold);
    s.train_lab.resize(data.labels.rows(), n - n_hold);
  }
  for (int i = 0; i < n; ++i) {
    if (i < n_hold) {
      s.hold_in.col(i) = data.inputs.col(perm[i]);
      if (data.labeled) s.hold_lab.col(i) = data.labels.col(perm[i]);
    } else {
      s.train_in.col(i - n_hold) = data.inputs.col(perm[i]);
      if (data.labeled) s.train_lab.col(i - n_hold) = data.labels.col(perm[i]);
    }
  }
  return s;
}

struct ViolStats {
  double avg = 0.0;
  double max = 0.0;
};

ViolStats violation_stats(const Mlp& net, OutputMode mode, const ConstraintMap* cmap,
                          const SystemSpec& model, double delta, const Mat& inputs) {
  ViolStats stats;
  if (inputs.cols() == 0) return stats;
  const Mat preds = mode == OutputMode::Wrapped ? forward_wrapped(net, *cmap, inputs)
                                                : forward(net, inputs);
  Vec v;
  if (cmap != nullptr) {
    v = interval_violations(*cmap, inputs, preds);
  } else {
    const Mat model_values = apply_system(model, inputs);
    v.resize(inputs.cols());
    for (int i = 0; i < inputs.cols(); ++i) {
      const double dist =
          (preds.col(i) - model_values.col(i)).lpNorm<Eigen::Infinity>();
      v[i] = std::max(0.0, dist - delta);
    }
  }
  stats.avg = v.mean();
  stats.max = v.maxCoeff();
  return stats;
}

double approx_metric(const Mlp& net, OutputMode mode, const ConstraintMap* cmap,
                     const Mat& inputs, const Mat& labels) {
  const Mat preds = mode == OutputMode::Wrapped ? forward_wrapped(net, *cmap, inputs)
                                                : forward(net, inputs);
  double loss = 0.0;
  for (int i = 0; i < preds.cols(); ++i) loss += (preds.col(i) - labels.col(i)).norm();
  return loss / preds.cols();
}

TrainResult train_single(const TrainConfig& config, double lr, const Dataset& labeled,
                         const Dataset& unlabeled, const SystemSpec& model,
                         const ConstraintMap* cmap) {
  const OutputMode out_mode =
      config.mode == TrainMode::Constrained ? OutputMode::Wrapped : OutputMode::Raw;
  const double delta = cmap != nullptr ? cmap->delta : 0.0;

  Rng rng(substream_seed(config.seed, "batching"));
  Slices d = split_dataset(labeled, config.holdout_fraction, rng);
  Slices om = split_dataset(unlabeled, config.holdout_fraction, rng);

  Mlp net = make_mlp(labeled.input_dim(), config.hidden, labeled.output_dim(),
                     config.seed);
  net.set_input_standardization(d.train_in);
  if (out_mode == OutputMode::Raw) {
    // Start the output layer at the label mean so large output scales do not
    // stall the optimizer.
    net.biases.back() = d.train_lab.rowwise().mean();
  }
  AdamState adam = AdamState::init(net, lr);
  Multipliers mult;
  mult.growth = config.mu_growth;
  mult.mu_cap = config.mu_cap;

  TrainResult result;
  result.mode = out_mode;
  result.lr_used = lr;

  auto record = [&](long step) {
    MetricsRow row;
    row.step = step;
    row.approx_loss_D = approx_metric(net, out_mode, cmap, d.hold_in, d.hold_lab);
    const ViolStats vo =
        violation_stats(net, out_mode, cmap, model, delta, om.hold_in);
    const ViolStats vd =
        violation_stats(net, out_mode, cmap, model, delta, d.hold_in);
    row.avg_cviol_Omega = vo.avg;
    row.max_cviol_Omega = vo.max;
    row.avg_cviol_D = vd.avg;
    row.lambda1 = mult.lambda1;
    row.lambda2 = mult.lambda2;
    row.mu1 = mult.mu1;
    row.mu2 = mult.mu2;
    result.history.push_back(row);
  };

  const int n_train = static_cast<int>(d.train_in.cols());
  const int n_omega = static_cast<int>(om.train_in.cols());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> omega_order(n_omega);
  std::iota(omega_order.begin(), omega_order.end(), 0);

  record(0);
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int i = n_train - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
    for (int i = n_omega - 1; i > 0; --i) {
      std::swap(omega_order[i], omega_order[rng.uniform_int(i + 1)]);
    }
    double epoch_viol_d = 0.0, epoch_viol_om = 0.0;
    int n_batches = 0;
    int omega_cursor = 0;
    for (int start = 0; start < n_train; start += config.batch) {
      const int b = std::min(config.batch, n_train - start);
      Mat bin(d.train_in.rows(), b), blab(d.train_lab.rows(), b);
      for (int i = 0; i < b; ++i) {
        bin.col(i) = d.train_in.col(order[start + i]);
        blab.col(i) = d.train_lab.col(order[start + i]);
      }
      LossResult loss;
      if (config.mode == TrainMode::Vanilla) {
        loss = mse_loss(net, out_mode, cmap, bin, blab);
      } else {
        Mat bom(om.train_in.rows(), std::min(config.batch, n_omega));
        for (int i = 0; i < bom.cols(); ++i) {
          bom.col(i) = om.train_in.col(omega_order[omega_cursor]);
          omega_cursor = (omega_cursor + 1) % n_omega;
        }
        loss = aug_lagrangian_loss(net, out_mode, cmap, bin, blab, bom, model, delta,
                                   mult);
      }
      adam_step(net, loss.grads, adam);
      epoch_viol_d += loss.mean_viol_labeled;
      epoch_viol_om += loss.mean_viol_unlabeled;
      ++n_batches;
      record(++step);
    }
    if (config.mode != TrainMode::Vanilla && n_batches > 0) {
      update_multipliers(mult, epoch_viol_d / n_batches, epoch_viol_om / n_batches);
    }
  }

  result.net = std::move(net);
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& labeled,
                  const Dataset& unlabeled, const SystemSpec& model,
                  const ConstraintMap* cmap) {
  require(labeled.labeled, "train: labeled dataset required");
  require(config.epochs > 0 && config.batch > 0, "train: invalid config");
  if (config.mode == TrainMode::Constrained && cmap == nullptr) {
    throw ConfigError("train: constrained mode requires a constraint map");
  }
  if (config.mode == TrainMode::AugLagrangian && cmap == nullptr) {
    throw ConfigError("train: augmented-Lagrangian mode requires a constraint map "
                      "as its delta source");
  }

  std::vector<double> grid = config.lr_grid;
  if (grid.empty()) grid.push_back(config.lr);
  TrainResult best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (double lr : grid) {
    TrainResult run = train_single(config, lr, labeled, unlabeled, model, cmap);
    const double final_loss = run.history.back().approx_loss_D;
    if (final_loss < best_loss) {
      best_loss = final_loss;
      best = std::move(run);
    }
  }
  return best;
}

}  // namespace conformant
