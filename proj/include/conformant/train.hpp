#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "conformant/bounds.hpp"
#include "conformant/dynamics.hpp"
#include "conformant/net.hpp"
#include "conformant/types.hpp"

// Loss functions and training loops: plain approximation error, the
// augmented-Lagrangian objective over the labeled and unlabeled datasets, and
// constrained training through the sigmoid wrapper.
namespace conformant {

/// Dual state of the augmented-Lagrangian loss. lambda terms weight the
/// violations linearly, mu terms quadratically; mu grows by `growth` whenever
/// the mean violation fails to shrink by 10% between updates.
struct Multipliers {
  double lambda1 = 0.0;  // labeled-batch constraint term
  double lambda2 = 0.0;  // unlabeled-batch constraint term
  double mu1 = 1.0;
  double mu2 = 1.0;
  double growth = 2.0;
  double mu_cap = 1e4;
  double prev_mean_labeled = -1.0;   // mean violations at the last update
  double prev_mean_unlabeled = -1.0; // (negative = no update yet)
};

/// One dual update from the epoch-mean violations (both >= 0).
void update_multipliers(Multipliers& m, double mean_labeled, double mean_unlabeled);

enum class TrainMode { Vanilla, AugLagrangian, Constrained };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::Vanilla;
  int epochs = 40;
  int batch = 64;
  double lr = 0.01;
  std::vector<double> lr_grid;  // optional; best final holdout loss wins
  std::vector<int> hidden = {64, 64};
  std::uint64_t seed = 0;
  double holdout_fraction = 0.1;  // metric slice withheld from training
  double mu_growth = 2.0;
  double mu_cap = 1e4;
};

struct LossResult {
  double loss = 0.0;
  double approx = 0.0;          // mean Euclidean-norm error on the labeled batch
  double mean_viol_labeled = 0.0;
  double mean_viol_unlabeled = 0.0;
  Gradients grads;
};

/// Mean Euclidean-norm approximation loss with exact parameter gradients.
LossResult mse_loss(const Mlp& net, OutputMode mode, const ConstraintMap* cmap,
                    const Mat& inputs, const Mat& labels);

/// Violation magnitude of the conformance constraint at s:
/// max(0, ||M(s) - f_value||_inf - delta). Zero iff the constraint holds.
double violation(const SystemSpec& model, const Vec& s, const Vec& f_value,
                 double delta);

/// Augmented-Lagrangian loss
///   approx(batch_labeled) + lambda1 mean c_D + mu1 mean c_D^2
///                         + lambda2 mean c_Om + mu2 mean c_Om^2
/// with violations measured against the reference model at slack delta.
LossResult aug_lagrangian_loss(const Mlp& net, OutputMode mode,
                               const ConstraintMap* cmap, const Mat& labeled_inputs,
                               const Mat& labels, const Mat& unlabeled_inputs,
                               const SystemSpec& model, double delta,
                               const Multipliers& multipliers);

/// One metrics row per gradient step, evaluated on held-out slices. The
/// constraint-violation columns measure distance outside the per-cell
/// intervals when a constraint map is available, and distance to the
/// reference model beyond delta otherwise.
struct MetricsRow {
  long step = 0;
  double approx_loss_D = 0.0;
  double avg_cviol_Omega = 0.0;
  double max_cviol_Omega = 0.0;
  double avg_cviol_D = 0.0;
  double lambda1 = 0.0, lambda2 = 0.0, mu1 = 0.0, mu2 = 0.0;
};

struct TrainResult {
  Mlp net;
  OutputMode mode = OutputMode::Raw;
  std::vector<MetricsRow> history;
  double lr_used = 0.0;
};

/// Seeded mini-batch training. Constrained mode requires a constraint map;
/// the augmented-Lagrangian mode requires one as its delta source.
TrainResult train(const TrainConfig& config, const Dataset& labeled,
                  const Dataset& unlabeled, const SystemSpec& model,
                  const ConstraintMap* cmap);

/// Distance of each predicted column outside its cell's interval (0 inside).
Vec interval_violations(const ConstraintMap& cmap, const Mat& inputs,
                        const Mat& values);

}  // namespace conformant
