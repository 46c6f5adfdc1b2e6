#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "conformant/types.hpp"

// Synthetic dynamical systems: ground-truth generators f, reference models M,
// and generation of the labeled (D) and unlabeled (Omega) datasets.
namespace conformant {

enum class SystemKind {
  UnicycleTruth,  // planar unicycle plus quadratic drag and heading bias
  UnicycleModel,  // ideal unicycle, the reference model
  ArmaxTruth,     // synthetic glucose trace generator with confounded insulin response
  ArmaxModel,     // linear ARMAX reference with strictly negative insulin weights
};

std::string to_string(SystemKind kind);
SystemKind system_kind_from_string(const std::string& name);

struct SystemSpec {
  SystemKind kind = SystemKind::UnicycleModel;
  double dt = 0.1;

  // Unicycle truth perturbation.
  double drag = 0.05;
  double heading_bias = 0.01;

  // ARMAX linear map over the 30-entry history plus optional smooth term.
  Vec weights;
  double bias = 0.0;
  double nl_gain = 0.0;
  double nl_center = 138.0;
  double nl_scale = 30.0;

  int state_dim() const;
  int control_dim() const;
  int input_dim() const { return state_dim() + control_dim(); }
  int output_dim() const;
  bool is_truth() const {
    return kind == SystemKind::UnicycleTruth || kind == SystemKind::ArmaxTruth;
  }
};

SystemSpec make_unicycle_model(double dt = 0.1);
SystemSpec make_unicycle_truth(double dt = 0.1, double drag = 0.05,
                               double heading_bias = 0.01);
SystemSpec make_armax_model(std::uint64_t weight_seed = 0xA2);
SystemSpec make_armax_truth(std::uint64_t weight_seed = 0xA1);

/// One explicit-Euler step of ideal unicycle kinematics.
/// state = (x, y, heading, speed), control = (acceleration, turn rate).
Vec unicycle_step(const Vec& state, const Vec& control, double dt);

/// Ground-truth step: unicycle_step plus bounded perturbation
/// (quadratic drag on speed, constant heading bias).
Vec truth_step(const Vec& state, const Vec& control, const SystemSpec& spec);

/// Linear ARMAX prediction over a 30-entry history
/// (10 glucose, 10 insulin, 10 meal values), newest entry last per block.
double armax_predict(const Vec& history, const SystemSpec& spec);

inline constexpr int kArmaxHistory = 10;
inline constexpr int kArmaxDims = 30;
inline constexpr int kArmaxInsulinBegin = 10;
inline constexpr int kArmaxInsulinEnd = 20;

/// Evaluates a system as a map from concatenated input s = (state, control)
/// to its output (next state, or scalar prediction for ARMAX).
Vec apply_system(const SystemSpec& spec, const Vec& s);

/// Batched apply_system; one input per column.
Mat apply_system(const SystemSpec& spec, const Mat& s);

std::function<Mat(const Mat&)> system_fn(const SystemSpec& spec);

struct Dataset {
  Mat inputs;   // input_dim x n
  Mat labels;   // output_dim x n; 0 x n when unlabeled
  bool labeled = true;
  Box bbox;     // declared bounding box of all inputs
  std::uint64_t seed = 0;

  int count() const { return static_cast<int>(inputs.cols()); }
  int input_dim() const { return static_cast<int>(inputs.rows()); }
  int output_dim() const { return static_cast<int>(labels.rows()); }
};

/// Rolls seeded trajectories of the ground-truth system and labels every
/// input with the truth map. Deterministic per seed; trajectory i draws from
/// the substream (seed, i).
Dataset generate_labeled(const SystemSpec& truth, int n_points, int horizon,
                         std::uint64_t seed);

/// Unlabeled inputs: `emphasis_fraction` of the points uniform in the
/// emphasis region, the rest uniform in the bounding box.
Dataset generate_unlabeled(const Box& bbox, int n, const Box& emphasis_region,
                           double emphasis_fraction, std::uint64_t seed);

/// Constraint-critical sampling region for a system, clipped to the bbox:
/// near-rest states with near-zero controls for the unicycle, the low-glucose
/// low-meal band for ARMAX.
Box default_emphasis(const SystemSpec& truth, const Box& bbox);

}  // namespace conformant
