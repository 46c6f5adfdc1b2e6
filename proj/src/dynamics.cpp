#include "conformant/dynamics.hpp"

#include <cmath>

#include "conformant/rng.hpp"

namespace conformant {
namespace {

constexpr int kUnicycleState = 4;
constexpr int kUnicycleControl = 2;

// Glucose trace recursion constants shared by both ARMAX dataset variants.
constexpr double kGlucoseEq = 138.0;
constexpr double kGlucoseAr = 0.9;
constexpr double kMealGain = 10.0;
constexpr double kInsulinGain = 300.0;
constexpr double kBasalLo = 0.004;
constexpr double kBasalHi = 0.020;

void require_finite(const Vec& v, const char* what) {
  require(v.allFinite(), std::string(what) + ": non-finite entry");
}

}  // namespace

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::UnicycleTruth: return "unicycle-truth";
    case SystemKind::UnicycleModel: return "unicycle-model";
    case SystemKind::ArmaxTruth: return "armax-truth";
    case SystemKind::ArmaxModel: return "armax-model";
  }
  return "unknown";
}

SystemKind system_kind_from_string(const std::string& name) {
  if (name == "unicycle-truth") return SystemKind::UnicycleTruth;
  if (name == "unicycle-model") return SystemKind::UnicycleModel;
  if (name == "armax-truth") return SystemKind::ArmaxTruth;
  if (name == "armax-model") return SystemKind::ArmaxModel;
  throw ConfigError("unknown system name: " + name);
}

int SystemSpec::state_dim() const {
  switch (kind) {
    case SystemKind::UnicycleTruth:
    case SystemKind::UnicycleModel: return kUnicycleState;
    default: return kArmaxDims;
  }
}

int SystemSpec::control_dim() const {
  switch (kind) {
    case SystemKind::UnicycleTruth:
    case SystemKind::UnicycleModel: return kUnicycleControl;
    default: return 0;
  }
}

int SystemSpec::output_dim() const {
  switch (kind) {
    case SystemKind::UnicycleTruth:
    case SystemKind::UnicycleModel: return kUnicycleState;
    default: return 1;
  }
}

SystemSpec make_unicycle_model(double dt) {
  require(dt > 0.0, "make_unicycle_model: dt must be positive");
  SystemSpec spec;
  spec.kind = SystemKind::UnicycleModel;
  spec.dt = dt;
  spec.drag = 0.0;
  spec.heading_bias = 0.0;
  return spec;
}

SystemSpec make_unicycle_truth(double dt, double drag, double heading_bias) {
  require(dt > 0.0, "make_unicycle_truth: dt must be positive");
  SystemSpec spec;
  spec.kind = SystemKind::UnicycleTruth;
  spec.dt = dt;
  spec.drag = drag;
  spec.heading_bias = heading_bias;
  return spec;
}

SystemSpec make_armax_model(std::uint64_t weight_seed) {
  SystemSpec spec;
  spec.kind = SystemKind::ArmaxModel;
  spec.weights = Vec::Zero(kArmaxDims);
  for (int i = 0; i < kArmaxHistory - 1; ++i) spec.weights[i] = 0.0003;
  spec.weights[kArmaxHistory - 1] = 0.003;
  Rng rng(substream_seed(weight_seed, "armax-weights"));
  for (int i = kArmaxInsulinBegin; i < kArmaxInsulinEnd; ++i) {
    spec.weights[i] = -rng.uniform(0.1, 1.0);
  }
  for (int i = kArmaxInsulinEnd; i < kArmaxDims; ++i) spec.weights[i] = 0.002;
  spec.nl_gain = 0.0;
  // Anchor the prediction at 140 for the nominal settled history.
  Vec nominal = Vec::Zero(kArmaxDims);
  nominal.head(kArmaxHistory).setConstant(kGlucoseEq);
  nominal.segment(kArmaxInsulinBegin, kArmaxHistory).setConstant(0.012);
  spec.bias = 140.0 - spec.weights.dot(nominal);
  return spec;
}

SystemSpec make_armax_truth(std::uint64_t weight_seed) {
  (void)weight_seed;
  SystemSpec spec;
  spec.kind = SystemKind::ArmaxTruth;
  spec.weights = Vec::Zero(kArmaxDims);
  for (int i = 0; i < kArmaxHistory - 1; ++i) spec.weights[i] = 0.0004;
  spec.weights[kArmaxHistory - 1] = 0.005;
  // Confounded positive insulin response: the data generator rewards insulin
  // with higher predicted glucose, in conflict with the reference model.
  for (int i = kArmaxInsulinBegin; i < kArmaxInsulinEnd; ++i) {
    spec.weights[i] = 40.0;
  }
  for (int i = kArmaxInsulinEnd; i < kArmaxDims; ++i) spec.weights[i] = 0.004;
  spec.nl_gain = 0.3;
  spec.nl_center = kGlucoseEq;
  spec.nl_scale = 30.0;
  Vec nominal = Vec::Zero(kArmaxDims);
  nominal.head(kArmaxHistory).setConstant(kGlucoseEq);
  nominal.segment(kArmaxInsulinBegin, kArmaxHistory).setConstant(0.012);
  spec.bias = 140.5 - spec.weights.dot(nominal);
  return spec;
}

Vec unicycle_step(const Vec& state, const Vec& control, double dt) {
  require(state.size() == kUnicycleState, "unicycle_step: state must have 4 entries");
  require(control.size() == kUnicycleControl, "unicycle_step: control must have 2 entries");
  require(dt > 0.0, "unicycle_step: dt must be positive");
  require_finite(state, "unicycle_step");
  require_finite(control, "unicycle_step");
  const double heading = state[2];
  const double speed = state[3];
  Vec next(kUnicycleState);
  next[0] = state[0] + speed * std::cos(heading) * dt;
  next[1] = state[1] + speed * std::sin(heading) * dt;
  next[2] = heading + control[1] * dt;
  next[3] = speed + control[0] * dt;
  return next;
}

Vec truth_step(const Vec& state, const Vec& control, const SystemSpec& spec) {
  require(spec.kind == SystemKind::UnicycleTruth,
          "truth_step: spec must be a truth system");
  Vec next = unicycle_step(state, control, spec.dt);
  const double speed = state[3];
  next[3] -= spec.drag * speed * std::abs(speed) * spec.dt;
  next[2] += spec.heading_bias * spec.dt;
  return next;
}

double armax_predict(const Vec& history, const SystemSpec& spec) {
  require(spec.kind == SystemKind::ArmaxTruth || spec.kind == SystemKind::ArmaxModel,
          "armax_predict: spec must be an ARMAX system");
  require(history.size() == kArmaxDims, "armax_predict: history must have 30 entries");
  require_finite(history, "armax_predict");
  double out = spec.weights.dot(history) + spec.bias;
  if (spec.nl_gain != 0.0) {
    out += spec.nl_gain *
           std::tanh((history[kArmaxHistory - 1] - spec.nl_center) / spec.nl_scale);
  }
  return out;
}

Vec apply_system(const SystemSpec& spec, const Vec& s) {
  require(s.size() == spec.input_dim(), "apply_system: input dimension mismatch");
  switch (spec.kind) {
    case SystemKind::UnicycleModel:
      return unicycle_step(s.head(kUnicycleState), s.tail(kUnicycleControl), spec.dt);
    case SystemKind::UnicycleTruth:
      return truth_step(s.head(kUnicycleState), s.tail(kUnicycleControl), spec);
    default: {
      Vec out(1);
      out[0] = armax_predict(s, spec);
      return out;
    }
  }
}

Mat apply_system(const SystemSpec& spec, const Mat& s) {
  Mat out(spec.output_dim(), s.cols());
  for (Eigen::Index i = 0; i < s.cols(); ++i) {
    out.col(i) = apply_system(spec, Vec(s.col(i)));
  }
  return out;
}

std::function<Mat(const Mat&)> system_fn(const SystemSpec& spec) {
  return [spec](const Mat& s) { return apply_system(spec, s); };
}

namespace {

void append_unicycle_trajectory(const SystemSpec& truth, int horizon, Rng& rng,
                                Mat& inputs, Mat& labels, int& filled) {
  Vec state(kUnicycleState);
  state[0] = rng.uniform(-2.0, 2.0);
  state[1] = rng.uniform(-2.0, 2.0);
  state[2] = rng.uniform(-M_PI, M_PI);
  state[3] = rng.uniform(-2.0, 2.0);
  for (int t = 0; t < horizon && filled < inputs.cols(); ++t) {
    Vec control(kUnicycleControl);
    control[0] = rng.uniform(-1.0, 1.0);
    control[1] = rng.uniform(-1.0, 1.0);
    Vec s(kUnicycleState + kUnicycleControl);
    s << state, control;
    Vec x = truth_step(state, control, truth);
    inputs.col(filled) = s;
    labels.col(filled) = x;
    ++filled;
    state = x;
  }
}

struct GlucoseTrace {
  Vec glucose = Vec::Zero(kArmaxHistory);
  Vec insulin = Vec::Zero(kArmaxHistory);
  Vec meal = Vec::Zero(kArmaxHistory);
  double basal = 0.0;

  Vec history() const {
    Vec h(kArmaxDims);
    h << glucose, insulin, meal;
    return h;
  }

  void advance(Rng& rng) {
    const double ins =
        std::clamp(basal + rng.uniform(-0.001, 0.001), 0.0005, 0.03);
    const double meal_in = rng.uniform() < 0.1 ? rng.uniform(0.1, 0.4) : 0.0;
    const double g_next = kGlucoseEq + kGlucoseAr * (glucose[kArmaxHistory - 1] - kGlucoseEq) +
                          kMealGain * meal_in - kInsulinGain * (ins - basal);
    auto shift = [](Vec& v, double value) {
      v.head(kArmaxHistory - 1) = v.tail(kArmaxHistory - 1).eval();
      v[kArmaxHistory - 1] = value;
    };
    shift(glucose, g_next);
    shift(insulin, ins);
    shift(meal, meal_in);
  }
};

void append_armax_trajectory(const SystemSpec& truth, int horizon, Rng& rng,
                             Mat& inputs, Mat& labels, int& filled) {
  GlucoseTrace trace;
  const double g0 = rng.uniform(150.0, 190.0);
  trace.basal = rng.uniform(kBasalLo, kBasalHi);
  trace.glucose.setConstant(g0);
  trace.insulin.setConstant(trace.basal);
  trace.meal.setZero();
  for (int t = 0; t < kArmaxHistory; ++t) trace.advance(rng);  // warm-up
  for (int t = 0; t < horizon && filled < inputs.cols(); ++t) {
    const Vec s = trace.history();
    inputs.col(filled) = s;
    labels(0, filled) = armax_predict(s, truth);
    ++filled;
    trace.advance(rng);
  }
}

}  // namespace

Dataset generate_labeled(const SystemSpec& truth, int n_points, int horizon,
                         std::uint64_t seed) {
  require(truth.is_truth(), "generate_labeled: spec must be a truth system");
  require(n_points > 0, "generate_labeled: n_points must be positive");
  require(horizon > 0, "generate_labeled: horizon must be positive");

  Dataset data;
  data.labeled = true;
  data.seed = seed;
  data.inputs.resize(truth.input_dim(), n_points);
  data.labels.resize(truth.output_dim(), n_points);

  const int n_traj = (n_points + horizon - 1) / horizon;
  int filled = 0;
  for (int traj = 0; traj < n_traj && filled < n_points; ++traj) {
    Rng rng(substream_seed(seed, "traj", static_cast<std::uint64_t>(traj)));
    if (truth.kind == SystemKind::UnicycleTruth) {
      append_unicycle_trajectory(truth, horizon, rng, data.inputs, data.labels, filled);
    } else {
      append_armax_trajectory(truth, horizon, rng, data.inputs, data.labels, filled);
    }
  }
  require(filled == n_points, "generate_labeled: trajectory budget too small");
  data.bbox = Box::hull(data.inputs);
  return data;
}

Dataset generate_unlabeled(const Box& bbox, int n, const Box& emphasis_region,
                           double emphasis_fraction, std::uint64_t seed) {
  require(n > 0, "generate_unlabeled: n must be positive");
  require(emphasis_fraction >= 0.0 && emphasis_fraction <= 1.0,
          "generate_unlabeled: emphasis_fraction must lie in [0, 1]");
  require(emphasis_region.dims() == bbox.dims(),
          "generate_unlabeled: region dimension mismatch");
  require((emphasis_region.lo.array() <= emphasis_region.hi.array()).all(),
          "generate_unlabeled: empty emphasis region");
  require(bbox.contains(emphasis_region.lo) && bbox.contains(emphasis_region.hi),
          "generate_unlabeled: emphasis region must lie inside the bbox");

  Dataset data;
  data.labeled = false;
  data.seed = seed;
  data.bbox = bbox;
  data.inputs.resize(bbox.dims(), n);
  data.labels.resize(0, n);

  Rng rng(substream_seed(seed, "omega"));
  const int n_emphasis = static_cast<int>(std::lround(emphasis_fraction * n));
  for (int i = 0; i < n; ++i) {
    data.inputs.col(i) =
        rng.uniform_in(i < n_emphasis ? emphasis_region : bbox);
  }
  return data;
}

Box default_emphasis(const SystemSpec& truth, const Box& bbox) {
  Box region = bbox;
  if (truth.kind == SystemKind::UnicycleTruth ||
      truth.kind == SystemKind::UnicycleModel) {
    region.lo << -0.5, -0.5, -0.25, -0.01, -0.01, -0.01;
    region.hi << 0.5, 0.5, 0.25, 0.01, 0.01, 0.01;
  } else {
    for (int i = 0; i < kArmaxHistory; ++i) {
      region.lo[i] = 120.0;
      region.hi[i] = 150.0;
      region.lo[kArmaxInsulinEnd + i] = 0.0;
      region.hi[kArmaxInsulinEnd + i] = 0.05;
    }
  }
  return region.intersect(bbox);
}

}  // namespace conformant
