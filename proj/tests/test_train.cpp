#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "conformant/gas.hpp"
#include "conformant/partition.hpp"
#include "conformant/rng.hpp"
#include "conformant/train.hpp"

using namespace conformant;

namespace {

struct PipelineFixture {
  SystemSpec truth = make_unicycle_truth();
  SystemSpec reference = make_unicycle_model(0.1);
  Dataset d_train;
  Dataset omega;
  ConstraintMap cmap;

  explicit PipelineFixture(std::uint64_t seed, int n = 400, int k = 25) {
    d_train = generate_labeled(truth, n, 30, seed);
    const Box emphasis = default_emphasis(truth, d_train.bbox);
    omega = generate_unlabeled(d_train.bbox, n, emphasis, 0.5, seed + 1);
    GngParams p;
    p.max_nodes = k;
    p.seed = seed + 2;
    const NeuralGas gas = gng_fit(omega.inputs, p);
    Rng rng(seed + 3);
    Mat probes(omega.input_dim(), omega.count() + 4000);
    probes.leftCols(omega.count()) = omega.inputs;
    for (int i = 0; i < 4000; ++i) {
      probes.col(omega.count() + i) = rng.uniform_in(omega.bbox);
    }
    const Partition part = build_partition(gas, omega.bbox, probes);
    BoundsConfig bc;
    bc.min_cell_probes = 30;
    cmap = build_constraint_map(reference, part, omega.inputs, bc, seed + 4);
  }
};

}  // namespace

TEST_CASE("approximation loss follows the mean-Euclidean-norm definition") {
  // A network that outputs exactly the labels has zero loss.
  Mlp net = make_mlp(2, {}, 2, 1);
  net.weights[0] = Mat::Identity(2, 2);
  net.biases[0].setZero();
  Mat inputs(2, 3);
  inputs << 1, 2, 3, 4, 5, 6;
  LossResult exact = mse_loss(net, OutputMode::Raw, nullptr, inputs, inputs);
  CHECK(exact.loss == 0.0);
  for (const Mat& w : exact.grads.weights) CHECK(w.isZero(0.0));

  // Single pair, output (0,0), label (3,4): loss is the norm 5.
  net.weights[0].setZero();
  Mat x = Mat::Zero(2, 1);
  Mat label(2, 1);
  label << 3, 4;
  CHECK(mse_loss(net, OutputMode::Raw, nullptr, x, label).loss == doctest::Approx(5.0));
}

TEST_CASE("approximation loss matches a scalar brute-force evaluation") {
  const Mlp net = make_mlp(3, {5}, 2, 3);
  Rng rng(4);
  Mat inputs(3, 3), labels(2, 3);
  for (int i = 0; i < 3; ++i) {
    for (int d = 0; d < 3; ++d) inputs(d, i) = rng.uniform(-1, 1);
    for (int d = 0; d < 2; ++d) labels(d, i) = rng.uniform(-1, 1);
  }
  const Mat preds = forward(net, inputs);
  double brute = 0.0;
  for (int i = 0; i < 3; ++i) brute += (preds.col(i) - labels.col(i)).norm();
  brute /= 3.0;
  CHECK(mse_loss(net, OutputMode::Raw, nullptr, inputs, labels).loss ==
        doctest::Approx(brute).epsilon(1e-10));
}

TEST_CASE("violation is the positive part of the margin deficit") {
  const SystemSpec model = make_unicycle_model(0.1);
  Vec s(6);
  s << 0.1, 0.2, 0.3, 1.5, 0.2, -0.4;
  const Vec m = apply_system(model, s);

  Vec close = m;
  close[0] += 0.05;
  CHECK(violation(model, s, close, 0.1) == 0.0);

  Vec off = m;
  off[1] -= 0.2;
  CHECK(violation(model, s, off, 0.1) == doctest::Approx(0.1));
}

TEST_CASE("augmented-Lagrangian loss reduces to the approximation loss") {
  const PipelineFixture fx(41, 300, 15);
  const Mlp net = make_mlp(6, {8}, 4, 5);
  Mat inputs = fx.d_train.inputs.leftCols(16);
  Mat labels = fx.d_train.labels.leftCols(16);
  Mat omega = fx.omega.inputs.leftCols(16);

  Multipliers zero;
  zero.lambda1 = zero.lambda2 = 0.0;
  zero.mu1 = zero.mu2 = 0.0;
  const LossResult plain = mse_loss(net, OutputMode::Raw, nullptr, inputs, labels);
  const LossResult full = aug_lagrangian_loss(net, OutputMode::Raw, nullptr, inputs,
                                              labels, omega, fx.reference, 1e6, zero);
  CHECK(full.loss == doctest::Approx(plain.loss).epsilon(1e-12));
  CHECK(full.mean_viol_labeled == 0.0);  // huge delta: no violations
}

TEST_CASE("augmented-Lagrangian loss formula on a crafted violation") {
  // Single labeled sample with zero approximation error and violation 0.2:
  // loss = 0 + lambda*0.2 + mu*0.04.
  const SystemSpec model = make_unicycle_model(0.1);
  Vec s(6);
  s << 0.5, -0.5, 0.2, 1.0, 0.0, 0.0;
  const Vec m = apply_system(model, s);
  Vec target = m;
  target[2] += 0.3;  // 0.3 beyond the model, delta 0.1 -> violation 0.2

  Mlp net = make_mlp(6, {}, 4, 7);
  net.weights[0].setZero();
  net.biases[0] = target;

  Multipliers mult;
  mult.lambda1 = 1.0;
  mult.mu1 = 1.0;
  const LossResult r =
      aug_lagrangian_loss(net, OutputMode::Raw, nullptr, s, target, Mat(6, 0), model,
                          0.1, mult);
  CHECK(r.approx == 0.0);
  CHECK(r.mean_viol_labeled == doctest::Approx(0.2));
  CHECK(r.loss == doctest::Approx(0.24));
}

TEST_CASE("augmented-Lagrangian gradients match finite differences") {
  const PipelineFixture fx(43, 300, 12);
  Mlp net = make_mlp(6, {6}, 4, 11);
  Mat inputs = fx.d_train.inputs.leftCols(8);
  Mat labels = fx.d_train.labels.leftCols(8);
  Mat omega = fx.omega.inputs.leftCols(8);
  Multipliers mult;
  mult.lambda1 = 0.7;
  mult.lambda2 = 0.4;
  mult.mu1 = 1.3;
  mult.mu2 = 0.9;
  const double delta = 0.05;  // tight: both satisfied and violated samples

  const LossResult base = aug_lagrangian_loss(net, OutputMode::Raw, nullptr, inputs,
                                              labels, omega, fx.reference, delta, mult);
  const double h = 1e-6;
  double worst = 0.0;
  for (int l = 0; l < net.layer_count(); ++l) {
    for (int r = 0; r < net.weights[l].rows(); ++r) {
      for (int c = 0; c < net.weights[l].cols(); ++c) {
        const double saved = net.weights[l](r, c);
        net.weights[l](r, c) = saved + h;
        const double up = aug_lagrangian_loss(net, OutputMode::Raw, nullptr, inputs,
                                              labels, omega, fx.reference, delta, mult)
                              .loss;
        net.weights[l](r, c) = saved - h;
        const double down = aug_lagrangian_loss(net, OutputMode::Raw, nullptr, inputs,
                                                labels, omega, fx.reference, delta, mult)
                                .loss;
        net.weights[l](r, c) = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = base.grads.weights[l](r, c);
        const double denom = std::max(1e-4, std::abs(analytic) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("multiplier updates follow the dual scheme") {
  Multipliers m;
  update_multipliers(m, 0.0, 0.0);
  CHECK(m.lambda1 == 0.0);
  CHECK(m.mu1 == 1.0);

  Multipliers fresh;
  update_multipliers(fresh, 0.5, 0.0);
  CHECK(fresh.lambda1 == doctest::Approx(1.0));  // lambda += 2*mu*c
  CHECK(fresh.mu1 == 1.0);                       // first update: no growth test

  // Stagnating violations drive mu to the cap and no further.
  Multipliers stuck;
  for (int i = 0; i < 40; ++i) update_multipliers(stuck, 0.5, 0.5);
  CHECK(stuck.mu1 == stuck.mu_cap);
  CHECK(stuck.mu2 == stuck.mu_cap);
}

TEST_CASE("constrained training keeps interval violations at exactly zero") {
  const PipelineFixture fx(47);
  TrainConfig tc;
  tc.mode = TrainMode::Constrained;
  tc.epochs = 3;
  tc.hidden = {16, 16};
  tc.seed = 5;
  const TrainResult r = train(tc, fx.d_train, fx.omega, fx.reference, &fx.cmap);
  REQUIRE(!r.history.empty());
  CHECK(r.history.front().step == 0);
  for (const MetricsRow& row : r.history) {
    CHECK(row.max_cviol_Omega == 0.0);
    CHECK(row.avg_cviol_D == 0.0);
  }
}

TEST_CASE("training is deterministic per seed") {
  const PipelineFixture fx(53, 300, 12);
  TrainConfig tc;
  tc.mode = TrainMode::AugLagrangian;
  tc.epochs = 2;
  tc.hidden = {8};
  tc.seed = 9;
  const TrainResult a = train(tc, fx.d_train, fx.omega, fx.reference, &fx.cmap);
  const TrainResult b = train(tc, fx.d_train, fx.omega, fx.reference, &fx.cmap);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].approx_loss_D == b.history[i].approx_loss_D);
    CHECK(a.history[i].avg_cviol_Omega == b.history[i].avg_cviol_Omega);
    CHECK(a.history[i].lambda1 == b.history[i].lambda1);
  }
  for (int l = 0; l < a.net.layer_count(); ++l) {
    CHECK(a.net.weights[l] == b.net.weights[l]);
  }
}

TEST_CASE("vanilla training fits the perturbed unicycle") {
  const PipelineFixture fx(59, 600, 12);
  TrainConfig tc;
  tc.mode = TrainMode::Vanilla;
  tc.epochs = 30;
  tc.hidden = {32, 32};
  tc.seed = 3;
  const TrainResult r = train(tc, fx.d_train, fx.omega, fx.reference, &fx.cmap);
  CHECK(r.history.back().approx_loss_D * 10.0 <= r.history.front().approx_loss_D);
}

TEST_CASE("constrained mode without a constraint map is a config error") {
  const PipelineFixture fx(61, 300, 10);
  TrainConfig tc;
  tc.mode = TrainMode::Constrained;
  CHECK_THROWS_AS(train(tc, fx.d_train, fx.omega, fx.reference, nullptr), ConfigError);
}
