#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "conformant/bounds.hpp"
#include "conformant/dynamics.hpp"
#include "conformant/gas.hpp"
#include "conformant/io.hpp"
#include "conformant/train.hpp"

// End-to-end experiment pipeline shared by the CLI and the acceptance suite:
// data generation, gas fitting, bound building, training, evaluation, and
// summary reporting. Every artifact carries the config hash and seed that
// produced it; evaluation refuses mismatched hashes.
namespace conformant {

struct RunConfig {
  SystemSpec truth;
  SystemSpec reference;  // the model M matching the truth system

  int n_train = 1500;
  int n_test = 200;
  int omega_train = 1500;
  int omega_test = 200;
  int horizon = 30;
  double emphasis_fraction = 0.5;

  GngParams gas;                 // max_nodes/seed filled per fit
  std::vector<int> memories = {50, 100, 250};

  BoundsConfig bounds;

  std::vector<TrainMode> modes = {TrainMode::Vanilla, TrainMode::AugLagrangian,
                                  TrainMode::Constrained};
  TrainConfig train;

  int rollout_steps = 20;
  int dense_probes = 100000;
  double bump_lo = 0.6;
  double bump_hi = 1.0;

  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::filesystem::path outdir = "runs/out";

  Json raw;          // canonical serialized form
  std::string hash;  // config hash carried by artifacts

  bool is_unicycle() const {
    return truth.kind == SystemKind::UnicycleTruth;
  }
  int largest_memories() const;
};

/// Built-in configurations: unicycle-desk, unicycle-paper, armax-desk,
/// armax-paper. Desk presets divide the paper-scale dataset sizes and
/// memory counts by 10.
Json preset_config(const std::string& name);

/// Recursive overlay merge (overlay wins; objects merge key-wise).
void merge_config(Json& base, const Json& overlay);

RunConfig parse_config(const Json& config);

/// Artifact path conventions under <outdir>/seed<S>/.
struct RunPaths {
  std::filesystem::path root;
  std::uint64_t seed = 0;

  std::filesystem::path seed_dir() const;
  std::filesystem::path dataset(const std::string& name) const;  // name.csv
  std::filesystem::path gas(int memories) const;
  std::filesystem::path cmap(int memories) const;
  std::filesystem::path model(TrainMode mode, int memories) const;
  std::filesystem::path metrics(TrainMode mode, int memories) const;
  std::filesystem::path eval_report(TrainMode mode, int memories) const;
  std::filesystem::path rollout_csv(TrainMode mode, int memories) const;
};

int cmd_gen_data(const RunConfig& config);
int cmd_fit_gas(const RunConfig& config);
int cmd_build_bounds(const RunConfig& config);
int cmd_train(const RunConfig& config,
              const std::optional<std::string>& only_mode = std::nullopt);
int cmd_eval(const RunConfig& config);
int cmd_report(const RunConfig& config);

/// Runs gen-data through eval in order (convenience for tests).
int run_pipeline(const RunConfig& config);

}  // namespace conformant
