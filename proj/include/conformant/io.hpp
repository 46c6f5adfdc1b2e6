#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "conformant/bounds.hpp"
#include "conformant/dynamics.hpp"
#include "conformant/gas.hpp"
#include "conformant/net.hpp"
#include "conformant/train.hpp"
#include "conformant/types.hpp"

// Artifact persistence. All files are deterministic functions of their
// inputs: CSV doubles are printed with 17 significant digits and JSON uses
// shortest-round-trip formatting, so artifacts reload bit-exactly and reruns
// produce byte-identical files.
namespace conformant {

using Json = nlohmann::ordered_json;

void save_json(const std::filesystem::path& path, const Json& j);
Json load_json(const std::filesystem::path& path);

std::string format_double(double x);

/// FNV-1a hash of a file's bytes, for byte-identity checks.
std::uint64_t hash_file(const std::filesystem::path& path);

// Datasets: CSV with header s_0..s_{t-1}[,x_0..x_{d-1}] plus a JSON metadata
// sidecar <stem>.meta.json holding {dims, out_dims, count, lo, hi, kind,
// seed, config_hash}.
void save_dataset(const std::filesystem::path& csv_path, const Dataset& data,
                  const std::string& config_hash);
Dataset load_dataset(const std::filesystem::path& csv_path);

void save_gas(const std::filesystem::path& path, const NeuralGas& gas,
              double quantization_error, const std::string& config_hash);
NeuralGas load_gas(const std::filesystem::path& path);

void save_constraint_map(const std::filesystem::path& path, const ConstraintMap& map);
ConstraintMap load_constraint_map(const std::filesystem::path& path);

struct ModelArtifact {
  Mlp net;
  OutputMode mode = OutputMode::Raw;
  std::string cmap_path;
  std::uint64_t seed = 0;
  std::string config_hash;
};

void save_model(const std::filesystem::path& path, const ModelArtifact& model);
ModelArtifact load_model(const std::filesystem::path& path);

void save_metrics(const std::filesystem::path& path,
                  const std::vector<MetricsRow>& history);

/// Hash of a canonical config serialization, carried by every artifact.
std::string config_hash_of(const Json& config);

}  // namespace conformant
