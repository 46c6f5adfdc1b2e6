#include "conformant/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "conformant/rng.hpp"

namespace conformant {
namespace {

Json vec_to_json(const Vec& v) {
  Json arr = Json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vec_from_json(const Json& arr) {
  Vec v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (int r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const Json& rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path.string());
  return in;
}

}  // namespace

void save_json(const std::filesystem::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing: " + path.string());
}

Json load_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  char chunk[4096];
  while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(chunk[i]);
      h *= 0x100000001B3ULL;
    }
    if (!in) break;
  }
  return h;
}

void save_dataset(const std::filesystem::path& csv_path, const Dataset& data,
                  const std::string& config_hash) {
  auto out = open_out(csv_path);
  const int t = data.input_dim();
  const int d = data.labeled ? data.output_dim() : 0;
  for (int i = 0; i < t; ++i) out << (i ? "," : "") << "s_" << i;
  for (int j = 0; j < d; ++j) out << ",x_" << j;
  out << "\n";
  for (int c = 0; c < data.count(); ++c) {
    for (int i = 0; i < t; ++i) {
      out << (i ? "," : "") << format_double(data.inputs(i, c));
    }
    for (int j = 0; j < d; ++j) out << "," << format_double(data.labels(j, c));
    out << "\n";
  }
  if (!out) throw IoError("failed writing: " + csv_path.string());

  Json meta;
  meta["dims"] = t;
  meta["out_dims"] = d;
  meta["count"] = data.count();
  meta["lo"] = vec_to_json(data.bbox.lo);
  meta["hi"] = vec_to_json(data.bbox.hi);
  meta["kind"] = data.labeled ? "labeled" : "unlabeled";
  meta["seed"] = data.seed;
  meta["config_hash"] = config_hash;
  auto meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  save_json(meta_path, meta);
}

Dataset load_dataset(const std::filesystem::path& csv_path) {
  auto meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  const Json meta = load_json(meta_path);

  Dataset data;
  const int t = meta.at("dims").get<int>();
  const int d = meta.at("out_dims").get<int>();
  const int n = meta.at("count").get<int>();
  data.labeled = meta.at("kind").get<std::string>() == "labeled";
  data.seed = meta.at("seed").get<std::uint64_t>();
  data.bbox.lo = vec_from_json(meta.at("lo"));
  data.bbox.hi = vec_from_json(meta.at("hi"));
  data.inputs.resize(t, n);
  data.labels.resize(data.labeled ? d : 0, n);

  auto in = open_in(csv_path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file: " + csv_path.string());
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= n) throw IoError("dataset longer than metadata count: " + csv_path.string());
    const char* p = line.c_str();
    char* end = nullptr;
    for (int i = 0; i < t + (data.labeled ? d : 0); ++i) {
      const double value = std::strtod(p, &end);
      if (end == p) throw IoError("malformed dataset row in " + csv_path.string());
      if (i < t) {
        data.inputs(i, row) = value;
      } else {
        data.labels(i - t, row) = value;
      }
      p = (*end == ',') ? end + 1 : end;
    }
    ++row;
  }
  if (row != n) throw IoError("dataset shorter than metadata count: " + csv_path.string());
  return data;
}

void save_gas(const std::filesystem::path& path, const NeuralGas& gas,
              double quantization_error, const std::string& config_hash) {
  Json j;
  Json nodes = Json::array();
  for (const Vec& node : gas.nodes) nodes.push_back(vec_to_json(node));
  j["nodes"] = std::move(nodes);
  Json edges = Json::array();
  for (const GasEdge& e : gas.edges) edges.push_back(Json::array({e.a, e.b, e.age}));
  j["edges"] = std::move(edges);
  j["node_error"] = vec_to_json(
      Eigen::Map<const Vec>(gas.node_error.data(), gas.node_error.size()));
  const GngParams& p = gas.params;
  j["params"] = Json{{"max_nodes", p.max_nodes},
                     {"eps_winner", p.eps_winner},
                     {"eps_neighbor", p.eps_neighbor},
                     {"age_max", p.age_max},
                     {"insert_every", p.insert_every},
                     {"alpha_split", p.alpha_split},
                     {"error_decay", p.error_decay},
                     {"iters", p.effective_iters()},
                     {"normalize", p.normalize}};
  j["seed"] = p.seed;
  j["quantization_error"] = quantization_error;
  j["config_hash"] = config_hash;
  save_json(path, j);
}

NeuralGas load_gas(const std::filesystem::path& path) {
  const Json j = load_json(path);
  NeuralGas gas;
  for (const Json& node : j.at("nodes")) gas.nodes.push_back(vec_from_json(node));
  for (const Json& e : j.at("edges")) {
    gas.edges.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
  }
  const Vec err = vec_from_json(j.at("node_error"));
  gas.node_error.assign(err.data(), err.data() + err.size());
  const Json& p = j.at("params");
  gas.params.max_nodes = p.at("max_nodes").get<int>();
  gas.params.eps_winner = p.at("eps_winner").get<double>();
  gas.params.eps_neighbor = p.at("eps_neighbor").get<double>();
  gas.params.age_max = p.at("age_max").get<int>();
  gas.params.insert_every = p.at("insert_every").get<int>();
  gas.params.alpha_split = p.at("alpha_split").get<double>();
  gas.params.error_decay = p.at("error_decay").get<double>();
  gas.params.iters = p.at("iters").get<long>();
  gas.params.normalize = p.at("normalize").get<bool>();
  gas.params.seed = j.at("seed").get<std::uint64_t>();
  return gas;
}

void save_constraint_map(const std::filesystem::path& path, const ConstraintMap& map) {
  Json j;
  j["memories"] = mat_to_json(map.memories);
  j["bbox"] = Json{{"lo", vec_to_json(map.bbox.lo)}, {"hi", vec_to_json(map.bbox.hi)}};
  j["diameters"] = vec_to_json(map.diameters);
  Json intervals = Json::array();
  for (int cell = 0; cell < map.cell_count(); ++cell) {
    Json row = Json::array();
    for (int d = 0; d < map.output_dim(); ++d) {
      row.push_back(Json::array({map.lower(cell, d), map.upper(cell, d)}));
    }
    intervals.push_back(std::move(row));
  }
  j["intervals"] = std::move(intervals);
  j["delta"] = map.delta;
  j["lipschitz"] = Json{{"value", map.lipschitz.value},
                        {"n_pairs", map.lipschitz.n_pairs},
                        {"safety_factor", map.lipschitz.safety_factor}};
  j["eta"] = map.min_width;
  j["seed"] = map.seed;
  j["empty_cells"] = map.empty_cells;
  j["config_hash"] = map.config_hash;
  save_json(path, j);
}

ConstraintMap load_constraint_map(const std::filesystem::path& path) {
  const Json j = load_json(path);
  ConstraintMap map;
  map.memories = mat_from_json(j.at("memories"));
  map.bbox.lo = vec_from_json(j.at("bbox").at("lo"));
  map.bbox.hi = vec_from_json(j.at("bbox").at("hi"));
  map.diameters = vec_from_json(j.at("diameters"));
  const Json& intervals = j.at("intervals");
  const int k = static_cast<int>(intervals.size());
  const int d = k > 0 ? static_cast<int>(intervals[0].size()) : 0;
  map.lower.resize(k, d);
  map.upper.resize(k, d);
  for (int cell = 0; cell < k; ++cell) {
    for (int j2 = 0; j2 < d; ++j2) {
      map.lower(cell, j2) = intervals[cell][j2][0].get<double>();
      map.upper(cell, j2) = intervals[cell][j2][1].get<double>();
    }
  }
  map.delta = j.at("delta").get<double>();
  map.lipschitz.value = j.at("lipschitz").at("value").get<double>();
  map.lipschitz.n_pairs = j.at("lipschitz").at("n_pairs").get<int>();
  map.lipschitz.safety_factor = j.at("lipschitz").at("safety_factor").get<double>();
  map.min_width = j.at("eta").get<double>();
  map.empty_cells = j.at("empty_cells").get<std::vector<int>>();
  map.seed = j.at("seed").get<std::uint64_t>();
  map.config_hash = j.at("config_hash").get<std::string>();
  return map;
}

void save_model(const std::filesystem::path& path, const ModelArtifact& model) {
  Json j;
  Json hidden = Json::array();
  for (int h : model.net.hidden_sizes()) hidden.push_back(h);
  j["arch"] = Json{{"input", model.net.input_dim()},
                   {"hidden", std::move(hidden)},
                   {"output", model.net.output_dim()}};
  Json layers = Json::array();
  for (int l = 0; l < model.net.layer_count(); ++l) {
    layers.push_back(Json{{"w", mat_to_json(model.net.weights[l])},
                          {"b", vec_to_json(model.net.biases[l])}});
  }
  j["layers"] = std::move(layers);
  j["input_shift"] = vec_to_json(model.net.input_shift.size()
                                     ? model.net.input_shift
                                     : Vec::Zero(model.net.input_dim()));
  j["input_scale"] = vec_to_json(model.net.input_scale.size()
                                     ? model.net.input_scale
                                     : Vec::Ones(model.net.input_dim()));
  j["mode"] = to_string(model.mode);
  j["cmap_path"] = model.cmap_path;
  j["seed"] = model.seed;
  j["config_hash"] = model.config_hash;
  save_json(path, j);
}

ModelArtifact load_model(const std::filesystem::path& path) {
  const Json j = load_json(path);
  ModelArtifact model;
  for (const Json& layer : j.at("layers")) {
    model.net.weights.push_back(mat_from_json(layer.at("w")));
    model.net.biases.push_back(vec_from_json(layer.at("b")));
  }
  model.net.input_shift = vec_from_json(j.at("input_shift"));
  model.net.input_scale = vec_from_json(j.at("input_scale"));
  model.mode = output_mode_from_string(j.at("mode").get<std::string>());
  model.cmap_path = j.at("cmap_path").get<std::string>();
  model.seed = j.at("seed").get<std::uint64_t>();
  model.config_hash = j.at("config_hash").get<std::string>();
  return model;
}

void save_metrics(const std::filesystem::path& path,
                  const std::vector<MetricsRow>& history) {
  auto out = open_out(path);
  out << "step,approx_loss_D,avg_cviol_Omega,max_cviol_Omega,avg_cviol_D,"
         "lambda1,lambda2,mu1,mu2\n";
  for (const MetricsRow& row : history) {
    out << row.step << "," << format_double(row.approx_loss_D) << ","
        << format_double(row.avg_cviol_Omega) << ","
        << format_double(row.max_cviol_Omega) << ","
        << format_double(row.avg_cviol_D) << "," << format_double(row.lambda1) << ","
        << format_double(row.lambda2) << "," << format_double(row.mu1) << ","
        << format_double(row.mu2) << "\n";
  }
  if (!out) throw IoError("failed writing: " + path.string());
}

std::string config_hash_of(const Json& config) {
  Json canonical = config;
  canonical.erase("outdir");
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical.dump())));
  return buf;
}

}  // namespace conformant
