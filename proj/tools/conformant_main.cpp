// Pipeline driver: gen-data, fit-gas, build-bounds, train, eval, report.
// Exit codes: 0 success, 2 config error, 3 IO error, 4 invariant failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "conformant/pipeline.hpp"

namespace {

struct CliOptions {
  std::string preset = "unicycle-desk";
  std::string config_path;
  std::string outdir;
  std::string seeds;
  std::string memories;
  std::string mode;
  int epochs = -1;
  double lr = -1.0;
};

std::vector<long long> parse_int_list(const std::string& csv) {
  std::vector<long long> out;
  size_t pos = 0;
  while (pos < csv.size()) {
    size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    out.push_back(std::stoll(csv.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

conformant::RunConfig build_config(const CliOptions& opt) {
  conformant::Json config = conformant::preset_config(opt.preset);
  if (!opt.config_path.empty()) {
    conformant::merge_config(config, conformant::load_json(opt.config_path));
  }
  if (!opt.outdir.empty()) config["outdir"] = opt.outdir;
  if (!opt.seeds.empty()) config["seeds"] = parse_int_list(opt.seeds);
  if (!opt.memories.empty()) config["gas"]["memories"] = parse_int_list(opt.memories);
  if (opt.epochs > 0) config["train"]["epochs"] = opt.epochs;
  if (opt.lr > 0.0) config["train"]["lr"] = opt.lr;
  return conformant::parse_config(config);
}

void add_common_options(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--preset", opt.preset,
                  "unicycle-desk | unicycle-paper | armax-desk | armax-paper");
  cmd->add_option("--config", opt.config_path, "JSON config overlaying the preset");
  cmd->add_option("--outdir", opt.outdir, "output directory");
  cmd->add_option("--seeds", opt.seeds, "comma-separated seed list");
  cmd->add_option("--memories", opt.memories, "comma-separated memory counts");
  cmd->add_option("--epochs", opt.epochs, "training epochs");
  cmd->add_option("--lr", opt.lr, "learning rate");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural dynamics models with guaranteed conformance to a reference model"};
  app.require_subcommand(1);
  CliOptions opt;

  CLI::App* gen = app.add_subcommand("gen-data", "generate datasets");
  CLI::App* gas = app.add_subcommand("fit-gas", "fit neural gas memories");
  CLI::App* bounds = app.add_subcommand("build-bounds", "build per-cell output bounds");
  CLI::App* train = app.add_subcommand("train", "train models");
  CLI::App* eval = app.add_subcommand("eval", "evaluate trained models");
  CLI::App* report = app.add_subcommand("report", "aggregate evaluation reports");
  for (CLI::App* cmd : {gen, gas, bounds, train, eval, report}) {
    add_common_options(cmd, opt);
  }
  train->add_option("--mode", opt.mode, "train a single mode: vanilla | auglag | constrained");

  CLI11_PARSE(app, argc, argv);

  try {
    const conformant::RunConfig config = build_config(opt);
    if (gen->parsed()) return conformant::cmd_gen_data(config);
    if (gas->parsed()) return conformant::cmd_fit_gas(config);
    if (bounds->parsed()) return conformant::cmd_build_bounds(config);
    if (train->parsed()) {
      return conformant::cmd_train(
          config, opt.mode.empty() ? std::nullopt : std::make_optional(opt.mode));
    }
    if (eval->parsed()) return conformant::cmd_eval(config);
    if (report->parsed()) return conformant::cmd_report(config);
  } catch (const conformant::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const conformant::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
