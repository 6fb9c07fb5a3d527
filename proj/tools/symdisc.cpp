// Command-line front end: symdisc <command> [--preset NAME] [--config FILE]
// [--set key=value]... [--out results.json]

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "symdisc/pipeline.hpp"

namespace {

struct Invocation {
  std::string preset;
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  bool quiet = false;
  bool print_config = false;
};

void add_common(CLI::App* sub, Invocation& inv) {
  sub->add_option("--preset", inv.preset, "Preset name (a JSON file in the preset directory)");
  sub->add_option("--config", inv.config, "Config file (JSON)");
  sub->add_option("--set", inv.sets, "Override a config key: key.path=value")->take_all();
  sub->add_option("--out", inv.out, "Results file; CSV side files are written next to it");
  sub->add_flag("--quiet", inv.quiet, "Suppress progress output on stderr");
  sub->add_flag("--print-config", inv.print_config, "Print the resolved config and exit");
}

void write_results(const nlohmann::json& doc, const std::string& path) {
  if (path.empty()) {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  std::ofstream os(path);
  if (!os) {
    std::fprintf(stderr, "symdisc: cannot write results to %s\n", path.c_str());
    return;
  }
  os << doc.dump(2) << "\n";
}

int execute(const std::string& command, const Invocation& inv) {
  using namespace symdisc;
  pipeline::RunContext ctx;
  ctx.out_path = inv.out;
  ctx.quiet = inv.quiet;
  try {
    ctx.stage = "config";
    std::optional<nlohmann::json> preset;
    std::optional<nlohmann::json> file;
    if (!inv.preset.empty()) preset = pipeline::load_preset(inv.preset);
    if (!inv.config.empty()) file = pipeline::read_json_file(inv.config);
    std::vector<std::string> warnings;
    ctx.config = pipeline::resolve_config(command, preset, file, inv.sets, &warnings);
    for (const auto& w : warnings) ctx.warn(w);
    if (inv.print_config) {
      std::cout << ctx.config.dump(2) << "\n";
      return 0;
    }
    if (!inv.out.empty()) {
      const auto parent = std::filesystem::path(inv.out).parent_path();
      std::error_code ec;
      if (!parent.empty()) std::filesystem::create_directories(parent, ec);
    }
    pipeline::run(ctx);
  } catch (const std::exception& e) {
    const int code = pipeline::exit_code_for(e);
    std::fprintf(stderr, "symdisc: %s failed in stage '%s': %s\n", code == 3 ? "numeric failure" : "error",
                 ctx.stage.c_str(), e.what());
    if (!ctx.config.is_null() && !inv.out.empty()) {
      write_results(pipeline::results_document(ctx, "failed", e.what()), inv.out);
    }
    return code;
  }
  write_results(pipeline::results_document(ctx, "ok"), inv.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetry discovery, enforcement and scoring for learned functions"};
  app.set_version_flag("--version", std::string(SYMDISC_VERSION));
  app.require_subcommand(1);
  Invocation inv;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"discover", "Estimate symmetry generators of a trained model"},
      {"enforce", "Train baseline and symmetry-regularized models"},
      {"invariants", "Build an invariant polynomial basis and check it"},
      {"flow", "Integrate a vector field and emit trace/grid CSVs"},
      {"score", "Similarity and symmetry-score jobs"},
      {"generate", "Write a preset dataset as CSV"}};
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), inv);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return execute(app.get_subcommands().front()->get_name(), inv);
}
