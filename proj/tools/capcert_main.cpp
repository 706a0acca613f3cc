#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "capcert/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"capcert: certified capacity lower bounds for "
               "continuous-variable channels"};
  app.require_subcommand(1);

  capcert::cli::CommonOptions opts;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", opts.config_path, "experiment config (JSON)")
        ->required();
    cmd->add_option("--out", out_dir, "directory for output artifacts");
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--threads", threads,
                    "worker threads (default: CAPCERT_THREADS or 1)");
  };

  CLI::App* run = app.add_subcommand("run", "evaluate bounds over a sweep grid");
  add_common(run);
  CLI::App* mc = app.add_subcommand("montecarlo", "run a stochastic campaign");
  add_common(mc);

  std::string preset_name;
  std::string preset_out;
  CLI::App* preset = app.add_subcommand("preset", "emit a bundled config");
  preset->add_option("name", preset_name, "preset name")->required();
  preset->add_option("--out", preset_out, "write to a file instead of stdout");

  CLI::App* list = app.add_subcommand("presets", "list bundled configs");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed() || mc->parsed()) {
    if (!out_dir.empty()) opts.out_dir = out_dir;
    if (run->count("--seed") || mc->count("--seed")) opts.seed = seed;
    if (run->count("--threads") || mc->count("--threads")) opts.threads = threads;
    return run->parsed() ? capcert::cli::run_experiment(opts, std::cerr)
                         : capcert::cli::run_montecarlo(opts, std::cerr);
  }
  if (preset->parsed()) {
    std::optional<std::string> out_path;
    if (!preset_out.empty()) out_path = preset_out;
    return capcert::cli::write_preset(preset_name, out_path, std::cout,
                                      std::cerr);
  }
  if (list->parsed()) {
    for (const auto& name : capcert::cli::preset_names()) {
      std::cout << name << '\n';
    }
    return capcert::cli::kExitOk;
  }
  return capcert::cli::kExitBadConfig;
}
