// lrp <command> --config <path> [--force] [--threads N] [--out DIR]
// lrp plot --dir <output dir> --which <series> [--svg]

#include <CLI11.hpp>

#include <iostream>

#include "lrp/cli.hpp"
#include "lrp/errors.hpp"

int main(int argc, char** argv) {
  namespace cli = lrp::cli;
  CLI::App app{"Long-range percolation resistance and random-walk experiments"};
  app.require_subcommand(1);

  std::string config;
  bool force = false;
  int threads = 0;
  std::string out;
  for (const auto& name : cli::command_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " pipeline");
    sub->add_option("--config", config, "YAML or JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_flag("--force", force, "recompute and replace cached results");
    sub->add_option("--threads", threads, "worker threads (default: all cores)")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output root (default: the config's out field)");
  }
  std::string dir, which;
  bool svg = false;
  auto* plot = app.add_subcommand("plot", "emit plot-ready CSV (and SVG) from a finished run");
  plot->add_option("--dir", dir, "output directory of a run, e.g. results/delta")->required();
  plot->add_option("--which", which, "series name; an unknown name lists the available ones")->required();
  plot->add_flag("--svg", svg, "also write SVG renderings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (plot->parsed()) {
    try {
      for (const auto& p : cli::emit_plot_data(dir, which, svg)) std::cout << p.string() << "\n";
      return 0;
    } catch (const lrp::ConfigError& e) {
      std::cerr << "lrp: " << e.what() << "\n";
      return 2;
    }
  }

  const std::string command = app.get_subcommands().front()->get_name();
  cli::RunOptions options;
  options.force = force;
  options.threads = threads;
  if (!out.empty()) options.out = out;
  options.log = &std::cerr;
  const cli::RunOutcome r = cli::run(command, config, options);
  if (r.exit_code == 0) {
    std::cout << (r.cache_hit ? "cache hit: " : "wrote: ") << r.output_dir.string() << "\n";
  } else {
    std::cerr << "lrp: " << r.message << "\n";
    if (!r.output_dir.empty()) std::cerr << "lrp: artifacts in " << r.output_dir.string() << "\n";
  }
  return r.exit_code;
}
