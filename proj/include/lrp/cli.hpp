#ifndef LRP_CLI_HPP
#define LRP_CLI_HPP

// Experiment orchestration behind the `lrp` tool: configs, the results
// cache, the per-command pipelines and plot emitters.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrp/model.hpp"

namespace lrp::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

const std::vector<std::string>& command_names();

struct WindowConfig {
  Vertex initial_half_width = 256;
  Vertex max_half_width = Vertex{1} << 20;
  double multiplier = 8.0;

  bool operator==(const WindowConfig&) const = default;
};

/// Everything a run depends on. Grids a command does not use are ignored
/// (but still hashed, so editing them invalidates the cache entry).
struct ExperimentConfig {
  std::string command;
  std::vector<double> beta;
  std::uint64_t seed = 0;

  std::vector<std::int64_t> n;           // delta / resistance / chainck sizes
  std::int64_t replicates = 0;           // Lambda replicates
  bool fast = false;                     // Lambda fast mode
  std::vector<std::int64_t> spectral_n;  // return times are 2n
  std::int64_t environments = 0;         // annealed heat-kernel environments
  std::int64_t quenched = 0;             // frozen environments
  std::int64_t steps = 0;                // heatkernel / walk length
  std::int64_t walkers = 0;              // Monte Carlo cross-check
  std::vector<double> r;                 // exit radii (and inverse-volume radii for tails)
  std::int64_t exit_replicates = 0;
  double tail_r = 0.0;
  std::vector<double> lambda;
  std::int64_t tail_replicates = 0;
  std::int64_t draws = 0;                // chainck
  std::optional<double> delta;           // fixed delta instead of estimating it
  std::optional<double> volume_scale;    // fixed c; unset = calibrate from samples
  bool long_edges = true;
  double leak_tolerance = 0.25;
  double max_discard_rate = 0.05;
  double consistency_tolerance = 0.2;
  WindowConfig window;
  std::string out = "results";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses YAML (default) or JSON text. Unknown keys and type mismatches are
/// ConfigErrors naming the field.
ExperimentConfig parse_config(const std::string& text, bool json);
ExperimentConfig load_config(const fs::path& path);

Json to_json(const ExperimentConfig& cfg);
ExperimentConfig from_json(const Json& j);
std::string to_yaml(const ExperimentConfig& cfg);

/// Throws ConfigError naming the first offending field for `command`.
void validate(const ExperimentConfig& cfg, const std::string& command);

/// Sorted-key JSON of everything except the output directory.
std::string canonical_text(const ExperimentConfig& cfg);
/// 16 hex digits of FNV-1a over canonical_text.
std::string config_hash(const ExperimentConfig& cfg);

std::string artifact_version();

struct RunOptions {
  bool force = false;
  int threads = 0;  // 0 = leave the default
  std::optional<fs::path> out;
  /// Overrides LRP_CACHE_DIR and <out>/.cache.
  std::optional<fs::path> cache_dir;
  std::ostream* log = nullptr;
};

struct RunOutcome {
  int exit_code = 0;
  bool cache_hit = false;
  fs::path output_dir;  // <out>/<command>
  std::string message;
};

RunOutcome run(const std::string& command, const fs::path& config_path, const RunOptions& options);
RunOutcome run(const std::string& command, ExperimentConfig cfg, const RunOptions& options);

/// Series available in an output directory (lambda, spectral, exit, tails, ...).
std::vector<std::string> plot_series(const fs::path& output_dir);
/// Tidy CSV per beta for `which` (plus an SVG each when requested), written
/// into <output_dir>/plots; returns the CSV paths. Unknown series ->
/// ConfigError listing the available ones.
std::vector<fs::path> emit_plot_data(const fs::path& output_dir, const std::string& which, bool svg);

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional error bars
  std::vector<double> hi;
  bool line = false;
};

/// Log-log plot of positive points.
std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<SvgSeries>& series);

}  // namespace lrp::cli

#endif  // LRP_CLI_HPP
