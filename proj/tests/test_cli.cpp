#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <stack>

#include <sys/wait.h>
#include <unistd.h>

#include "lrp/cli.hpp"
#include "lrp/errors.hpp"

using namespace lrp;
using namespace lrp::cli;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("lrp_test_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kDelta = R"(command: delta
beta: [1.0]
seed: 7
n: [16, 32, 64]
replicates: 10
)";

std::string config_error(const std::string& text) {
  try {
    validate(parse_config(text, false), "delta");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Tag balance only; enough to catch truncated or mis-nested output.
bool well_formed(const std::string& xml) {
  std::stack<std::string> open;
  const std::regex tag(R"(<(/?)([A-Za-z][A-Za-z0-9:_-]*)[^>]*?(/?)>)");
  for (auto it = std::sregex_iterator(xml.begin(), xml.end(), tag); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (m[3] == "/") continue;
    if (m[1] == "/") {
      if (open.empty() || open.top() != m[2]) return false;
      open.pop();
    } else {
      open.push(m[2]);
    }
  }
  return open.empty();
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(LRP_TOOL_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("yaml and json configs round-trip") {
  const ExperimentConfig c = parse_config(kDelta, false);
  CHECK(c.command == "delta");
  CHECK(c.n == std::vector<std::int64_t>{16, 32, 64});
  CHECK(c.seed == 7);
  CHECK(parse_config(to_yaml(c), false) == c);
  CHECK(parse_config(to_json(c).dump(), true) == c);
  CHECK(from_json(to_json(c)) == c);

  ExperimentConfig moved = c;
  moved.out = "elsewhere";
  CHECK(config_hash(moved) == config_hash(c));
  moved.seed = 8;
  CHECK(config_hash(moved) != config_hash(c));
  CHECK(config_hash(c).size() == 16);
  // hash is a pure function of the text
  CHECK(config_hash(parse_config(kDelta, false)) == config_hash(c));
}

TEST_CASE("config errors name the field") {
  CHECK(config_error("command: delta\nbeta: [1.0]\nn: [4, 8, 16, 32, 64]\nreplicates: 4\nbogus: 1\n")
            .find("bogus") != std::string::npos);
  CHECK(config_error("command: delta\nbeta: [-1.0]\nn: [4, 8, 16, 32, 64]\nreplicates: 4\n").find("beta") !=
        std::string::npos);
  CHECK(config_error("command: delta\nbeta: [1.0]\nn: [16, 24, 64]\nreplicates: 4\n").find("n") !=
        std::string::npos);
  CHECK(config_error("command: delta\nbeta: [1.0]\nn: [4, 8, 16, 32, 64]\nreplicates: x\n").find("replicates") !=
        std::string::npos);
  CHECK(config_error("command: spectral\nbeta: [1.0]\nn: [4, 8, 16, 32, 64]\nreplicates: 4\n").find("command") !=
        std::string::npos);
  CHECK(config_error(kDelta).empty());
}

TEST_CASE("delta run, cache hit, conflict and force") {
  TempDir tmp;
  RunOptions o;
  o.out = tmp.path;
  const ExperimentConfig cfg = parse_config(kDelta, false);
  const RunOutcome first = run("delta", cfg, o);
  REQUIRE_MESSAGE(first.exit_code == 0, first.message);
  CHECK_FALSE(first.cache_hit);
  const fs::path dir = tmp.path / "delta";
  const Json summary = Json::parse(slurp(dir / "summary.json"));
  REQUIRE(summary["results"].size() == 1);
  const Json& r = summary["results"][0];
  CHECK(r["delta_hat"].get<double>() > 0.0);
  CHECK(r["half_width"].get<double>() > 0.0);
  CHECK(fs::exists(dir / "record.json"));
  CHECK(fs::exists(dir / "lambda.csv"));

  const std::string bytes = slurp(dir / "summary.json");
  const std::string csv = slurp(dir / "lambda.csv");
  const RunOutcome second = run("delta", cfg, o);
  CHECK(second.cache_hit);
  CHECK(second.exit_code == 0);
  CHECK(slurp(dir / "summary.json") == bytes);
  CHECK(slurp(dir / "lambda.csv") == csv);

  ExperimentConfig other = cfg;
  other.seed = 99;
  const RunOutcome clash = run("delta", other, o);
  CHECK(clash.exit_code == 2);
  CHECK(clash.message.find("conflict") != std::string::npos);
  CHECK(slurp(dir / "summary.json") == bytes);

  o.force = true;
  const RunOutcome forced = run("delta", other, o);
  CHECK(forced.exit_code == 0);
  CHECK_FALSE(forced.cache_hit);
  CHECK(Json::parse(slurp(dir / "record.json"))["config_hash"] == config_hash(other));

  // a recomputation with the same config reproduces the summary exactly
  const RunOutcome again = run("delta", cfg, o);
  CHECK(again.exit_code == 0);
  CHECK(slurp(dir / "summary.json") == bytes);
}

TEST_CASE("foreign output directory is a conflict") {
  TempDir tmp;
  fs::create_directories(tmp.path / "delta");
  std::ofstream(tmp.path / "delta" / "notes.txt") << "mine\n";
  RunOptions o;
  o.out = tmp.path;
  CHECK(run("delta", parse_config(kDelta, false), o).exit_code == 2);
  CHECK(fs::exists(tmp.path / "delta" / "notes.txt"));
}

TEST_CASE("plot data and svg") {
  TempDir tmp;
  RunOptions o;
  o.out = tmp.path;
  REQUIRE(run("delta", parse_config(kDelta, false), o).exit_code == 0);
  const fs::path dir = tmp.path / "delta";
  const auto series = plot_series(dir);
  REQUIRE(std::find(series.begin(), series.end(), "lambda") != series.end());
  const auto files = emit_plot_data(dir, "lambda", true);
  REQUIRE(files.size() == 1);
  const std::string csv = slurp(files[0]);
  CHECK(csv.rfind("n,lambda_hat,se\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  fs::path svg = files[0];
  svg.replace_extension(".svg");
  const std::string s = slurp(svg);
  CHECK(s.rfind("<?xml", 0) == 0);
  CHECK(s.find("xmlns=\"http://www.w3.org/2000/svg\"") != std::string::npos);
  CHECK(well_formed(s));
  CHECK_THROWS_AS(emit_plot_data(dir, "nonsense", false), ConfigError);
}

TEST_CASE("render_svg escapes labels") {
  const std::string s = render_svg("a < b & c", "x", "y", {{"s", {1, 2, 4}, {1, 4, 16}, {}, {}, true}});
  CHECK(s.find("a &lt; b &amp; c") != std::string::npos);
  CHECK(well_formed(s));
}

TEST_CASE("command line exit codes") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "delta.yaml";
  std::ofstream(cfg) << kDelta;
  const fs::path bad = tmp.path / "bad.yaml";
  std::ofstream(bad) << "command: delta\nbeta: [1.0]\nwhat: 3\n";
  const std::string out = " --out " + (tmp.path / "res").string();
  CHECK(run_tool("delta --config " + cfg.string() + out) == 0);
  CHECK(run_tool("delta --config " + cfg.string() + out) == 0);
  CHECK(run_tool("delta --config " + bad.string() + out) == 2);
  CHECK(run_tool("delta --config " + (tmp.path / "missing.yaml").string() + out) == 2);
  CHECK(run_tool("frobnicate") == 2);
  CHECK(run_tool("plot --dir " + (tmp.path / "res" / "delta").string() + " --which lambda --svg") == 0);
}
