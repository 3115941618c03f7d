#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CS_CLI_BINARY) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return {WEXITSTATUS(status)};
}

std::string tiny_config(const std::string& out_dir) {
  const fs::path p = fs::temp_directory_path() / "cs_cli_cfg.json";
  std::ofstream f(p);
  f << R"({
    "schema": 1,
    "seed": 3,
    "output_dir": ")" << out_dir << R"(",
    "tools": {"train": [{"name": "t80", "blade_width": 0.08, "bend_stiffness": 2.0}],
              "unseen": {"name": "u90", "blade_width": 0.09, "bend_stiffness": 3.0}},
    "dataset": {"episodes_per_tool": 4, "length": 8, "point_count": 128,
                "split": [0.5, 0.25, 0.25],
                "render": {"density": 2500.0}},
    "model": {"point_count": 128},
    "goals_dir": ")" << std::string(CS_SOURCE_DIR) << R"(/configs/goals"
  })";
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

}  // namespace

TEST_CASE("cli error codes") {
  CHECK(run_cli("collect --config /nonexistent.json").exit_code == 2);

  const fs::path bad = fs::temp_directory_path() / "cs_bad_cfg.json";
  {
    std::ofstream f(bad);
    f << "{\"schema\": 99}";
  }
  CHECK(run_cli("collect --config " + bad.string()).exit_code == 3);
  {
    std::ofstream f(bad);
    f << "not json";
  }
  CHECK(run_cli("collect --config " + bad.string()).exit_code == 3);
  fs::remove(bad);

  // Downstream command without its upstream artifacts: missing-file code.
  const std::string cfg = tiny_config((fs::temp_directory_path() / "cs_cli_none").string());
  CHECK(run_cli("train --config " + cfg).exit_code == 2);
}

TEST_CASE("cli collect is idempotent and deterministic") {
  const fs::path out = fs::temp_directory_path() / "cs_cli_out";
  fs::remove_all(out);
  const std::string cfg = tiny_config(out.string());

  REQUIRE(run_cli("collect --config " + cfg).exit_code == 0);
  REQUIRE(fs::exists(out / "dataset" / "manifest.json"));
  const std::string manifest_a = slurp(out / "dataset" / "manifest.json");
  const std::string episode_a = slurp(out / "dataset" / "ep_t80_0.jsonl");
  CHECK(episode_a.find("\"config_hash\"") != std::string::npos);

  REQUIRE(run_cli("collect --config " + cfg).exit_code == 0);
  CHECK(slurp(out / "dataset" / "manifest.json") == manifest_a);
  CHECK(slurp(out / "dataset" / "ep_t80_0.jsonl") == episode_a);

  // --set overrides change the dataset deterministically.
  REQUIRE(run_cli("collect --config " + cfg + " --set dataset.length=6")
              .exit_code == 0);
  CHECK(slurp(out / "dataset" / "ep_t80_0.jsonl") != episode_a);

  fs::remove_all(out);
}

TEST_CASE("cli seed override changes outputs") {
  const fs::path out = fs::temp_directory_path() / "cs_cli_seed";
  fs::remove_all(out);
  const std::string cfg = tiny_config(out.string());
  REQUIRE(run_cli("collect --config " + cfg).exit_code == 0);
  const std::string a = slurp(out / "dataset" / "ep_t80_0.jsonl");
  REQUIRE(run_cli("collect --config " + cfg + " --seed 99").exit_code == 0);
  const std::string b = slurp(out / "dataset" / "ep_t80_0.jsonl");
  CHECK(a != b);
  fs::remove_all(out);
}
