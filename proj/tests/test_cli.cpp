#include <doctest.h>

#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "saeprobe/fixture_store.hpp"
#include "test_helpers.hpp"

namespace {

int run_cli(const std::string& args, const std::filesystem::path& cwd) {
  const std::string command = "cd '" + cwd.string() + "' && env -u NEURONPEDIA_API_KEY '" +
                              std::string(SAEPROBE_CLI_PATH) + "' " + args + " >cli.log 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("end to end through the command line") {
  const auto dir = testing_support::scratch_dir("cli");
  CHECK(run_cli("collect --seed 42 --targets gpt2-small/res-jb", dir) == 0);
  CHECK(run_cli("analyze --seed 42 --targets gpt2-small/res-jb --intra-def pairwise", dir) == 0);
  CHECK(run_cli("report --formats csv,md", dir) == 0);
  CHECK(std::filesystem::exists(dir / "out" / "overlap.md"));
  CHECK(std::filesystem::exists(dir / "out" / "geo_gpt2-small_res-jb.csv"));
  CHECK_FALSE(std::filesystem::exists(dir / "out" / "geo_gpt2-small_res-jb.svg"));
  CHECK(saeprobe::read_file(dir / "out" / "overlap.csv").find("intra_definition: pairwise_mean") !=
        std::string::npos);
}

TEST_CASE("exit codes") {
  const auto dir = testing_support::scratch_dir("cli_codes");
  CHECK(run_cli("--help", dir) == 0);
  CHECK(saeprobe::read_file(dir / "cli.log").find("NEURONPEDIA_API_KEY") != std::string::npos);
  CHECK(run_cli("collect --intra-def bogus --seed 1", dir) == 2);
  CHECK(run_cli("report --formats pdf", dir) == 2);
  CHECK(run_cli("collect --backend live", dir) == 6);
  CHECK(run_cli("collect", dir) == 6);
  CHECK(run_cli("analyze --seed 1", dir) == 4);
  CHECK(run_cli("report", dir) == 4);
  saeprobe::write_file_atomic(dir / "out" / "bundle.json", "{\"schema_version\": 1}");
  CHECK(run_cli("report", dir) == 5);
  CHECK(run_cli("lexicon validate", dir) == 0);
  saeprobe::write_file_atomic(dir / "bad.json", "{\"lexicons\": [}");
  CHECK(run_cli("lexicon validate bad.json", dir) == 5);
}

TEST_CASE("flags override the config file") {
  const auto dir = testing_support::scratch_dir("cli_config");
  saeprobe::write_file_atomic(dir / "run.json",
                              R"({"seed": 9, "k": 5, "targets": ["gpt2-small/res-jb"], "religions": ["islam"]})");
  CHECK(run_cli("collect --config run.json --k 7", dir) == 0);
  const auto manifest = nlohmann::json::parse(saeprobe::read_file(dir / "cache" / "manifest.json"));
  CHECK(manifest["k"] == 7);
  CHECK(manifest["seed"] == 9);
  CHECK(manifest["cells"] == 13 + 12);
}
