#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "jumpdiff/cli.hpp"

using namespace jumpdiff;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const auto dir = fs::temp_directory_path() / "jumpdiff_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

bool dirs_equal(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> files_a, files_b;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) files_a.push_back(fs::relative(e.path(), a));
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) files_b.push_back(fs::relative(e.path(), b));
    std::sort(files_a.begin(), files_a.end());
    std::sort(files_b.begin(), files_b.end());
    if (files_a != files_b) return false;
    for (const auto& rel : files_a)
        if (slurp(a / rel) != slurp(b / rel)) return false;
    return true;
}

int run_cli(std::initializer_list<std::string> args) {
    return cli::run(std::vector<std::string>(args));
}

}  // namespace

TEST_CASE("selftest passes") {
    CHECK(run_cli({"selftest"}) == 0);
}

TEST_CASE("unknown subcommands and flags are usage errors") {
    CHECK(run_cli({"frobnicate"}) == 1);
    CHECK(run_cli({"gen-corpus", "--bogus-flag", "1"}) == 1);
    CHECK(run_cli({}) == 1);
}

TEST_CASE("gen-corpus requires a seed") {
    const auto dir = temp_dir("needs_seed");
    CHECK(run_cli({"gen-corpus", "--out", (dir / "c").string()}) == 1);
}

TEST_CASE("gen-corpus rejects an invalid mixture naming the field") {
    const auto dir = temp_dir("bad_mixture");
    const auto cfg_path = dir / "cfg.json";
    std::ofstream(cfg_path) << R"({"corpus": {"durations": {"weights": [1.0],
        "components": [{"type": "point", "value": 0}]}}})";
    CHECK(run_cli({"gen-corpus", "--out", (dir / "c").string(), "--seed", "3", "--config",
                   cfg_path.string()}) == 1);
}

TEST_CASE("pipeline subcommands are deterministic and composable") {
    const auto dir = temp_dir("pipeline");
    const auto cfg_path = dir / "cfg.json";
    std::ofstream(cfg_path) << R"({
        "corpus": {"dimension": 4, "num_phones": 3, "num_silence": 1,
                    "utterances": 4, "min_phones": 2, "max_phones": 3,
                    "silence_prob": 0.5},
        "train": {"epochs": 2, "learning_rate": 0.001, "batch_size": 4,
                   "location": {"hidden": 6, "layers": 2, "kernel": 3},
                   "content": {"hidden": 6, "layers": 1, "kernel": 3}}
    })";

    const auto corpus_a = dir / "corpus_a";
    const auto corpus_b = dir / "corpus_b";
    REQUIRE(run_cli({"gen-corpus", "--out", corpus_a.string(), "--seed", "11", "--config",
                     cfg_path.string()}) == 0);
    REQUIRE(run_cli({"gen-corpus", "--out", corpus_b.string(), "--seed", "11", "--config",
                     cfg_path.string()}) == 0);
    CHECK(dirs_equal(corpus_a, corpus_b));

    const auto corrupt_a = dir / "corrupt_a";
    const auto corrupt_b = dir / "corrupt_b";
    REQUIRE(run_cli({"corrupt", "--corpus", corpus_a.string(), "--utt", "0", "--t", "0.55",
                     "--seed", "7", "--out", corrupt_a.string()}) == 0);
    REQUIRE(run_cli({"corrupt", "--corpus", corpus_a.string(), "--utt", "0", "--t", "0.55",
                     "--seed", "7", "--out", corrupt_b.string()}) == 0);
    CHECK(dirs_equal(corrupt_a, corrupt_b));
    CHECK(fs::exists(corrupt_a / "xt.jdsp"));
    CHECK(fs::exists(corrupt_a / "corrupt.json"));

    const auto models_a = dir / "models_a";
    const auto models_b = dir / "models_b";
    REQUIRE(run_cli({"train", "--corpus", corpus_a.string(), "--out", models_a.string(),
                     "--seed", "5", "--config", cfg_path.string()}) == 0);
    REQUIRE(run_cli({"train", "--corpus", corpus_a.string(), "--out", models_b.string(),
                     "--seed", "5", "--config", cfg_path.string()}) == 0);
    CHECK(dirs_equal(models_a, models_b));

    const auto synth_a = dir / "synth_a";
    const auto synth_b = dir / "synth_b";
    for (const auto* out : {&synth_a, &synth_b})
        REQUIRE(run_cli({"synth", "--corpus", corpus_a.string(), "--out", out->string(), "--utt",
                         "0", "--seed", "9", "--mode", "udd", "--solver", "ode", "--steps", "12",
                         "--alloc", "argmax", "--predictors", "trained", "--models",
                         models_a.string()}) == 0);
    CHECK(dirs_equal(synth_a, synth_b));
    CHECK(fs::exists(synth_a / "utt_0000_synth.jdsp"));

    const auto eval_a = dir / "eval_a.csv";
    const auto eval_b = dir / "eval_b.csv";
    REQUIRE(run_cli({"eval", "--corpus", corpus_a.string(), "--hyp", synth_a.string(), "--out",
                     eval_a.string()}) == 0);
    REQUIRE(run_cli({"eval", "--corpus", corpus_a.string(), "--hyp", synth_a.string(), "--out",
                     eval_b.string()}) == 0);
    CHECK(slurp(eval_a) == slurp(eval_b));
    std::ifstream is(eval_a);
    std::string header;
    std::getline(is, header);
    CHECK(header == "utterance,metric,value");
}

TEST_CASE("synth with oracle predictors rejects non-unit speed") {
    const auto dir = temp_dir("oracle_speed");
    REQUIRE(run_cli({"gen-corpus", "--out", (dir / "c").string(), "--seed", "2", "--utterances",
                     "2"}) == 0);
    CHECK(run_cli({"synth", "--corpus", (dir / "c").string(), "--out", (dir / "s").string(),
                   "--utt", "0", "--seed", "1", "--speed", "0.75"}) == 1);
}

TEST_CASE("out-of-range utterance index is a validation error") {
    const auto dir = temp_dir("bad_utt");
    REQUIRE(run_cli({"gen-corpus", "--out", (dir / "c").string(), "--seed", "2", "--utterances",
                     "2"}) == 0);
    CHECK(run_cli({"corrupt", "--corpus", (dir / "c").string(), "--utt", "99", "--t", "0.5",
                   "--seed", "1", "--out", (dir / "x").string()}) == 1);
}
