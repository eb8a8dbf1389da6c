// End-to-end checks of the command line binary (spawned as a subprocess).

#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("svrl_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
    const std::string command = std::string(SVRL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run_cli("") == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("--help") == 0);
    TempDir dir;
    CHECK(run_cli("train --mode rloo --problems missing.jsonl --out " + dir.file("x")) == 2);
}

TEST_CASE("gen-problems is reproducible byte for byte") {
    TempDir dir;
    const std::string base = "gen-problems --count 50 --bins 4 --alphabet-size 8 --seed 9";
    REQUIRE(run_cli(base + " --out " + dir.file("a")) == 0);
    REQUIRE(run_cli(base + " --out " + dir.file("b")) == 0);
    CHECK(slurp(dir.file("a/problems.jsonl")) == slurp(dir.file("b/problems.jsonl")));
    CHECK(fs::exists(dir.file("a/manifest.json")));
    CHECK(fs::exists(dir.file("a/resolved_config.json")));

    nlohmann::json resolved = nlohmann::json::parse(slurp(dir.file("a/resolved_config.json")));
    CHECK(resolved.at("count") == 50);
    CHECK(resolved.at("seed") == 9);
}

TEST_CASE("zero-count problem sets still carry a manifest") {
    TempDir dir;
    REQUIRE(run_cli("gen-problems --count 0 --bins 2 --alphabet-size 4 --seed 1 --out " +
                    dir.file("z")) == 0);
    CHECK(slurp(dir.file("z/problems.jsonl")).empty());
    nlohmann::json manifest = nlohmann::json::parse(slurp(dir.file("z/manifest.json")));
    CHECK(manifest.at("problems") == 0);
}

TEST_CASE("malformed problem files exit with code 2 and name the line") {
    TempDir dir;
    {
        std::ofstream out(dir.file("bad.jsonl"));
        out << R"({"id":"p0","difficulty_bin":0,"golden_answer":"A","alphabet_size":4})"
            << "\n";
        out << "this is not json\n";
    }
    const std::string command = std::string(SVRL_CLI_PATH) + " eval --problems " +
                                dir.file("bad.jsonl") + " --policy none.json --out " +
                                dir.file("out") + " 2>" + dir.file("stderr.txt");
    const int status = std::system(command.c_str());
    CHECK(WEXITSTATUS(status) == 2);
    CHECK(slurp(dir.file("stderr.txt")).find(":2:") != std::string::npos);
}

TEST_CASE("full pipeline: gen, sft, train, eval, report") {
    TempDir dir;
    REQUIRE(run_cli("gen-problems --count 24 --bins 2 --alphabet-size 6 --seed 3 --out " +
                    dir.file("data")) == 0);

    // A mid-strength starting policy (zero logits) comes from train's
    // default; gen-sft needs an explicit checkpoint, so make one via a
    // zero-step training run.
    REQUIRE(run_cli("train --mode rloo --steps 0 --problems " + dir.file("data/problems.jsonl") +
                    " --out " + dir.file("init") + " --seed 1") == 0);
    const std::string policy = dir.file("init/policy_final.json");

    REQUIRE(run_cli("gen-sft --problems " + dir.file("data/problems.jsonl") + " --policy " +
                    policy + " --seed 5 --out " + dir.file("sft")) == 0);
    CHECK(fs::exists(dir.file("sft/sft.jsonl")));
    CHECK(fs::exists(dir.file("sft/manifest.json")));
    nlohmann::json manifest = nlohmann::json::parse(slurp(dir.file("sft/manifest.json")));
    CHECK(manifest.contains("skipped_no_correct"));

    REQUIRE(run_cli("train --mode sft --steps 5 --lr 0.1 --sft " + dir.file("sft/sft.jsonl") +
                    " --problems " + dir.file("data/problems.jsonl") + " --policy " + policy +
                    " --seed 2 --out " + dir.file("sft_run")) == 0);
    const std::string sft_log = slurp(dir.file("sft_run/train_log.csv"));
    CHECK(sft_log.rfind("step,loss\n", 0) == 0);
    {
        // Logged losses decrease monotonically under gradient descent.
        std::vector<double> losses;
        std::size_t pos = sft_log.find('\n') + 1;
        while (pos < sft_log.size()) {
            std::size_t nl = sft_log.find('\n', pos);
            const std::string row = sft_log.substr(pos, nl - pos);
            losses.push_back(std::stod(row.substr(row.find(',') + 1)));
            pos = nl + 1;
        }
        REQUIRE(losses.size() == 5);
        for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
    }

    REQUIRE(run_cli("train --mode process --steps 3 --lr 0.05 --samples-per-prompt 4 "
                    "--problems " + dir.file("data/problems.jsonl") + " --policy " +
                    dir.file("sft_run/policy_final.json") + " --seed 4 --out " +
                    dir.file("prl_run")) == 0);
    nlohmann::json resolved =
        nlohmann::json::parse(slurp(dir.file("prl_run/resolved_config.json")));
    CHECK(resolved.at("mode") == "process");
    CHECK(resolved.at("lr") == 0.05);
    CHECK(resolved.at("beta") == 0.05);  // default carried into the resolved config

    REQUIRE(run_cli("eval --problems " + dir.file("data/problems.jsonl") + " --policy " +
                    dir.file("prl_run/policy_final.json") + " --n-samples 2 --seed 6 --out " +
                    dir.file("eval_a")) == 0);
    REQUIRE(run_cli("eval --problems " + dir.file("data/problems.jsonl") + " --policy " +
                    policy + " --n-samples 2 --seed 6 --out " + dir.file("eval_b")) == 0);

    REQUIRE(run_cli("report --out " + dir.file("comparison.csv") + " " + dir.file("eval_a") +
                    " " + dir.file("eval_b")) == 0);
    const std::string merged = slurp(dir.file("comparison.csv"));
    CHECK(merged.rfind("run,checkpoint", 0) == 0);
    std::size_t rows = 0;
    for (char c : merged) rows += c == '\n';
    CHECK(rows == 3);  // header + two runs

    SUBCASE("process mode can dump reward-context groups") {
        std::ofstream(dir.file("groups_config.json"))
            << R"({"dump_groups": true, "steps": 2, "lr": 0.01})" << "\n";
        REQUIRE(run_cli("train --mode process --config " + dir.file("groups_config.json") +
                        " --problems " + dir.file("data/problems.jsonl") + " --policy " +
                        policy + " --seed 3 --out " + dir.file("grp_run")) == 0);
        const std::string dump = slurp(dir.file("grp_run/groups.jsonl"));
        const std::size_t nl = dump.find('\n');
        REQUIRE(nl != std::string::npos);
        nlohmann::json first = nlohmann::json::parse(dump.substr(0, nl));
        CHECK(first.at("step") == 0);
        CHECK(first.at("context_key").is_array());
        CHECK(first.at("group_size").get<int>() >= 1);
        CHECK(first.contains("baseline"));
    }

    SUBCASE("offline mode honors --filter-range and --baseline-mode") {
        REQUIRE(run_cli("train --mode offline-prl --problems " +
                        dir.file("data/problems.jsonl") + " --policy " + policy +
                        " --seed 8 --out " + dir.file("off_run") +
                        " --filter-range 0:1 --baseline-mode reward_context_group "
                        "--lr 0.01") == 0);
        nlohmann::json off =
            nlohmann::json::parse(slurp(dir.file("off_run/resolved_config.json")));
        CHECK(off.at("filter_lo") == 0.0);
        CHECK(off.at("filter_hi") == 1.0);
        CHECK(off.at("baseline_mode") == "reward_context_group");
        const std::string log = slurp(dir.file("off_run/train_log.csv"));
        CHECK(log.find("baseline_mode") != std::string::npos);
        CHECK(log.find("reward_context_group") != std::string::npos);
        // The sampling pass is dumped for analysis: store, bin manifest, and
        // per-action rewards.
        CHECK(fs::exists(dir.file("off_run/store_iter_000.jsonl")));
        CHECK(fs::exists(dir.file("off_run/bins_iter_000.json")));
        CHECK(fs::exists(dir.file("off_run/rewards_iter_000.jsonl")));
    }
}

TEST_CASE("a saturated policy trains to a flat log") {
    TempDir dir;
    REQUIRE(run_cli("gen-problems --count 8 --bins 1 --alphabet-size 4 --seed 5 --out " +
                    dir.file("data")) == 0);
    {
        std::ofstream out(dir.file("saturated.json"));
        out << R"({"solve[0]": 30.0, "verify_tp[0]": 30.0, "verify_tn[0]": 30.0})" << "\n";
    }
    REQUIRE(run_cli("train --mode rloo --steps 3 --lr 0.1 --problems " +
                    dir.file("data/problems.jsonl") + " --policy " + dir.file("saturated.json") +
                    " --seed 12 --out " + dir.file("run")) == 0);
    const std::string log = slurp(dir.file("run/train_log.csv"));
    std::size_t pos = log.find('\n') + 1;
    int rows = 0;
    while (pos < log.size()) {
        std::size_t nl = log.find('\n', pos);
        const std::string row = log.substr(pos, nl - pos);
        CHECK(row == std::to_string(rows) + ",1,0,0,0,1");  // reward 1, advantage 0
        pos = nl + 1;
        ++rows;
    }
    CHECK(rows == 3);
    // Parameters unchanged (formatting aside).
    CHECK(nlohmann::json::parse(slurp(dir.file("run/policy_final.json"))) ==
          nlohmann::json::parse(slurp(dir.file("saturated.json"))));
}

TEST_CASE("evaluation is deterministic under a fixed seed") {
    TempDir dir;
    REQUIRE(run_cli("gen-problems --count 12 --bins 2 --alphabet-size 4 --seed 7 --out " +
                    dir.file("data")) == 0);
    REQUIRE(run_cli("train --mode rloo --steps 0 --problems " + dir.file("data/problems.jsonl") +
                    " --out " + dir.file("init") + " --seed 1") == 0);
    const std::string eval_cmd = "eval --problems " + dir.file("data/problems.jsonl") +
                                 " --policy " + dir.file("init/policy_final.json") +
                                 " --n-samples 3 --seed 21 --out ";
    REQUIRE(run_cli(eval_cmd + dir.file("e1")) == 0);
    REQUIRE(run_cli(eval_cmd + dir.file("e2")) == 0);
    CHECK(slurp(dir.file("e1/metrics.json")) == slurp(dir.file("e2/metrics.json")));
    CHECK(slurp(dir.file("e1/metrics.csv")) == slurp(dir.file("e2/metrics.csv")));
    // Raw counts ride along with every rate.
    CHECK(slurp(dir.file("e1/metrics.json")).find("denominator") != std::string::npos);

    SUBCASE("a missing checkpoint is a data error") {
        CHECK(run_cli("eval --problems " + dir.file("data/problems.jsonl") +
                      " --policy " + dir.file("nope.json") + " --out " + dir.file("e3")) == 2);
    }
    SUBCASE("single-run reports pass through") {
        REQUIRE(run_cli("report --out " + dir.file("single.csv") + " " + dir.file("e1")) == 0);
        const std::string merged = slurp(dir.file("single.csv"));
        std::size_t rows = 0;
        for (char c : merged) rows += c == '\n';
        CHECK(rows == 2);
    }
    SUBCASE("mismatched report schemas name the column") {
        fs::create_directories(dir.file("odd"));
        std::ofstream(dir.file("odd/metrics.csv")) << "checkpoint,evalset,surprise\nx,y,1\n";
        const std::string command = std::string(SVRL_CLI_PATH) + " report --out " +
                                    dir.file("m.csv") + " " + dir.file("e1") + " " +
                                    dir.file("odd") + " 2>" + dir.file("err.txt");
        const int status = std::system(command.c_str());
        CHECK(WEXITSTATUS(status) == 2);
        const std::string err = slurp(dir.file("err.txt"));
        CHECK(err.find("schema mismatch") != std::string::npos);
        CHECK(err.find("surprise") != std::string::npos);
    }
}

TEST_CASE("training logs are byte-identical across reruns with one seed") {
    TempDir dir;
    REQUIRE(run_cli("gen-problems --count 16 --bins 1 --alphabet-size 4 --seed 2 --out " +
                    dir.file("data")) == 0);
    const std::string train = "train --mode rloo --steps 4 --lr 0.02 --problems " +
                              dir.file("data/problems.jsonl") + " --seed 77 --out ";
    REQUIRE(run_cli(train + dir.file("r1")) == 0);
    REQUIRE(run_cli(train + dir.file("r2")) == 0);
    CHECK(slurp(dir.file("r1/train_log.csv")) == slurp(dir.file("r2/train_log.csv")));
    CHECK(slurp(dir.file("r1/policy_final.json")) == slurp(dir.file("r2/policy_final.json")));
}

TEST_CASE("config file values yield to explicit flags") {
    TempDir dir;
    REQUIRE(run_cli("gen-problems --count 8 --bins 1 --alphabet-size 4 --seed 2 --out " +
                    dir.file("data")) == 0);
    {
        std::ofstream out(dir.file("config.json"));
        out << R"({"steps": 2, "lr": 0.5})" << "\n";
    }
    REQUIRE(run_cli("train --mode rloo --config " + dir.file("config.json") +
                    " --lr 0.001 --problems " + dir.file("data/problems.jsonl") +
                    " --seed 1 --out " + dir.file("run")) == 0);
    nlohmann::json resolved =
        nlohmann::json::parse(slurp(dir.file("run/resolved_config.json")));
    CHECK(resolved.at("steps") == 2);     // from the config file
    CHECK(resolved.at("lr") == 0.001);    // flag wins
    std::size_t rows = 0;
    const std::string log = slurp(dir.file("run/train_log.csv"));
    for (char c : log) rows += c == '\n';
    CHECK(rows == 3);  // header + two steps
}
