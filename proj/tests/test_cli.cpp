#include <doctest.h>

#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "mtr/corpus.hpp"
#include "test_support.hpp"

using nlohmann::json;
using mtrtest::contains;
using mtrtest::TempDir;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

const char* cli_path() {
    const char* path = std::getenv("MTR_CLI");
    REQUIRE_MESSAGE(path != nullptr, "MTR_CLI must point at the mtr binary (set by ctest)");
    return path;
}

CmdResult run_cli(const TempDir& dir, const std::string& args) {
    std::string out_file = dir.file("cmd_stdout.txt");
    std::string err_file = dir.file("cmd_stderr.txt");
    std::string command =
        std::string(cli_path()) + " " + args + " > " + out_file + " 2> " + err_file;
    int status = std::system(command.c_str());
    CmdResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = mtr::read_file(out_file);
    result.err = mtr::read_file(err_file);
    return result;
}

/// Shared tiny synthetic dataset written into dir; returns the common flags.
std::string synth_into(const TempDir& dir, const std::string& extra = "") {
    std::string flags = "--tools " + dir.file("tools.jsonl") + " --samples " +
                        dir.file("samples.jsonl");
    CmdResult r = run_cli(dir, "corpus synth " + flags +
                                   " --tool-count 30 --sample-count 20 --vocab-size 150"
                                   " --golden-sizes 1,2 --dropout 1.0 --seed 5 " +
                                   extra);
    REQUIRE(r.exit_code == 0);
    return flags;
}

} // namespace

TEST_CASE("corpus synth writes deterministic files") {
    TempDir dir;
    synth_into(dir);
    std::string tools1 = mtr::read_file(dir.file("tools.jsonl"));
    std::string samples1 = mtr::read_file(dir.file("samples.jsonl"));
    CHECK(!tools1.empty());
    synth_into(dir);
    CHECK(mtr::read_file(dir.file("tools.jsonl")) == tools1);
    CHECK(mtr::read_file(dir.file("samples.jsonl")) == samples1);
}

TEST_CASE("corpus validate reports statistics and range warnings") {
    TempDir dir;
    std::string flags = synth_into(dir);
    CmdResult r = run_cli(dir, "corpus validate " + flags);
    CHECK(r.exit_code == 0);
    json doc = json::parse(r.out);
    CHECK(doc["tools"] == 30);
    CHECK(doc["warnings"].empty());

    CmdResult ranged =
        run_cli(dir, "corpus validate " + flags + " --min-tokens 1 --max-tokens 2");
    CHECK(ranged.exit_code == 0);
    CHECK(!json::parse(ranged.out)["warnings"].empty());
}

TEST_CASE("retrieve lists the top k and validates k against M") {
    TempDir dir;
    synth_into(dir);
    std::string tools = "--tools " + dir.file("tools.jsonl");

    CmdResult ok = run_cli(dir, "retrieve " + tools + " --query \"term003\" --k 3");
    CHECK(ok.exit_code == 0);
    size_t lines = std::count(ok.out.begin(), ok.out.end(), '\n');
    CHECK(lines == 3);
    CHECK(contains(ok.out, "1\t"));

    CmdResult bad = run_cli(dir, "retrieve " + tools + " --query \"x\" --k 31");
    CHECK(bad.exit_code == 1);
    CHECK(contains(bad.err, "must lie in"));

    CmdResult random_kind = run_cli(dir, "retrieve " + tools + " --query \"x\" --retriever random");
    CHECK(random_kind.exit_code == 1);

    CmdResult dense = run_cli(dir, "retrieve " + tools + " --query \"term003\" --k 2"
                                   " --retriever dense --provider hashed");
    CHECK(dense.exit_code == 0);
}

TEST_CASE("eval writes report files and echoes the effective config") {
    TempDir dir;
    std::string flags = synth_into(dir);
    std::string out_prefix = dir.file("report");
    CmdResult r = run_cli(dir, "eval " + flags + " --k 5,10 --seed 9 --out " + out_prefix);
    REQUIRE(r.exit_code == 0);

    json doc = json::parse(mtr::read_file(out_prefix + ".json"));
    CHECK(doc["config"]["seed"] == 9);
    CHECK(doc["config"]["retriever"] == "bm25");
    CHECK(doc["rows"].size() == 18); // 20 samples, 2 train
    CHECK(doc["aggregates_percent"].contains("sufficiency@5"));

    std::string csv = mtr::read_file(out_prefix + ".csv");
    CHECK(contains(csv, "metric,k,value_percent"));

    SUBCASE("a second run is byte-identical") {
        std::string json1 = mtr::read_file(out_prefix + ".json");
        std::string csv1 = mtr::read_file(out_prefix + ".csv");
        CmdResult again = run_cli(dir, "eval " + flags + " --k 5,10 --seed 9 --out " + out_prefix);
        CHECK(again.exit_code == 0);
        CHECK(mtr::read_file(out_prefix + ".json") == json1);
        CHECK(mtr::read_file(out_prefix + ".csv") == csv1);
    }
    SUBCASE("golden-oracle rewriter is allowed for eval and lifts sufficiency") {
        CmdResult boosted = run_cli(dir, "eval " + flags +
                                             " --k 5 --rewriter golden-oracle --out " +
                                             dir.file("boosted"));
        REQUIRE(boosted.exit_code == 0);
        json b = json::parse(mtr::read_file(dir.file("boosted") + ".json"));
        CHECK(b["aggregates_percent"]["sufficiency@5"] == 100.0);
    }
    SUBCASE("random baseline runs through eval") {
        CmdResult rb = run_cli(dir, "eval " + flags +
                                        " --k 5 --retriever random --trials 200 --out " +
                                        dir.file("random"));
        CHECK(rb.exit_code == 0);
        json b = json::parse(mtr::read_file(dir.file("random") + ".json"));
        CHECK(b["retriever"] == "random");
    }
}

TEST_CASE("rewrite prints one rewritten query") {
    TempDir dir;
    synth_into(dir);
    std::string tools = "--tools " + dir.file("tools.jsonl");

    CmdResult identity =
        run_cli(dir, "rewrite " + tools + " --rewriter identity --query \"find the tool\"");
    CHECK(identity.exit_code == 0);
    CHECK(identity.out == "find the tool\n");

    CmdResult noise1 =
        run_cli(dir, "rewrite " + tools + " --rewriter noise --seed 4 --query \"a b c d e\"");
    CmdResult noise2 =
        run_cli(dir, "rewrite " + tools + " --rewriter noise --seed 4 --query \"a b c d e\"");
    CHECK(noise1.exit_code == 0);
    CHECK(noise1.out == noise2.out);

    SUBCASE("golden-oracle is refused without labels") {
        CmdResult refused =
            run_cli(dir, "rewrite " + tools + " --rewriter golden-oracle --query \"x\"");
        CHECK(refused.exit_code == 1);
        CHECK(contains(refused.err, "golden labels"));
    }
    SUBCASE("a rewriter kind is required") {
        CmdResult missing = run_cli(dir, "rewrite " + tools + " --query \"x\"");
        CHECK(missing.exit_code == 1);
    }
}

TEST_CASE("dpo gen and train-toy round trip") {
    TempDir dir;
    std::string flags = synth_into(dir);
    std::string dataset = dir.file("pairs.jsonl");

    CmdResult gen = run_cli(dir, "dpo gen " + flags +
                                     " --rewriter golden-oracle,noise --m 10 --seed 3 --out " +
                                     dataset);
    REQUIRE(gen.exit_code == 0);
    json summary = json::parse(gen.out);
    CHECK(summary["pairs"] == 20); // 2 train samples x m=10, no ties at full dropout
    std::string bytes = mtr::read_file(dataset);
    size_t lines = std::count(bytes.begin(), bytes.end(), '\n');
    CHECK(lines == 20);

    SUBCASE("regeneration is byte-identical") {
        CmdResult again = run_cli(dir, "dpo gen " + flags +
                                           " --rewriter golden-oracle,noise --m 10 --seed 3 --out " +
                                           dataset);
        CHECK(again.exit_code == 0);
        CHECK(mtr::read_file(dataset) == bytes);
    }
    SUBCASE("train-toy writes a policy file with loss history") {
        std::string weights = dir.file("policy.json");
        CmdResult train = run_cli(dir, "dpo train-toy --dataset " + dataset +
                                           " --epochs 2 --batch 8 --seed 1 --out " + weights);
        REQUIRE(train.exit_code == 0);
        json doc = json::parse(mtr::read_file(weights));
        CHECK(doc["epoch_losses"].size() == 2);
        CHECK(doc["feature_dim"] == 4096);
        CHECK(doc["weights"].size() == 4096);
        CHECK(doc["final"].contains("mean_sigmoid_z"));
    }
    SUBCASE("dpo gen requires a rewriter") {
        CmdResult missing = run_cli(dir, "dpo gen " + flags + " --m 2 --out " + dataset);
        CHECK(missing.exit_code == 1);
    }
}

TEST_CASE("config file values apply beneath flags") {
    TempDir dir;
    std::string flags = synth_into(dir);
    std::string config = dir.file("run.conf");
    mtr::write_file(config,
                    "# run configuration\n"
                    "[run]\n"
                    "seed = 21\n"
                    "workers = 1\n"
                    "[eval]\n"
                    "k = 5\n");

    CmdResult from_file = run_cli(dir, "eval " + flags + " --config " + config + " --out " +
                                           dir.file("cfgrep"));
    REQUIRE(from_file.exit_code == 0);
    json doc = json::parse(mtr::read_file(dir.file("cfgrep") + ".json"));
    CHECK(doc["config"]["seed"] == 21);
    CHECK(doc["config"]["k"] == json::array({5}));

    SUBCASE("flags override the file") {
        CmdResult overridden = run_cli(dir, "eval " + flags + " --config " + config +
                                                " --seed 99 --out " + dir.file("cfgrep2"));
        REQUIRE(overridden.exit_code == 0);
        json doc2 = json::parse(mtr::read_file(dir.file("cfgrep2") + ".json"));
        CHECK(doc2["config"]["seed"] == 99);
    }
    SUBCASE("unknown config keys are rejected") {
        mtr::write_file(config, "nonsense = 1\n");
        CmdResult bad = run_cli(dir, "eval " + flags + " --config " + config);
        CHECK(bad.exit_code == 1);
        CHECK(contains(bad.err, "unknown config key"));
    }
}

TEST_CASE("remote-service failures exit 2") {
    TempDir dir;
    synth_into(dir);
    std::string tools = "--tools " + dir.file("tools.jsonl");
    // nothing listens on the discard port; retries exhaust quickly
    CmdResult down = run_cli(dir, "rewrite " + tools +
                                      " --rewriter remote"
                                      " --rewrite-endpoint http://127.0.0.1:9/v1/chat"
                                      " --rewrite-model m --query \"find tools\"");
    CHECK(down.exit_code == 2);
    CHECK(contains(down.err, "failed after"));
}

TEST_CASE("input errors exit 1") {
    TempDir dir;
    CmdResult unknown_flag = run_cli(dir, "eval --no-such-flag");
    CHECK(unknown_flag.exit_code == 1);

    CmdResult missing_file =
        run_cli(dir, "retrieve --tools " + dir.file("nope.jsonl") + " --query x");
    CHECK(missing_file.exit_code == 1);
    CHECK(contains(missing_file.err, "cannot open"));

    CmdResult no_subcommand = run_cli(dir, "--seed 3");
    CHECK(no_subcommand.exit_code == 1);

    CmdResult bad_subcommand = run_cli(dir, "frobnicate");
    CHECK(bad_subcommand.exit_code == 1);

    CmdResult help = run_cli(dir, "--help");
    CHECK(help.exit_code == 0);
    CHECK(contains(help.out, "massive tool retrieval"));
}
