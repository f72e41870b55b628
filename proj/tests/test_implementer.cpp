#include "doctest.h"

#include "execforge/hash.hpp"
#include "execforge/implementer.hpp"
#include "execforge/zips.hpp"

using namespace execforge;

namespace {

const char* kGoodDiff =
    "--- a/train.py\n"
    "+++ b/train.py\n"
    "@@ -1,1 +1,1 @@\n"
    "-lr = 0.1\n"
    "+lr = 0.05\n";

const char* kFrozenDiff =
    "--- a/evaluate.py\n"
    "+++ b/evaluate.py\n"
    "@@ -1,2 +1,2 @@\n"
    "-def evaluate():\n"
    "-    pass\n"
    "+def evaluate():\n"
    "+    return 1.0\n";

FileTree baseline_tree() {
    FileTree t;
    t["train.py"] = "lr = 0.1\nepochs = 5\n";
    t["evaluate.py"] = "def evaluate():\n    pass\n";
    return t;
}

Environment test_env() {
    Environment env;
    env.env_id = "toy";
    env.baseline = baseline_tree();
    env.frozen_paths = {"evaluate.py"};
    return env;
}

Idea test_idea() {
    return make_idea("i0", "halve the learning rate", std::nullopt, IdeaSource::sampled, {});
}

std::vector<Completion> bodies(const std::vector<std::string>& texts) {
    std::vector<Completion> out;
    for (const auto& t : texts) out.push_back({std::nullopt, t});
    return out;
}

// k completions: candidate `winner_at` is the good diff, the rest garbage
// that re-fails every revision.
ScriptedModel model_with_winner(int winner_at, int k = 10) {
    ScriptedModel m;
    std::vector<std::string> proposals;
    for (int i = 0; i < k; ++i)
        proposals.push_back(i == winner_at ? kGoodDiff : "garbage forever");
    m.add_contains("garbage forever", bodies({"garbage forever"}));
    m.add_contains("Implement this research idea", bodies(proposals));
    return m;
}

}  // namespace

TEST_CASE("propose_diffs returns exactly k candidates and embeds idea plus baseline") {
    auto m = model_with_winner(3);
    auto idea = test_idea();
    auto diffs = propose_diffs(idea, baseline_tree(), 10, m);
    CHECK(diffs.size() == 10);
    CHECK(diffs[3] == kGoodDiff);
    CHECK(diffs[0] == "garbage forever");

    CHECK_THROWS(propose_diffs(idea, baseline_tree(), 0, m));
    CHECK_THROWS(propose_diffs(idea, FileTree{}, 1, m));

    // Echo mock: the prompt must carry the idea and the baseline content.
    struct Echo : ModelEndpoint {
        std::string last_prompt;
        std::vector<Completion> generate(const ModelRequest& req) override {
            last_prompt = req.prompt;
            return std::vector<Completion>(req.n_samples, Completion{std::nullopt, "d"});
        }
    } echo;
    propose_diffs(idea, baseline_tree(), 1, echo);
    CHECK(echo.last_prompt.find("halve the learning rate") != std::string::npos);
    CHECK(echo.last_prompt.find("lr = 0.1") != std::string::npos);
    CHECK(echo.last_prompt.find("train.py") != std::string::npos);
}

TEST_CASE("revise_diff carries the patch log verbatim and rejects empty logs") {
    struct Echo : ModelEndpoint {
        std::string last_prompt;
        std::vector<Completion> generate(const ModelRequest& req) override {
            last_prompt = req.prompt;
            return {Completion{std::nullopt, "revised"}};
        }
    } echo;
    auto idea = test_idea();
    std::string log = "train.py hunk #1: context mismatch at line 1";
    auto out = revise_diff(idea, baseline_tree(), "bad diff", log, echo);
    CHECK(out == "revised");
    CHECK(echo.last_prompt.find(log) != std::string::npos);
    CHECK(echo.last_prompt.find("bad diff") != std::string::npos);

    CHECK_THROWS(revise_diff(idea, baseline_tree(), "bad diff", "", echo));
}

TEST_CASE("winner on the initial round: artifact uploaded, losers cancelled") {
    auto m = model_with_winner(3);
    MemArtifactStore store;
    ImplementerConfig cfg;
    auto res = implement_idea(test_idea(), baseline_tree(), test_env(), cfg, m, store,
                              "runs/r1/epoch0/idea0.zip");
    CHECK(res.success);
    CHECK(res.winner_index == 3);
    CHECK(res.apply_attempts == 10);  // one lockstep round, no revisions spent
    CHECK(res.winning_diff == kGoodDiff);
    CHECK(res.codebase_key == "runs/r1/epoch0/idea0.zip");

    auto tree = zip_unpack(store.get(res.codebase_key));
    CHECK(tree.at("train.py") == "lr = 0.05\nepochs = 5\n");
    CHECK(tree.at("evaluate.py") == baseline_tree().at("evaluate.py"));
    CHECK(res.digest == sha256_hex(store.get(res.codebase_key)));

    CHECK(store.contains("runs/r1/epoch0/idea0.zip.meta.json"));
    auto meta = store.get("runs/r1/epoch0/idea0.zip.meta.json");
    CHECK(meta.find("halve the learning rate") != std::string::npos);
    CHECK(meta.find("lr = 0.05") != std::string::npos);
}

TEST_CASE("pipeline succeeds on its second revision after two failures") {
    ScriptedModel m;
    std::vector<std::string> proposals;
    proposals.push_back("BAD-A");
    for (int i = 1; i < 10; ++i) proposals.push_back("garbage forever");
    m.add_contains("BAD-B", bodies({kGoodDiff}));
    m.add_contains("BAD-A", bodies({"BAD-B"}));
    m.add_contains("garbage forever", bodies({"garbage forever"}));
    m.add_contains("Implement this research idea", bodies(proposals));

    MemArtifactStore store;
    auto res = implement_idea(test_idea(), baseline_tree(), test_env(), {}, m, store,
                              "runs/r1/epoch0/idea1.zip");
    CHECK(res.success);
    CHECK(res.winner_index == 0);
    // Pipeline #0 made 3 attempts (initial + 2 revisions); so did the other
    // nine in lockstep: the bound is reached but the idea still lands.
    CHECK(res.apply_attempts == 30);
    CHECK(res.winning_diff == kGoodDiff);
}

TEST_CASE("all candidates failing exhausts exactly k*(1+max_revisions) attempts") {
    auto m = model_with_winner(-1);  // nobody ever succeeds
    MemArtifactStore store;
    auto res = implement_idea(test_idea(), baseline_tree(), test_env(), {}, m, store,
                              "runs/r1/epoch0/idea2.zip");
    CHECK_FALSE(res.success);
    CHECK(res.apply_attempts == 30);
    CHECK(res.winner_index == -1);
    CHECK(!res.failure_log.empty());
    CHECK(res.failure_log.find("#0") != std::string::npos);
    CHECK(res.failure_log.find("#9") != std::string::npos);
    CHECK_FALSE(store.contains("runs/r1/epoch0/idea2.zip"));
}

TEST_CASE("ties at a round barrier break toward the lowest sample index") {
    ScriptedModel m;
    std::vector<std::string> proposals(10, "garbage forever");
    proposals[2] = kGoodDiff;
    proposals[5] = kGoodDiff;
    m.add_contains("garbage forever", bodies({"garbage forever"}));
    m.add_contains("Implement this research idea", bodies(proposals));

    MemArtifactStore store;
    auto res = implement_idea(test_idea(), baseline_tree(), test_env(), {}, m, store,
                              "runs/r1/epoch0/idea3.zip");
    CHECK(res.success);
    CHECK(res.winner_index == 2);
    CHECK(res.apply_attempts == 10);
}

TEST_CASE("guard violations are failed candidates, not winners or hard errors") {
    ScriptedModel m;
    std::vector<std::string> proposals(10, "garbage forever");
    proposals[1] = kFrozenDiff;  // applies cleanly but touches a frozen path
    proposals[4] = kGoodDiff;
    m.add_contains("garbage forever", bodies({"garbage forever"}));
    m.add_contains("Implement this research idea", bodies(proposals));

    MemArtifactStore store;
    auto res = implement_idea(test_idea(), baseline_tree(), test_env(), {}, m, store,
                              "runs/r1/epoch0/idea4.zip");
    CHECK(res.success);
    CHECK(res.winner_index == 4);

    // The winning artifact never modifies a frozen path.
    auto tree = zip_unpack(store.get(res.codebase_key));
    CHECK(tree.at("evaluate.py") == baseline_tree().at("evaluate.py"));

    // A guard-violating lone candidate eventually exhausts as a failure.
    ScriptedModel only_frozen;
    only_frozen.add_contains("guard violation", bodies({kFrozenDiff}));
    only_frozen.add_contains("Implement this research idea", bodies({kFrozenDiff}));
    ImplementerConfig one;
    one.k_parallel = 1;
    MemArtifactStore store2;
    auto res2 = implement_idea(test_idea(), baseline_tree(), test_env(), one, only_frozen,
                               store2, "runs/r1/epoch0/idea5.zip");
    CHECK_FALSE(res2.success);
    CHECK(res2.apply_attempts == 3);
    CHECK(res2.failure_log.find("guard violation") != std::string::npos);
}

TEST_CASE("identical idea, baseline, and script give an identical winning digest") {
    auto idea = test_idea();
    std::string d1, d2;
    {
        auto m = model_with_winner(6);
        MemArtifactStore store;
        d1 = implement_idea(idea, baseline_tree(), test_env(), {}, m, store,
                            "runs/a/epoch0/idea0.zip")
                 .digest;
    }
    {
        auto m = model_with_winner(6);
        MemArtifactStore store;
        d2 = implement_idea(idea, baseline_tree(), test_env(), {}, m, store,
                            "runs/b/epoch0/idea0.zip")
                 .digest;
    }
    CHECK(d1 == d2);
}
