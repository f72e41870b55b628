#include "doctest.h"

#include <filesystem>
#include <map>

#include "execforge/hash.hpp"
#include "execforge/rng.hpp"
#include "execforge/scheduler.hpp"

using namespace execforge;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("execforge_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Environment test_env() {
    Environment env;
    env.env_id = "lattice_tune";
    env.resource_requirement = {0, 1, 256};
    env.time_budget_s = 30.0;
    env.entrypoint = {"sh", "run.sh"};
    return env;
}

// Fails every get() once armed; poll_once must then leave state untouched.
class FlakyStore : public ArtifactStore {
public:
    explicit FlakyStore(ArtifactStore& inner) : inner_(inner) {}
    bool fail_gets = false;

    std::string put(const std::string& key, const std::string& bytes) override {
        return inner_.put(key, bytes);
    }
    std::string get(const std::string& key) override {
        if (fail_gets) throw StoreError("simulated outage");
        return inner_.get(key);
    }
    bool contains(const std::string& key) override { return inner_.contains(key); }
    std::pair<std::vector<std::string>, StoreCursor> list_new(StoreCursor since) override {
        return inner_.list_new(since);
    }

private:
    ArtifactStore& inner_;
};

}  // namespace

TEST_CASE("poll_once enqueues novel digests exactly once") {
    MemArtifactStore store;
    SchedulerState state;
    Environment env = test_env();

    store.put("runs/r/e0/i0.zip", "tree-A");
    store.put("runs/r/e0/i1.zip", "tree-B");
    store.put("runs/r/e0/i2.zip", "tree-C");
    auto jobs = poll_once(state, store, env);
    REQUIRE(jobs.size() == 3);
    CHECK(jobs[0].codebase_key == "runs/r/e0/i0.zip");
    CHECK(jobs[0].codebase_digest == sha256_hex("tree-A"));
    CHECK(jobs[0].env_id == "lattice_tune");
    CHECK(jobs[0].time_budget_s == doctest::Approx(30.0));
    CHECK(jobs[0].entrypoint == std::vector<std::string>{"sh", "run.sh"});
    CHECK(state.pending.size() == 3);

    // Same artifact content under two fresh keys: one job total.
    store.put("runs/r/e1/i0.zip", "tree-D");
    store.put("runs/r/e1/i0-retry.zip", "tree-D");
    jobs = poll_once(state, store, env);
    REQUIRE(jobs.size() == 1);
    CHECK(jobs[0].codebase_key == "runs/r/e1/i0.zip");

    // Zero new keys: empty poll, cursor stable.
    StoreCursor before = state.cursor;
    CHECK(poll_once(state, store, env).empty());
    CHECK(state.cursor == before);

    // Reupload of an already-executed digest under yet another key: skipped.
    store.put("runs/r/e2/i0.zip", "tree-A");
    CHECK(poll_once(state, store, env).empty());
}

TEST_CASE("poll_once ignores non-codebase keys") {
    MemArtifactStore store;
    SchedulerState state;
    store.put("runs/r/e0/i0.zip", "tree");
    store.put("runs/r/e0/i0.zip.meta.json", "{}");
    store.put("runs/r/e0/i0.zip.result.json", "{}");
    store.put("metrics/run1.jsonl", "{}");
    auto jobs = poll_once(state, store, test_env());
    REQUIRE(jobs.size() == 1);
    CHECK(jobs[0].codebase_key == "runs/r/e0/i0.zip");
}

TEST_CASE("poll_once leaves state untouched when the store fails mid-fetch") {
    MemArtifactStore inner;
    FlakyStore store(inner);
    SchedulerState state;
    store.put("runs/r/e0/i0.zip", "tree-A");
    store.fail_gets = true;
    CHECK_THROWS_AS(poll_once(state, store, test_env()), StoreError);
    CHECK(state.cursor == 0);
    CHECK(state.pending.empty());
    CHECK(state.executed_digests.empty());

    // Next tick with the store healthy picks the key up normally.
    store.fail_gets = false;
    CHECK(poll_once(state, store, test_env()).size() == 1);
}

TEST_CASE("dispatch is FIFO among resource-feasible jobs") {
    SchedulerState state;
    auto job = [](const std::string& key, int gpus) {
        JobConfig j;
        j.codebase_key = key;
        j.codebase_digest = sha256_hex(key);
        j.resource_requirement = {gpus, 1, 256};
        return j;
    };

    // Five pending, two idle slots: first two dispatch, three stay.
    for (int i = 0; i < 5; ++i) state.pending.push_back(job("k" + std::to_string(i), 0));
    std::vector<WorkerSlot> slots{{0, {1, 4, 4096}, false}, {1, {1, 4, 4096}, false}};
    auto assigned = dispatch(state, slots);
    REQUIRE(assigned.size() == 2);
    CHECK(assigned[0].job.codebase_key == "k0");
    CHECK(assigned[1].job.codebase_key == "k1");
    CHECK(state.pending.size() == 3);
    CHECK(dispatch(state, slots).empty());  // all slots busy now

    // An 8-GPU job on 1-GPU slots stays pending without blocking later jobs.
    SchedulerState s2;
    s2.pending.push_back(job("big", 8));
    s2.pending.push_back(job("small", 1));
    std::vector<WorkerSlot> one_gpu{{0, {1, 4, 4096}, false}};
    auto a2 = dispatch(s2, one_gpu);
    REQUIRE(a2.size() == 1);
    CHECK(a2[0].job.codebase_key == "small");
    REQUIRE(s2.pending.size() == 1);
    CHECK(s2.pending.front().codebase_key == "big");

    // Once a big-enough slot frees up, the stranded job goes out.
    std::vector<WorkerSlot> eight_gpu{{7, {8, 32, 65536}, false}};
    auto a3 = dispatch(s2, eight_gpu);
    REQUIRE(a3.size() == 1);
    CHECK(a3[0].job.codebase_key == "big");
    CHECK(s2.pending.empty());
}

TEST_CASE("scheduler state survives save/load round-trip") {
    auto root = fresh_dir("sched_state");
    SchedulerState state;
    state.cursor = 17;
    state.executed_digests = {"aa", "bb"};
    JobConfig j;
    j.codebase_key = "runs/r/e0/i0.zip";
    j.codebase_digest = "aa";
    j.env_id = "lattice_tune";
    j.resource_requirement = {2, 8, 2048};
    j.time_budget_s = 12.5;
    j.entrypoint = {"sh", "run.sh"};
    state.pending.push_back(j);

    std::string path = (root / "scheduler_state.json").string();
    save_scheduler_state(state, path);
    SchedulerState back = load_scheduler_state(path);
    CHECK(back.cursor == 17);
    CHECK(back.executed_digests == state.executed_digests);
    REQUIRE(back.pending.size() == 1);
    CHECK(back.pending.front().codebase_key == j.codebase_key);
    CHECK(back.pending.front().codebase_digest == j.codebase_digest);
    CHECK(back.pending.front().resource_requirement.gpu_count == 2);
    CHECK(back.pending.front().resource_requirement.memory_mb == 2048);
    CHECK(back.pending.front().time_budget_s == doctest::Approx(12.5));
    CHECK(back.pending.front().entrypoint == j.entrypoint);

    // Absent file loads the default state.
    SchedulerState blank = load_scheduler_state((root / "missing.json").string());
    CHECK(blank.cursor == 0);
    CHECK(blank.pending.empty());
    fs::remove_all(root);
}

TEST_CASE("randomized interleavings execute each digest exactly once across restarts") {
    // Model of criterion-scale behavior: uploads, polls, dispatches, worker
    // completions, and scheduler restarts interleave at random; every
    // distinct content digest must be executed exactly once.
    for (uint64_t seed : {11ull, 12ull, 13ull, 14ull, 15ull}) {
        auto root = fresh_dir("sched_interleave_" + std::to_string(seed));
        std::string state_path = (root / "scheduler_state.json").string();
        MemArtifactStore store;
        Environment env = test_env();
        Rng rng(seed);

        const int kUploads = 60;
        const int kDistinct = 45;  // 15 duplicate-content reuploads
        std::vector<std::string> contents;
        for (int i = 0; i < kDistinct; ++i) contents.push_back("tree-" + std::to_string(i));

        SchedulerState state = load_scheduler_state(state_path);
        std::vector<WorkerSlot> slots{{0, {1, 4, 4096}, false}, {1, {1, 4, 4096}, false}};
        std::vector<Assignment> running;
        std::map<std::string, int> executions;  // digest -> count

        int uploaded = 0;
        int next_key = 0;
        auto upload_one = [&] {
            // First kDistinct uploads are novel; the rest reuse random content.
            std::string body = uploaded < kDistinct
                                   ? contents[uploaded]
                                   : contents[rng.next_index(contents.size())];
            store.put("runs/r/k" + std::to_string(next_key++) + ".zip", body);
            ++uploaded;
        };

        auto drain_finished = [&] {
            // Complete a random running job: count the execution, free the slot.
            if (running.empty()) return;
            size_t pick = rng.next_index(running.size());
            executions[running[pick].job.codebase_digest]++;
            for (auto& s : slots)
                if (s.id == running[pick].slot_id) s.busy = false;
            running.erase(running.begin() + static_cast<long>(pick));
        };

        while (uploaded < kUploads || !state.pending.empty() || !running.empty() ||
               store.list_new(state.cursor).first.size() > 0) {
            double roll = rng.next_unit();
            if (roll < 0.35 && uploaded < kUploads) {
                upload_one();
            } else if (roll < 0.55) {
                poll_once(state, store, env);
            } else if (roll < 0.75) {
                for (auto& a : dispatch(state, slots)) running.push_back(a);
            } else if (roll < 0.92) {
                drain_finished();
            } else {
                // Restart: persist, drop in-memory state, reload. In-flight
                // jobs finish against the old pool (digests already recorded).
                save_scheduler_state(state, state_path);
                state = load_scheduler_state(state_path);
            }
        }

        REQUIRE(executions.size() == static_cast<size_t>(kDistinct));
        for (const auto& [digest, count] : executions) {
            CAPTURE(digest);
            CHECK(count == 1);
        }
        fs::remove_all(root);
    }
}
