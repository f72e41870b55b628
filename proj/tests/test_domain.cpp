#include "doctest.h"

#include <cmath>
#include <limits>

#include "execforge/domain.hpp"
#include "execforge/rng.hpp"

using namespace execforge;

TEST_CASE("reward_from_loss frozen values") {
    // 1/3.255 and 1/4.066, computed by hand before implementation.
    auto r1 = reward_from_loss(3.255);
    CHECK(r1.kind == RewardKind::reciprocal_loss);
    CHECK(std::abs(r1.value - 0.30722) < 1e-5);

    auto r2 = reward_from_loss(4.066);
    CHECK(std::abs(r2.value - 0.24594) < 1e-5);

    auto r3 = reward_from_loss(1.0);
    CHECK(r3.value == doctest::Approx(1.0));
}

TEST_CASE("reward_from_loss rejects non-finite and non-positive losses") {
    CHECK_THROWS_AS(reward_from_loss(0.0), NonFiniteLossError);
    CHECK_THROWS_AS(reward_from_loss(-2.0), NonFiniteLossError);
    CHECK_THROWS_AS(reward_from_loss(std::numeric_limits<double>::quiet_NaN()),
                    NonFiniteLossError);
    CHECK_THROWS_AS(reward_from_loss(std::numeric_limits<double>::infinity()),
                    NonFiniteLossError);
}

TEST_CASE("reward_from_loss is strictly decreasing in loss") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        double a = 0.01 + rng.next_unit() * 20.0;
        double b = a + 0.001 + rng.next_unit() * 5.0;
        CHECK(reward_from_loss(a).value > reward_from_loss(b).value);
    }
}

TEST_CASE("reward_from_accuracy takes the max over the series") {
    MetricsLog log;
    log.records = {{1, "val_accuracy", 0.30}, {2, "val_accuracy", 0.48}, {3, "val_accuracy", 0.41}};
    log.terminal = true;
    auto r = reward_from_accuracy(log);
    CHECK(r.kind == RewardKind::accuracy);
    CHECK(r.value == doctest::Approx(0.48));

    MetricsLog single;
    single.records = {{1, "val_accuracy", 0.480}};
    CHECK(reward_from_accuracy(single).value == doctest::Approx(0.480));

    MetricsLog empty;
    CHECK_THROWS_AS(reward_from_accuracy(empty), NoAccuracyRecordsError);

    // Records under other names do not count as accuracy.
    MetricsLog other;
    other.records = {{1, "val_loss", 3.3}};
    CHECK_THROWS_AS(reward_from_accuracy(other), NoAccuracyRecordsError);
}

TEST_CASE("reward_from_accuracy dominates every record and touches one") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        MetricsLog log;
        int n = 1 + static_cast<int>(rng.next_index(20));
        for (int i = 0; i < n; ++i) log.records.push_back({i, "val_accuracy", rng.next_unit()});
        auto r = reward_from_accuracy(log);
        bool touched = false;
        for (const auto& rec : log.records) {
            CHECK(r.value >= rec.value);
            if (r.value == rec.value) touched = true;
        }
        CHECK(touched);
    }
}

TEST_CASE("token_count splits on whitespace") {
    CHECK(token_count("") == 0);
    CHECK(token_count("one") == 1);
    CHECK(token_count("alpha beta\tgamma\ndelta") == 4);
    CHECK(token_count("  padded   words  ") == 2);
}

TEST_CASE("make_idea derives thinking length and validates parents") {
    Idea plain = make_idea("i0", "use a smaller learning rate", std::nullopt,
                           IdeaSource::sampled, {});
    CHECK(plain.thinking_len == 0);

    Idea thought = make_idea("i1", "idea", std::string("let me think about three options"),
                             IdeaSource::sampled, {});
    CHECK(thought.thinking_len == 6);

    CHECK_THROWS(make_idea("i2", "mutate", std::nullopt, IdeaSource::exploit, {}));
    Idea child = make_idea("i3", "mutate", std::nullopt, IdeaSource::exploit, {"i1"});
    CHECK(child.parent_ids == std::vector<std::string>{"i1"});
}

TEST_CASE("trajectory reward is zeroed unless execution succeeded") {
    Idea idea = make_idea("i0", "x", std::nullopt, IdeaSource::sampled, {});
    MetricsLog log;
    log.records = {{1, "val_accuracy", 0.4}};
    log.terminal = true;

    Trajectory ok = make_trajectory(idea, 0, ExecutionStatus::succeeded, log, 0.4, "log");
    CHECK(ok.reward == doctest::Approx(0.4));

    for (auto status : {ExecutionStatus::patch_failed, ExecutionStatus::run_failed,
                        ExecutionStatus::timed_out, ExecutionStatus::guard_violation}) {
        Trajectory bad = make_trajectory(idea, 0, status, log, 0.4, "log");
        CHECK(bad.reward == 0.0);
    }
}

TEST_CASE("metrics log step monotonicity is per metric name") {
    MetricsLog ok;
    ok.records = {{1, "a", 0.1}, {1, "b", 0.2}, {2, "a", 0.3}, {1, "b", 0.2}};
    CHECK(ok.steps_monotone());

    MetricsLog bad;
    bad.records = {{3, "a", 0.1}, {2, "a", 0.2}};
    CHECK_FALSE(bad.steps_monotone());
}

TEST_CASE("rng determinism and bounds") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        double u = r.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        int v = r.next_int(-3, 9);
        CHECK(v >= -3);
        CHECK(v <= 9);
    }

    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
}
