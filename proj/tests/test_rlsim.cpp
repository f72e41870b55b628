#include "doctest.h"

#include <cmath>

#include "execforge/rlsim.hpp"
#include "execforge/rng.hpp"

using namespace execforge;

TEST_CASE("config validation rejects degenerate settings") {
    RLConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    RLConfig bad = cfg;
    bad.group_size = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.cliprange = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.advantage_eps = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("policy probabilities form a simplex") {
    PolicyState p;
    p.logits = {2.0, 0.0, -1.0, 5.0};
    auto probs = p.probabilities();
    double sum = 0.0;
    for (double v : probs) {
        CHECK(v > 0.0);
        sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(probs[3] > probs[0]);
    CHECK(probs[0] > probs[1]);
    CHECK(probs[1] > probs[2]);
}

TEST_CASE("rollout_group: near-one-hot policy repeats one idea") {
    PolicyState p;
    p.logits.assign(10, 0.0);
    p.logits[3] = 8.0;  // p(3) ~ 0.997
    auto draws = rollout_group(p, 128, 99);
    int same = 0;
    for (int d : draws) same += d == 3;
    CHECK(same >= 122);  // >= 95% of 128 (binomial tail leaves wide headroom)
}

TEST_CASE("rollout_group: uniform policy passes a chi-square check") {
    PolicyState p;
    p.logits.assign(10, 0.0);
    std::vector<int> counts(10, 0);
    for (int rep = 0; rep < 1000; ++rep) {
        for (int d : rollout_group(p, 10, derive_seed(1234, rep))) ++counts[d];
    }
    double stat = 0.0;
    for (int c : counts) {
        double d = c - 1000.0;
        stat += d * d / 1000.0;
    }
    CHECK(stat < 27.88);  // chi-square df=9, p ~ 0.001
}

TEST_CASE("rollout_group rejects G < 2") {
    PolicyState p;
    p.logits.assign(10, 0.0);
    CHECK_THROWS_AS(rollout_group(p, 1, 0), std::invalid_argument);
}

TEST_CASE("group-normalized advantages match the hand oracle") {
    // mean 0.5, sample std sqrt(1/3)
    auto adv = group_normalized_advantages({1, 0, 1, 0}, 1e-6, true);
    REQUIRE(adv.size() == 4);
    CHECK(std::abs(adv[0] - 0.86602) < 1e-4);
    CHECK(std::abs(adv[1] + 0.86602) < 1e-4);
    CHECK(std::abs(adv[2] - 0.86602) < 1e-4);
    CHECK(std::abs(adv[3] + 0.86602) < 1e-4);

    // All-equal group: exact zeros, no epsilon residue.
    for (double v : group_normalized_advantages({0.4, 0.4, 0.4, 0.4}, 1e-6, true)) {
        CHECK(v == 0.0);
    }

    // Centering only.
    auto centered = group_normalized_advantages({1, 0}, 1e-6, false);
    CHECK(centered[0] == doctest::Approx(0.5));
    CHECK(centered[1] == doctest::Approx(-0.5));

    CHECK_THROWS_AS(group_normalized_advantages({1.0}, 1e-6, true), std::invalid_argument);
}

TEST_CASE("advantages match a brute-force oracle and sum to zero") {
    Rng rng(555);
    for (int rep = 0; rep < 1000; ++rep) {
        int n = rng.next_int(2, 40);
        std::vector<double> rewards;
        for (int i = 0; i < n; ++i) rewards.push_back(rng.next_unit());
        auto adv = group_normalized_advantages(rewards, 1e-6, true);

        long double mean = 0.0L;
        for (double r : rewards) mean += r;
        mean /= n;
        long double ss = 0.0L;
        for (double r : rewards) ss += (r - mean) * (r - mean);
        long double sd = sqrtl(ss / (n - 1));

        long double sum = 0.0L;
        for (int i = 0; i < n; ++i) {
            long double expect = (rewards[i] - mean) / (sd + 1e-6L);
            CHECK(std::abs(static_cast<double>(adv[i] - expect)) < 1e-9);
            sum += adv[i];
        }
        CHECK(std::abs(static_cast<double>(sum)) < 1e-9);
    }
}

TEST_CASE("policy_update follows the sign of the advantage") {
    RLConfig cfg;
    cfg.learning_rate = 0.5;
    PolicyState p;
    p.logits.assign(4, 0.0);

    // Zero advantages: logits unchanged exactly.
    PolicyState same = policy_update(p, {0, 1, 2}, {0.0, 0.0, 0.0}, p, cfg);
    CHECK(same.logits == p.logits);
    CHECK(same.step == p.step + 1);

    // Single positive advantage: that idea's probability strictly increases.
    PolicyState up = policy_update(p, {2, 0}, {1.0, 0.0}, p, cfg);
    CHECK(up.probabilities()[2] > p.probabilities()[2]);

    // Symmetric +- advantages: mass moves from negative to positive idea.
    PolicyState shift = policy_update(p, {0, 1}, {1.0, -1.0}, p, cfg);
    auto probs = shift.probabilities();
    CHECK(probs[0] > 0.25);
    CHECK(probs[1] < 0.25);
    double sum = 0.0;
    for (double v : probs) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);

    CHECK_THROWS_AS(policy_update(p, {0}, {1.0, 2.0}, p, cfg), std::invalid_argument);
}

TEST_CASE("execution_reward hits the TwoMode values") {
    TwoModeSpec spec;
    // Easy ideas always succeed at 0.5.
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
        CHECK(execution_reward(spec.idea_text(0), spec, seed).value == doctest::Approx(0.5));
    }
    // Complex ideas: 0.9 on a succeeding draw, 0 on a failing one. Locate one
    // seed of each kind deterministically.
    std::string c3 = spec.idea_text(4);
    bool saw_success = false, saw_failure = false;
    for (std::uint64_t seed = 0; seed < 64 && !(saw_success && saw_failure); ++seed) {
        double v = execution_reward(c3, spec, seed).value;
        if (v > 0.0) {
            CHECK(v == doctest::Approx(0.9));
            saw_success = true;
        } else {
            CHECK(v == 0.0);
            saw_failure = true;
        }
    }
    CHECK(saw_success);
    CHECK(saw_failure);
    // Unknown idea text never rewards.
    CHECK(execution_reward("Z9 mystery", spec, 7).value == 0.0);
}

TEST_CASE("jaccard over token sets") {
    CHECK(jaccard_text("a b c", "a b c") == doctest::Approx(1.0));
    CHECK(jaccard_text("a b c", "x y z") == doctest::Approx(0.0));
    CHECK(jaccard_text("a b c", "b c d") == doctest::Approx(0.5));  // 2 / 4
    CHECK(jaccard_text("", "") == doctest::Approx(1.0));            // fixture convention
    CHECK(jaccard_text("a", "") == doctest::Approx(0.0));
    CHECK(jaccard_text("a a a b", "a b") == doctest::Approx(1.0));  // sets, not bags
}

TEST_CASE("shaped_reward variants") {
    RLConfig cfg;
    cfg.shaping.weight = 0.15;
    Idea long_think = make_idea("i1", "C1 deep idea", std::nullopt, IdeaSource::rl_rollout);
    long_think.thinking_len = 400;
    Idea short_think = long_think;
    short_think.thinking_len = 40;

    cfg.shaping.kind = ShapingKind::none;
    CHECK(shaped_reward(0.5, long_think, {}, cfg) == doctest::Approx(0.5));

    cfg.shaping.kind = ShapingKind::length;
    // Cap binds exactly at the 400-token thinking mode: base + 0.3 * weight.
    CHECK(shaped_reward(0.5, long_think, {}, cfg) == doctest::Approx(0.5 + 0.3 * 0.15));
    CHECK(shaped_reward(0.5, short_think, {}, cfg) == doctest::Approx(0.5 + 0.1 * 0.15));
    Idea absurd = long_think;
    absurd.thinking_len = 100000;  // cap still limits the bonus
    CHECK(shaped_reward(0.5, absurd, {}, cfg) == doctest::Approx(0.5 + 0.3 * 0.15));

    cfg.shaping.kind = ShapingKind::diversity_penalty;
    // Identical to a previous idea: penalty is exactly weight * 1.0.
    CHECK(shaped_reward(0.5, long_think, {"C1 deep idea"}, cfg) ==
          doctest::Approx(0.5 - 0.15));
    CHECK(shaped_reward(0.5, long_think, {"unrelated text"}, cfg) == doctest::Approx(0.5));
    CHECK(shaped_reward(0.5, long_think, {}, cfg) == doctest::Approx(0.5));

    cfg.shaping.kind = ShapingKind::dynamic_prompt;
    CHECK(shaped_reward(0.5, long_think, {"C1 deep idea"}, cfg) == doctest::Approx(0.5));
}

TEST_CASE("mean-field flow is monotone and collapses to the easy plateau") {
    TwoModeSpec spec;
    for (double lr : {0.8, 8.0, 64.0}) {
        RLConfig cfg;
        cfg.learning_rate = lr;
        PolicyState p;
        p.logits.assign(spec.idea_count(), 0.0);
        double prev = expected_policy_reward(p, spec);
        CHECK(prev == doctest::Approx(spec.expected_uniform_reward()));
        for (int e = 0; e < 200; ++e) {
            p = expected_policy_update(p, spec, cfg);
            double now = expected_policy_reward(p, spec);
            CHECK(now >= prev - 1e-15);
            prev = now;
        }
        CHECK(prev > 0.49);
        CHECK(prev <= 0.5);
    }
}

TEST_CASE("train_rl is deterministic and fills every dynamics field") {
    RLConfig cfg;
    cfg.group_size = 16;
    cfg.epochs = 5;
    cfg.learning_rate = 0.8;
    cfg.seed = 77;
    TwoModeSpec spec;
    RLResult a = train_rl(cfg, spec);
    RLResult b = train_rl(cfg, spec);

    REQUIRE(a.dynamics.size() == 5);
    REQUIRE(a.rollouts.size() == 5);
    for (std::size_t e = 0; e < a.dynamics.size(); ++e) {
        const auto& d = a.dynamics[e];
        CHECK(d.epoch == static_cast<int>(e));
        CHECK(d.max_reward >= d.avg_reward);
        CHECK(d.execution_rate_top30_thinking >= 0.0);
        CHECK(d.execution_rate_top30_thinking <= 1.0);
        CHECK(d.execution_rate_bottom30_thinking >= 0.0);
        CHECK(d.execution_rate_bottom30_thinking <= 1.0);
        CHECK(d.converged_idea_count <= cfg.group_size);
        REQUIRE(a.rollouts[e].size() == 16);
        CHECK(a.rollouts[e][0].idea.source == IdeaSource::rl_rollout);
        CHECK(a.rollouts[e][3].idea.id ==
              "e" + std::to_string(e) + "-r3");

        const auto& bd = b.dynamics[e];
        CHECK(d.avg_reward == bd.avg_reward);
        CHECK(d.max_reward == bd.max_reward);
        CHECK(d.avg_thinking_len == bd.avg_thinking_len);
        CHECK(d.converged_idea_count == bd.converged_idea_count);
    }
    CHECK(a.final_policy.logits == b.final_policy.logits);
}

TEST_CASE("mode collapse run reproduces the qualitative dynamics") {
    // The calibrated configuration: collapse completes inside 68 epochs while
    // every epoch still samples at least one long-thinking idea.
    RLConfig cfg;
    cfg.group_size = 128;
    cfg.epochs = 68;
    cfg.learning_rate = 0.8;
    cfg.seed = 4;
    TwoModeSpec spec;
    RLResult res = train_rl(cfg, spec);

    const auto& first = res.dynamics.front();
    const auto& last = res.dynamics.back();
    CHECK(std::abs(first.avg_thinking_len - 328.0) <= 3.0 * 144.0 / std::sqrt(128.0));
    CHECK(last.avg_reward >= 0.45);
    CHECK(last.avg_thinking_len <= 60.0);
    CHECK(last.converged_idea_count >= 0.90 * cfg.group_size);
    for (const auto& d : res.dynamics) {
        CHECK(d.max_reward <= 0.9 + 1e-12);
        CHECK(d.execution_rate_bottom30_thinking == 1.0);
    }
    // Average reward rises from the uniform baseline toward the easy plateau.
    CHECK(first.avg_reward < 0.40);
    CHECK(last.avg_reward > first.avg_reward);
}
