#pragma once

// Toy reinforcement learning from execution reward: a tabular categorical
// ideator over the TwoMode idea space, trained with group-normalized clipped
// policy gradients. Reproduces the mode-collapse dynamics at desk scale.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "execforge/domain.hpp"
#include "execforge/environments.hpp"

namespace execforge {

enum class ShapingKind { none, length, diversity_penalty, dynamic_prompt };

std::string to_string(ShapingKind k);
ShapingKind shaping_kind_from_string(const std::string& s);

struct ShapingConfig {
    ShapingKind kind = ShapingKind::none;
    double weight = 0.0;
    double length_cap = 0.3;          // ceiling on the normalized length bonus
    double length_normalizer = 400.0; // cap binds exactly at the long thinking mode
    double prompt_mix = 0.5;          // dynamic_prompt: previous-epoch prior weight
};

struct RLConfig {
    int group_size = 128;  // G
    int epochs = 68;
    double learning_rate = 1.0;
    double cliprange = 0.2;
    double advantage_eps = 1e-6;
    bool normalize_by_std = true;
    ShapingConfig shaping;
    std::uint64_t seed = 0;
    // Convergence counting: rollouts whose idea text matches any pattern.
    std::vector<std::string> convergence_patterns{"layernorm", "ema"};

    void validate() const;  // G >= 2, cliprange > 0, advantage_eps > 0
};

struct PolicyState {
    std::vector<double> logits;  // one per idea in the TwoMode space
    std::optional<std::string> context_key;  // dynamic_prompt conditioning
    long step = 0;

    // softmax(logits); sums to 1 within 1e-12.
    std::vector<double> probabilities() const;
};

// Exact expected execution reward of the policy (no sampling): sum over
// ideas of pi_i * p_success_i * reward_i. The collapse oracle.
double expected_policy_reward(const PolicyState& policy, const TwoModeSpec& spec);

struct EpochDynamics {
    int epoch = 0;
    double avg_reward = 0.0;  // mean execution reward over the group
    double max_reward = 0.0;
    double avg_thinking_len = 0.0;
    double avg_idea_len = 0.0;
    // Execution rates stratified by thinking-length band: bottom holds
    // rollouts within 30% of the shortest length, top within 30% of the
    // longest (all-equal lengths put every rollout in both bands).
    double execution_rate_top30_thinking = 0.0;
    double execution_rate_bottom30_thinking = 0.0;
    int converged_idea_count = 0;
};

struct Rollout {
    int idea_index = 0;
    Idea idea;
    ExecutionStatus status = ExecutionStatus::run_failed;
    double reward = 0.0;  // execution reward (0 unless succeeded)
    double shaped = 0.0;  // training signal after shaping
};

// G independent categorical samples from the policy; deterministic given
// seed. Throws std::invalid_argument for G < 2 or an empty policy.
std::vector<int> rollout_group(const PolicyState& policy, int G, std::uint64_t seed);

// Mean-centered within the group; if normalize_by_std, divided by the
// Bessel-corrected sample standard deviation plus eps. All-equal groups
// yield exact zeros. Throws std::invalid_argument for fewer than 2 rewards.
std::vector<double> group_normalized_advantages(const std::vector<double>& rewards, double eps,
                                                bool normalize_by_std);

// One gradient ascent step on the clipped surrogate
// min(rho*A, clip(rho, 1-eps, 1+eps)*A), rho = pi_new(idea)/pi_old(idea),
// averaged over the batch. Zero advantages leave the logits unchanged.
PolicyState policy_update(const PolicyState& policy, const std::vector<int>& rollout_indices,
                          const std::vector<double>& advantages, const PolicyState& old_policy,
                          const RLConfig& cfg);

// Delegates to synth_execute + evaluate: failed executions carry reward 0.
Reward execution_reward(const std::string& idea_text, const TwoModeSpec& spec,
                        std::uint64_t seed);

// Mean-field policy step: the infinite-group limit of the sampled update,
// with per-idea advantage (mu_i - V)/(sigma + eps) computed exactly from the
// spec. The monotone-collapse oracle runs on this flow; sampled runs carry
// binomial noise whose direction no learning rate can control.
PolicyState expected_policy_update(const PolicyState& policy, const TwoModeSpec& spec,
                                   const RLConfig& cfg);

// |A intersect B| / |A union B| over token sets; both empty -> 1.0.
double jaccard(const std::vector<std::string>& tokens_a, const std::vector<std::string>& tokens_b);
double jaccard_text(const std::string& a, const std::string& b);

// Applies the configured shaping to a base execution reward. The length
// bonus is weight*min(cap, thinking_len/normalizer); the diversity penalty
// is weight*max Jaccard against the previous epoch's idea texts.
double shaped_reward(double base, const Idea& idea,
                     const std::vector<std::string>& prev_epoch_ideas, const RLConfig& cfg);

struct RLResult {
    std::vector<EpochDynamics> dynamics;           // one per epoch
    std::vector<std::vector<Rollout>> rollouts;    // [epoch][group index]
    PolicyState final_policy;
};

// Full training loop: per epoch, snapshot the policy, roll out G ideas,
// execute, shape, normalize advantages, take one policy step, and record
// the epoch dynamics. Deterministic given (cfg, spec).
RLResult train_rl(const RLConfig& cfg, const TwoModeSpec& spec);

}  // namespace execforge
