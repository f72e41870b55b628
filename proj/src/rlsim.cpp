#include "execforge/rlsim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "execforge/rng.hpp"

namespace execforge {

namespace {

constexpr std::uint64_t kRlSalt = 0x726c736d73616c74ULL;  // "rlsmsalt"

}  // namespace

std::string to_string(ShapingKind k) {
    switch (k) {
    case ShapingKind::none: return "none";
    case ShapingKind::length: return "length";
    case ShapingKind::diversity_penalty: return "diversity_penalty";
    case ShapingKind::dynamic_prompt: return "dynamic_prompt";
    }
    throw std::logic_error("bad ShapingKind");
}

ShapingKind shaping_kind_from_string(const std::string& s) {
    if (s == "none") return ShapingKind::none;
    if (s == "length") return ShapingKind::length;
    if (s == "diversity_penalty") return ShapingKind::diversity_penalty;
    if (s == "dynamic_prompt") return ShapingKind::dynamic_prompt;
    throw std::invalid_argument("unknown shaping kind: " + s);
}

void RLConfig::validate() const {
    if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (cliprange <= 0.0) throw std::invalid_argument("cliprange must be > 0");
    if (advantage_eps <= 0.0) throw std::invalid_argument("advantage_eps must be > 0");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
}

std::vector<double> PolicyState::probabilities() const {
    if (logits.empty()) throw std::invalid_argument("policy has no logits");
    double hi = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - hi);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

double expected_policy_reward(const PolicyState& policy, const TwoModeSpec& spec) {
    auto p = policy.probabilities();
    if (p.size() != static_cast<std::size_t>(spec.idea_count())) {
        throw std::invalid_argument("policy size does not match idea space");
    }
    double r = 0.0;
    for (int i = 0; i < spec.idea_count(); ++i) r += p[i] * spec.expected_reward(i);
    return r;
}

namespace {

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
    double u = rng.next_unit();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;  // fp shortfall lands on the last idea
}

}  // namespace

std::vector<int> rollout_group(const PolicyState& policy, int G, std::uint64_t seed) {
    if (G < 2) throw std::invalid_argument("rollout group size must be >= 2");
    auto probs = policy.probabilities();
    Rng rng(seed);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(G));
    for (int i = 0; i < G; ++i) out.push_back(sample_categorical(probs, rng));
    return out;
}

std::vector<double> group_normalized_advantages(const std::vector<double>& rewards, double eps,
                                                bool normalize_by_std) {
    const std::size_t n = rewards.size();
    if (n < 2) throw std::invalid_argument("advantage group must have >= 2 rewards");
    auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
    if (*lo == *hi) return std::vector<double>(n, 0.0);  // all-equal: exact zeros

    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(n);

    std::vector<double> adv(n);
    for (std::size_t i = 0; i < n; ++i) adv[i] = rewards[i] - mean;
    if (normalize_by_std) {
        double ss = 0.0;
        for (double d : adv) ss += d * d;
        double std_dev = std::sqrt(ss / static_cast<double>(n - 1));  // Bessel-corrected
        for (auto& d : adv) d /= std_dev + eps;
    }
    return adv;
}

PolicyState policy_update(const PolicyState& policy, const std::vector<int>& rollout_indices,
                          const std::vector<double>& advantages, const PolicyState& old_policy,
                          const RLConfig& cfg) {
    if (rollout_indices.size() != advantages.size()) {
        throw std::invalid_argument("rollouts and advantages must be aligned");
    }
    if (policy.logits.size() != old_policy.logits.size()) {
        throw std::invalid_argument("policy and old_policy differ in idea space");
    }
    PolicyState out = policy;
    out.step = policy.step + 1;
    if (rollout_indices.empty()) return out;

    auto p_new = policy.probabilities();
    auto p_old = old_policy.probabilities();
    const double n = static_cast<double>(rollout_indices.size());
    std::vector<double> grad(policy.logits.size(), 0.0);
    for (std::size_t i = 0; i < rollout_indices.size(); ++i) {
        int a = rollout_indices[i];
        if (a < 0 || static_cast<std::size_t>(a) >= p_new.size()) {
            throw std::invalid_argument("rollout index out of range");
        }
        double A = advantages[i];
        if (A == 0.0) continue;
        double rho = p_new[static_cast<std::size_t>(a)] / p_old[static_cast<std::size_t>(a)];
        // Subgradient of min(rho*A, clip(rho)*A): zero once the clip binds.
        bool active = A > 0.0 ? rho < 1.0 + cfg.cliprange : rho > 1.0 - cfg.cliprange;
        if (!active) continue;
        double c = A * rho / n;
        for (std::size_t j = 0; j < grad.size(); ++j) {
            grad[j] += c * ((static_cast<int>(j) == a ? 1.0 : 0.0) - p_new[j]);
        }
    }
    for (std::size_t j = 0; j < grad.size(); ++j) {
        out.logits[j] += cfg.learning_rate * grad[j];
    }
    return out;
}

Reward execution_reward(const std::string& idea_text, const TwoModeSpec& spec,
                        std::uint64_t seed) {
    ExecutionResultLite res = synth_execute(spec, idea_text, seed);
    Environment env;
    env.reward_kind = RewardKind::synthetic;
    return evaluate(env, res.metrics, res.status);
}

PolicyState expected_policy_update(const PolicyState& policy, const TwoModeSpec& spec,
                                   const RLConfig& cfg) {
    auto p = policy.probabilities();
    if (p.size() != static_cast<std::size_t>(spec.idea_count())) {
        throw std::invalid_argument("policy size does not match idea space");
    }
    double v = 0.0, m2 = 0.0;
    for (int i = 0; i < spec.idea_count(); ++i) {
        double mu = spec.expected_reward(i);
        v += p[static_cast<std::size_t>(i)] * mu;
        double r = spec.is_easy(i) ? spec.easy_reward : spec.complex_reward;
        double ps = spec.is_easy(i) ? spec.easy_success_p : spec.complex_success_p;
        m2 += p[static_cast<std::size_t>(i)] * ps * r * r;
    }
    double sigma = std::sqrt(std::max(0.0, m2 - v * v));

    PolicyState out = policy;
    out.step = policy.step + 1;
    for (int i = 0; i < spec.idea_count(); ++i) {
        double adv = (spec.expected_reward(i) - v) / (sigma + cfg.advantage_eps);
        out.logits[static_cast<std::size_t>(i)] +=
            cfg.learning_rate * p[static_cast<std::size_t>(i)] * adv;
    }
    return out;
}

double jaccard(const std::vector<std::string>& tokens_a, const std::vector<std::string>& tokens_b) {
    std::set<std::string> a(tokens_a.begin(), tokens_a.end());
    std::set<std::string> b(tokens_b.begin(), tokens_b.end());
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& t : a) inter += b.count(t);
    std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double jaccard_text(const std::string& a, const std::string& b) {
    return jaccard(tokenize(a), tokenize(b));
}

double shaped_reward(double base, const Idea& idea,
                     const std::vector<std::string>& prev_epoch_ideas, const RLConfig& cfg) {
    const ShapingConfig& sh = cfg.shaping;
    switch (sh.kind) {
    case ShapingKind::none:
    case ShapingKind::dynamic_prompt:  // acts on the sampling prior, not the reward
        return base;
    case ShapingKind::length: {
        double normalized = static_cast<double>(idea.thinking_len) / sh.length_normalizer;
        return base + sh.weight * std::min(sh.length_cap, normalized);
    }
    case ShapingKind::diversity_penalty: {
        double worst = 0.0;
        for (const auto& prev : prev_epoch_ideas) {
            worst = std::max(worst, jaccard_text(idea.idea_text, prev));
        }
        return base - sh.weight * worst;
    }
    }
    throw std::logic_error("bad ShapingKind");
}

RLResult train_rl(const RLConfig& cfg, const TwoModeSpec& spec) {
    cfg.validate();
    const int G = cfg.group_size;
    const int n_ideas = spec.idea_count();
    Environment env = two_mode_environment(spec);

    RLResult result;
    PolicyState policy;
    policy.logits.assign(static_cast<std::size_t>(n_ideas), 0.0);

    std::vector<std::string> prev_texts;
    std::vector<double> prev_counts(static_cast<std::size_t>(n_ideas), 0.0);

    for (int e = 0; e < cfg.epochs; ++e) {
        PolicyState old_policy = policy;
        std::vector<double> probs = policy.probabilities();
        if (cfg.shaping.kind == ShapingKind::dynamic_prompt && e > 0) {
            // Previous-epoch trajectories shift the sampling prior; the
            // conditioning key records what the "prompt" contained.
            double lambda = cfg.shaping.prompt_mix;
            for (std::size_t i = 0; i < probs.size(); ++i) {
                probs[i] = (1.0 - lambda) * probs[i] + lambda * prev_counts[i] / G;
            }
            policy.context_key = "prev-epoch-" + std::to_string(e - 1);
        }

        Rng sample_rng(derive_seed(cfg.seed ^ kRlSalt, static_cast<std::uint64_t>(e)));
        std::vector<int> indices;
        indices.reserve(static_cast<std::size_t>(G));
        for (int i = 0; i < G; ++i) indices.push_back(sample_categorical(probs, sample_rng));

        std::vector<Rollout> rollouts;
        rollouts.reserve(static_cast<std::size_t>(G));
        std::vector<double> shaped;
        shaped.reserve(static_cast<std::size_t>(G));
        for (int i = 0; i < G; ++i) {
            int idx = indices[static_cast<std::size_t>(i)];
            Rollout r;
            r.idea_index = idx;
            r.idea = make_idea("e" + std::to_string(e) + "-r" + std::to_string(i),
                               spec.idea_text(idx), spec.thinking_text(idx),
                               IdeaSource::rl_rollout);
            std::uint64_t exec_seed = derive_seed(cfg.seed ^ kRlSalt,
                                                  static_cast<std::uint64_t>(e),
                                                  static_cast<std::uint64_t>(i) + 1);
            ExecutionResultLite res = synth_execute(spec, r.idea.idea_text, exec_seed);
            r.status = res.status;
            r.reward = evaluate(env, res.metrics, res.status).value;
            r.shaped = shaped_reward(r.reward, r.idea, prev_texts, cfg);
            shaped.push_back(r.shaped);
            rollouts.push_back(std::move(r));
        }

        std::vector<double> advantages =
            group_normalized_advantages(shaped, cfg.advantage_eps, cfg.normalize_by_std);
        policy = policy_update(policy, indices, advantages, old_policy, cfg);

        // Epoch dynamics come from the samples that produced the update.
        EpochDynamics dyn;
        dyn.epoch = e;
        double min_len = 0.0, max_len = 0.0;
        for (int i = 0; i < G; ++i) {
            const Rollout& r = rollouts[static_cast<std::size_t>(i)];
            dyn.avg_reward += r.reward;
            dyn.max_reward = std::max(dyn.max_reward, r.reward);
            double len = static_cast<double>(r.idea.thinking_len);
            dyn.avg_thinking_len += len;
            dyn.avg_idea_len += static_cast<double>(token_count(r.idea.idea_text));
            if (i == 0) {
                min_len = max_len = len;
            } else {
                min_len = std::min(min_len, len);
                max_len = std::max(max_len, len);
            }
            if (text_matches_keyword(r.idea.idea_text, cfg.convergence_patterns)) {
                ++dyn.converged_idea_count;
            }
        }
        dyn.avg_reward /= G;
        dyn.avg_thinking_len /= G;
        dyn.avg_idea_len /= G;

        double band = 0.3 * (max_len - min_len);
        int bottom_n = 0, bottom_ok = 0, top_n = 0, top_ok = 0;
        for (const Rollout& r : rollouts) {
            double len = static_cast<double>(r.idea.thinking_len);
            bool ok = r.status == ExecutionStatus::succeeded;
            if (len <= min_len + band) {
                ++bottom_n;
                bottom_ok += ok;
            }
            if (len >= max_len - band) {
                ++top_n;
                top_ok += ok;
            }
        }
        dyn.execution_rate_bottom30_thinking =
            bottom_n ? static_cast<double>(bottom_ok) / bottom_n : 0.0;
        dyn.execution_rate_top30_thinking = top_n ? static_cast<double>(top_ok) / top_n : 0.0;

        prev_texts.clear();
        std::fill(prev_counts.begin(), prev_counts.end(), 0.0);
        for (const Rollout& r : rollouts) {
            prev_texts.push_back(r.idea.idea_text);
            prev_counts[static_cast<std::size_t>(r.idea_index)] += 1.0;
        }

        result.dynamics.push_back(dyn);
        result.rollouts.push_back(std::move(rollouts));
    }
    result.final_policy = std::move(policy);
    return result;
}

}  // namespace execforge
