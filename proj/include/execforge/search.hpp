#pragma once

// Execution-guided evolutionary search over natural-language ideas, plus
// the best-of-N comparator. Epoch 0 is a fresh batch; later epochs split
// their budget between exploiting positive trajectories and exploring away
// from prior ideas, with the exploitation rate annealed upward.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "execforge/domain.hpp"
#include "execforge/environments.hpp"
#include "execforge/gateway.hpp"
#include "execforge/rng.hpp"

namespace execforge {

struct SearchConfig {
    long N = 20;           // ideas per epoch
    long T = 10;           // epochs beyond the initial batch (0..T inclusive)
    double beta = 0.0;     // baseline reward from the environment
    double a1 = 50.0;      // exploitation percentage at t=1
    std::string schedule_kind = "linear";  // "linear" or "constant"
    double schedule_step = 5.0;
    double schedule_cap = 90.0;
    long context_budget_chars = 4000;
    std::uint64_t seed = 0;

    // a(t) for t >= 1; non-decreasing by construction.
    double rate_at(long t) const;
    void validate() const;
};

// N_exp = floor(a*N/100), N_expl = N - N_exp.
std::pair<long, long> split_budget(double a, long N);

// Exactly the trajectories with reward strictly above beta, input order kept.
std::vector<Trajectory> select_positive(const std::vector<Trajectory>& trajs, double beta);

struct ExploitPrompt {
    ModelRequest request;
    std::vector<std::string> parent_ids;  // trajectories embedded in the prompt
};

// Parents ordered by descending reward (ties: earlier epoch, then idea id),
// greedily prefixed until the next formatted line would exceed the budget.
// Empty positive set is the reassign-to-exploration signal, not an error.
std::optional<ExploitPrompt> exploit_prompt(const std::vector<Trajectory>& d_plus, long n,
                                            long context_budget_chars);

// Uniform without-replacement shuffle, then take until the next idea line
// would exceed the budget.
std::vector<Trajectory> subsample_to_context(const std::vector<Trajectory>& trajs,
                                             long budget_chars, std::uint64_t seed);

// Prior ideas are embedded verbatim as negative examples; empty subset
// degenerates to a pure novelty prompt (also the epoch-0 batch prompt).
ModelRequest explore_prompt(const std::vector<Trajectory>& subset, long n);

// One idea execution; synthetic backends are pure in (idea_text, seed).
class ExecutionBackend {
public:
    virtual ~ExecutionBackend() = default;
    virtual ExecutionResultLite run(const Idea& idea, std::uint64_t seed) = 0;
};

class LatticeBackend : public ExecutionBackend {
public:
    explicit LatticeBackend(LatticeTuneSpec spec = {}) : spec_(std::move(spec)) {}
    ExecutionResultLite run(const Idea& idea, std::uint64_t seed) override {
        return synth_execute(spec_, idea.idea_text, seed);
    }

private:
    LatticeTuneSpec spec_;
};

struct PromptRecord {
    long epoch = 0;
    IdeaSource source = IdeaSource::sampled;
    std::string prompt;
    std::vector<std::string> parent_ids;
};

struct SearchResult {
    std::vector<Trajectory> trajectories;
    std::vector<PromptRecord> prompts;  // every ideation request issued
};

SearchResult run_search(const SearchConfig& cfg, ModelEndpoint& ideator,
                        ExecutionBackend& backend, const Environment& env);

// N independent fresh samples, no cross-sample feedback.
std::vector<Trajectory> best_of_n(ModelEndpoint& ideator, ExecutionBackend& backend,
                                  const Environment& env, long n, std::uint64_t seed);

// Cumulative best reward per epoch, ascending epoch order.
std::vector<std::pair<long, double>> epoch_best(const std::vector<Trajectory>& trajs);

// Mock ideator for LatticeTune: exploit prompts get a +-1 single-coordinate
// mutation of a random embedded parent, anything else a uniform lattice point.
class LatticeMutationIdeator : public ModelEndpoint {
public:
    LatticeMutationIdeator(LatticeTuneSpec spec, std::uint64_t seed)
        : spec_(std::move(spec)), rng_(seed) {}

    std::vector<Completion> generate(const ModelRequest& req) override;

private:
    LatticeTuneSpec spec_;
    Rng rng_;
};

}  // namespace execforge
