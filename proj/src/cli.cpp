#include "execforge/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "execforge/analysis.hpp"
#include "execforge/environments.hpp"
#include "execforge/gateway.hpp"
#include "execforge/hash.hpp"
#include "execforge/implementer.hpp"
#include "execforge/pipeline.hpp"
#include "execforge/rlsim.hpp"
#include "execforge/rng.hpp"
#include "execforge/scheduler.hpp"
#include "execforge/search.hpp"
#include "execforge/serialize.hpp"
#include "execforge/worker.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace execforge {

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << bytes;
}

ordered_json parse_json(const std::string& bytes, const std::string& origin) {
    ordered_json j = ordered_json::parse(bytes, nullptr, false);
    if (j.is_discarded()) throw ConfigError("invalid JSON in " + origin);
    return j;
}

struct GlobalOpts {
    std::string store_root = "store";
    std::optional<std::uint64_t> seed_override;
    bool verbose = false;
};

struct ResolvedEnv {
    Environment env;
    std::optional<LatticeTuneSpec> lattice;  // set for synthetic lattice manifests
    std::string digest;
};

// A manifest with a "lattice" object describes the synthetic environment;
// anything else goes through load_environment (adapter manifests included).
LatticeTuneSpec lattice_spec_from_json(const ordered_json& l);

ResolvedEnv resolve_env(const std::string& path) {
    std::string bytes = read_file(path);
    ordered_json j = parse_json(bytes, path);
    ResolvedEnv out;
    out.digest = sha256_hex(bytes);
    if (j.contains("lattice")) {
        out.lattice = lattice_spec_from_json(j["lattice"]);
        out.env = lattice_environment(*out.lattice);
        if (j.contains("env_id")) out.env.env_id = j["env_id"].get<std::string>();
        return out;
    }
    out.env = load_environment(path);
    return out;
}

SearchConfig search_config_from_json(const ordered_json& j) {
    SearchConfig cfg;
    cfg.N = j.at("N").get<long>();
    cfg.T = j.at("T").get<long>();
    cfg.a1 = j.at("a1").get<double>();
    if (j.contains("schedule")) {
        const auto& s = j["schedule"];
        cfg.schedule_kind = s.value("kind", cfg.schedule_kind);
        ordered_json params = s.value("params", ordered_json::object());
        cfg.schedule_step = params.value("step", cfg.schedule_step);
        cfg.schedule_cap = params.value("cap", cfg.schedule_cap);
    }
    cfg.context_budget_chars = j.value("context_budget_chars", cfg.context_budget_chars);
    cfg.seed = j.at("seed").get<std::uint64_t>();  // seeds are mandatory in configs
    return cfg;
}

RLConfig rl_config_from_json(const ordered_json& j) {
    RLConfig cfg;
    cfg.group_size = j.at("group_size").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.cliprange = j.value("cliprange", cfg.cliprange);
    cfg.advantage_eps = j.value("advantage_eps", cfg.advantage_eps);
    cfg.normalize_by_std = j.value("normalize_by_std", cfg.normalize_by_std);
    if (j.contains("shaping")) {
        const auto& s = j["shaping"];
        cfg.shaping.kind = shaping_kind_from_string(s.at("kind").get<std::string>());
        cfg.shaping.weight = s.value("weight", cfg.shaping.weight);
        cfg.shaping.length_cap = s.value("cap", cfg.shaping.length_cap);
        cfg.shaping.length_normalizer =
            s.value("length_normalizer", cfg.shaping.length_normalizer);
        cfg.shaping.prompt_mix = s.value("prompt_mix", cfg.shaping.prompt_mix);
    }
    cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("convergence_patterns"))
        cfg.convergence_patterns = j["convergence_patterns"].get<std::vector<std::string>>();
    return cfg;
}

TwoModeSpec two_mode_from_json(const ordered_json& j) {
    TwoModeSpec spec;
    spec.n_easy = j.value("n_easy", spec.n_easy);
    spec.n_complex = j.value("n_complex", spec.n_complex);
    spec.easy_success_p = j.value("easy_success_p", spec.easy_success_p);
    spec.easy_reward = j.value("easy_reward", spec.easy_reward);
    spec.complex_success_p = j.value("complex_success_p", spec.complex_success_p);
    spec.complex_reward = j.value("complex_reward", spec.complex_reward);
    spec.easy_thinking_tokens = j.value("easy_thinking_tokens", spec.easy_thinking_tokens);
    spec.complex_thinking_tokens =
        j.value("complex_thinking_tokens", spec.complex_thinking_tokens);
    return spec;
}

LatticeTuneSpec lattice_spec_from_json(const ordered_json& l) {
    LatticeTuneSpec spec;
    spec.dimension = l.value("dimension", spec.dimension);
    spec.coord_min = l.value("coord_min", spec.coord_min);
    spec.coord_max = l.value("coord_max", spec.coord_max);
    if (l.contains("optimum")) spec.optimum = l["optimum"].get<std::vector<int>>();
    spec.base = l.value("base", spec.base);
    spec.amplitude = l.value("amplitude", spec.amplitude);
    spec.width = l.value("width", spec.width);
    return spec;
}

std::unique_ptr<ModelEndpoint> make_ideator(const ordered_json& cfg_json,
                                            const std::optional<LatticeTuneSpec>& lattice,
                                            std::uint64_t seed) {
    ordered_json spec = cfg_json.value("ideator", ordered_json{{"kind", "lattice_mutation"}});
    std::string kind = spec.at("kind").get<std::string>();
    if (kind == "lattice_mutation") {
        // The mutation ideator's coordinate space may come from the config
        // when the environment is a process adapter rather than synthetic.
        std::optional<LatticeTuneSpec> idea_space = lattice;
        if (spec.contains("lattice")) idea_space = lattice_spec_from_json(spec["lattice"]);
        if (!idea_space)
            throw ConfigError("lattice_mutation ideator needs a lattice idea space");
        return std::make_unique<LatticeMutationIdeator>(*idea_space, derive_seed(seed, 0x1dea));
    }
    if (kind == "scripted") {
        return std::make_unique<ScriptedModel>(
            ScriptedModel::from_json_file(spec.at("script").get<std::string>()));
    }
    if (kind == "http") {
        HttpModelConfig hc;
        hc.url = spec.at("url").get<std::string>();
        hc.model = spec.value("model", std::string{});
        return std::make_unique<HttpModel>(hc);
    }
    throw ConfigError("unknown ideator kind: " + kind);
}

std::int64_t unix_now() {
    return static_cast<std::int64_t>(std::time(nullptr));
}

// Run ids depend only on what shaped the run, never on the output path, so
// identical configurations produce byte-identical trajectory logs.
std::string derive_run_id(const std::string& subcommand, const std::string& config_digest,
                          const std::string& env_digest, std::uint64_t seed) {
    std::string material =
        subcommand + ":" + config_digest + ":" + env_digest + ":" + std::to_string(seed);
    return "run-" + sha256_hex(material).substr(0, 12);
}

std::vector<std::string> read_patterns(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> patterns;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) patterns.push_back(line);
    }
    if (patterns.empty()) throw ConfigError("no patterns in " + path);
    return patterns;
}

const std::vector<std::string> kDefaultPatterns{"layernorm", "ema"};

// Trajectory logs carry execution logs by reference: bodies go to
// logs/<idea_id>.log under the run directory.
std::vector<TrajectoryRecord> externalize_logs(const std::string& run_id,
                                               const std::vector<Trajectory>& trajs,
                                               const fs::path& out_dir) {
    std::vector<TrajectoryRecord> records;
    records.reserve(trajs.size());
    for (const auto& t : trajs) {
        std::string ref = "logs/" + t.idea.id + ".log";
        write_file(out_dir / ref, t.execution_log);
        Trajectory stripped = t;
        stripped.execution_log.clear();
        records.push_back({run_id, std::move(stripped), std::move(ref)});
    }
    return records;
}

void write_prompts_jsonl(const fs::path& path, const std::vector<PromptRecord>& prompts) {
    std::string body;
    for (const auto& p : prompts) {
        ordered_json j{{"epoch", p.epoch},
                       {"source", to_string(p.source)},
                       {"prompt", p.prompt},
                       {"parent_ids", p.parent_ids}};
        body += j.dump();
        body += "\n";
    }
    write_file(path, body);
}

struct SearchOpts {
    std::string config_path;
    std::string env_path;
    std::string out_dir;
    long n = 220;  // best-of-n only
};

int cmd_search(const SearchOpts& o, const GlobalOpts& g, bool best_of_n_mode) {
    std::string cfg_bytes = read_file(o.config_path);
    ordered_json cj = parse_json(cfg_bytes, o.config_path);
    SearchConfig cfg = search_config_from_json(cj);
    if (g.seed_override) cfg.seed = *g.seed_override;

    ResolvedEnv resolved = resolve_env(o.env_path);
    cfg.beta = resolved.env.baseline_reward.value;
    cfg.validate();

    const char* subcommand = best_of_n_mode ? "best-of-n" : "search";
    RunManifest man;
    man.subcommand = subcommand;
    man.config_digest = sha256_hex(cfg_bytes);
    man.environment_digest = resolved.digest;
    man.seed = cfg.seed;
    man.run_id = derive_run_id(subcommand, man.config_digest, man.environment_digest, cfg.seed);
    man.started = unix_now();
    RunManifestWriter writer(man, o.out_dir);

    auto ideator = make_ideator(cj, resolved.lattice, cfg.seed);

    // Synthetic lattice executes in-process; process adapters run through
    // implementer -> scheduler -> worker against the artifact store.
    std::unique_ptr<ExecutionBackend> backend;
    std::unique_ptr<ModelEndpoint> implementer_endpoint;
    std::unique_ptr<FsArtifactStore> store;
    std::unique_ptr<FsMetricsSink> sink;
    if (resolved.lattice) {
        backend = std::make_unique<LatticeBackend>(*resolved.lattice);
    } else if (cj.contains("implementer")) {
        const auto& impl = cj["implementer"];
        if (impl.contains("script")) {
            implementer_endpoint = std::make_unique<ScriptedModel>(
                ScriptedModel::from_json_file(impl["script"].get<std::string>()));
        } else if (impl.contains("url")) {
            HttpModelConfig hc;
            hc.url = impl["url"].get<std::string>();
            hc.model = impl.value("model", std::string{});
            implementer_endpoint = std::make_unique<HttpModel>(hc);
        } else {
            throw ConfigError("implementer config needs a script or url endpoint");
        }
        ImplementerConfig icfg;
        icfg.k_parallel = impl.value("k", icfg.k_parallel);
        icfg.max_revisions = impl.value("max_revisions", icfg.max_revisions);
        store = std::make_unique<FsArtifactStore>(g.store_root);
        sink = std::make_unique<FsMetricsSink>(g.store_root);
        backend = std::make_unique<PipelineBackend>(
            resolved.env, *implementer_endpoint, *store, *sink,
            (fs::path(g.store_root) / "work").string(), icfg,
            "codebases/" + man.run_id + "/");
    } else {
        throw ConfigError("environment '" + resolved.env.env_id +
                          "' has no synthetic backend; add an implementer config to run "
                          "it through the pipeline");
    }

    std::vector<Trajectory> trajs;
    if (best_of_n_mode) {
        trajs = best_of_n(*ideator, *backend, resolved.env, o.n, cfg.seed);
    } else {
        SearchResult res = run_search(cfg, *ideator, *backend, resolved.env);
        trajs = std::move(res.trajectories);
        write_prompts_jsonl(fs::path(o.out_dir) / "prompts.jsonl", res.prompts);
    }

    auto records = externalize_logs(man.run_id, trajs, o.out_dir);
    write_trajectories_jsonl((fs::path(o.out_dir) / "trajectories.jsonl").string(), records);

    RuleJudge judge(resolved.lattice ? *resolved.lattice : LatticeTuneSpec{});
    write_report(o.out_dir, judge, kDefaultPatterns);
    writer.finalize("complete");

    double best = 0.0;
    for (const auto& t : trajs) best = std::max(best, t.reward);
    std::cout << subcommand << ": " << trajs.size() << " trajectories, best reward " << best
              << ", run " << man.run_id << "\n";
    return 0;
}

struct RlsimOpts {
    std::string config_path;
    std::string out;
};

int cmd_rlsim(const RlsimOpts& o, const GlobalOpts& g) {
    std::string cfg_bytes = read_file(o.config_path);
    ordered_json cj = parse_json(cfg_bytes, o.config_path);
    RLConfig cfg = rl_config_from_json(cj);
    if (g.seed_override) cfg.seed = *g.seed_override;
    cfg.validate();
    TwoModeSpec spec = two_mode_from_json(cj.value("two_mode", ordered_json::object()));

    // --out may name the dynamics file directly or its run directory.
    fs::path out(o.out);
    fs::path dynamics_path = out.extension() == ".jsonl" ? out : out / "dynamics.jsonl";
    fs::path run_dir = dynamics_path.parent_path();
    if (run_dir.empty()) run_dir = ".";

    RunManifest man;
    man.subcommand = "rlsim";
    man.config_digest = sha256_hex(cfg_bytes);
    man.seed = cfg.seed;
    man.run_id = derive_run_id("rlsim", man.config_digest, "", cfg.seed);
    man.started = unix_now();
    RunManifestWriter writer(man, run_dir.string());

    RLResult result = train_rl(cfg, spec);

    std::string body;
    for (const auto& d : result.dynamics) {
        ordered_json j{{"epoch", d.epoch},
                       {"avg_reward", d.avg_reward},
                       {"max_reward", d.max_reward},
                       {"avg_thinking_len", d.avg_thinking_len},
                       {"avg_idea_len", d.avg_idea_len},
                       {"execution_rate_top30_thinking", d.execution_rate_top30_thinking},
                       {"execution_rate_bottom30_thinking", d.execution_rate_bottom30_thinking},
                       {"converged_idea_count", d.converged_idea_count}};
        body += j.dump();
        body += "\n";
    }
    write_file(dynamics_path, body);
    writer.finalize("complete");

    const EpochDynamics& last = result.dynamics.back();
    std::cout << "rlsim: " << result.dynamics.size() << " epochs, final avg reward "
              << last.avg_reward << ", converged " << last.converged_idea_count << "/"
              << cfg.group_size << ", run " << man.run_id << "\n";
    return 0;
}

struct AnalyzeOpts {
    std::string trajectories_path;
    std::string judge = "rule";
    std::string judge_script;
    std::string patterns_path;
};

int cmd_analyze(const AnalyzeOpts& o) {
    std::vector<TrajectoryRecord> records = read_trajectories_jsonl(o.trajectories_path);
    std::vector<std::string> patterns =
        o.patterns_path.empty() ? kDefaultPatterns : read_patterns(o.patterns_path);

    std::unique_ptr<IdeaJudge> judge;
    std::unique_ptr<ScriptedModel> script;
    if (o.judge == "rule") {
        judge = std::make_unique<RuleJudge>();
    } else {
        if (o.judge_script.empty())
            throw ConfigError("--judge scripted requires --judge-script");
        script = std::make_unique<ScriptedModel>(ScriptedModel::from_json_file(o.judge_script));
        judge = std::make_unique<ModelJudge>(*script);
    }

    AnalysisReport report = build_report(records, *judge, patterns);
    fs::path dir = fs::path(o.trajectories_path).parent_path();
    if (dir.empty()) dir = ".";
    write_file(dir / "report.json", report.json.dump(2) + "\n");
    write_file(dir / "report.md", report.markdown);

    std::cout << "analyze: " << records.size() << " trajectories, completion rate "
              << report.json.at("completion_rate").get<double>() << "\n";
    return 0;
}

struct SchedulerOpts {
    std::string env_path;
    long tick_ms = 5000;
    int workers = 1;
    long max_ticks = 0;  // 0: drain and exit on the first idle tick
};

int cmd_scheduler(const SchedulerOpts& o, const GlobalOpts& g) {
    if (o.workers < 1) throw ConfigError("--workers must be >= 1");
    Environment env = resolve_env(o.env_path).env;
    FsArtifactStore store(g.store_root);
    FsMetricsSink sink(g.store_root);
    std::string state_path = (fs::path(g.store_root) / "scheduler_state.json").string();
    SchedulerState state = load_scheduler_state(state_path);

    std::vector<WorkerSlot> slots;
    for (int i = 0; i < o.workers; ++i)
        slots.push_back({i, env.resource_requirement, false});
    std::string work_root = (fs::path(g.store_root) / "work").string();

    long executed = 0;
    for (long tick = 1;; ++tick) {
        bool saw_new = false;
        try {
            saw_new = !poll_once(state, store, env).empty();
        } catch (const StoreError& e) {
            // State is untouched; the next tick retries the poll.
            std::cerr << "scheduler: poll failed: " << e.what() << "\n";
        }

        std::vector<Assignment> assignments = dispatch(state, slots);
        if (!assignments.empty()) {
            std::mutex mu;
            std::string first_error;
            std::vector<std::thread> pool;
            for (const auto& asn : assignments) {
                pool.emplace_back([&, asn] {
                    try {
                        Worker worker(store, work_root);
                        ExecutionResult result = worker.execute(asn.job);
                        upload_result(result, store, sink);
                        std::lock_guard<std::mutex> lock(mu);
                        ++executed;
                        if (g.verbose) {
                            std::cerr << "scheduler: slot " << asn.slot_id << " finished "
                                      << asn.job.codebase_key << " ("
                                      << to_string(result.status) << ")\n";
                        }
                    } catch (const std::exception& e) {
                        std::lock_guard<std::mutex> lock(mu);
                        if (first_error.empty()) first_error = e.what();
                    }
                });
            }
            for (auto& t : pool) t.join();  // shutdown always drains in-flight jobs
            for (auto& s : slots) s.busy = false;
            save_scheduler_state(state, state_path);
            if (!first_error.empty()) throw std::runtime_error(first_error);
        } else {
            save_scheduler_state(state, state_path);
        }

        bool idle = !saw_new && assignments.empty() && state.pending.empty();
        if (o.max_ticks > 0 && tick >= o.max_ticks) break;
        if (o.max_ticks == 0 && idle) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(o.tick_ms));
    }

    std::cout << "scheduler: drained, " << executed << " jobs executed, "
              << state.executed_digests.size() << " digests on record\n";
    return 0;
}

struct WorkerOpts {
    std::string env_path;
    std::string key;
    std::string work_dir;
};

int cmd_worker(const WorkerOpts& o, const GlobalOpts& g) {
    Environment env = resolve_env(o.env_path).env;
    FsArtifactStore store(g.store_root);
    FsMetricsSink sink(g.store_root);

    JobConfig job;
    job.codebase_key = o.key;
    job.codebase_digest = sha256_hex(store.get(o.key));
    job.env_id = env.env_id;
    job.resource_requirement = env.resource_requirement;
    job.time_budget_s = env.time_budget_s;
    job.entrypoint = env.entrypoint;

    std::string work_root =
        o.work_dir.empty() ? (fs::path(g.store_root) / "work").string() : o.work_dir;
    Worker worker(store, work_root);
    ExecutionResult result = worker.execute(job);
    upload_result(result, store, sink);

    std::cout << "worker: " << to_string(result.status) << " run " << result_run_id(job)
              << "\n";
    return 0;
}

struct ImplementOpts {
    std::string env_path;
    std::string idea_text;
    std::string idea_id = "cli-idea";
    std::string script_path;
    std::string http_url;
    std::string out_dir;
    std::string key;
    int k_parallel = 10;
    int max_revisions = 2;
};

int cmd_implement(const ImplementOpts& o, const GlobalOpts& g) {
    ResolvedEnv resolved = resolve_env(o.env_path);
    if (resolved.env.baseline.empty())
        throw ConfigError("environment manifest carries no baseline tree");

    std::unique_ptr<ModelEndpoint> endpoint;
    if (!o.script_path.empty()) {
        endpoint = std::make_unique<ScriptedModel>(ScriptedModel::from_json_file(o.script_path));
    } else if (!o.http_url.empty()) {
        HttpModelConfig hc;
        hc.url = o.http_url;
        endpoint = std::make_unique<HttpModel>(hc);
    } else {
        throw ConfigError("implement needs --script or --url");
    }

    Idea idea = make_idea(o.idea_id, o.idea_text, std::nullopt, IdeaSource::sampled);
    FsArtifactStore store(g.store_root);
    std::string key = o.key.empty() ? "codebases/" + o.idea_id + ".zip" : o.key;
    ImplementerConfig icfg{o.k_parallel, o.max_revisions};

    RunManifest man;
    man.subcommand = "implement";
    man.config_digest = sha256_hex(o.idea_text);
    man.environment_digest = resolved.digest;
    man.seed = g.seed_override.value_or(0);
    man.run_id = derive_run_id("implement", man.config_digest, man.environment_digest, man.seed);
    man.started = unix_now();
    RunManifestWriter writer(man, o.out_dir);

    ImplementResult result =
        implement_idea(idea, resolved.env.baseline, resolved.env, icfg, *endpoint, store, key);

    ordered_json rj{{"success", result.success},
                    {"codebase_key", result.codebase_key},
                    {"digest", result.digest},
                    {"winner_index", result.winner_index},
                    {"apply_attempts", result.apply_attempts}};
    if (!result.success) rj["failure_log"] = result.failure_log;
    write_file(fs::path(o.out_dir) / "implement_result.json", rj.dump(2) + "\n");
    if (result.success)
        write_file(fs::path(o.out_dir) / "winning.diff", result.winning_diff);
    writer.finalize(result.success ? "complete" : "all_candidates_failed");

    if (result.success) {
        std::cout << "implement: uploaded " << result.codebase_key << " (candidate "
                  << result.winner_index << ", " << result.apply_attempts << " attempts)\n";
    } else {
        std::cout << "implement: all candidates failed after " << result.apply_attempts
                  << " attempts\n";
    }
    return 0;
}

}  // namespace

RunManifestWriter::RunManifestWriter(RunManifest manifest, std::string dir)
    : manifest_(std::move(manifest)), dir_(std::move(dir)) {
    write("running");
}

void RunManifestWriter::write(const std::string& status) const {
    ordered_json j{{"run_id", manifest_.run_id},
                   {"subcommand", manifest_.subcommand},
                   {"config_digest", manifest_.config_digest},
                   {"environment_digest", manifest_.environment_digest},
                   {"seed", manifest_.seed},
                   {"tool_version", manifest_.tool_version},
                   {"started", manifest_.started},
                   {"completed", manifest_.completed ? ordered_json(manifest_.completed)
                                                     : ordered_json(nullptr)},
                   {"status", status}};
    write_file(fs::path(dir_) / "manifest.json", j.dump(2) + "\n");
}

void RunManifestWriter::finalize(const std::string& status) {
    if (finalized_) throw std::logic_error("manifest already finalized");
    finalized_ = true;
    manifest_.completed = unix_now();
    write(status);
}

int cli_main(const std::vector<std::string>& args) {
    std::vector<std::string> argv_storage;
    argv_storage.push_back("execforge");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_storage) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"execution-driven idea search, scheduling, and RL dynamics"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--store-root", g.store_root, "artifact store root directory")
        ->capture_default_str();
    app.add_option("--seed-override", g.seed_override, "replace the config seed");
    app.add_flag("--verbose", g.verbose, "progress details on stderr");

    SearchOpts so;
    auto* search = app.add_subcommand("search", "evolutionary idea search over an environment");
    search->fallthrough();
    search->add_option("--config", so.config_path, "search config JSON")->required();
    search->add_option("--env", so.env_path, "environment manifest JSON")->required();
    search->add_option("--out", so.out_dir, "run directory")->required();

    SearchOpts bo;
    auto* bestofn = app.add_subcommand("best-of-n", "independent idea samples, no feedback");
    bestofn->fallthrough();
    bestofn->add_option("--config", bo.config_path, "search config JSON (seed source)")
        ->required();
    bestofn->add_option("--env", bo.env_path, "environment manifest JSON")->required();
    bestofn->add_option("--out", bo.out_dir, "run directory")->required();
    bestofn->add_option("--n", bo.n, "sample count")->capture_default_str();

    RlsimOpts ro;
    auto* rlsim = app.add_subcommand("rlsim", "toy RL training on the two-mode idea space");
    rlsim->fallthrough();
    rlsim->add_option("--config", ro.config_path, "RL config JSON")->required();
    rlsim->add_option("--out", ro.out, "dynamics.jsonl path or run directory")->required();

    AnalyzeOpts ao;
    auto* analyze = app.add_subcommand("analyze", "report over a trajectory log");
    analyze->fallthrough();
    analyze->add_option("trajectories", ao.trajectories_path, "trajectories.jsonl path")
        ->required();
    analyze->add_option("--judge", ao.judge, "idea classifier")
        ->check(CLI::IsMember({"rule", "scripted"}))
        ->capture_default_str();
    analyze->add_option("--judge-script", ao.judge_script, "scripted judge answers JSON");
    analyze->add_option("--patterns", ao.patterns_path, "convergence patterns, one per line");

    SchedulerOpts sco;
    auto* scheduler = app.add_subcommand("scheduler", "poll the store and dispatch to workers");
    scheduler->fallthrough();
    scheduler->add_option("--env", sco.env_path, "environment manifest JSON")->required();
    scheduler->add_option("--tick-ms", sco.tick_ms, "poll interval")->capture_default_str();
    scheduler->add_option("--workers", sco.workers, "worker slot count")->capture_default_str();
    scheduler->add_option("--max-ticks", sco.max_ticks, "stop after N ticks (0: drain)")
        ->capture_default_str();

    WorkerOpts wo;
    auto* worker = app.add_subcommand("worker", "execute one uploaded codebase");
    worker->fallthrough();
    worker->add_option("--env", wo.env_path, "environment manifest JSON")->required();
    worker->add_option("--key", wo.key, "codebase artifact key")->required();
    worker->add_option("--work-dir", wo.work_dir, "isolated working directory root");

    ImplementOpts io;
    auto* implement = app.add_subcommand("implement", "turn one idea into a patched codebase");
    implement->fallthrough();
    implement->add_option("--env", io.env_path, "environment manifest JSON")->required();
    implement->add_option("--idea", io.idea_text, "idea text")->required();
    implement->add_option("--idea-id", io.idea_id, "idea identifier")->capture_default_str();
    implement->add_option("--script", io.script_path, "scripted endpoint answers JSON");
    implement->add_option("--url", io.http_url, "HTTP model endpoint");
    implement->add_option("--out", io.out_dir, "run directory")->required();
    implement->add_option("--key", io.key, "artifact key for the winning zip");
    implement->add_option("--k", io.k_parallel, "parallel candidates")->capture_default_str();
    implement->add_option("--max-revisions", io.max_revisions, "revision rounds per candidate")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (search->parsed()) return cmd_search(so, g, false);
        if (bestofn->parsed()) return cmd_search(bo, g, true);
        if (rlsim->parsed()) return cmd_rlsim(ro, g);
        if (analyze->parsed()) return cmd_analyze(ao);
        if (scheduler->parsed()) return cmd_scheduler(sco, g);
        if (worker->parsed()) return cmd_worker(wo, g);
        if (implement->parsed()) return cmd_implement(io, g);
    } catch (const JudgeUnavailableError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ScriptExhaustedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const EndpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace execforge
