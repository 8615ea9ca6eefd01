#include "lab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lab/csv.hpp"
#include "lab/diag.hpp"
#include "lab/eval.hpp"

namespace lab {

using nlohmann::json;

namespace {

// Child-stream indices so every stochastic stage of a seed is independent.
constexpr std::uint64_t kStreamCollect = 1;
constexpr std::uint64_t kStreamCollectRandom = 2;
constexpr std::uint64_t kStreamMixBase = 100;

std::string behavior_kind_name(BehaviorKind k) {
    switch (k) {
        case BehaviorKind::OptimalMix: return "optimal_mix";
        case BehaviorKind::SuboptimalMix: return "suboptimal_mix";
        case BehaviorKind::Uniform: return "uniform";
    }
    return "?";
}

std::string suboptimal_name(SuboptimalMode m) {
    switch (m) {
        case SuboptimalMode::HalfDownHalfLeft: return "half_down_half_left";
        case SuboptimalMode::AllDown: return "all_down";
        case SuboptimalMode::AllLeft: return "all_left";
    }
    return "?";
}

std::string operator_name(ImproveOperator op) {
    switch (op) {
        case ImproveOperator::BehaviorClone: return "behavior_clone";
        case ImproveOperator::EasyBcq: return "easy_bcq";
        case ImproveOperator::ReverseKl: return "reverse_kl";
        case ImproveOperator::ExpWeighted: return "exp_weighted";
    }
    return "?";
}

template <typename T>
bool parse_enum(const std::string& text, const std::vector<std::pair<std::string, T>>& table,
                T& out) {
    for (const auto& [name, value] : table) {
        if (name == text) {
            out = value;
            return true;
        }
    }
    return false;
}

const std::vector<std::pair<std::string, BehaviorKind>> kBehaviorKinds = {
    {"optimal_mix", BehaviorKind::OptimalMix},
    {"suboptimal_mix", BehaviorKind::SuboptimalMix},
    {"uniform", BehaviorKind::Uniform}};
const std::vector<std::pair<std::string, SuboptimalMode>> kSuboptimalModes = {
    {"half_down_half_left", SuboptimalMode::HalfDownHalfLeft},
    {"all_down", SuboptimalMode::AllDown},
    {"all_left", SuboptimalMode::AllLeft}};
const std::vector<std::pair<std::string, OptimalTies>> kOptimalTies = {
    {"uniform", OptimalTies::Uniform}, {"lowest_index", OptimalTies::LowestIndex}};
const std::vector<std::pair<std::string, Variant>> kVariants = {
    {"one_step", Variant::OneStep},
    {"multi_step", Variant::MultiStep},
    {"iterative", Variant::Iterative}};
const std::vector<std::pair<std::string, ImproveOperator>> kOperators = {
    {"behavior_clone", ImproveOperator::BehaviorClone},
    {"easy_bcq", ImproveOperator::EasyBcq},
    {"reverse_kl", ImproveOperator::ReverseKl},
    {"exp_weighted", ImproveOperator::ExpWeighted}};
const std::vector<std::pair<std::string, TransitionSource>> kTransitionSources = {
    {"oracle", TransitionSource::Oracle}, {"empirical", TransitionSource::Empirical}};
const std::vector<std::pair<std::string, WarmStart>> kWarmStarts = {
    {"previous_q", WarmStart::PreviousQ}, {"reward_init", WarmStart::RewardInit}};
const std::vector<std::pair<std::string, BehaviorSource>> kBehaviorSources = {
    {"oracle", BehaviorSource::Oracle}, {"empirical", BehaviorSource::Empirical}};
const std::vector<std::pair<std::string, BcqAnchor>> kBcqAnchors = {
    {"previous", BcqAnchor::Previous}, {"behavior", BcqAnchor::Behavior}};

/// Collects human-readable problems while walking the config tree.
struct Validator {
    std::vector<std::string>& diags;

    void unknown_keys(const json& obj, const std::string& where,
                      std::initializer_list<const char*> known) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool ok = false;
            for (const char* k : known) ok = ok || it.key() == k;
            if (!ok) diags.push_back("unknown key '" + it.key() + "' in " + where);
        }
    }

    bool object(const json& v, const std::string& where) {
        if (v.is_object()) return true;
        diags.push_back(where + " must be an object");
        return false;
    }

    template <typename T>
    void number(const json& obj, const char* key, const std::string& where, T& out) {
        if (!obj.contains(key)) return;
        if (!obj[key].is_number()) {
            diags.push_back(where + "." + key + " must be a number");
            return;
        }
        out = obj[key].get<T>();
    }

    void boolean(const json& obj, const char* key, const std::string& where, bool& out) {
        if (!obj.contains(key)) return;
        if (!obj[key].is_boolean()) {
            diags.push_back(where + "." + key + " must be a boolean");
            return;
        }
        out = obj[key].get<bool>();
    }

    template <typename T>
    void enumed(const json& obj, const char* key, const std::string& where,
                const std::vector<std::pair<std::string, T>>& table, T& out) {
        if (!obj.contains(key)) return;
        if (!obj[key].is_string() || !parse_enum(obj[key].get<std::string>(), table, out)) {
            std::string allowed;
            for (const auto& [name, _] : table) allowed += (allowed.empty() ? "" : ", ") + name;
            diags.push_back(where + "." + key + " must be one of: " + allowed);
        }
    }

    void number_list(const json& obj, const char* key, const std::string& where,
                     std::vector<double>& out) {
        if (!obj.contains(key)) return;
        if (!obj[key].is_array()) {
            diags.push_back(where + "." + key + " must be an array of numbers");
            return;
        }
        std::vector<double> values;
        for (const auto& v : obj[key]) {
            if (!v.is_number()) {
                diags.push_back(where + "." + key + " must contain only numbers");
                return;
            }
            values.push_back(v.get<double>());
        }
        out = std::move(values);
    }
};

ExperimentConfig parse_config_json(const json& root, std::vector<std::string>& diags) {
    ExperimentConfig cfg;
    Validator v{diags};
    if (!v.object(root, "config")) return cfg;
    v.unknown_keys(root, "config",
                   {"name", "seeds", "env", "behavior", "data", "oampi", "sweep", "mixture",
                    "emit_tables", "out_dir"});

    if (root.contains("name")) {
        if (root["name"].is_string()) cfg.name = root["name"].get<std::string>();
        else diags.push_back("name must be a string");
    }
    if (root.contains("out_dir")) {
        if (root["out_dir"].is_string()) cfg.out_dir = root["out_dir"].get<std::string>();
        else diags.push_back("out_dir must be a string");
    }
    v.boolean(root, "emit_tables", "config", cfg.emit_tables);

    if (root.contains("seeds")) {
        if (!root["seeds"].is_array()) {
            diags.push_back("seeds must be an array of non-negative integers");
        } else {
            for (const auto& s : root["seeds"]) {
                if (!s.is_number_unsigned()) {
                    diags.push_back("seeds must contain non-negative integers");
                    break;
                }
                cfg.seeds.push_back(s.get<std::uint64_t>());
            }
        }
    }
    if (cfg.seeds.empty()) {
        cfg.seeds = {0};
        cfg.seeds_defaulted = true;
    }

    if (root.contains("env") && v.object(root["env"], "env")) {
        const json& env = root["env"];
        v.unknown_keys(env, "env", {"width", "height", "discount"});
        v.number(env, "width", "env", cfg.env.width);
        v.number(env, "height", "env", cfg.env.height);
        v.number(env, "discount", "env", cfg.env.discount);
    }
    if (cfg.env.width <= 0 || cfg.env.height <= 0) diags.push_back("env: grid sides must be positive");
    if (!(cfg.env.discount >= 0.0 && cfg.env.discount < 1.0))
        diags.push_back("env.discount must lie in [0, 1)");

    if (root.contains("behavior") && v.object(root["behavior"], "behavior")) {
        const json& b = root["behavior"];
        v.unknown_keys(b, "behavior", {"kind", "mix_weight", "suboptimal_policy", "optimal_ties"});
        v.enumed(b, "kind", "behavior", kBehaviorKinds, cfg.behavior.kind);
        v.number(b, "mix_weight", "behavior", cfg.behavior.mix_weight);
        v.enumed(b, "suboptimal_policy", "behavior", kSuboptimalModes,
                 cfg.behavior.suboptimal_policy);
        v.enumed(b, "optimal_ties", "behavior", kOptimalTies, cfg.behavior.optimal_ties);
    }
    if (!(cfg.behavior.mix_weight >= 0.0 && cfg.behavior.mix_weight <= 1.0))
        diags.push_back("behavior.mix_weight must lie in [0, 1]");

    if (root.contains("data") && v.object(root["data"], "data")) {
        const json& d = root["data"];
        v.unknown_keys(d, "data", {"n_trajectories", "horizon"});
        v.number(d, "n_trajectories", "data", cfg.data.n_trajectories);
        v.number(d, "horizon", "data", cfg.data.horizon);
    }
    if (cfg.data.n_trajectories < 0) diags.push_back("data.n_trajectories must be >= 0");
    if (cfg.data.horizon < 1) diags.push_back("data.horizon must be >= 1");

    if (root.contains("oampi") && v.object(root["oampi"], "oampi")) {
        const json& o = root["oampi"];
        v.unknown_keys(o, "oampi",
                       {"variant", "k_iterations", "eval", "improvement", "behavior_source",
                        "policy_mix_eta"});
        v.enumed(o, "variant", "oampi", kVariants, cfg.oampi.variant);
        v.number(o, "k_iterations", "oampi", cfg.oampi.k_iterations);
        v.enumed(o, "behavior_source", "oampi", kBehaviorSources, cfg.oampi.behavior_source);
        v.number(o, "policy_mix_eta", "oampi", cfg.oampi.policy_mix_eta);
        if (o.contains("eval") && v.object(o["eval"], "oampi.eval")) {
            const json& e = o["eval"];
            v.unknown_keys(e, "oampi.eval", {"transition_source", "n_sweeps", "tol", "warm_start"});
            v.enumed(e, "transition_source", "oampi.eval", kTransitionSources,
                     cfg.oampi.eval.transition_source);
            v.number(e, "n_sweeps", "oampi.eval", cfg.oampi.eval.n_sweeps);
            v.number(e, "tol", "oampi.eval", cfg.oampi.eval.tol);
            v.enumed(e, "warm_start", "oampi.eval", kWarmStarts, cfg.oampi.eval.warm_start);
        }
        if (o.contains("improvement") && v.object(o["improvement"], "oampi.improvement")) {
            const json& i = o["improvement"];
            v.unknown_keys(i, "oampi.improvement",
                           {"operator", "alpha", "m_samples", "tau", "weight_clip", "bcq_anchor"});
            v.enumed(i, "operator", "oampi.improvement", kOperators, cfg.oampi.improvement.op);
            v.number(i, "alpha", "oampi.improvement", cfg.oampi.improvement.alpha);
            v.number(i, "m_samples", "oampi.improvement", cfg.oampi.improvement.m_samples);
            v.number(i, "tau", "oampi.improvement", cfg.oampi.improvement.tau);
            v.number(i, "weight_clip", "oampi.improvement", cfg.oampi.improvement.weight_clip);
            v.enumed(i, "bcq_anchor", "oampi.improvement", kBcqAnchors,
                     cfg.oampi.improvement.bcq_anchor);
        }
    }

    if (root.contains("sweep") && v.object(root["sweep"], "sweep")) {
        SweepSpec sweep;
        v.unknown_keys(root["sweep"], "sweep", {"grid"});
        v.number_list(root["sweep"], "grid", "sweep", sweep.grid);
        if (sweep.grid.empty()) diags.push_back("sweep.grid must be a non-empty array");
        cfg.sweep = std::move(sweep);
    }
    if (root.contains("mixture") && v.object(root["mixture"], "mixture")) {
        MixtureSpec mix;
        v.unknown_keys(root["mixture"], "mixture", {"p_grid", "alpha_grid", "iterative_k"});
        v.number_list(root["mixture"], "p_grid", "mixture", mix.p_grid);
        v.number_list(root["mixture"], "alpha_grid", "mixture", mix.alpha_grid);
        v.number(root["mixture"], "iterative_k", "mixture", mix.iterative_k);
        if (mix.p_grid.empty()) diags.push_back("mixture.p_grid must be non-empty");
        if (mix.alpha_grid.empty()) diags.push_back("mixture.alpha_grid must be non-empty");
        if (mix.iterative_k < 1) diags.push_back("mixture.iterative_k must be >= 1");
        for (double p : mix.p_grid)
            if (!(p >= 0.0 && p <= 1.0)) diags.push_back("mixture.p_grid values must lie in [0, 1]");
        cfg.mixture = std::move(mix);
    }
    if (cfg.sweep && cfg.mixture) diags.push_back("sweep and mixture cannot both be present");

    if (diags.empty()) {
        try {
            cfg.oampi.validate();
        } catch (const std::exception& e) {
            diags.push_back(std::string("oampi: ") + e.what());
        }
    }
    return cfg;
}

json config_json_tree(const ExperimentConfig& c) {
    json o;
    o["name"] = c.name;
    o["seeds"] = c.seeds;
    o["env"] = {{"width", c.env.width}, {"height", c.env.height}, {"discount", c.env.discount}};
    o["behavior"] = {{"kind", behavior_kind_name(c.behavior.kind)},
                     {"mix_weight", c.behavior.mix_weight},
                     {"suboptimal_policy", suboptimal_name(c.behavior.suboptimal_policy)},
                     {"optimal_ties",
                      c.behavior.optimal_ties == OptimalTies::Uniform ? "uniform" : "lowest_index"}};
    o["data"] = {{"n_trajectories", c.data.n_trajectories}, {"horizon", c.data.horizon}};
    o["oampi"] = {
        {"variant", variant_name(c.oampi.variant)},
        {"k_iterations", c.oampi.k_iterations},
        {"behavior_source", c.oampi.behavior_source == BehaviorSource::Oracle ? "oracle" : "empirical"},
        {"policy_mix_eta", c.oampi.policy_mix_eta},
        {"eval",
         {{"transition_source",
           c.oampi.eval.transition_source == TransitionSource::Oracle ? "oracle" : "empirical"},
          {"n_sweeps", c.oampi.eval.n_sweeps},
          {"tol", c.oampi.eval.tol},
          {"warm_start",
           c.oampi.eval.warm_start == WarmStart::PreviousQ ? "previous_q" : "reward_init"}}},
        {"improvement",
         {{"operator", operator_name(c.oampi.improvement.op)},
          {"alpha", c.oampi.improvement.alpha},
          {"m_samples", c.oampi.improvement.m_samples},
          {"tau", c.oampi.improvement.tau},
          {"weight_clip", c.oampi.improvement.weight_clip},
          {"bcq_anchor",
           c.oampi.improvement.bcq_anchor == BcqAnchor::Previous ? "previous" : "behavior"}}}};
    if (c.sweep) o["sweep"] = {{"grid", c.sweep->grid}};
    if (c.mixture)
        o["mixture"] = {{"p_grid", c.mixture->p_grid},
                        {"alpha_grid", c.mixture->alpha_grid},
                        {"iterative_k", c.mixture->iterative_k}};
    o["emit_tables"] = c.emit_tables;
    o["out_dir"] = c.out_dir;
    return o;
}

int line_of_offset(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

struct RunRow {
    std::string preset;
    std::uint64_t seed = 0;
    std::string variant;
    double hyperparam = 0.0;
    int iteration = 0;
    double j = 0.0;
    double mse = 0.0;
    double kl = 0.0;
    double overestimation_mean = 0.0;
};

std::string seeds_meta(const std::vector<std::uint64_t>& seeds) {
    std::string line = "# seeds=";
    for (std::size_t i = 0; i < seeds.size(); ++i)
        line += (i ? "," : "") + std::to_string(seeds[i]);
    return line + "\n";
}

std::string runs_csv(const std::string& hash, const std::vector<std::uint64_t>& seeds,
                     const std::vector<RunRow>& rows) {
    std::string out = "# config_hash=" + hash + "\n" + seeds_meta(seeds);
    out += "preset,seed,variant,hyperparam,iteration,J,mse,kl,overestimation_mean\n";
    for (const RunRow& r : rows) {
        out += r.preset + ',' + std::to_string(r.seed) + ',' + r.variant + ',' +
               fmt_g17(r.hyperparam) + ',' + std::to_string(r.iteration) + ',' + fmt_g17(r.j) +
               ',' + fmt_g17(r.mse) + ',' + fmt_g17(r.kl) + ',' + fmt_g17(r.overestimation_mean) +
               '\n';
    }
    return out;
}

std::string table_csv(const std::string& hash, std::uint64_t seed, const double* values,
                      int n_states, int n_actions) {
    std::string out = "# config_hash=" + hash + "\n# seed=" + std::to_string(seed) + "\n";
    out += "state,action,value\n";
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            out += std::to_string(s) + ',' + std::to_string(a) + ',' +
                   fmt_g17(values[static_cast<std::size_t>(s) * n_actions + a]) + '\n';
    return out;
}

std::string seed_dir_name(std::uint64_t seed) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seed_%04llu", static_cast<unsigned long long>(seed));
    return buf;
}

/// Per-iterate diagnostics of a finished run, including the extra evaluation
/// of the last policy.
struct SeedDiagnostics {
    std::vector<double> j;        // [0..K]
    std::vector<double> mse;      // [0..K]
    std::vector<double> kl;       // [0..K]
    std::vector<double> over;     // [0..K]
    std::vector<QTable> q_true;   // exact Q of each iterate
    std::vector<QTable> q_tilde_k;
};

// Computes per-iterate diagnostics, filling the hooks on the run records as
// it goes (the k = 0 row describes the initial policy and has no record).
SeedDiagnostics seed_diagnostics(const TabularMdp& mdp, SeedRun& sr, bool want_tables) {
    RunResult& r = sr.result;
    const int K = static_cast<int>(r.iterations.size());
    const auto sa_w = dataset_sa_weights(sr.dataset, mdp.n_states, mdp.n_actions);
    const auto st_w = dataset_state_weights(sr.dataset, mdp.n_states);
    const auto pairs = dataset_sa_pairs(sr.dataset);

    SeedDiagnostics d;
    d.j.resize(K + 1);
    d.mse.resize(K + 1);
    d.kl.resize(K + 1);
    d.over.resize(K + 1);
    if (want_tables) {
        d.q_true.resize(K + 1);
        d.q_tilde_k.resize(K + 1);
    }

    QTable warm;
    for (int k = 0; k <= K; ++k) {
        const Policy& pi = k == 0 ? r.initial_policy : r.iterations[k - 1].policy;
        const QTable& q_hat = k < K ? r.iterations[k].q_hat : sr.q_hat_final;
        const QTable q_exact = exact_q(mdp, pi, kDefaultDpTol, k == 0 ? nullptr : &warm);
        warm = q_exact;

        d.j[k] = k == 0 ? r.initial_j : r.iterations[k - 1].j_exact;
        d.mse[k] = evaluation_mse(q_hat, q_exact, sa_w);
        d.kl[k] = policy_kl(pi, r.anchor, st_w);
        d.over[k] = overestimation(q_hat, q_exact, pairs).mean;
        if (k > 0) {
            r.iterations[k - 1].mse = d.mse[k];
            r.iterations[k - 1].kl = d.kl[k];
            r.iterations[k - 1].overestimation_mean = d.over[k];
        }
        if (want_tables) {
            d.q_true[k] = q_exact;
            d.q_tilde_k[k] = q_tilde(mdp, pi, epsilon_beta(mdp, pi, q_hat));
        }
    }
    return d;
}

} // namespace

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::OneStep: return "one_step";
        case Variant::MultiStep: return "multi_step";
        case Variant::Iterative: return "iterative";
    }
    return "?";
}

TabularMdp build_env(const EnvSpec& env) {
    return build_gridworld(GridSpec{env.width, env.height}, env.discount);
}

Policy build_behavior(const BehaviorSpec& spec, const TabularMdp& mdp, const GridSpec& grid) {
    const Policy uniform = Policy::uniform(mdp.n_states, mdp.n_actions);
    switch (spec.kind) {
        case BehaviorKind::Uniform: return uniform;
        case BehaviorKind::OptimalMix: {
            const Policy star = spec.optimal_ties == OptimalTies::Uniform
                                    ? symmetric_optimal_policy(mdp)
                                    : optimal_policy(mdp);
            return mix_policies(star, uniform, spec.mix_weight);
        }
        case BehaviorKind::SuboptimalMix:
            return mix_policies(down_left_policy(grid, spec.suboptimal_policy), uniform,
                                spec.mix_weight);
    }
    throw std::invalid_argument("build_behavior: unknown kind");
}

std::vector<std::string> preset_names() {
    return {"optimal_mix", "suboptimal_mix", "mixture_sweep"};
}

ExperimentConfig preset_config(const std::string& preset_name) {
    ExperimentConfig cfg;
    cfg.env = EnvSpec{15, 15, 0.9};
    cfg.data = DataSpec{100, 100};
    cfg.oampi.variant = Variant::MultiStep;
    cfg.oampi.k_iterations = 5;
    cfg.oampi.eval = EvalConfig{TransitionSource::Oracle, 100, kDefaultDpTol, WarmStart::RewardInit};
    cfg.oampi.improvement.op = ImproveOperator::ReverseKl;
    cfg.oampi.improvement.alpha = 0.1;
    cfg.oampi.behavior_source = BehaviorSource::Oracle;
    cfg.seeds.resize(20);
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) cfg.seeds[i] = i;

    if (preset_name == "optimal_mix") {
        cfg.name = "optimal_mix";
        cfg.behavior = BehaviorSpec{BehaviorKind::OptimalMix, 0.2, SuboptimalMode::HalfDownHalfLeft};
    } else if (preset_name == "suboptimal_mix") {
        cfg.name = "suboptimal_mix";
        cfg.behavior =
            BehaviorSpec{BehaviorKind::SuboptimalMix, 0.2, SuboptimalMode::HalfDownHalfLeft};
    } else if (preset_name == "mixture_sweep") {
        cfg.name = "mixture_sweep";
        cfg.behavior = BehaviorSpec{BehaviorKind::OptimalMix, 0.2, SuboptimalMode::HalfDownHalfLeft};
        // larger collections: the signal-vs-coverage tradeoff between the
        // variants only shows once the uniform data pins down the noisy cells
        cfg.data = DataSpec{300, 100};
        cfg.oampi.behavior_source = BehaviorSource::Empirical;
        cfg.mixture = MixtureSpec{};
        cfg.emit_tables = false;
        cfg.seeds.resize(10);
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) cfg.seeds[i] = i;
    } else {
        throw std::invalid_argument("unknown preset '" + preset_name + "'");
    }
    return cfg;
}

std::optional<ExperimentConfig> load_config_file(const std::filesystem::path& path,
                                                 std::vector<std::string>& diagnostics) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        diagnostics.push_back("cannot open config file: " + path.string());
        return std::nullopt;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        diagnostics.push_back("parse error at line " + std::to_string(line_of_offset(text, e.byte)) +
                              ": " + e.what());
        return std::nullopt;
    }
    ExperimentConfig cfg = parse_config_json(root, diagnostics);
    if (!diagnostics.empty()) return std::nullopt;
    return cfg;
}

std::string config_to_json(const ExperimentConfig& config) {
    return config_json_tree(config).dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& config) {
    return hash_hex(fnv1a_hash(config_json_tree(config).dump()));
}

SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed) {
    const GridSpec grid{config.env.width, config.env.height};
    const TabularMdp mdp = build_env(config.env);
    const Policy behavior = build_behavior(config.behavior, mdp, grid);

    Rng collect_rng = Rng(seed).child(kStreamCollect);
    SeedRun sr;
    sr.dataset = collect(mdp, behavior, config.data.n_trajectories, config.data.horizon, collect_rng);
    sr.dataset.provenance = config.name + "/" + behavior_kind_name(config.behavior.kind);

    OampiConfig oampi = config.oampi;
    oampi.seed = seed;
    sr.result = run(mdp, sr.dataset, oampi, &behavior);

    // evaluation of the final iterate, for symmetric diagnostics across k
    EvalConfig eval_cfg = oampi.eval;
    const QTable* init = nullptr;
    if (eval_cfg.warm_start == WarmStart::PreviousQ && !sr.result.iterations.empty())
        init = &sr.result.iterations.back().q_hat;
    else if (eval_cfg.warm_start == WarmStart::PreviousQ)
        eval_cfg.warm_start = WarmStart::RewardInit;
    sr.q_hat_final =
        evaluate_offline(sr.result.model, &mdp, sr.result.final_policy(), eval_cfg, init);
    return sr;
}

MixtureOutcome run_mixture(const ExperimentConfig& config) {
    if (!config.mixture) throw std::invalid_argument("run_mixture: no mixture block");
    const MixtureSpec& mix = *config.mixture;
    const GridSpec grid{config.env.width, config.env.height};
    const TabularMdp mdp = build_env(config.env);
    const Policy behavior_a = build_behavior(config.behavior, mdp, grid);
    const Policy behavior_b = Policy::uniform(mdp.n_states, mdp.n_actions);

    const int n_seeds = static_cast<int>(config.seeds.size());
    const int n_p = static_cast<int>(mix.p_grid.size());
    const int n_alpha = static_cast<int>(mix.alpha_grid.size());
    const std::vector<Variant> variants = {Variant::OneStep, Variant::MultiStep,
                                           Variant::Iterative};
    const int n_var = static_cast<int>(variants.size());

    // source datasets per seed, shared across p and alpha cells
    std::vector<Dataset> data_a(n_seeds), data_b(n_seeds);
#pragma omp parallel for schedule(dynamic)
    for (int si = 0; si < n_seeds; ++si) {
        Rng rng_a = Rng(config.seeds[si]).child(kStreamCollect);
        Rng rng_b = Rng(config.seeds[si]).child(kStreamCollectRandom);
        data_a[si] = collect(mdp, behavior_a, config.data.n_trajectories, config.data.horizon, rng_a);
        data_b[si] = collect(mdp, behavior_b, config.data.n_trajectories, config.data.horizon, rng_b);
    }

    auto make_config = [&](Variant variant, double alpha) {
        OampiConfig c = config.oampi;
        c.improvement.op = ImproveOperator::ReverseKl;
        c.improvement.alpha = alpha;
        switch (variant) {
            case Variant::OneStep:
                c.variant = Variant::OneStep;
                c.k_iterations = 1;
                break;
            case Variant::MultiStep:
                c.variant = Variant::MultiStep;
                c.k_iterations = config.oampi.k_iterations;
                break;
            case Variant::Iterative:
                c.variant = Variant::Iterative;
                c.k_iterations = mix.iterative_k;
                c.eval.n_sweeps = 1;
                c.eval.warm_start = WarmStart::PreviousQ;
                break;
        }
        return c;
    };

    MixtureOutcome out;
    const int n_cells = n_p * n_var * n_alpha * n_seeds;
    out.cells.assign(n_cells, MixtureCellResult{});

#pragma omp parallel for schedule(dynamic)
    for (int cell = 0; cell < n_cells; ++cell) {
        int rest = cell;
        const int si = rest % n_seeds;
        rest /= n_seeds;
        const int ai = rest % n_alpha;
        rest /= n_alpha;
        const int vi = rest % n_var;
        const int pi = rest / n_var;

        const double p = mix.p_grid[pi];
        Rng mix_rng = Rng(config.seeds[si]).child(kStreamMixBase + pi);
        Dataset mixed = mix_datasets(data_a[si], data_b[si], p, config.data.n_trajectories, mix_rng);

        OampiConfig cfg = make_config(variants[vi], mix.alpha_grid[ai]);
        cfg.seed = config.seeds[si];
        // anchor for oracle mode: the true trajectory-level mixture policy
        const Policy mixture_behavior = mix_policies(behavior_a, behavior_b, p);
        const RunResult r = run(mdp, mixed, cfg, &mixture_behavior, Exec::Serial);
        out.cells[cell] =
            MixtureCellResult{p, variants[vi], mix.alpha_grid[ai], config.seeds[si], r.final_j()};
    }

    // tune per (p, variant) by mean J across seeds
    for (int pi = 0; pi < n_p; ++pi) {
        for (int vi = 0; vi < n_var; ++vi) {
            int best_ai = 0;
            double best_mean = -std::numeric_limits<double>::infinity();
            for (int ai = 0; ai < n_alpha; ++ai) {
                double mean = 0.0;
                for (int si = 0; si < n_seeds; ++si) {
                    const int cell = ((pi * n_var + vi) * n_alpha + ai) * n_seeds + si;
                    mean += out.cells[cell].final_j;
                }
                mean /= n_seeds;
                if (mean > best_mean) {
                    best_mean = mean;
                    best_ai = ai;
                }
            }
            MixtureVariantSummary s;
            s.p = mix.p_grid[pi];
            s.variant = variants[vi];
            s.best_hyperparam = mix.alpha_grid[best_ai];
            for (int si = 0; si < n_seeds; ++si) {
                const int cell = ((pi * n_var + vi) * n_alpha + best_ai) * n_seeds + si;
                s.tuned_j_per_seed.push_back(out.cells[cell].final_j);
            }
            s.mean_j = best_mean;
            double var = 0.0;
            for (double j : s.tuned_j_per_seed) var += (j - s.mean_j) * (j - s.mean_j);
            s.stderr_j = n_seeds > 1 ? std::sqrt(var / (n_seeds - 1)) / std::sqrt(double(n_seeds)) : 0.0;
            out.summaries.push_back(std::move(s));
        }
    }

    // first p where the tuned one-step matches or beats the tuned iterative
    for (int pi = 0; pi < n_p; ++pi) {
        double j_one = 0.0, j_iter = 0.0;
        for (const auto& s : out.summaries) {
            if (s.p != mix.p_grid[pi]) continue;
            if (s.variant == Variant::OneStep) j_one = s.mean_j;
            if (s.variant == Variant::Iterative) j_iter = s.mean_j;
        }
        if (j_one >= j_iter) {
            out.crossover_p = mix.p_grid[pi];
            break;
        }
    }
    return out;
}

void run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    const std::string hash = config_hash(config);
    fs::create_directories(out_dir);

    std::vector<std::string> outputs;
    json manifest;
    manifest["name"] = config.name;
    manifest["config_hash"] = hash;
    manifest["seeds"] = config.seeds;
    manifest["config"] = config_json_tree(config);

    std::vector<RunRow> rows;

    if (config.mixture) {
        const MixtureOutcome mo = run_mixture(config);

        std::string cells = "# config_hash=" + hash + "\n" + seeds_meta(config.seeds);
        cells += "p,variant,hyperparam,seed,final_j\n";
        for (const auto& c : mo.cells)
            cells += fmt_g17(c.p) + ',' + variant_name(c.variant) + ',' + fmt_g17(c.hyperparam) +
                     ',' + std::to_string(c.seed) + ',' + fmt_g17(c.final_j) + '\n';
        write_text_file(out_dir / "mixture_cells.csv", cells);
        outputs.push_back("mixture_cells.csv");

        std::string summary = "# config_hash=" + hash + "\n" + seeds_meta(config.seeds);
        summary += "p,variant,best_hyperparam,mean_j,stderr_j,n_seeds\n";
        for (const auto& s : mo.summaries)
            summary += fmt_g17(s.p) + ',' + variant_name(s.variant) + ',' +
                       fmt_g17(s.best_hyperparam) + ',' + fmt_g17(s.mean_j) + ',' +
                       fmt_g17(s.stderr_j) + ',' + std::to_string(s.tuned_j_per_seed.size()) + '\n';
        write_text_file(out_dir / "mixture_summary.csv", summary);
        outputs.push_back("mixture_summary.csv");

        for (const auto& s : mo.summaries) {
            for (std::size_t si = 0; si < s.tuned_j_per_seed.size(); ++si) {
                RunRow row;
                row.preset = config.name + ":p=" + fmt_g17(s.p);
                row.seed = config.seeds[si];
                row.variant = variant_name(s.variant);
                row.hyperparam = s.best_hyperparam;
                row.iteration = s.variant == Variant::OneStep ? 1
                                : s.variant == Variant::MultiStep
                                    ? config.oampi.k_iterations
                                    : config.mixture->iterative_k;
                row.j = s.tuned_j_per_seed[si];
                rows.push_back(row);
            }
        }
        if (mo.crossover_p) manifest["crossover_p"] = *mo.crossover_p;
        else manifest["crossover_p"] = nullptr;
        std::cout << "crossover_p: "
                  << (mo.crossover_p ? fmt_g17(*mo.crossover_p) : std::string("none")) << "\n";
    } else if (config.sweep) {
        const TabularMdp mdp = build_env(config.env);
        const GridSpec grid{config.env.width, config.env.height};
        const Policy behavior = build_behavior(config.behavior, mdp, grid);

        const int n_seeds = static_cast<int>(config.seeds.size());
        const int n_grid = static_cast<int>(config.sweep->grid.size());
        std::vector<double> final_j(static_cast<std::size_t>(n_grid) * n_seeds, 0.0);
#pragma omp parallel for schedule(dynamic)
        for (int cell = 0; cell < n_grid * n_seeds; ++cell) {
            const int gi = cell / n_seeds;
            const int si = cell % n_seeds;
            Rng collect_rng = Rng(config.seeds[si]).child(kStreamCollect);
            const Dataset dataset = collect(mdp, behavior, config.data.n_trajectories,
                                            config.data.horizon, collect_rng);
            OampiConfig cfg = config.oampi;
            set_hyperparam(cfg, config.sweep->grid[gi]);
            cfg.seed = config.seeds[si];
            final_j[cell] = run(mdp, dataset, cfg, &behavior, Exec::Serial).final_j();
        }

        std::string sweep_csv = "# config_hash=" + hash + "\n" + seeds_meta(config.seeds);
        sweep_csv += "hyperparam,seed,final_j\n";
        for (int gi = 0; gi < n_grid; ++gi)
            for (int si = 0; si < n_seeds; ++si)
                sweep_csv += fmt_g17(config.sweep->grid[gi]) + ',' +
                             std::to_string(config.seeds[si]) + ',' +
                             fmt_g17(final_j[static_cast<std::size_t>(gi) * n_seeds + si]) + '\n';
        write_text_file(out_dir / "sweep.csv", sweep_csv);
        outputs.push_back("sweep.csv");

        std::string best_param;
        double best_mean = -std::numeric_limits<double>::infinity();
        std::string summary = "# config_hash=" + hash + "\n" + seeds_meta(config.seeds);
        summary += "hyperparam,mean_j,stddev_j\n";
        for (int gi = 0; gi < n_grid; ++gi) {
            double mean = 0.0;
            for (int si = 0; si < n_seeds; ++si)
                mean += final_j[static_cast<std::size_t>(gi) * n_seeds + si];
            mean /= n_seeds;
            double var = 0.0;
            for (int si = 0; si < n_seeds; ++si) {
                const double d = final_j[static_cast<std::size_t>(gi) * n_seeds + si] - mean;
                var += d * d;
            }
            summary += fmt_g17(config.sweep->grid[gi]) + ',' + fmt_g17(mean) + ',' +
                       fmt_g17(n_seeds > 1 ? std::sqrt(var / (n_seeds - 1)) : 0.0) + '\n';
            if (mean > best_mean) {
                best_mean = mean;
                best_param = fmt_g17(config.sweep->grid[gi]);
            }
        }
        write_text_file(out_dir / "sweep_summary.csv", summary);
        outputs.push_back("sweep_summary.csv");
        manifest["best_hyperparam"] = best_param;
    } else {
        const TabularMdp mdp = build_env(config.env);
        const int n_seeds = static_cast<int>(config.seeds.size());
        std::vector<SeedRun> runs(n_seeds);
        std::vector<SeedDiagnostics> diags(n_seeds);
#pragma omp parallel for schedule(dynamic)
        for (int si = 0; si < n_seeds; ++si) {
            runs[si] = run_seed(config, config.seeds[si]);
            diags[si] = seed_diagnostics(mdp, runs[si], config.emit_tables);
        }

        for (int si = 0; si < n_seeds; ++si) {
            const std::uint64_t seed = config.seeds[si];
            const int K = static_cast<int>(runs[si].result.iterations.size());
            for (int k = 0; k <= K; ++k) {
                RunRow row;
                row.preset = config.name;
                row.seed = seed;
                row.variant = variant_name(config.oampi.variant);
                row.hyperparam = get_hyperparam(config.oampi);
                row.iteration = k;
                row.j = diags[si].j[k];
                row.mse = diags[si].mse[k];
                row.kl = diags[si].kl[k];
                row.overestimation_mean = diags[si].over[k];
                rows.push_back(row);
            }

            const std::string dir = seed_dir_name(seed);
            fs::create_directories(out_dir / dir);
            std::vector<std::string> meta = {"config_hash=" + hash, "seed=" + std::to_string(seed)};
            write_dataset_csv(out_dir / dir / "dataset.csv", runs[si].dataset, meta);
            outputs.push_back(dir + "/dataset.csv");
            if (config.emit_tables) {
                for (int k = 0; k <= K; ++k) {
                    const Policy& pi =
                        k == 0 ? runs[si].result.initial_policy : runs[si].result.iterations[k - 1].policy;
                    const auto kq = std::to_string(k);
                    write_text_file(out_dir / dir / ("q_" + kq + ".csv"),
                                    table_csv(hash, seed, diags[si].q_true[k].values.data(),
                                              mdp.n_states, mdp.n_actions));
                    write_text_file(out_dir / dir / ("qtilde_" + kq + ".csv"),
                                    table_csv(hash, seed, diags[si].q_tilde_k[k].values.data(),
                                              mdp.n_states, mdp.n_actions));
                    write_text_file(out_dir / dir / ("policy_" + kq + ".csv"),
                                    table_csv(hash, seed, pi.probs.data(), mdp.n_states,
                                              mdp.n_actions));
                    outputs.push_back(dir + "/q_" + kq + ".csv");
                    outputs.push_back(dir + "/qtilde_" + kq + ".csv");
                    outputs.push_back(dir + "/policy_" + kq + ".csv");
                }
            }
        }
    }

    write_text_file(out_dir / "runs.csv", runs_csv(hash, config.seeds, rows));
    outputs.push_back("runs.csv");

    std::sort(outputs.begin(), outputs.end());
    manifest["outputs"] = outputs;
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

} // namespace lab
