#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ermdp/experiment.hpp"
#include "ermdp/objective.hpp"

namespace fs = std::filesystem;
using namespace ermdp;

namespace {

/// Relative output paths are placed under $ERMDP_OUTPUT_ROOT when it is set.
fs::path output_path(const fs::path& p) {
    const char* root = std::getenv("ERMDP_OUTPUT_ROOT");
    if (root == nullptr || *root == '\0' || p.is_absolute()) return p;
    return fs::path(root) / p;
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string mdp_digest(const MdpModel& mdp) {
    const Json doc = mdp_to_json(mdp);
    std::ostringstream out;
    out << "states=" << mdp.num_states() << " actions=" << mdp.num_actions() << " gamma=" << format_double(mdp.discount())
        << " nnz=" << (mdp.transition().is_sparse() ? mdp.transition().values().size()
                                                     : static_cast<std::size_t>(mdp.num_states()) * mdp.num_states() *
                                                           mdp.num_actions())
        << " reward_mean=" << format_double(mdp.reward().mean()) << " digest=" << fnv1a_hex(doc.dump());
    return out.str();
}

struct SolverFlags {
    std::optional<double> alpha, tau, eta, c, eps_tol;
    std::optional<long> max_iter, record_every;

    void add(CLI::App* app) {
        app->add_option("--alpha", alpha, "Quadratic weight alpha");
        app->add_option("--tau", tau, "Entropy temperature tau");
        app->add_option("--eta", eta, "Learning rate");
        app->add_option("--c", c, "Metric interpolation c in [0, 1)");
        app->add_option("--eps-tol", eps_tol, "Convergence tolerance on q");
        app->add_option("--max-iter", max_iter, "Iteration limit");
        app->add_option("--record-every", record_every, "Trace cadence");
    }

    void apply(SolverConfig& config) const {
        if (alpha) config.alpha = *alpha;
        if (tau) config.tau = *tau;
        if (eta) config.eta = *eta;
        if (c) config.c = *c;
        if (eps_tol) config.eps_tol = *eps_tol;
        if (max_iter) config.max_iter = *max_iter;
        if (record_every) config.record_every = *record_every;
    }
};

int cmd_generate(int states, int actions, int support, std::uint64_t seed, double gamma, const fs::path& out) {
    const auto mdp = generate_random_mdp(states, actions, support, seed, gamma);
    const auto path = output_path(out);
    ensure_parent(path);
    write_json_file(path, mdp_to_json(mdp));
    std::cout << mdp_digest(mdp) << '\n';
    return kExitOk;
}

int cmd_oracle(const fs::path& mdp_file, double tau, double alpha, double tol, const fs::path& out) {
    const auto mdp = mdp_from_json(read_json_file(mdp_file));
    const OracleSpec spec{tau, alpha, tol};
    const auto path = output_path(out);
    ensure_parent(path);
    const auto solution = cached_oracle(mdp, spec, {});
    write_json_file(path, oracle_to_json(solution));
    const auto weight = WeightVector::ones(mdp.num_states());
    std::cout << "value_iterations=" << solution.value_iterations
              << " value_residual=" << format_double(solution.value_residual) << '\n'
              << "residual_standard=" << format_double(first_order_residual_standard(mdp, tau, weight, solution.v_star,
                                                                                     solution.u_circ))
              << '\n'
              << "residual_quadratic="
              << format_double(first_order_residual(mdp, tau, alpha, solution.v_star, solution.u_star)) << '\n'
              << "v_star_digest=" << fnv1a_hex(oracle_to_json(solution).at("v_star").dump()) << '\n';
    return kExitOk;
}

int cmd_solve(const fs::path& mdp_file, const std::optional<fs::path>& oracle_file,
              const std::optional<fs::path>& config_file, const std::string& variant_name, const SolverFlags& flags,
              bool from_oracle, const fs::path& out_prefix) {
    const auto mdp = mdp_from_json(read_json_file(mdp_file));
    const auto variant = parse_variant(variant_name);
    SolverConfig config;
    if (config_file) config = config_from_json(read_json_file(*config_file));
    flags.apply(config);
    std::optional<OracleSolution> oracle;
    if (oracle_file) oracle = oracle_from_json(read_json_file(*oracle_file));
    if (!oracle) config.diagnostics = DiagnosticSet::none();
    require(!from_oracle || oracle.has_value(), ErrorCode::InvalidConfig, "--from-oracle needs --oracle");

    const auto init =
        from_oracle ? SolverState::from_oracle(*oracle) : SolverState::zeros(mdp.num_states(), mdp.num_actions());
    const auto trace = run_solver(mdp, config, init, variant, oracle ? &*oracle : nullptr);

    const auto prefix = output_path(out_prefix);
    ensure_parent(prefix);
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    write_text_file(prefix.string() + ".csv", csv.str());
    const auto summary = summarize(trace, "custom", prefix.filename().string());
    Json sidecar = trace_sidecar(trace);
    sidecar["summary"] = summary_to_json(summary);
    write_json_file(prefix.string() + ".json", sidecar);
    std::cout << summary_to_json(summary).dump() << '\n';
    return trace.converged ? kExitOk : kExitNotConverged;
}

int cmd_experiment(const std::optional<fs::path>& config_file, const std::optional<std::string>& exp,
                   const std::optional<std::string>& profile, const std::optional<std::uint64_t>& seed,
                   const std::optional<fs::path>& output_dir) {
    Json doc = config_file ? read_json_file(*config_file) : Json::object();
    if (exp) doc["experiment"] = *exp;
    if (profile) doc["profile"] = *profile;
    if (seed) doc["instance"]["seed"] = *seed;
    if (output_dir) doc["output_dir"] = output_dir->string();
    auto config = experiment_from_json(doc);
    config.output_dir = output_path(config.output_dir);
    const auto report = run_experiment(config);
    std::cout << report.comparison.dump(2) << '\n';
    for (const auto& r : report.runs) {
        if (!r.converged && config.id == ExperimentId::Exp1) return kExitNotConverged;
    }
    return kExitOk;
}

int cmd_sweep(const fs::path& mdp_file, const std::optional<fs::path>& oracle_file, const std::string& variant_name,
              const SolverFlags& flags, const std::vector<double>& etas, const std::vector<double>& cs,
              const fs::path& out) {
    const auto mdp = mdp_from_json(read_json_file(mdp_file));
    SolverConfig base;
    base.max_iter = 20'000;
    flags.apply(base);
    std::optional<OracleSolution> oracle;
    if (oracle_file) oracle = oracle_from_json(read_json_file(*oracle_file));
    const auto cells = run_sweep(mdp, oracle ? &*oracle : nullptr, parse_variant(variant_name), base, etas, cs);
    const auto path = output_path(out);
    ensure_parent(path);
    const auto csv = sweep_to_csv(cells);
    write_text_file(path, csv);
    std::cout << csv;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entropy-regularized MDP solvers: oracle, NGAD / INGAD, experiments"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "Generate a random sparse MDP");
    int states = 200, actions = 50, support = 20;
    std::uint64_t seed = 7;
    double gamma = 0.99;
    fs::path gen_out = "mdp.json";
    gen->add_option("--states", states, "Number of states")->capture_default_str();
    gen->add_option("--actions", actions, "Number of actions")->capture_default_str();
    gen->add_option("--support", support, "Next states per (s, a)")->capture_default_str();
    gen->add_option("--seed", seed, "Seed")->capture_default_str();
    gen->add_option("--gamma", gamma, "Discount")->capture_default_str();
    gen->add_option("-o,--out", gen_out, "Output MDP file")->capture_default_str();

    auto* orc = app.add_subcommand("oracle", "Solve for (v*, pi*, u°, u*)");
    fs::path mdp_file;
    double tau = 0.01, alpha = 0.1, tol = 0.0;
    fs::path orc_out = "oracle.json";
    orc->add_option("--mdp", mdp_file, "MDP file")->required();
    orc->add_option("--tau", tau, "Temperature")->capture_default_str();
    orc->add_option("--alpha", alpha, "Quadratic weight")->capture_default_str();
    orc->add_option("--tol", tol, "Value-iteration tolerance (0: default)")->capture_default_str();
    orc->add_option("-o,--out", orc_out, "Output oracle file")->capture_default_str();

    auto* solve = app.add_subcommand("solve", "Run NGAD or INGAD");
    std::optional<fs::path> oracle_file, config_file;
    std::string variant = "ingad";
    SolverFlags solve_flags;
    bool from_oracle = false;
    fs::path solve_out = "run";
    solve->add_option("--mdp", mdp_file, "MDP file")->required();
    solve->add_option("--oracle", oracle_file, "Oracle file (enables diagnostics)");
    solve->add_option("--config", config_file, "Solver config JSON");
    solve->add_option("--variant", variant, "ngad | ingad")->capture_default_str();
    solve->add_flag("--from-oracle", from_oracle, "Start at the oracle point");
    solve->add_option("-o,--out", solve_out, "Output prefix for .csv / .json")->capture_default_str();
    solve_flags.add(solve);

    auto* exp = app.add_subcommand("experiment", "Run exp1 / exp2 / exp3 / custom");
    std::optional<fs::path> exp_config, exp_output;
    std::optional<std::string> exp_id, exp_profile;
    std::optional<std::uint64_t> exp_seed;
    exp->add_option("--config", exp_config, "Experiment config JSON");
    exp->add_option("--experiment", exp_id, "exp1 | exp2 | exp3 | custom");
    exp->add_option("--profile", exp_profile, "desk | full");
    exp->add_option("--seed", exp_seed, "Instance seed");
    exp->add_option("--output-dir", exp_output, "Report directory");

    auto* sweep = app.add_subcommand("sweep", "Grid over eta x c");
    std::vector<double> etas, cs{0.0};
    SolverFlags sweep_flags;
    fs::path sweep_out = "sweep.csv";
    std::optional<fs::path> sweep_oracle;
    sweep->add_option("--mdp", mdp_file, "MDP file")->required();
    sweep->add_option("--oracle", sweep_oracle, "Oracle file");
    sweep->add_option("--variant", variant, "ngad | ingad")->capture_default_str();
    sweep->add_option("--etas", etas, "Learning rates")->required()->delimiter(',');
    sweep->add_option("--cs", cs, "Interpolation values")->delimiter(',');
    sweep->add_option("-o,--out", sweep_out, "Output CSV")->capture_default_str();
    sweep_flags.add(sweep);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_generate(states, actions, support, seed, gamma, gen_out);
        if (*orc) return cmd_oracle(mdp_file, tau, alpha, tol, orc_out);
        if (*solve) return cmd_solve(mdp_file, oracle_file, config_file, variant, solve_flags, from_oracle, solve_out);
        if (*exp) return cmd_experiment(exp_config, exp_id, exp_profile, exp_seed, exp_output);
        if (*sweep) return cmd_sweep(mdp_file, sweep_oracle, variant, sweep_flags, etas, cs, sweep_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIoOrConfig;
    }
    return kExitOk;
}
