#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ermdp/io.hpp"
#include "ermdp/mdp.hpp"
#include "ermdp/oracle.hpp"
#include "ermdp/sampling.hpp"
#include "ermdp/solvers.hpp"

namespace ermdp {

enum class ExperimentId { Exp1, Exp2, Exp3, Custom };

std::string_view to_string(ExperimentId id);
ExperimentId parse_experiment(std::string_view name);

struct InstanceSpec {
    int num_states = 200;
    int num_actions = 50;
    int support = 20;
    std::uint64_t seed = 7;
    double gamma = 0.99;
    /// When set, the instance is loaded from this MDP file instead of generated.
    std::optional<std::filesystem::path> mdp_file;
};

struct OracleSpec {
    double tau = 0.01;
    double alpha = 0.1;
    /// Value-iteration tolerance; <= 0 selects default_value_iteration_tol.
    double tol = 0.0;
    long max_iter = 10'000'000;
};

struct SolverSpec {
    std::string label;
    Variant variant = Variant::INGAD;
    SolverConfig config;
};

struct NoiseSpec {
    std::vector<double> sigmas{0.1, 0.2};
    std::uint64_t seed = 11;
};

struct BufferSpec {
    std::int64_t n_samples = 10'000'000;
    std::int64_t batch_size = 10'000;
    std::uint64_t seed = 13;
    std::uint64_t batch_seed = 17;
    FallbackPolicy fallback = FallbackPolicy::Buffer;
    int threads = 1;
};

struct ExperimentConfig {
    ExperimentId id = ExperimentId::Custom;
    InstanceSpec instance;
    OracleSpec oracle;
    std::vector<SolverSpec> solvers;
    std::optional<NoiseSpec> noise;    ///< exp2
    std::optional<BufferSpec> buffer;  ///< exp3
    std::filesystem::path output_dir = "out";
    std::string report_format = "json";

    void validate() const;
};

/// Preset settings for exp1-exp3; `profile` "full" selects the full-scale exp3 buffer.
ExperimentConfig experiment_preset(ExperimentId id, std::string_view profile = "desk");

/// Preset named by "experiment" (and "profile"), overridden field by field by `doc`.
ExperimentConfig experiment_from_json(const Json& doc);

/// One solver run reduced to the fields of the comparison report.
struct RunSummary {
    std::string exp;
    std::string label;
    std::string variant;
    long iterations = 0;
    bool converged = false;
    bool diverged = false;
    std::optional<double> final_value_error;
    std::optional<double> final_policy_error;
    std::optional<double> lyapunov_initial;
    std::optional<double> lyapunov_final;
    std::optional<double> monotone_fraction;
    std::optional<double> sigma;
};

/// Fraction of consecutive recorded Lyapunov values that do not increase by
/// more than rel_tol times the current value.
std::optional<double> lyapunov_monotone_fraction(const SolverTrace& trace, double rel_tol = 1e-8);

/// Median of recorded Lyapunov values over the first / last `fraction` of records.
std::optional<std::pair<double, double>> lyapunov_decile_medians(const SolverTrace& trace, double fraction = 0.1);

RunSummary summarize(const SolverTrace& trace, std::string exp, std::string label);
Json summary_to_json(const RunSummary& summary);

struct ExperimentReport {
    std::vector<RunSummary> runs;
    std::vector<SolverTrace> traces;
    Json comparison;
};

/// Builds (or loads) the instance and oracle, runs every solver, and writes
/// per-run CSV + JSON sidecars plus comparison.json into config.output_dir.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Instance described by the spec (generated, or loaded from file with the spec's gamma ignored).
MdpModel make_instance(const InstanceSpec& spec);

/// Oracle cached as oracle_<key>.json under `cache_dir` (no caching when empty).
OracleSolution cached_oracle(const MdpModel& mdp, const OracleSpec& spec, const std::filesystem::path& cache_dir);

/// Stable key of (mdp, tau, alpha, e, tol).
std::string oracle_key(const MdpModel& mdp, const OracleSpec& spec);

struct SweepCell {
    double eta = 0.0;
    double c = 0.0;
    bool converged = false;
    bool diverged = false;
    long iterations = 0;
    double final_q = 0.0;
    bool largest_stable = false;  ///< largest converged eta for this c
};

/// Runs every (eta, c) cell with `base` settings; divergence is recorded, not thrown.
std::vector<SweepCell> run_sweep(const MdpModel& mdp, const OracleSolution* oracle, Variant variant,
                                 const SolverConfig& base, const std::vector<double>& etas,
                                 const std::vector<double>& cs);

std::string sweep_to_csv(const std::vector<SweepCell>& cells);

/// Process exit codes of the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitIoOrConfig = 4;

int exit_code_for(ErrorCode code);

}  // namespace ermdp
