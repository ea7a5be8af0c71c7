#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ermdp/mdp.hpp"
#include "ermdp/oracle.hpp"

namespace ermdp {

enum class Variant { NGAD, INGAD };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view name);

/// Which oracle-relative quantities to record. All need an OracleSolution.
struct DiagnosticSet {
    bool lyapunov = true;
    bool policy_error = true;
    bool value_error = true;
    bool fo_residual = true;

    bool any() const { return lyapunov || policy_error || value_error || fo_residual; }
    static DiagnosticSet none() { return {false, false, false, false}; }
};

struct SolverConfig {
    double alpha = 0.1;
    double tau = 0.01;
    double eta = 1e-3;  ///< learning rate
    double c = 0.0;     ///< metric interpolation; 0 for NGAD
    double eps_tol = 1e-5;
    long max_iter = 200'000;
    long record_every = 10;
    DiagnosticSet diagnostics;

    /// Throws InvalidConfig / COutOfRange. NGAD requires c == 0.
    void validate(Variant variant) const;
};

/// Iterate (v, theta) with dual u = exp(theta).
struct SolverState {
    ValueFunction v;
    Matrix theta;

    Matrix dual() const { return theta.array().exp().matrix(); }
    /// Row-wise softmax of theta.
    Matrix policy() const;

    static SolverState zeros(int num_states, int num_actions);
    static SolverState from_oracle(const OracleSolution& solution);
};

struct IterationRecord {
    long iter = 0;
    double q = 0.0;
    std::optional<double> lyapunov;
    std::optional<double> policy_error;
    std::optional<double> value_error;
    std::optional<double> fo_residual;
};

struct SolverTrace {
    std::vector<IterationRecord> records;
    SolverState final_state;
    bool converged = false;
    long iterations = 0;
    SolverConfig config;
    Variant variant = Variant::INGAD;
    std::vector<std::pair<std::string, std::uint64_t>> seeds;
};

/// One NGAD step: v first, then theta using the new v.
SolverState ngad_step(const MdpModel& mdp, const SolverState& state, const SolverConfig& config);

/// One INGAD step; the theta direction is projected by (I - c 1 pi^T).
SolverState ingad_step(const MdpModel& mdp, const SolverState& state, const SolverConfig& config);

/// The common update with an arbitrary transition operator and reward table.
/// `c` overrides config.c (0 gives NGAD exactly).
SolverState natural_step(const TransitionTensor& transition, double discount, const Matrix& reward,
                         const SolverState& state, const SolverConfig& config, double c);

/// q = max(|v' - v| / |v|, |u' - u| / |u|) in Euclidean norms.
/// Throws ZeroNormReference when the previous v or u is zero.
double convergence_metric(const ValueFunction& prev_v, const Matrix& prev_u, const ValueFunction& next_v,
                          const Matrix& next_u);

/// Runs until q <= eps_tol or max_iter iterations. Hitting max_iter returns the
/// trace with converged = false; a non-finite iterate throws DivergenceError.
SolverTrace run_solver(const MdpModel& mdp, const SolverConfig& config, const SolverState& init, Variant variant,
                       const OracleSolution* oracle = nullptr);

/// Produces the iterate after step `i` (0-based) from the current one.
using StepFunction = std::function<SolverState(long i, const SolverState& state)>;

/// Shared outer loop. `reference` is the model used for oracle diagnostics
/// (first-order residuals are evaluated on its clean rewards and transitions).
SolverTrace run_iterations(const MdpModel& reference, const SolverConfig& config, const SolverState& init,
                           Variant variant, const OracleSolution* oracle, const StepFunction& step);

/// Oracle-relative diagnostics of a single iterate.
IterationRecord diagnose(const MdpModel& reference, const SolverConfig& config, Variant variant,
                         const OracleSolution& oracle, const SolverState& state);

}  // namespace ermdp
