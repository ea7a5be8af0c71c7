#include "ermdp/solvers.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ermdp/objective.hpp"

namespace ermdp {

std::string_view to_string(Variant variant) { return variant == Variant::NGAD ? "ngad" : "ingad"; }

Variant parse_variant(std::string_view name) {
    if (name == "ngad" || name == "NGAD") return Variant::NGAD;
    if (name == "ingad" || name == "INGAD") return Variant::INGAD;
    throw Error(ErrorCode::InvalidConfig, "unknown solver variant '" + std::string(name) + "'");
}

void SolverConfig::validate(Variant variant) const {
    require(alpha > 0.0, ErrorCode::InvalidConfig, "alpha must be positive");
    require(tau > 0.0, ErrorCode::NonPositiveTau, "tau must be positive");
    require(eta > 0.0, ErrorCode::InvalidConfig, "learning rate must be positive");
    require(eps_tol > 0.0, ErrorCode::InvalidConfig, "eps_tol must be positive");
    require(max_iter > 0, ErrorCode::InvalidConfig, "max_iter must be positive");
    require(record_every > 0, ErrorCode::InvalidConfig, "record_every must be positive");
    require(c >= 0.0 && c < 1.0, ErrorCode::COutOfRange, "c must lie in [0, 1)");
    require(variant != Variant::NGAD || c == 0.0, ErrorCode::InvalidConfig, "NGAD requires c = 0");
}

Matrix SolverState::policy() const {
    Matrix pi(theta.rows(), theta.cols());
    for (Eigen::Index s = 0; s < theta.rows(); ++s) {
        const double m = theta.row(s).maxCoeff();
        pi.row(s) = (theta.row(s).array() - m).exp().matrix();
        pi.row(s) /= pi.row(s).sum();
    }
    return pi;
}

SolverState SolverState::zeros(int num_states, int num_actions) {
    return {ValueFunction::Zero(num_states), Matrix::Zero(num_states, num_actions)};
}

SolverState SolverState::from_oracle(const OracleSolution& solution) {
    return {solution.v_star, solution.u_star.values().array().log().matrix()};
}

SolverState natural_step(const TransitionTensor& transition, double discount, const Matrix& reward,
                         const SolverState& state, const SolverConfig& config, double c) {
    const double eta = config.eta;
    const Matrix u = state.dual();

    SolverState next;
    next.v = (1.0 - eta) * state.v + (eta / config.alpha) * apply_K_transpose(transition, discount, u);

    const Matrix kv = apply_K(transition, discount, next.v);
    next.theta.resize(state.theta.rows(), state.theta.cols());
    const Eigen::Index A = state.theta.cols();
    Eigen::RowVectorXd direction(A);
    Eigen::RowVectorXd shifted(A);
    for (Eigen::Index s = 0; s < state.theta.rows(); ++s) {
        const auto theta_s = state.theta.row(s);
        const double m = theta_s.maxCoeff();
        shifted = (theta_s.array() - m).exp().matrix();
        const double total = shifted.sum();
        const double log_mass = m + std::log(total);
        direction = theta_s.array() - log_mass - (reward.row(s) - kv.row(s)).array() / config.tau;
        if (c != 0.0) {
            // (I - c 1 pi^T) applied through the softmax vector pi = shifted / total.
            const double projected = shifted.dot(direction) / total;
            direction.array() -= c * projected;
        }
        next.theta.row(s) = theta_s - eta * direction;
    }
    return next;
}

SolverState ngad_step(const MdpModel& mdp, const SolverState& state, const SolverConfig& config) {
    return natural_step(mdp.transition(), mdp.discount(), mdp.reward(), state, config, 0.0);
}

SolverState ingad_step(const MdpModel& mdp, const SolverState& state, const SolverConfig& config) {
    require(config.c >= 0.0 && config.c < 1.0, ErrorCode::COutOfRange, "c must lie in [0, 1)");
    return natural_step(mdp.transition(), mdp.discount(), mdp.reward(), state, config, config.c);
}

double convergence_metric(const ValueFunction& prev_v, const Matrix& prev_u, const ValueFunction& next_v,
                          const Matrix& next_u) {
    const double v_norm = prev_v.norm();
    const double u_norm = prev_u.norm();
    require(v_norm > 0.0 && u_norm > 0.0, ErrorCode::ZeroNormReference, "previous iterate has zero norm");
    return std::max((next_v - prev_v).norm() / v_norm, (next_u - prev_u).norm() / u_norm);
}

namespace {

/// Loop q; a zero reference (the v = 0 start) yields +inf unless nothing moved.
double loop_metric(const SolverState& prev, const Matrix& prev_u, const SolverState& next, const Matrix& next_u) {
    if (prev.v.norm() > 0.0 && prev_u.norm() > 0.0) return convergence_metric(prev.v, prev_u, next.v, next_u);
    const bool moved = (next.v - prev.v).norm() > 0.0 || (next_u - prev_u).norm() > 0.0;
    return moved ? std::numeric_limits<double>::infinity() : 0.0;
}

bool finite_state(const SolverState& state, const Matrix& u) {
    return state.v.allFinite() && state.theta.allFinite() && u.allFinite();
}

}  // namespace

IterationRecord diagnose(const MdpModel& reference, const SolverConfig& config, Variant variant,
                         const OracleSolution& oracle, const SolverState& state) {
    IterationRecord record;
    const DiagnosticSet& d = config.diagnostics;
    if (d.lyapunov || d.fo_residual) {
        const DualVariable u(state.dual());
        if (d.lyapunov)
            record.lyapunov = variant == Variant::NGAD
                                  ? lyapunov_L(state.v, u, oracle, config.alpha, config.tau)
                                  : lyapunov_Lc(state.v, u, oracle, config.alpha, config.tau, config.c);
        if (d.fo_residual) record.fo_residual = first_order_residual(reference, config.tau, config.alpha, state.v, u);
    }
    if (d.policy_error) {
        const Matrix& pi_star = oracle.pi_star.probs();
        record.policy_error = (state.policy() - pi_star).norm() / pi_star.norm();
    }
    if (d.value_error) record.value_error = (state.v - oracle.v_star).norm() / oracle.v_star.norm();
    return record;
}

SolverTrace run_iterations(const MdpModel& reference, const SolverConfig& config, const SolverState& init,
                           Variant variant, const OracleSolution* oracle, const StepFunction& step) {
    config.validate(variant);
    require(init.v.size() == reference.num_states() && init.theta.rows() == reference.num_states() &&
                init.theta.cols() == reference.num_actions(),
            ErrorCode::DimensionMismatch, "initial state shape does not match MDP");
    if (oracle != nullptr) {
        require(oracle->tau == config.tau && oracle->alpha == config.alpha, ErrorCode::InvalidConfig,
                "oracle was computed for different (tau, alpha)");
    }
    const bool diagnostics = oracle != nullptr && config.diagnostics.any();

    SolverTrace trace;
    trace.config = config;
    trace.variant = variant;

    auto record = [&](long iter, double q, const SolverState& state) {
        IterationRecord r = diagnostics ? diagnose(reference, config, variant, *oracle, state) : IterationRecord{};
        r.iter = iter;
        r.q = q;
        trace.records.push_back(r);
    };

    SolverState current = init;
    Matrix current_u = current.dual();
    double q = 1.0 + config.eps_tol;
    record(0, q, current);

    long iter = 0;
    while (q > config.eps_tol && iter < config.max_iter) {
        SolverState next = step(iter, current);
        Matrix next_u = next.dual();
        ++iter;
        if (!finite_state(next, next_u))
            throw DivergenceError("non-finite iterate at step " + std::to_string(iter) + " (learning rate too large?)",
                                  iter);
        q = loop_metric(current, current_u, next, next_u);
        current = std::move(next);
        current_u = std::move(next_u);
        if (iter % config.record_every == 0 || q <= config.eps_tol || iter == config.max_iter)
            record(iter, q, current);
    }

    trace.final_state = std::move(current);
    trace.iterations = iter;
    trace.converged = q <= config.eps_tol;
    return trace;
}

SolverTrace run_solver(const MdpModel& mdp, const SolverConfig& config, const SolverState& init, Variant variant,
                       const OracleSolution* oracle) {
    const double c = variant == Variant::NGAD ? 0.0 : config.c;
    return run_iterations(mdp, config, init, variant, oracle, [&](long, const SolverState& state) {
        return natural_step(mdp.transition(), mdp.discount(), mdp.reward(), state, config, c);
    });
}

}  // namespace ermdp
