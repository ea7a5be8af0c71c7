#include "ermdp/oracle.hpp"

#include <cmath>
#include <string>

namespace ermdp {

namespace {

void require_tau(double tau) { require(tau > 0.0, ErrorCode::NonPositiveTau, "tau must be positive"); }

/// Q_sa = r_sa + gamma (P v)_sa.
Matrix soft_q(const MdpModel& mdp, const ValueFunction& v) {
    Matrix q = mdp.transition().apply(v);
    q *= mdp.discount();
    q += mdp.reward();
    return q;
}

Eigen::PartialPivLU<Matrix> factor_adjoint(const MdpModel& mdp, const Policy& pi) {
    const int S = mdp.num_states();
    Matrix k_pi_t = (Matrix::Identity(S, S) - mdp.discount() * transition_under_policy(mdp, pi)).transpose();
    return Eigen::PartialPivLU<Matrix>(k_pi_t);
}

Vector solve_checked(const Eigen::PartialPivLU<Matrix>& lu, const Vector& rhs) {
    Vector x = lu.solve(rhs);
    if (!x.allFinite()) throw Error(ErrorCode::SolveFailure, "K^T solve produced non-finite values");
    return x;
}

DualVariable scale_policy(const Policy& pi, const Vector& row_mass) {
    Matrix u = pi.probs();
    for (Eigen::Index s = 0; s < u.rows(); ++s) u.row(s) *= row_mass[s];
    return DualVariable(std::move(u));
}

DualVariable dual_standard_from(const Eigen::PartialPivLU<Matrix>& lu, const Policy& pi, const WeightVector& e) {
    const Vector mass = solve_checked(lu, e.values());
    for (Eigen::Index s = 0; s < mass.size(); ++s)
        require(mass[s] > 0.0, ErrorCode::SolveFailure, "standard dual row mass not positive");
    return scale_policy(pi, mass);
}

DualVariable dual_quadratic_from(const Eigen::PartialPivLU<Matrix>& lu, const Policy& pi, const ValueFunction& v_star,
                                 double alpha) {
    require(alpha > 0.0, ErrorCode::InvalidConfig, "alpha must be positive");
    const Vector w = alpha * solve_checked(lu, v_star);
    for (Eigen::Index s = 0; s < w.size(); ++s)
        require(w[s] > 0.0, ErrorCode::NonPositiveValue,
                "w[" + std::to_string(s) + "] = " + std::to_string(w[s]) + " (rewards must be nonnegative)");
    return scale_policy(pi, w);
}

}  // namespace

ValueFunction soft_bellman_operator(const MdpModel& mdp, double tau, const ValueFunction& v) {
    require_tau(tau);
    require(v.size() == mdp.num_states(), ErrorCode::DimensionMismatch, "value vector length does not match |S|");
    const Matrix q = soft_q(mdp, v);
    ValueFunction out(mdp.num_states());
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        const double m = q.row(s).maxCoeff();
        out[s] = m + tau * std::log(((q.row(s).array() - m) / tau).exp().sum());
    }
    return out;
}

double default_value_iteration_tol(const MdpModel& mdp) {
    return 1e-12 * (1.0 + mdp.reward().lpNorm<Eigen::Infinity>() / (1.0 - mdp.discount()));
}

ValueIterationResult solve_value_iteration(const MdpModel& mdp, double tau, double tol, long max_iter) {
    require_tau(tau);
    require(tol > 0.0, ErrorCode::InvalidConfig, "tolerance must be positive");
    ValueIterationResult result;
    result.v = ValueFunction::Zero(mdp.num_states());
    for (long k = 0;; ++k) {
        ValueFunction next = soft_bellman_operator(mdp, tau, result.v);
        const double residual = (next - result.v).lpNorm<Eigen::Infinity>();
        result.residuals.push_back(residual);
        if (residual <= tol) {
            // phi(v) is within gamma * residual of its own image, so it is returned instead of v.
            result.v = std::move(next);
            result.iterations = k + 1;
            return result;
        }
        if (k >= max_iter)
            throw MaxIterError("value iteration did not reach tol " + std::to_string(tol), residual, k);
        result.v = std::move(next);
    }
}

Policy policy_from_value(const MdpModel& mdp, double tau, const ValueFunction& v) {
    require_tau(tau);
    Matrix q = soft_q(mdp, v);
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        const double m = q.row(s).maxCoeff();
        q.row(s) = ((q.row(s).array() - m) / tau).exp().matrix();
        q.row(s) /= q.row(s).sum();
    }
    return Policy(std::move(q));
}

DualVariable optimal_dual_standard(const MdpModel& mdp, const Policy& pi_star, const WeightVector& weight) {
    require(weight.values().size() == mdp.num_states(), ErrorCode::DimensionMismatch, "weight length != |S|");
    return dual_standard_from(factor_adjoint(mdp, pi_star), pi_star, weight);
}

DualVariable optimal_dual_quadratic(const MdpModel& mdp, const Policy& pi_star, const ValueFunction& v_star,
                                    double alpha) {
    require(v_star.size() == mdp.num_states(), ErrorCode::DimensionMismatch, "value vector length does not match |S|");
    return dual_quadratic_from(factor_adjoint(mdp, pi_star), pi_star, v_star, alpha);
}

Vector primal_feasibility_residual(const MdpModel& mdp, double tau, const ValueFunction& v) {
    return v - soft_bellman_operator(mdp, tau, v);
}

OracleSolution compute_oracle(const MdpModel& mdp, double tau, double alpha, const WeightVector& weight, double tol,
                              long max_iter) {
    require(weight.values().size() == mdp.num_states(), ErrorCode::DimensionMismatch, "weight length != |S|");
    ValueIterationResult vi = solve_value_iteration(mdp, tau, tol, max_iter);
    Policy pi = policy_from_value(mdp, tau, vi.v);
    const auto lu = factor_adjoint(mdp, pi);
    DualVariable u_circ = dual_standard_from(lu, pi, weight);
    DualVariable u_star = dual_quadratic_from(lu, pi, vi.v, alpha);
    const double residual = vi.residuals.back();
    return OracleSolution{std::move(vi.v), std::move(pi), std::move(u_circ), std::move(u_star), tau, alpha,
                          weight,          vi.iterations, residual};
}

}  // namespace ermdp
