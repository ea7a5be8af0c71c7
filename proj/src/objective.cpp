#include "ermdp/objective.hpp"

#include <cmath>
#include <string>

namespace ermdp {

namespace {

void check_shapes(const MdpModel& mdp, const ValueFunction& v, const DualVariable& u) {
    require(v.size() == mdp.num_states() && u.values().rows() == mdp.num_states() &&
                u.values().cols() == mdp.num_actions(),
            ErrorCode::DimensionMismatch, "iterate shape does not match MDP");
}

void check_c(double c) { require(c >= 0.0 && c < 1.0, ErrorCode::COutOfRange, "c must lie in [0, 1)"); }

/// log(u_sa / ũ_s).
Matrix log_policy(const Matrix& u) {
    const Vector mass = u.rowwise().sum();
    Matrix out = u.array().log().matrix();
    out.colwise() -= mass.array().log().matrix();
    return out;
}

/// r_sa - (K_a v)_s - tau log(u_sa/ũ_s): the u-gradient of both objectives.
Matrix dual_gradient(const MdpModel& mdp, double tau, const ValueFunction& v, const Matrix& u) {
    return mdp.reward() - apply_K(mdp, v) - tau * log_policy(u);
}

double bregman_log(double target, double x) { return target * std::log(target / x) + x - target; }

void check_solution(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution) {
    require(v.size() == solution.v_star.size() && u.values().rows() == solution.u_star.values().rows() &&
                u.values().cols() == solution.u_star.values().cols(),
            ErrorCode::DimensionMismatch, "iterate shape does not match oracle solution");
}

}  // namespace

double eval_E0(const MdpModel& mdp, double tau, const WeightVector& weight, const ValueFunction& v,
               const DualVariable& u) {
    check_shapes(mdp, v, u);
    require(tau > 0.0, ErrorCode::NonPositiveTau, "tau must be positive");
    const Matrix& uu = u.values();
    const Matrix advantage = mdp.reward() - apply_K(mdp, v);
    return weight.values().dot(v) + uu.cwiseProduct(advantage).sum() - tau * uu.cwiseProduct(log_policy(uu)).sum();
}

double eval_E(const MdpModel& mdp, double tau, double alpha, const ValueFunction& v, const DualVariable& u) {
    check_shapes(mdp, v, u);
    require(tau > 0.0, ErrorCode::NonPositiveTau, "tau must be positive");
    const Matrix& uu = u.values();
    const Matrix advantage = mdp.reward() - apply_K(mdp, v);
    return 0.5 * alpha * v.squaredNorm() + uu.cwiseProduct(advantage).sum() -
           tau * uu.cwiseProduct(log_policy(uu)).sum();
}

GradientPair grad_E(const MdpModel& mdp, double tau, double alpha, const ValueFunction& v, const DualVariable& u) {
    check_shapes(mdp, v, u);
    return {alpha * v - apply_K_transpose(mdp, u), dual_gradient(mdp, tau, v, u.values())};
}

HessianUBlock hessian_u_block(const DualVariable& u, double tau, int state) {
    const Matrix& uu = u.values();
    require(state >= 0 && state < uu.rows(), ErrorCode::DimensionMismatch, "state index out of range");
    const Eigen::Index A = uu.cols();
    const double mass = uu.row(state).sum();
    Matrix block = Matrix::Constant(A, A, -1.0 / mass);
    for (Eigen::Index a = 0; a < A; ++a) block(a, a) += 1.0 / uu(state, a);
    return {state, tau, std::move(block)};
}

Matrix interpolating_preconditioner(const DualVariable& u, double c, int state) {
    check_c(c);
    const Matrix& uu = u.values();
    require(state >= 0 && state < uu.rows(), ErrorCode::DimensionMismatch, "state index out of range");
    const double mass = uu.row(state).sum();
    const Vector pi = uu.row(state).transpose() / mass;
    Matrix metric = -c * pi * pi.transpose();
    metric.diagonal() += pi;
    return mass * metric;
}

double lyapunov_L(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution, double alpha,
                  double tau) {
    check_solution(v, u, solution);
    const Matrix& uu = u.values();
    const Matrix& us = solution.u_star.values();
    double dual_term = 0.0;
    for (Eigen::Index k = 0; k < uu.size(); ++k) dual_term += bregman_log(us.data()[k], uu.data()[k]);
    return 0.5 * alpha * (v - solution.v_star).squaredNorm() + tau * dual_term;
}

double lyapunov_Lc(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution, double alpha,
                   double tau, double c) {
    check_c(c);
    const double base = lyapunov_L(v, u, solution, alpha, tau);
    if (c == 0.0) return base;
    const Vector mass = u.row_sums();
    const Vector mass_star = solution.u_star.row_sums();
    double mass_term = 0.0;
    for (Eigen::Index s = 0; s < mass.size(); ++s) mass_term += bregman_log(mass_star[s], mass[s]);
    return base + tau * c / (1.0 - c) * mass_term;
}

double first_order_residual(const MdpModel& mdp, double tau, double alpha, const ValueFunction& v,
                            const DualVariable& u) {
    const GradientPair g = grad_E(mdp, tau, alpha, v, u);
    return std::max(g.grad_v.lpNorm<Eigen::Infinity>(), g.grad_u.lpNorm<Eigen::Infinity>());
}

double first_order_residual_standard(const MdpModel& mdp, double tau, const WeightVector& weight,
                                     const ValueFunction& v, const DualVariable& u) {
    check_shapes(mdp, v, u);
    const Vector flow_balance = weight.values() - apply_K_transpose(mdp, u);
    const Matrix stationarity = dual_gradient(mdp, tau, v, u.values());
    return std::max(flow_balance.lpNorm<Eigen::Infinity>(), stationarity.lpNorm<Eigen::Infinity>());
}

FlowField ngad_flow(const MdpModel& mdp, double tau, double alpha, const ValueFunction& v, const DualVariable& u) {
    return ingad_flow(mdp, tau, alpha, 0.0, v, u);
}

FlowField ingad_flow(const MdpModel& mdp, double tau, double alpha, double c, const ValueFunction& v,
                     const DualVariable& u) {
    check_shapes(mdp, v, u);
    check_c(c);
    const Matrix& uu = u.values();
    FlowField flow;
    flow.dv = -(v - apply_K_transpose(mdp, u) / alpha);
    // g = log(u/ũ) - (r - K v)/tau, i.e. -(dE/du)/tau.
    const Matrix g = -dual_gradient(mdp, tau, v, uu) / tau;
    flow.du.resize(uu.rows(), uu.cols());
    for (Eigen::Index s = 0; s < uu.rows(); ++s) {
        const double mass = uu.row(s).sum();
        const double projected = (uu.row(s).dot(g.row(s))) / mass;
        // ũ (diag(pi) - c pi pi^T) g = u ⊙ g - c u (pi·g)
        flow.du.row(s) = -(uu.row(s).cwiseProduct(g.row(s)) - c * projected * uu.row(s));
    }
    return flow;
}

GradientPair lyapunov_L_gradient(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution,
                                 double alpha, double tau) {
    check_solution(v, u, solution);
    const Matrix& uu = u.values();
    const Matrix& us = solution.u_star.values();
    return {alpha * (v - solution.v_star), tau * (Matrix::Ones(uu.rows(), uu.cols()) - us.cwiseQuotient(uu))};
}

GradientPair lyapunov_Lc_gradient(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution,
                                  double alpha, double tau, double c) {
    check_c(c);
    GradientPair g = lyapunov_L_gradient(v, u, solution, alpha, tau);
    const Vector mass = u.row_sums();
    const Vector mass_star = solution.u_star.row_sums();
    for (Eigen::Index s = 0; s < mass.size(); ++s)
        g.grad_u.row(s).array() += tau * c / (1.0 - c) * (mass[s] - mass_star[s]) / mass[s];
    return g;
}

double lyapunov_dissipation(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution,
                            double alpha, double tau) {
    check_solution(v, u, solution);
    const Matrix& uu = u.values();
    const Matrix& us = solution.u_star.values();
    const Matrix log_gap = log_policy(uu) - log_policy(us);
    return -alpha * (v - solution.v_star).squaredNorm() - tau * (uu - us).cwiseProduct(log_gap).sum();
}

double pairing(const GradientPair& gradient, const FlowField& flow) {
    return gradient.grad_v.dot(flow.dv) + gradient.grad_u.cwiseProduct(flow.du).sum();
}

}  // namespace ermdp
