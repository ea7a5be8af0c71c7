#pragma once

#include "ermdp/mdp.hpp"
#include "ermdp/oracle.hpp"

namespace ermdp {

/// Partial derivatives of E with respect to v (length S) and u (S×A).
struct GradientPair {
    Vector grad_v;
    Matrix grad_u;
};

/**
 * Diagonal u-block of the Hessian for one state.
 *
 * `block` holds H_s = diag(1/u_s) - (1/ũ_s) 1 1^T, which is positive
 * semi-definite with null space span(u_s). The Hessian of E itself is
 * -tau H_s; objective_hessian() returns that signed form.
 */
struct HessianUBlock {
    int state = 0;
    double tau = 0.0;
    Matrix block;

    Matrix objective_hessian() const { return -tau * block; }
};

/// Right-hand side of a continuous-time flow in (v, u).
struct FlowField {
    Vector dv;
    Matrix du;
};

/// E0 = e·v + sum u_sa (r_sa - (K_a v)_s) - tau sum u_sa log(u_sa / ũ_s).
double eval_E0(const MdpModel& mdp, double tau, const WeightVector& weight, const ValueFunction& v,
               const DualVariable& u);

/// E = (alpha/2)|v|^2 + sum u_sa (r_sa - (K_a v)_s) - tau sum u_sa log(u_sa / ũ_s).
double eval_E(const MdpModel& mdp, double tau, double alpha, const ValueFunction& v, const DualVariable& u);

GradientPair grad_E(const MdpModel& mdp, double tau, double alpha, const ValueFunction& v, const DualVariable& u);

HessianUBlock hessian_u_block(const DualVariable& u, double tau, int state);

/// ũ_s (diag(pi_s) - c pi_s pi_s^T) for 0 <= c < 1.
Matrix interpolating_preconditioner(const DualVariable& u, double c, int state);

/// (alpha/2)|v - v*|^2 + tau sum (u* log(u*/u) + u - u*).
double lyapunov_L(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution, double alpha,
                  double tau);

/// lyapunov_L plus tau c/(1-c) sum_s (ũ*_s log(ũ*_s/ũ_s) + ũ_s - ũ*_s).
double lyapunov_Lc(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution, double alpha,
                   double tau, double c);

/// Max-norm residual of the stationarity system of E over all S + S·A equations.
double first_order_residual(const MdpModel& mdp, double tau, double alpha, const ValueFunction& v,
                            const DualVariable& u);

/// Same for E0 (the linear-term formulation with weights e).
double first_order_residual_standard(const MdpModel& mdp, double tau, const WeightVector& weight,
                                     const ValueFunction& v, const DualVariable& u);

// Continuous-time diagnostics.

/// NGAD flow: dv = -(v - K^T u / alpha), du = -u (log(u/ũ) - (r - K v)/tau).
FlowField ngad_flow(const MdpModel& mdp, double tau, double alpha, const ValueFunction& v, const DualVariable& u);

/// INGAD flow: du_s = -ũ_s (diag(pi_s) - c pi_s pi_s^T)(log(u_s/ũ_s) - (r_s - K v)_s / tau).
FlowField ingad_flow(const MdpModel& mdp, double tau, double alpha, double c, const ValueFunction& v,
                     const DualVariable& u);

GradientPair lyapunov_L_gradient(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution,
                                 double alpha, double tau);

GradientPair lyapunov_Lc_gradient(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution,
                                  double alpha, double tau, double c);

/// Closed-form time derivative of L (and L_c) along its flow:
/// -alpha |v - v*|^2 - tau sum (u - u*)(log(u/ũ) - log(u*/ũ*)). Always <= 0.
double lyapunov_dissipation(const ValueFunction& v, const DualVariable& u, const OracleSolution& solution,
                            double alpha, double tau);

/// <grad, flow> summed over both blocks.
double pairing(const GradientPair& gradient, const FlowField& flow);

}  // namespace ermdp
