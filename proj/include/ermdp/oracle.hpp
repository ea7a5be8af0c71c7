#pragma once

#include <vector>

#include "ermdp/mdp.hpp"

namespace ermdp {

/// Ground truth for one (mdp, tau, alpha, e) combination.
struct OracleSolution {
    ValueFunction v_star;
    Policy pi_star;
    DualVariable u_circ;  ///< dual of the linear (standard) formulation
    DualVariable u_star;  ///< dual of the quadratically convexified formulation
    double tau = 0.0;
    double alpha = 0.0;
    WeightVector weight;
    long value_iterations = 0;
    double value_residual = 0.0;
};

struct ValueIterationResult {
    ValueFunction v;
    long iterations = 0;
    /// ||phi(v_k) - v_k||_inf for k = 0, 1, ...
    std::vector<double> residuals;
};

/// phi(v)_s = tau log sum_a exp((r_sa + gamma (P v)_sa) / tau), max-subtracted.
ValueFunction soft_bellman_operator(const MdpModel& mdp, double tau, const ValueFunction& v);

/// Default stopping tolerance 1e-12 (1 + ||r||_inf / (1 - gamma)).
double default_value_iteration_tol(const MdpModel& mdp);

/// Iterates phi from v = 0 until ||phi(v) - v||_inf <= tol. Throws MaxIterError.
ValueIterationResult solve_value_iteration(const MdpModel& mdp, double tau, double tol, long max_iter);

/// Softmax policy pi_sa ∝ exp((r_sa + gamma (P v)_sa) / tau).
Policy policy_from_value(const MdpModel& mdp, double tau, const ValueFunction& v);

/// u°_sa = pi*_sa (K_{pi*}^{-T} e)_s.
DualVariable optimal_dual_standard(const MdpModel& mdp, const Policy& pi_star, const WeightVector& weight);

/// u*_sa = pi*_sa w_s with w = alpha K_{pi*}^{-T} v*. Requires w > 0.
DualVariable optimal_dual_quadratic(const MdpModel& mdp, const Policy& pi_star, const ValueFunction& v_star,
                                    double alpha);

/// v_s - phi(v)_s; v is primal-feasible iff every entry is nonnegative.
Vector primal_feasibility_residual(const MdpModel& mdp, double tau, const ValueFunction& v);

/// Value iteration, policy extraction and both duals, with a single
/// factorization of K_{pi*}^T shared by the two dual solves.
OracleSolution compute_oracle(const MdpModel& mdp, double tau, double alpha, const WeightVector& weight, double tol,
                              long max_iter = 10'000'000);

}  // namespace ermdp
