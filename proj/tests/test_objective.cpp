#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "ermdp/error.hpp"
#include "ermdp/objective.hpp"
#include "support.hpp"

using namespace ermdp;
using ermdp::testing::Gen;
using ermdp::testing::max_abs;

namespace {

MdpModel scalar_mdp() { return build_mdp({{{1.0}}}, {{2.0}}, 0.5); }

DualVariable scalar_dual(double u) { return DualVariable(Matrix::Constant(1, 1, u)); }

/// Term-by-term sum of E0 with explicit loops over P.
double brute_E0(const MdpModel& mdp, double tau, const Vector& e, const Vector& v, const Matrix& u) {
    const int S = mdp.num_states(), A = mdp.num_actions();
    double total = e.dot(v);
    for (int s = 0; s < S; ++s) {
        double mass = 0.0;
        for (int a = 0; a < A; ++a) mass += u(s, a);
        for (int a = 0; a < A; ++a) {
            double kv = v[s];
            for (int t = 0; t < S; ++t) kv -= mdp.discount() * mdp.transition().prob(a, s, t) * v[t];
            total += u(s, a) * (mdp.reward()(s, a) - kv) - tau * u(s, a) * std::log(u(s, a) / mass);
        }
    }
    return total;
}

double brute_L(const Vector& v, const Matrix& u, const OracleSolution& sol, double alpha, double tau) {
    double total = 0.0;
    for (int s = 0; s < v.size(); ++s) total += 0.5 * alpha * (v[s] - sol.v_star[s]) * (v[s] - sol.v_star[s]);
    const Matrix& us = sol.u_star.values();
    for (int s = 0; s < u.rows(); ++s)
        for (int a = 0; a < u.cols(); ++a) total += tau * (us(s, a) * std::log(us(s, a) / u(s, a)) + u(s, a) - us(s, a));
    return total;
}

struct Fixture {
    MdpModel mdp;
    OracleSolution sol;
    double tau;
    double alpha;
};

Fixture make_fixture(Gen& g, int S, int A) {
    const double tau = g.uniform(0.05, 0.5), alpha = g.uniform(0.05, 1.0);
    auto mdp = g.dense_mdp(S, A, g.uniform(0.5, 0.95));
    auto sol = compute_oracle(mdp, tau, alpha, WeightVector::ones(S), 1e-13);
    return {std::move(mdp), std::move(sol), tau, alpha};
}

}  // namespace

TEST(EvalE0, Examples) {
    EXPECT_NEAR(eval_E0(scalar_mdp(), 0.3, WeightVector::ones(1), Vector::Zero(1), scalar_dual(1.0)), 2.0, 1e-15);

    // Uniform u at one state: the entropy term adds tau ũ log |A|.
    const auto mdp = build_mdp({{{1.0}}, {{1.0}}, {{1.0}}}, {{0.0, 0.0, 0.0}}, 0.5);
    const double tau = 0.4;
    const DualVariable u(Matrix::Constant(1, 3, 0.7));
    EXPECT_NEAR(eval_E0(mdp, tau, WeightVector::ones(1), Vector::Zero(1), u), tau * 2.1 * std::log(3.0), 1e-14);
}

TEST(EvalE0, MatchesBruteForce) {
    Gen g(21);
    const auto mdp = g.dense_mdp(6, 3, 0.9);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector e = g.vector(6, 0.1, 2.0);
        const Vector v = g.vector(6, -3.0, 3.0);
        const auto u = g.dual(6, 3);
        const double got = eval_E0(mdp, 0.3, WeightVector(e), v, u);
        const double want = brute_E0(mdp, 0.3, e, v, u.values());
        EXPECT_LE(std::abs(got - want), 1e-12 * (1.0 + std::abs(want)));
    }
}

TEST(EvalE, Examples) {
    const auto mdp = scalar_mdp();
    EXPECT_NEAR(eval_E(mdp, 0.3, 0.1, Vector::Constant(1, 2.0), scalar_dual(1.0)), 1.2, 1e-15);

    Gen g(22);
    const auto m = g.dense_mdp(6, 3, 0.9);
    const auto u = g.dual(6, 3);
    EXPECT_NEAR(eval_E(m, 0.3, 0.7, Vector::Zero(6), u), eval_E0(m, 0.3, WeightVector::ones(6), Vector::Zero(6), u),
                1e-14);
}

TEST(EvalE, MatchesBruteForce) {
    Gen g(23);
    const auto mdp = g.dense_mdp(6, 3, 0.9);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector v = g.vector(6, -3.0, 3.0);
        const auto u = g.dual(6, 3);
        const double alpha = g.uniform(0.05, 2.0);
        const double want = brute_E0(mdp, 0.3, Vector::Zero(6), v, u.values()) + 0.5 * alpha * v.squaredNorm();
        const double got = eval_E(mdp, 0.3, alpha, v, u);
        EXPECT_LE(std::abs(got - want), 1e-12 * (1.0 + std::abs(want)));
    }
}

TEST(EvalE, RejectsNonPositiveDual) {
    EXPECT_THROW(DualVariable(Matrix::Constant(1, 1, 0.0)), Error);
    EXPECT_THROW(DualVariable(Matrix::Constant(1, 1, -1.0)), Error);
}

TEST(GradE, ScalarAndStationaryPoint) {
    const auto mdp = scalar_mdp();
    const auto g1 = grad_E(mdp, 0.3, 0.1, Vector::Constant(1, 3.0), scalar_dual(0.6));
    EXPECT_NEAR(g1.grad_u(0, 0), 2.0 - 0.5 * 3.0, 1e-15);

    Gen g(24);
    const auto f = make_fixture(g, 5, 3);
    const auto at_opt = grad_E(f.mdp, f.tau, f.alpha, f.sol.v_star, f.sol.u_star);
    EXPECT_LE(max_abs(at_opt.grad_v), 1e-9);
    EXPECT_LE(max_abs(at_opt.grad_u), 1e-9);
}

TEST(GradE, CentralFiniteDifferences) {
    Gen g(25);
    const double h = 1e-6;
    for (int inst = 0; inst < 3; ++inst) {
        const auto mdp = g.dense_mdp(5, 3, 0.9);
        const double tau = 0.2, alpha = 0.3;
        for (int point = 0; point < 50; ++point) {
            const Vector v = g.vector(5, -2.0, 2.0);
            const Matrix u = g.matrix(5, 3, 0.2, 2.0);
            const auto grad = grad_E(mdp, tau, alpha, v, DualVariable(u));
            double worst = 0.0;
            for (int s = 0; s < 5; ++s) {
                Vector vp = v, vm = v;
                vp[s] += h;
                vm[s] -= h;
                const double fd = (eval_E(mdp, tau, alpha, vp, DualVariable(u)) -
                                   eval_E(mdp, tau, alpha, vm, DualVariable(u))) / (2 * h);
                worst = std::max(worst, std::abs(fd - grad.grad_v[s]) / std::max(1.0, std::abs(fd)));
            }
            for (int s = 0; s < 5; ++s)
                for (int a = 0; a < 3; ++a) {
                    Matrix up = u, um = u;
                    up(s, a) += h;
                    um(s, a) -= h;
                    const double fd = (eval_E(mdp, tau, alpha, v, DualVariable(up)) -
                                       eval_E(mdp, tau, alpha, v, DualVariable(um))) / (2 * h);
                    worst = std::max(worst, std::abs(fd - grad.grad_u(s, a)) / std::max(1.0, std::abs(fd)));
                }
            EXPECT_LE(worst, 1e-5);
        }
    }
}

TEST(HessianUBlock, Examples) {
    const auto h1 = hessian_u_block(scalar_dual(0.7), 0.3, 0);
    EXPECT_NEAR(h1.block(0, 0), 0.0, 1e-15);

    const auto h2 = hessian_u_block(DualVariable(Matrix::Ones(1, 2)), 0.3, 0);
    Matrix want(2, 2);
    want << 0.5, -0.5, -0.5, 0.5;
    EXPECT_LE(max_abs(Matrix(h2.block - want)), 1e-15);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h2.block);
    EXPECT_NEAR(es.eigenvalues()[0], 0.0, 1e-15);
    EXPECT_NEAR(es.eigenvalues()[1], 1.0, 1e-15);
    EXPECT_LE(max_abs(Matrix(h2.objective_hessian() + 0.3 * want)), 1e-15);
}

TEST(HessianUBlock, PsdWithNullSpaceAlongU) {
    Gen g(26);
    for (int trial = 0; trial < 20; ++trial) {
        const auto u = g.dual(3, 5);
        const int s = g.integer(0, 2);
        const auto h = hessian_u_block(u, 0.2, s);
        const Vector us = u.values().row(s).transpose();
        EXPECT_LE(max_abs(Vector(h.block * us)), 1e-12);
        Eigen::SelfAdjointEigenSolver<Matrix> es(h.block);
        EXPECT_GE(es.eigenvalues()[0], -1e-12);
        Vector null = es.eigenvectors().col(0);
        null *= us.norm() / null.norm();
        if (null.dot(us) < 0) null = -null;
        EXPECT_LE(max_abs(Vector(null - us)) / us.norm(), 1e-10);
    }
}

TEST(InterpolatingPreconditioner, Examples) {
    Gen g(27);
    const auto u = g.dual(2, 4);
    EXPECT_LE(max_abs(Matrix(interpolating_preconditioner(u, 0.0, 1) -
                             Matrix(u.values().row(1).transpose().asDiagonal()))),
              1e-15);

    const auto half = DualVariable(Matrix::Constant(1, 2, 0.5));
    const Matrix near_one = interpolating_preconditioner(half, 1.0 - 1e-12, 0);
    Matrix limit(2, 2);
    limit << 0.25, -0.25, -0.25, 0.25;
    EXPECT_LE(max_abs(Matrix(near_one - limit)), 1e-11);

    EXPECT_THROW(interpolating_preconditioner(half, 1.0, 0), Error);
    EXPECT_THROW(interpolating_preconditioner(half, -0.1, 0), Error);
}

TEST(InterpolatingPreconditioner, PositiveDefiniteForCBelowOne) {
    Gen g(28);
    for (int trial = 0; trial < 50; ++trial) {
        const auto u = g.dual(1, 5);
        const Matrix G = interpolating_preconditioner(u, 0.9, 0);
        EXPECT_LE(max_abs(Matrix(G - G.transpose())), 1e-15);
        Eigen::SelfAdjointEigenSolver<Matrix> es(G);
        EXPECT_GT(es.eigenvalues()[0], 0.0);
    }
}

TEST(InterpolatingPreconditioner, InverseIdentity) {
    Gen g(29);
    for (double c : {0.0, 0.5, 0.9, 0.98}) {
        for (int trial = 0; trial < 25; ++trial) {
            const int A = g.integer(1, 8);
            const auto u = g.dual(1, A);
            const Matrix pi = u.policy().probs();
            const Matrix G = interpolating_preconditioner(u, c, 0) / u.row_sums()[0];
            Matrix inv = Matrix(pi.row(0).cwiseInverse().asDiagonal());
            inv.array() += c / (1.0 - c);
            EXPECT_LE(max_abs(Matrix(inv * G - Matrix::Identity(A, A))), 1e-12);
        }
    }
}

TEST(Lyapunov, Examples) {
    Gen g(30);
    const auto f = make_fixture(g, 4, 3);
    EXPECT_LE(std::abs(lyapunov_L(f.sol.v_star, f.sol.u_star, f.sol, f.alpha, f.tau)), 1e-12);
    EXPECT_LE(std::abs(lyapunov_Lc(f.sol.v_star, f.sol.u_star, f.sol, f.alpha, f.tau, 0.9)), 1e-12);

    const double delta = 0.37;
    const Vector shifted = f.sol.v_star.array() + delta;
    EXPECT_NEAR(lyapunov_L(shifted, f.sol.u_star, f.sol, f.alpha, f.tau), 0.5 * f.alpha * 4 * delta * delta, 1e-14);

    const Vector v = g.vector(4);
    const auto u = g.dual(4, 3);
    EXPECT_EQ(lyapunov_Lc(v, u, f.sol, f.alpha, f.tau, 0.0), lyapunov_L(v, u, f.sol, f.alpha, f.tau));
}

TEST(Lyapunov, NonnegativeAndMatchesBruteForce) {
    Gen g(31);
    const auto f = make_fixture(g, 5, 3);
    for (int trial = 0; trial < 100; ++trial) {
        const Vector v = f.sol.v_star + g.vector(5, -1.0, 1.0);
        const Matrix u = f.sol.u_star.values().array() * g.matrix(5, 3, 0.3, 3.0).array();
        const double L = lyapunov_L(v, DualVariable(u), f.sol, f.alpha, f.tau);
        EXPECT_GE(L, 0.0);
        EXPECT_LE(std::abs(L - brute_L(v, u, f.sol, f.alpha, f.tau)), 1e-12 * (1.0 + L));
        const double Lc = lyapunov_Lc(v, DualVariable(u), f.sol, f.alpha, f.tau, 0.9);
        EXPECT_GE(Lc, L - 1e-14);
    }
}

TEST(FirstOrderResidual, Examples) {
    EXPECT_NEAR(first_order_residual(scalar_mdp(), 0.3, 0.1, Vector::Zero(1), scalar_dual(1.0)), 2.0, 1e-15);
    Gen g(32);
    const auto f = make_fixture(g, 6, 2);
    EXPECT_LE(first_order_residual(f.mdp, f.tau, f.alpha, f.sol.v_star, f.sol.u_star), 1e-9);
    EXPECT_GT(first_order_residual(f.mdp, f.tau, f.alpha, Vector(f.sol.v_star.array() + 0.1), f.sol.u_star), 1e-3);
}

TEST(Concavity, MidpointInU) {
    Gen g(33);
    const auto mdp = g.dense_mdp(5, 4, 0.9);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector v = g.vector(5, -2.0, 2.0);
        const Matrix u1 = g.matrix(5, 4, 0.05, 3.0);
        const Matrix u2 = g.matrix(5, 4, 0.05, 3.0);
        const double mid = eval_E(mdp, 0.3, 0.5, v, DualVariable(0.5 * (u1 + u2)));
        const double chord = 0.5 * (eval_E(mdp, 0.3, 0.5, v, DualVariable(u1)) + eval_E(mdp, 0.3, 0.5, v, DualVariable(u2)));
        EXPECT_GE(mid, chord - 1e-10);
    }
}

TEST(Convexity, StrongInV) {
    Gen g(34);
    const auto mdp = g.dense_mdp(5, 4, 0.9);
    const double alpha = 0.4;
    for (int trial = 0; trial < 50; ++trial) {
        const auto u = g.dual(5, 4);
        const Vector v1 = g.vector(5, -3.0, 3.0);
        const Vector v2 = g.vector(5, -3.0, 3.0);
        const double gap = 0.5 * (eval_E(mdp, 0.3, alpha, v1, u) + eval_E(mdp, 0.3, alpha, v2, u)) -
                           eval_E(mdp, 0.3, alpha, Vector(0.5 * (v1 + v2)), u);
        EXPECT_GE(gap, alpha / 8.0 * (v1 - v2).squaredNorm() - 1e-10);
    }
}

TEST(Dissipation, NgadAndIngadFlows) {
    Gen g(35);
    for (int inst = 0; inst < 4; ++inst) {
        const auto f = make_fixture(g, 5, 3);
        for (int point = 0; point < 25; ++point) {
            const Vector v = f.sol.v_star + g.vector(5, -1.0, 1.0);
            const DualVariable u(f.sol.u_star.values().array() * g.matrix(5, 3, 0.3, 3.0).array());
            const double closed = lyapunov_dissipation(v, u, f.sol, f.alpha, f.tau);
            EXPECT_LE(closed, 0.0);

            const double d0 = pairing(lyapunov_L_gradient(v, u, f.sol, f.alpha, f.tau),
                                      ngad_flow(f.mdp, f.tau, f.alpha, v, u));
            EXPECT_NEAR(d0, closed, 1e-9);

            const double c = 0.9;
            const double dc = pairing(lyapunov_Lc_gradient(v, u, f.sol, f.alpha, f.tau, c),
                                      ingad_flow(f.mdp, f.tau, f.alpha, c, v, u));
            EXPECT_NEAR(dc, closed, 1e-9);
        }
    }
}
