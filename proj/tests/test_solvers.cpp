#include <gtest/gtest.h>

#include <cmath>

#include "ermdp/error.hpp"
#include "ermdp/experiment.hpp"
#include "ermdp/objective.hpp"
#include "ermdp/solvers.hpp"
#include "support.hpp"

using namespace ermdp;
using ermdp::testing::Gen;
using ermdp::testing::max_abs;

namespace {

/// Element-wise transcription of the discrete update with explicit loops over P.
SolverState brute_step(const MdpModel& mdp, const SolverState& st, double alpha, double tau, double eta, double c) {
    const int S = mdp.num_states(), A = mdp.num_actions();
    const double g = mdp.discount();
    SolverState out{Vector(S), Matrix(S, A)};
    for (int t = 0; t < S; ++t) {
        double ktu = 0.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                ktu += ((s == t ? 1.0 : 0.0) - g * mdp.transition().prob(a, s, t)) * std::exp(st.theta(s, a));
        out.v[t] = (1.0 - eta) * st.v[t] + eta / alpha * ktu;
    }
    for (int s = 0; s < S; ++s) {
        double z = 0.0;
        for (int a = 0; a < A; ++a) z += std::exp(st.theta(s, a));
        std::vector<double> d(A);
        double pd = 0.0;
        for (int a = 0; a < A; ++a) {
            double kv = out.v[s];
            for (int t = 0; t < S; ++t) kv -= g * mdp.transition().prob(a, s, t) * out.v[t];
            d[a] = st.theta(s, a) - std::log(z) - (mdp.reward()(s, a) - kv) / tau;
            pd += std::exp(st.theta(s, a)) / z * d[a];
        }
        for (int a = 0; a < A; ++a) out.theta(s, a) = st.theta(s, a) - eta * (d[a] - c * pd);
    }
    return out;
}

SolverConfig small_config(double c) {
    SolverConfig cfg;
    cfg.alpha = 0.5;
    cfg.tau = 0.2;
    cfg.eta = 0.05;
    cfg.c = c;
    cfg.eps_tol = 1e-9;
    cfg.max_iter = 100000;
    return cfg;
}

SolverState random_state(Gen& g, int S, int A) { return {g.vector(S, -1.0, 3.0), g.matrix(S, A, -2.0, 1.0)}; }

}  // namespace

TEST(NgadStep, MatchesTranscription) {
    Gen g(41);
    for (int trial = 0; trial < 10; ++trial) {
        const auto mdp = g.dense_mdp(5, 3, 0.9);
        const auto st = random_state(g, 5, 3);
        const auto cfg = small_config(0.0);
        const auto got = ngad_step(mdp, st, cfg);
        const auto want = brute_step(mdp, st, cfg.alpha, cfg.tau, cfg.eta, 0.0);
        EXPECT_LE(max_abs(Vector(got.v - want.v)), 1e-13);
        EXPECT_LE(max_abs(Matrix(got.theta - want.theta)), 1e-13);
    }
}

TEST(IngadStep, MatchesTranscription) {
    Gen g(42);
    for (int trial = 0; trial < 10; ++trial) {
        const auto mdp = generate_random_mdp(5, 3, 2, trial, 0.9);
        const auto st = random_state(g, 5, 3);
        const auto cfg = small_config(0.9);
        const auto got = ingad_step(mdp, st, cfg);
        const auto want = brute_step(mdp, st, cfg.alpha, cfg.tau, cfg.eta, 0.9);
        EXPECT_LE(max_abs(Vector(got.v - want.v)), 1e-13);
        EXPECT_LE(max_abs(Matrix(got.theta - want.theta)), 1e-13);
    }
}

TEST(IngadStep, ZeroCReducesToNgad) {
    Gen g(43);
    const auto mdp = g.dense_mdp(6, 4, 0.95);
    auto st = random_state(g, 6, 4);
    const auto cfg = small_config(0.0);
    for (int i = 0; i < 20; ++i) {
        const auto a = ngad_step(mdp, st, cfg);
        const auto b = ingad_step(mdp, st, cfg);
        EXPECT_TRUE(a.v == b.v);
        EXPECT_TRUE(a.theta == b.theta);
        st = a;
    }
}

TEST(Steps, ZeroLearningRateIsIdentity) {
    Gen g(44);
    const auto mdp = g.dense_mdp(4, 3, 0.9);
    const auto st = random_state(g, 4, 3);
    auto cfg = small_config(0.5);
    cfg.eta = 0.0;
    const auto n = ngad_step(mdp, st, cfg);
    const auto i = ingad_step(mdp, st, cfg);
    EXPECT_TRUE(n.v == st.v && n.theta == st.theta);
    EXPECT_TRUE(i.v == st.v && i.theta == st.theta);
}

TEST(Steps, OraclePointIsFixed) {
    Gen g(45);
    for (int trial = 0; trial < 5; ++trial) {
        const auto mdp = g.dense_mdp(6, 3, 0.9);
        const auto cfg = small_config(0.9);
        const auto sol = compute_oracle(mdp, cfg.tau, cfg.alpha, WeightVector::ones(6), 1e-13);
        const auto st = SolverState::from_oracle(sol);
        for (const auto& next : {ngad_step(mdp, st, cfg), ingad_step(mdp, st, cfg)}) {
            EXPECT_LE(max_abs(Vector(next.v - st.v)), 1e-10);
            EXPECT_LE(max_abs(Matrix(next.theta - st.theta)), 1e-10);
        }
    }
}

TEST(ConvergenceMetric, Examples) {
    Gen g(46);
    const Vector v = g.vector(4, 0.5, 1.0);
    const Matrix u = g.matrix(4, 2, 0.5, 1.0);
    EXPECT_EQ(convergence_metric(v, u, v, u), 0.0);
    EXPECT_DOUBLE_EQ(convergence_metric(v, u, Vector(2.0 * v), u), 1.0);

    const Vector v2 = g.vector(4);
    const Matrix u2 = g.matrix(4, 2);
    double dv = 0.0, nv = 0.0, du = 0.0, nu = 0.0;
    for (int i = 0; i < 4; ++i) {
        dv += (v2[i] - v[i]) * (v2[i] - v[i]);
        nv += v[i] * v[i];
        for (int j = 0; j < 2; ++j) {
            du += (u2(i, j) - u(i, j)) * (u2(i, j) - u(i, j));
            nu += u(i, j) * u(i, j);
        }
    }
    const double want = std::max(std::sqrt(dv) / std::sqrt(nv), std::sqrt(du) / std::sqrt(nu));
    EXPECT_NEAR(convergence_metric(v, u, v2, u2), want, 1e-15);

    try {
        convergence_metric(Vector::Zero(4), u, v, u);
        FAIL() << "expected ZeroNormReference";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroNormReference);
    }
}

TEST(SolverConfig, Validation) {
    auto cfg = small_config(0.5);
    EXPECT_THROW(cfg.validate(Variant::NGAD), Error);
    EXPECT_NO_THROW(cfg.validate(Variant::INGAD));
    cfg.c = 1.0;
    try {
        cfg.validate(Variant::INGAD);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::COutOfRange);
    }
    cfg = small_config(0.0);
    cfg.tau = 0.0;
    EXPECT_THROW(cfg.validate(Variant::NGAD), Error);
    EXPECT_EQ(parse_variant("ngad"), Variant::NGAD);
    EXPECT_EQ(to_string(Variant::INGAD), "ingad");
}

TEST(RunSolver, OracleInitConvergesImmediately) {
    Gen g(47);
    const auto mdp = g.dense_mdp(6, 3, 0.9);
    const auto cfg = small_config(0.9);
    const auto sol = compute_oracle(mdp, cfg.tau, cfg.alpha, WeightVector::ones(6), 1e-13);
    const auto trace = run_solver(mdp, cfg, SolverState::from_oracle(sol), Variant::INGAD, &sol);
    EXPECT_TRUE(trace.converged);
    EXPECT_LE(trace.iterations, 2);
    EXPECT_LE(trace.records.back().q, 1e-10);
}

TEST(RunSolver, ConvergesToOracleWithMonotoneLyapunov) {
    Gen g(48);
    for (const auto variant : {Variant::NGAD, Variant::INGAD}) {
        const auto mdp = generate_random_mdp(12, 4, 3, 5, 0.9);
        const auto cfg = small_config(variant == Variant::NGAD ? 0.0 : 0.9);
        const auto sol = compute_oracle(mdp, cfg.tau, cfg.alpha, WeightVector::ones(12), 1e-13);
        const auto trace = run_solver(mdp, cfg, SolverState::zeros(12, 4), variant, &sol);
        ASSERT_TRUE(trace.converged);
        EXPECT_EQ(trace.records.back().iter, trace.iterations);
        EXPECT_LE(*trace.records.back().value_error, 1e-6);
        EXPECT_LE(*trace.records.back().policy_error, 1e-6);
        EXPECT_LE(*trace.records.back().fo_residual, 1e-4);
        EXPECT_GE(*lyapunov_monotone_fraction(trace), 0.999);
        EXPECT_LE(*trace.records.back().lyapunov / *trace.records.front().lyapunov, 1e-6);
    }
}

TEST(RunSolver, FirstOrderResidualTailDecreases) {
    const auto mdp = generate_random_mdp(10, 3, 3, 9, 0.9);
    const auto cfg = small_config(0.9);
    const auto sol = compute_oracle(mdp, cfg.tau, cfg.alpha, WeightVector::ones(10), 1e-13);
    const auto trace = run_solver(mdp, cfg, SolverState::zeros(10, 3), Variant::INGAD, &sol);
    ASSERT_TRUE(trace.converged);
    const std::size_t start = trace.records.size() / 2;
    for (std::size_t i = start + 1; i < trace.records.size(); ++i)
        EXPECT_LE(*trace.records[i].fo_residual, *trace.records[i - 1].fo_residual * (1.0 + 1e-8));
    EXPECT_LT(*trace.records.back().fo_residual, 1e-4);
}

TEST(RunSolver, MaxIterReturnsPartialTrace) {
    const auto mdp = generate_random_mdp(8, 3, 2, 1, 0.9);
    auto cfg = small_config(0.5);
    cfg.max_iter = 25;
    const auto trace = run_solver(mdp, cfg, SolverState::zeros(8, 3), Variant::INGAD);
    EXPECT_FALSE(trace.converged);
    EXPECT_EQ(trace.iterations, 25);
    EXPECT_EQ(trace.records.back().iter, 25);
    EXPECT_FALSE(trace.records.back().lyapunov.has_value());
}

TEST(RunSolver, HugeLearningRateDiverges) {
    const auto mdp = generate_random_mdp(8, 3, 2, 1, 0.9);
    auto cfg = small_config(0.0);
    cfg.eta = 10.0;
    EXPECT_THROW(run_solver(mdp, cfg, SolverState::zeros(8, 3), Variant::NGAD), DivergenceError);
}

TEST(RunSolver, BitReproducible) {
    const auto mdp = generate_random_mdp(10, 3, 3, 2, 0.9);
    const auto cfg = small_config(0.9);
    const auto sol = compute_oracle(mdp, cfg.tau, cfg.alpha, WeightVector::ones(10), 1e-13);
    const auto a = run_solver(mdp, cfg, SolverState::zeros(10, 3), Variant::INGAD, &sol);
    const auto b = run_solver(mdp, cfg, SolverState::zeros(10, 3), Variant::INGAD, &sol);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].q, b.records[i].q);
        EXPECT_EQ(a.records[i].lyapunov, b.records[i].lyapunov);
    }
    EXPECT_TRUE(a.final_state.theta == b.final_state.theta);
}

TEST(RunSolver, RejectsMismatchedOracle) {
    const auto mdp = generate_random_mdp(5, 2, 2, 1, 0.9);
    const auto cfg = small_config(0.5);
    const auto sol = compute_oracle(mdp, cfg.tau * 2, cfg.alpha, WeightVector::ones(5), 1e-12);
    EXPECT_THROW(run_solver(mdp, cfg, SolverState::zeros(5, 2), Variant::INGAD, &sol), Error);
}
