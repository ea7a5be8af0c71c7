#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ermdp/mdp.hpp"
#include "ermdp/oracle.hpp"

namespace ermdp::testing {

/// Hand-rolled generators for property tests; every draw is seeded explicitly.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    Vector vector(int n, double lo = -1.0, double hi = 1.0) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
        return v;
    }

    Matrix matrix(int rows, int cols, double lo = -1.0, double hi = 1.0) {
        Matrix m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
        return m;
    }

    /// Strictly positive row-stochastic matrix.
    Matrix stochastic(int rows, int cols) {
        Matrix m = matrix(rows, cols, 0.05, 1.0);
        for (int i = 0; i < rows; ++i) m.row(i) /= m.row(i).sum();
        return m;
    }

    Policy policy(int S, int A) { return Policy(stochastic(S, A)); }

    DualVariable dual(int S, int A, double lo = 0.05, double hi = 2.0) { return DualVariable(matrix(S, A, lo, hi)); }

    /// Dense random MDP with strictly positive transitions.
    MdpModel dense_mdp(int S, int A, double gamma) {
        std::vector<std::vector<std::vector<double>>> P(A, std::vector<std::vector<double>>(S));
        for (int a = 0; a < A; ++a) {
            const Matrix rows = stochastic(S, S);
            for (int s = 0; s < S; ++s) P[a][s].assign(rows.row(s).data(), rows.row(s).data() + S);
        }
        Matrix r = matrix(S, A, 0.0, 1.0);
        std::vector<std::vector<double>> rv(S, std::vector<double>(A));
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) rv[s][a] = r(s, a);
        return build_mdp(P, rv, gamma);
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }
inline double max_abs(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

/// Brute-force (K_a v)_s by explicit loops over P.
inline Matrix brute_apply_K(const MdpModel& mdp, const Vector& v) {
    const int S = mdp.num_states(), A = mdp.num_actions();
    Matrix out(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double acc = v[s];
            for (int t = 0; t < S; ++t) acc -= mdp.discount() * mdp.transition().prob(a, s, t) * v[t];
            out(s, a) = acc;
        }
    return out;
}

/// Brute-force sum_{sa} K_{a s s'} u_sa.
inline Vector brute_apply_K_transpose(const MdpModel& mdp, const Matrix& u) {
    const int S = mdp.num_states(), A = mdp.num_actions();
    Vector out = Vector::Zero(S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            for (int t = 0; t < S; ++t) {
                const double k = (s == t ? 1.0 : 0.0) - mdp.discount() * mdp.transition().prob(a, s, t);
                out[t] += k * u(s, a);
            }
    return out;
}

/// Brute-force P_pi.
inline Matrix brute_P_pi(const MdpModel& mdp, const Matrix& pi) {
    const int S = mdp.num_states(), A = mdp.num_actions();
    Matrix out = Matrix::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int t = 0; t < S; ++t)
            for (int a = 0; a < A; ++a) out(s, t) += pi(s, a) * mdp.transition().prob(a, s, t);
    return out;
}

/// Truncated Neumann series sum_k (gamma M)^k b with gamma^K <= 1e-12.
inline Vector neumann(const Matrix& M, double gamma, const Vector& b) {
    Vector term = b;
    Vector total = b;
    for (double g = gamma; g > 1e-13; g *= gamma) {
        term = gamma * (M * term);
        total += term;
    }
    return total;
}

}  // namespace ermdp::testing
