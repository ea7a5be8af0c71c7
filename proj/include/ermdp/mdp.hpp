#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "ermdp/error.hpp"

namespace ermdp {

using Vector = Eigen::VectorXd;
/// Row-major dense matrix; S×A tables (rewards, policies, duals) and S×S operators.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Value functions are plain vectors indexed by state.
using ValueFunction = Vector;

inline constexpr double kStochasticTol = 1e-12;
/// Entries below this floor are rejected wherever log(pi) or log(u) is taken.
inline constexpr double kPositivityFloor = 1e-300;

/**
 * Transition tensor P[a][s][s'] stored row-wise: row (s, a) holds the
 * distribution over next states. Two storages are supported: a dense
 * (S*A)×S matrix and a CSR layout for rows with small support.
 */
class TransitionTensor {
public:
    TransitionTensor() = default;

    /// `values` is laid out row-major as P[a][s][s'].
    static TransitionTensor dense(int num_states, int num_actions, std::span<const double> values);

    /// CSR rows ordered by (s, a) with row index s * num_actions + a.
    static TransitionTensor sparse(int num_states, int num_actions, std::vector<std::int64_t> row_ptr,
                                   std::vector<std::int32_t> cols, std::vector<double> values);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    bool is_sparse() const { return sparse_; }

    double prob(int action, int state, int next) const;

    /// (P v)[s][a] = sum_{s'} P[a][s][s'] v[s'].
    Matrix apply(const Vector& v) const;
    /// sum_{s,a} u[s][a] P[a][s][s'].
    Vector apply_transpose(const Matrix& u) const;

    /// Visits the stored entries of row (s, a) as f(next_state, probability).
    template <class F>
    void for_each_in_row(int state, int action, F&& f) const {
        const std::int64_t row = static_cast<std::int64_t>(state) * num_actions_ + action;
        if (sparse_) {
            for (std::int64_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) f(cols_[k], values_[k]);
        } else {
            for (int j = 0; j < num_states_; ++j) {
                const double p = dense_(row, j);
                if (p != 0.0) f(j, p);
            }
        }
    }

    TransitionTensor to_dense() const;
    TransitionTensor to_sparse() const;

    const std::vector<std::int64_t>& row_ptr() const { return row_ptr_; }
    const std::vector<std::int32_t>& cols() const { return cols_; }
    const std::vector<double>& values() const { return values_; }
    const Matrix& dense_rows() const { return dense_; }

private:
    int num_states_ = 0;
    int num_actions_ = 0;
    bool sparse_ = false;
    Matrix dense_;  // (S*A)×S, row s*A + a
    std::vector<std::int64_t> row_ptr_;
    std::vector<std::int32_t> cols_;
    std::vector<double> values_;
};

/// Immutable tabular MDP (S, A, P, r, gamma). Rewards are nonnegative.
class MdpModel {
public:
    MdpModel(TransitionTensor transition, Matrix reward, double discount);

    int num_states() const { return transition_.num_states(); }
    int num_actions() const { return transition_.num_actions(); }
    const TransitionTensor& transition() const { return transition_; }
    const Matrix& reward() const { return reward_; }
    double discount() const { return discount_; }

private:
    TransitionTensor transition_;
    Matrix reward_;
    double discount_;
};

/// Row-stochastic S×A matrix with strictly positive entries.
class Policy {
public:
    explicit Policy(Matrix probs);

    static Policy uniform(int num_states, int num_actions);

    const Matrix& probs() const { return probs_; }
    int num_states() const { return static_cast<int>(probs_.rows()); }
    int num_actions() const { return static_cast<int>(probs_.cols()); }

private:
    Matrix probs_;
};

/// Strictly positive S×A dual weights u; the induced policy is u / rowsum(u).
class DualVariable {
public:
    explicit DualVariable(Matrix u);

    const Matrix& values() const { return u_; }
    Vector row_sums() const { return u_.rowwise().sum(); }
    Policy policy() const;

private:
    Matrix u_;
};

/// Strictly positive state weights e of the linear objective term.
class WeightVector {
public:
    explicit WeightVector(Vector e);

    static WeightVector ones(int num_states) { return WeightVector(Vector::Ones(num_states)); }

    const Vector& values() const { return e_; }

private:
    Vector e_;
};

struct PolicyRewardEntropy {
    Vector reward;   ///< r_pi[s] = sum_a pi_sa r_sa
    Vector entropy;  ///< h_pi[s] = sum_a pi_sa log pi_sa (nonpositive)
};

/// Builds a validated model from nested arrays P[a][s][s'] and r[s][a].
MdpModel build_mdp(const std::vector<std::vector<std::vector<double>>>& transition,
                   const std::vector<std::vector<double>>& reward, double discount);

/// Random instance: each (s, a) row is uniform over a random subset of
/// `support_size` states; r_sa = U_sa * U_s with independent uniforms.
/// The discount is not drawn; it is attached as given.
MdpModel generate_random_mdp(int num_states, int num_actions, int support_size, std::uint64_t seed,
                             double discount = 0.99);

/// Same transitions and rewards under a different discount.
MdpModel with_discount(const MdpModel& mdp, double discount);

/// Returns the model with every reward increased by `shift`.
MdpModel shift_rewards(const MdpModel& mdp, double shift);

/// P_pi; accepts any row-stochastic nonnegative matrix (deterministic policies included).
Matrix transition_under_policy(const MdpModel& mdp, const Matrix& probs);
Matrix transition_under_policy(const MdpModel& mdp, const Policy& policy);

PolicyRewardEntropy reward_and_entropy_under_policy(const MdpModel& mdp, const Policy& policy);

/// Solves (I - gamma P_pi) v = r_pi - tau h_pi by dense LU.
ValueFunction evaluate_policy(const MdpModel& mdp, const Policy& policy, double tau);

/// (K_a v)_s = v_s - gamma sum_{s'} P[a][s][s'] v_{s'}, returned as an S×A matrix.
Matrix apply_K(const TransitionTensor& transition, double discount, const Vector& v);
Matrix apply_K(const MdpModel& mdp, const ValueFunction& v);

/// sum_{s,a} K_{a s s'} u_{sa}, a vector over s'.
Vector apply_K_transpose(const TransitionTensor& transition, double discount, const Matrix& u);
Vector apply_K_transpose(const MdpModel& mdp, const DualVariable& u);

}  // namespace ermdp
