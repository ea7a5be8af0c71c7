#include "ermdp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ermdp/random.hpp"

namespace ermdp {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonStochasticRow: return "NonStochasticRow";
        case ErrorCode::NegativeReward: return "NegativeReward";
        case ErrorCode::DiscountOutOfRange: return "DiscountOutOfRange";
        case ErrorCode::SupportTooLarge: return "SupportTooLarge";
        case ErrorCode::NonPositivePolicyEntry: return "NonPositivePolicyEntry";
        case ErrorCode::SolveFailure: return "SolveFailure";
        case ErrorCode::NonPositiveTau: return "NonPositiveTau";
        case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
        case ErrorCode::NonPositiveValue: return "NonPositiveValue";
        case ErrorCode::NonPositiveDual: return "NonPositiveDual";
        case ErrorCode::COutOfRange: return "COutOfRange";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::ZeroNormReference: return "ZeroNormReference";
        case ErrorCode::InsufficientSamples: return "InsufficientSamples";
        case ErrorCode::EmptyBuffer: return "EmptyBuffer";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

namespace {

void check_row(double sum, bool negative, int action, int state) {
    if (negative)
        throw Error(ErrorCode::NonStochasticRow,
                    "negative probability in row (a=" + std::to_string(action) + ", s=" + std::to_string(state) + ")");
    if (std::abs(sum - 1.0) > kStochasticTol)
        throw Error(ErrorCode::NonStochasticRow, "row (a=" + std::to_string(action) + ", s=" + std::to_string(state) +
                                                     ") sums to " + std::to_string(sum));
}

}  // namespace

// ---------------------------------------------------------------------------
// TransitionTensor

TransitionTensor TransitionTensor::dense(int num_states, int num_actions, std::span<const double> values) {
    require(num_states > 0 && num_actions > 0, ErrorCode::DimensionMismatch, "empty state or action set");
    const std::size_t expected = static_cast<std::size_t>(num_states) * num_actions * num_states;
    require(values.size() == expected, ErrorCode::DimensionMismatch,
            "dense transition has " + std::to_string(values.size()) + " entries, expected " + std::to_string(expected));

    TransitionTensor t;
    t.num_states_ = num_states;
    t.num_actions_ = num_actions;
    t.sparse_ = false;
    t.dense_.resize(static_cast<Eigen::Index>(num_states) * num_actions, num_states);
    for (int a = 0; a < num_actions; ++a) {
        for (int s = 0; s < num_states; ++s) {
            const std::size_t offset = (static_cast<std::size_t>(a) * num_states + s) * num_states;
            double sum = 0.0;
            bool negative = false;
            for (int j = 0; j < num_states; ++j) {
                const double p = values[offset + j];
                negative |= !(p >= 0.0);
                sum += p;
                t.dense_(static_cast<Eigen::Index>(s) * num_actions + a, j) = p;
            }
            check_row(sum, negative, a, s);
        }
    }
    return t;
}

TransitionTensor TransitionTensor::sparse(int num_states, int num_actions, std::vector<std::int64_t> row_ptr,
                                          std::vector<std::int32_t> cols, std::vector<double> values) {
    require(num_states > 0 && num_actions > 0, ErrorCode::DimensionMismatch, "empty state or action set");
    const std::size_t rows = static_cast<std::size_t>(num_states) * num_actions;
    require(row_ptr.size() == rows + 1 && row_ptr.front() == 0, ErrorCode::DimensionMismatch, "bad CSR row pointer");
    require(cols.size() == values.size() && static_cast<std::size_t>(row_ptr.back()) == cols.size(),
            ErrorCode::DimensionMismatch, "CSR column/value arrays disagree with row pointer");

    for (std::size_t row = 0; row < rows; ++row) {
        require(row_ptr[row] <= row_ptr[row + 1], ErrorCode::DimensionMismatch, "CSR row pointer not monotone");
        double sum = 0.0;
        bool negative = false;
        for (std::int64_t k = row_ptr[row]; k < row_ptr[row + 1]; ++k) {
            require(cols[k] >= 0 && cols[k] < num_states, ErrorCode::DimensionMismatch, "next-state index out of range");
            negative |= !(values[k] >= 0.0);
            sum += values[k];
        }
        check_row(sum, negative, static_cast<int>(row % num_actions), static_cast<int>(row / num_actions));
    }

    TransitionTensor t;
    t.num_states_ = num_states;
    t.num_actions_ = num_actions;
    t.sparse_ = true;
    t.row_ptr_ = std::move(row_ptr);
    t.cols_ = std::move(cols);
    t.values_ = std::move(values);
    return t;
}

double TransitionTensor::prob(int action, int state, int next) const {
    const std::int64_t row = static_cast<std::int64_t>(state) * num_actions_ + action;
    if (!sparse_) return dense_(row, next);
    double p = 0.0;
    for (std::int64_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k)
        if (cols_[k] == next) p += values_[k];
    return p;
}

Matrix TransitionTensor::apply(const Vector& v) const {
    require(v.size() == num_states_, ErrorCode::DimensionMismatch, "value vector length does not match |S|");
    Matrix out(num_states_, num_actions_);
    double* dst = out.data();
    if (sparse_) {
        const std::int64_t rows = static_cast<std::int64_t>(num_states_) * num_actions_;
        const double* vd = v.data();
        for (std::int64_t row = 0; row < rows; ++row) {
            double acc = 0.0;
            for (std::int64_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) acc += values_[k] * vd[cols_[k]];
            dst[row] = acc;
        }
    } else {
        Eigen::Map<Vector>(dst, out.size()).noalias() = dense_ * v;
    }
    return out;
}

Vector TransitionTensor::apply_transpose(const Matrix& u) const {
    require(u.rows() == num_states_ && u.cols() == num_actions_, ErrorCode::DimensionMismatch,
            "dual matrix shape does not match |S|×|A|");
    Eigen::Map<const Vector> flat(u.data(), u.size());
    if (!sparse_) return dense_.transpose() * flat;
    Vector out = Vector::Zero(num_states_);
    const std::int64_t rows = static_cast<std::int64_t>(num_states_) * num_actions_;
    for (std::int64_t row = 0; row < rows; ++row) {
        const double w = flat[row];
        for (std::int64_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) out[cols_[k]] += w * values_[k];
    }
    return out;
}

TransitionTensor TransitionTensor::to_dense() const {
    if (!sparse_) return *this;
    TransitionTensor t;
    t.num_states_ = num_states_;
    t.num_actions_ = num_actions_;
    t.dense_ = Matrix::Zero(static_cast<Eigen::Index>(num_states_) * num_actions_, num_states_);
    const std::int64_t rows = static_cast<std::int64_t>(num_states_) * num_actions_;
    for (std::int64_t row = 0; row < rows; ++row)
        for (std::int64_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) t.dense_(row, cols_[k]) += values_[k];
    return t;
}

TransitionTensor TransitionTensor::to_sparse() const {
    if (sparse_) return *this;
    TransitionTensor t;
    t.num_states_ = num_states_;
    t.num_actions_ = num_actions_;
    t.sparse_ = true;
    const std::int64_t rows = static_cast<std::int64_t>(num_states_) * num_actions_;
    t.row_ptr_.reserve(rows + 1);
    t.row_ptr_.push_back(0);
    for (std::int64_t row = 0; row < rows; ++row) {
        for (int j = 0; j < num_states_; ++j) {
            if (dense_(row, j) != 0.0) {
                t.cols_.push_back(j);
                t.values_.push_back(dense_(row, j));
            }
        }
        t.row_ptr_.push_back(static_cast<std::int64_t>(t.cols_.size()));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Model types

MdpModel::MdpModel(TransitionTensor transition, Matrix reward, double discount)
    : transition_(std::move(transition)), reward_(std::move(reward)), discount_(discount) {
    require(reward_.rows() == transition_.num_states() && reward_.cols() == transition_.num_actions(),
            ErrorCode::DimensionMismatch, "reward shape does not match transition tensor");
    require(discount_ > 0.0 && discount_ < 1.0, ErrorCode::DiscountOutOfRange,
            "discount " + std::to_string(discount_) + " not in (0, 1)");
    for (Eigen::Index s = 0; s < reward_.rows(); ++s)
        for (Eigen::Index a = 0; a < reward_.cols(); ++a)
            require(reward_(s, a) >= 0.0 && std::isfinite(reward_(s, a)), ErrorCode::NegativeReward,
                    "reward r[" + std::to_string(s) + "][" + std::to_string(a) + "] = " + std::to_string(reward_(s, a)));
}

Policy::Policy(Matrix probs) : probs_(std::move(probs)) {
    require(probs_.rows() > 0 && probs_.cols() > 0, ErrorCode::DimensionMismatch, "empty policy");
    for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
        double sum = 0.0;
        for (Eigen::Index a = 0; a < probs_.cols(); ++a) {
            require(probs_(s, a) >= kPositivityFloor, ErrorCode::NonPositivePolicyEntry,
                    "pi[" + std::to_string(s) + "][" + std::to_string(a) + "] = " + std::to_string(probs_(s, a)));
            sum += probs_(s, a);
        }
        require(std::abs(sum - 1.0) <= kStochasticTol, ErrorCode::NonStochasticRow,
                "policy row " + std::to_string(s) + " sums to " + std::to_string(sum));
    }
}

Policy Policy::uniform(int num_states, int num_actions) {
    return Policy(Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
}

DualVariable::DualVariable(Matrix u) : u_(std::move(u)) {
    require(u_.rows() > 0 && u_.cols() > 0, ErrorCode::DimensionMismatch, "empty dual variable");
    for (Eigen::Index k = 0; k < u_.size(); ++k)
        require(u_.data()[k] >= kPositivityFloor && std::isfinite(u_.data()[k]), ErrorCode::NonPositiveDual,
                "dual entry " + std::to_string(u_.data()[k]));
}

Policy DualVariable::policy() const {
    Matrix pi = u_;
    for (Eigen::Index s = 0; s < pi.rows(); ++s) pi.row(s) /= pi.row(s).sum();
    return Policy(std::move(pi));
}

WeightVector::WeightVector(Vector e) : e_(std::move(e)) {
    require(e_.size() > 0, ErrorCode::DimensionMismatch, "empty weight vector");
    for (Eigen::Index s = 0; s < e_.size(); ++s)
        require(e_[s] > 0.0, ErrorCode::InvalidConfig, "weight entries must be positive");
}

// ---------------------------------------------------------------------------
// Operations

MdpModel build_mdp(const std::vector<std::vector<std::vector<double>>>& transition,
                   const std::vector<std::vector<double>>& reward, double discount) {
    require(!transition.empty() && !transition.front().empty(), ErrorCode::DimensionMismatch, "empty transition");
    const int num_actions = static_cast<int>(transition.size());
    const int num_states = static_cast<int>(transition.front().size());
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(num_actions) * num_states * num_states);
    for (const auto& per_action : transition) {
        require(static_cast<int>(per_action.size()) == num_states, ErrorCode::DimensionMismatch, "ragged transition");
        for (const auto& row : per_action) {
            require(static_cast<int>(row.size()) == num_states, ErrorCode::DimensionMismatch, "ragged transition row");
            flat.insert(flat.end(), row.begin(), row.end());
        }
    }
    require(static_cast<int>(reward.size()) == num_states, ErrorCode::DimensionMismatch, "reward rows != |S|");
    Matrix r(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
        require(static_cast<int>(reward[s].size()) == num_actions, ErrorCode::DimensionMismatch, "reward cols != |A|");
        for (int a = 0; a < num_actions; ++a) r(s, a) = reward[s][a];
    }
    return MdpModel(TransitionTensor::dense(num_states, num_actions, flat), std::move(r), discount);
}

MdpModel generate_random_mdp(int num_states, int num_actions, int support_size, std::uint64_t seed,
                             double discount) {
    require(num_states > 0 && num_actions > 0, ErrorCode::DimensionMismatch, "empty state or action set");
    require(support_size >= 1, ErrorCode::InvalidConfig, "support size must be positive");
    require(support_size <= num_states, ErrorCode::SupportTooLarge,
            "support " + std::to_string(support_size) + " exceeds |S| = " + std::to_string(num_states));

    Rng transition_rng = make_rng(seed, stream::kTransitions);
    std::vector<int> all_states(num_states);
    std::iota(all_states.begin(), all_states.end(), 0);

    const std::int64_t rows = static_cast<std::int64_t>(num_states) * num_actions;
    std::vector<std::int64_t> row_ptr(rows + 1);
    std::vector<std::int32_t> cols;
    cols.reserve(rows * support_size);
    const double weight = 1.0 / support_size;
    std::vector<int> chosen(support_size);
    for (std::int64_t row = 0; row < rows; ++row) {
        std::sample(all_states.begin(), all_states.end(), chosen.begin(), support_size, transition_rng);
        cols.insert(cols.end(), chosen.begin(), chosen.end());
        row_ptr[row + 1] = static_cast<std::int64_t>(cols.size());
    }
    std::vector<double> values(cols.size(), weight);

    Rng reward_rng = make_rng(seed, stream::kRewards);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector state_factor(num_states);
    for (int s = 0; s < num_states; ++s) state_factor[s] = unit(reward_rng);
    Matrix reward(num_states, num_actions);
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) reward(s, a) = unit(reward_rng) * state_factor[s];

    return MdpModel(TransitionTensor::sparse(num_states, num_actions, std::move(row_ptr), std::move(cols),
                                             std::move(values)),
                    std::move(reward), discount);
}

MdpModel with_discount(const MdpModel& mdp, double discount) {
    return MdpModel(mdp.transition(), mdp.reward(), discount);
}

MdpModel shift_rewards(const MdpModel& mdp, double shift) {
    Matrix r = mdp.reward().array() + shift;
    return MdpModel(mdp.transition(), std::move(r), mdp.discount());
}

Matrix transition_under_policy(const MdpModel& mdp, const Matrix& probs) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    require(probs.rows() == S && probs.cols() == A, ErrorCode::DimensionMismatch, "policy shape does not match MDP");
    Matrix p_pi = Matrix::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double w = probs(s, a);
            if (w == 0.0) continue;
            mdp.transition().for_each_in_row(s, a, [&](int next, double p) { p_pi(s, next) += w * p; });
        }
    return p_pi;
}

Matrix transition_under_policy(const MdpModel& mdp, const Policy& policy) {
    return transition_under_policy(mdp, policy.probs());
}

PolicyRewardEntropy reward_and_entropy_under_policy(const MdpModel& mdp, const Policy& policy) {
    const Matrix& pi = policy.probs();
    require(pi.rows() == mdp.num_states() && pi.cols() == mdp.num_actions(), ErrorCode::DimensionMismatch,
            "policy shape does not match MDP");
    PolicyRewardEntropy out;
    out.reward = pi.cwiseProduct(mdp.reward()).rowwise().sum();
    out.entropy = pi.cwiseProduct(pi.array().log().matrix()).rowwise().sum();
    return out;
}

ValueFunction evaluate_policy(const MdpModel& mdp, const Policy& policy, double tau) {
    require(tau >= 0.0, ErrorCode::NonPositiveTau, "tau must be nonnegative");
    const auto [r_pi, h_pi] = reward_and_entropy_under_policy(mdp, policy);
    const int S = mdp.num_states();
    Matrix system = Matrix::Identity(S, S) - mdp.discount() * transition_under_policy(mdp, policy);
    const Vector rhs = r_pi - tau * h_pi;
    Eigen::PartialPivLU<Matrix> lu(system);
    Vector v = lu.solve(rhs);
    const double residual = (system * v - rhs).lpNorm<Eigen::Infinity>();
    if (!v.allFinite() || residual > 1e-10 * (1.0 + r_pi.lpNorm<Eigen::Infinity>()))
        throw Error(ErrorCode::SolveFailure, "policy evaluation residual " + std::to_string(residual));
    return v;
}

Matrix apply_K(const TransitionTensor& transition, double discount, const Vector& v) {
    Matrix out = transition.apply(v);
    out *= -discount;
    out.colwise() += v;
    return out;
}

Matrix apply_K(const MdpModel& mdp, const ValueFunction& v) { return apply_K(mdp.transition(), mdp.discount(), v); }

Vector apply_K_transpose(const TransitionTensor& transition, double discount, const Matrix& u) {
    Vector out = transition.apply_transpose(u);
    out *= -discount;
    out += u.rowwise().sum();
    return out;
}

Vector apply_K_transpose(const MdpModel& mdp, const DualVariable& u) {
    return apply_K_transpose(mdp.transition(), mdp.discount(), u.values());
}

}  // namespace ermdp
