#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ermdp/mdp.hpp"
#include "ermdp/oracle.hpp"
#include "ermdp/solvers.hpp"

namespace ermdp {

/// Gaussian reward noise xi ~ N(0, sigma^2), drawn from a (seed, iteration) stream.
struct NoiseConfig {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// How a batch estimate fills (s, a) rows that received no batch samples.
enum class FallbackPolicy {
    Buffer,         ///< full-buffer empirical row
    Uniform,        ///< uniform over all states
    CarryPrevious,  ///< row of the previous iteration's estimate (buffer row on the first one)
};

std::string_view to_string(FallbackPolicy policy);
FallbackPolicy parse_fallback(std::string_view name);

/**
 * Stored (s, a, s') transition samples in three columns, plus the aggregated
 * per-(s, a) next-state counts. Immutable once built.
 */
class SampleBuffer {
public:
    SampleBuffer(int num_states, int num_actions, std::uint64_t seed, std::vector<std::uint32_t> states,
                 std::vector<std::uint32_t> actions, std::vector<std::uint32_t> next_states);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t size() const { return states_.size(); }

    std::span<const std::uint32_t> states() const { return states_; }
    std::span<const std::uint32_t> actions() const { return actions_; }
    std::span<const std::uint32_t> next_states() const { return next_states_; }

    /// Number of samples of row (s, a).
    std::int64_t row_total(int state, int action) const;
    /// Rows that hold no sample at all.
    long uncovered_rows() const;

    /// Aggregated counts in CSR form, rows ordered s * |A| + a, columns ascending.
    const std::vector<std::int64_t>& count_row_ptr() const { return count_row_ptr_; }
    const std::vector<std::int32_t>& count_cols() const { return count_cols_; }
    const std::vector<std::int64_t>& counts() const { return counts_; }

    /// Empirical transition tensor count / total; rows without samples are uniform.
    TransitionTensor empirical_transition() const;

private:
    int num_states_;
    int num_actions_;
    std::uint64_t seed_;
    std::vector<std::uint32_t> states_;
    std::vector<std::uint32_t> actions_;
    std::vector<std::uint32_t> next_states_;
    std::vector<std::int64_t> count_row_ptr_;
    std::vector<std::int32_t> count_cols_;
    std::vector<std::int64_t> counts_;
};

/// K̂ = I - gamma P̂ for one batch; applied through the sparse P̂.
struct BatchEstimate {
    TransitionTensor p_hat;
    double discount = 0.0;
    std::int64_t batch_size = 0;
    std::vector<std::int64_t> coverage;  ///< batch samples per row s * |A| + a

    Matrix apply_K(const Vector& v) const { return ermdp::apply_K(p_hat, discount, v); }
    Vector apply_K_transpose(const Matrix& u) const { return ermdp::apply_K_transpose(p_hat, discount, u); }
};

/// Draws n samples: (s, a) uniform over S×A, then s' ~ P(.|s, a). Work is split
/// into fixed-size shards with derived seeds, so the result does not depend on `threads`.
SampleBuffer collect_buffer(const MdpModel& mdp, std::int64_t n_samples, std::uint64_t seed, int threads = 1);

/// Batch of `batch_size` distinct buffer entries (uniform without replacement)
/// turned into empirical rows; uncovered rows follow `fallback`.
BatchEstimate estimate_k_hat(const SampleBuffer& buffer, std::int64_t batch_size, double discount,
                             std::uint64_t seed, FallbackPolicy fallback = FallbackPolicy::Buffer,
                             const BatchEstimate* previous = nullptr);

/// r + xi^(iteration); sigma == 0 returns r unchanged.
Matrix noisy_reward(const MdpModel& mdp, const NoiseConfig& noise, long iteration);

/// The buffer-empirical model with the true rewards and discount of `mdp`.
MdpModel empirical_mdp(const MdpModel& mdp, const SampleBuffer& buffer);

/// Sample-based INGAD: a fresh batch estimate K̂ per iteration replaces K in
/// both updates. Rewards and discount come from `mdp_for_oracle`; so do diagnostics.
SolverTrace run_sample_based_ingad(const MdpModel& mdp_for_oracle, const SampleBuffer& buffer,
                                   const SolverConfig& config, std::int64_t batch_size, const SolverState& init,
                                   const OracleSolution* oracle, std::uint64_t batch_seed,
                                   FallbackPolicy fallback = FallbackPolicy::Buffer);

/// INGAD with rewards replaced by r + xi^(i) at iteration i. Diagnostics use the clean rewards.
SolverTrace run_noisy_reward_ingad(const MdpModel& mdp, const NoiseConfig& noise, const SolverConfig& config,
                                   const SolverState& init, const OracleSolution* oracle);

}  // namespace ermdp
