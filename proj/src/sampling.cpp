#include "ermdp/sampling.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_set>

#include "ermdp/random.hpp"

namespace ermdp {

std::string_view to_string(FallbackPolicy policy) {
    switch (policy) {
        case FallbackPolicy::Buffer: return "fallback_buffer";
        case FallbackPolicy::Uniform: return "fallback_uniform";
        case FallbackPolicy::CarryPrevious: return "carry_previous";
    }
    return "unknown";
}

FallbackPolicy parse_fallback(std::string_view name) {
    if (name == "fallback_buffer" || name == "buffer") return FallbackPolicy::Buffer;
    if (name == "fallback_uniform" || name == "uniform") return FallbackPolicy::Uniform;
    if (name == "carry_previous" || name == "previous") return FallbackPolicy::CarryPrevious;
    throw Error(ErrorCode::InvalidConfig, "unknown fallback policy '" + std::string(name) + "'");
}

namespace {

constexpr std::int64_t kShardSize = 1 << 20;

/// Groups `next` values by row, sorts within each row and merges duplicates.
/// `rows[k]` is the row of sample k.
struct RowCounts {
    std::vector<std::int64_t> row_ptr;
    std::vector<std::int32_t> cols;
    std::vector<std::int64_t> counts;
    std::vector<std::int64_t> totals;
};

template <class RowOf, class NextOf>
RowCounts aggregate_rows(std::int64_t num_rows, std::int64_t n, RowOf row_of, NextOf next_of) {
    RowCounts out;
    out.totals.assign(num_rows, 0);
    for (std::int64_t k = 0; k < n; ++k) ++out.totals[row_of(k)];

    std::vector<std::int64_t> start(num_rows + 1, 0);
    for (std::int64_t r = 0; r < num_rows; ++r) start[r + 1] = start[r] + out.totals[r];
    std::vector<std::int32_t> grouped(n);
    std::vector<std::int64_t> fill(start.begin(), start.end() - 1);
    for (std::int64_t k = 0; k < n; ++k) grouped[fill[row_of(k)]++] = next_of(k);

    out.row_ptr.assign(num_rows + 1, 0);
    for (std::int64_t r = 0; r < num_rows; ++r) {
        auto first = grouped.begin() + start[r];
        auto last = grouped.begin() + start[r + 1];
        std::sort(first, last);
        for (auto it = first; it != last;) {
            auto run_end = std::find_if(it, last, [&](std::int32_t x) { return x != *it; });
            out.cols.push_back(*it);
            out.counts.push_back(run_end - it);
            it = run_end;
        }
        out.row_ptr[r + 1] = static_cast<std::int64_t>(out.cols.size());
    }
    return out;
}

void append_uniform_row(int num_states, std::vector<std::int32_t>& cols, std::vector<double>& values) {
    for (int j = 0; j < num_states; ++j) {
        cols.push_back(j);
        values.push_back(1.0 / num_states);
    }
}

void append_buffer_row(const SampleBuffer& buffer, std::int64_t row, std::vector<std::int32_t>& cols,
                       std::vector<double>& values) {
    const auto& ptr = buffer.count_row_ptr();
    const std::int64_t first = ptr[row];
    const std::int64_t last = ptr[row + 1];
    if (first == last) {
        append_uniform_row(buffer.num_states(), cols, values);
        return;
    }
    std::int64_t total = 0;
    for (std::int64_t k = first; k < last; ++k) total += buffer.counts()[k];
    for (std::int64_t k = first; k < last; ++k) {
        cols.push_back(buffer.count_cols()[k]);
        values.push_back(static_cast<double>(buffer.counts()[k]) / static_cast<double>(total));
    }
}

/// Distinct indices in [0, n) of size k (Floyd's algorithm), in insertion order.
std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k, Rng& rng) {
    std::vector<std::int64_t> picked;
    picked.reserve(k);
    std::unordered_set<std::int64_t> seen;
    seen.reserve(static_cast<std::size_t>(k) * 2);
    for (std::int64_t j = n - k; j < n; ++j) {
        std::uniform_int_distribution<std::int64_t> pick(0, j);
        const std::int64_t t = pick(rng);
        const std::int64_t chosen = seen.insert(t).second ? t : j;
        if (chosen == j) seen.insert(j);
        picked.push_back(chosen);
    }
    return picked;
}

}  // namespace

// ---------------------------------------------------------------------------
// SampleBuffer

SampleBuffer::SampleBuffer(int num_states, int num_actions, std::uint64_t seed, std::vector<std::uint32_t> states,
                           std::vector<std::uint32_t> actions, std::vector<std::uint32_t> next_states)
    : num_states_(num_states),
      num_actions_(num_actions),
      seed_(seed),
      states_(std::move(states)),
      actions_(std::move(actions)),
      next_states_(std::move(next_states)) {
    require(num_states_ > 0 && num_actions_ > 0, ErrorCode::DimensionMismatch, "empty state or action set");
    require(states_.size() == actions_.size() && states_.size() == next_states_.size(), ErrorCode::DimensionMismatch,
            "sample columns have different lengths");
    for (std::size_t k = 0; k < states_.size(); ++k) {
        require(states_[k] < static_cast<std::uint32_t>(num_states_) &&
                    actions_[k] < static_cast<std::uint32_t>(num_actions_) &&
                    next_states_[k] < static_cast<std::uint32_t>(num_states_),
                ErrorCode::DimensionMismatch, "sample " + std::to_string(k) + " has an out-of-range index");
    }
    const std::int64_t rows = static_cast<std::int64_t>(num_states_) * num_actions_;
    RowCounts agg = aggregate_rows(
        rows, static_cast<std::int64_t>(states_.size()),
        [&](std::int64_t k) { return static_cast<std::int64_t>(states_[k]) * num_actions_ + actions_[k]; },
        [&](std::int64_t k) { return static_cast<std::int32_t>(next_states_[k]); });
    count_row_ptr_ = std::move(agg.row_ptr);
    count_cols_ = std::move(agg.cols);
    counts_ = std::move(agg.counts);
}

std::int64_t SampleBuffer::row_total(int state, int action) const {
    const std::int64_t row = static_cast<std::int64_t>(state) * num_actions_ + action;
    std::int64_t total = 0;
    for (std::int64_t k = count_row_ptr_[row]; k < count_row_ptr_[row + 1]; ++k) total += counts_[k];
    return total;
}

long SampleBuffer::uncovered_rows() const {
    long empty = 0;
    for (std::size_t r = 0; r + 1 < count_row_ptr_.size(); ++r) empty += count_row_ptr_[r] == count_row_ptr_[r + 1];
    return empty;
}

TransitionTensor SampleBuffer::empirical_transition() const {
    const std::int64_t rows = static_cast<std::int64_t>(num_states_) * num_actions_;
    std::vector<std::int64_t> row_ptr(rows + 1, 0);
    std::vector<std::int32_t> cols;
    std::vector<double> values;
    cols.reserve(count_cols_.size());
    values.reserve(count_cols_.size());
    for (std::int64_t row = 0; row < rows; ++row) {
        append_buffer_row(*this, row, cols, values);
        row_ptr[row + 1] = static_cast<std::int64_t>(cols.size());
    }
    return TransitionTensor::sparse(num_states_, num_actions_, std::move(row_ptr), std::move(cols), std::move(values));
}

// ---------------------------------------------------------------------------
// Operations

SampleBuffer collect_buffer(const MdpModel& mdp, std::int64_t n_samples, std::uint64_t seed, int threads) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const std::int64_t rows = static_cast<std::int64_t>(S) * A;
    require(n_samples >= rows, ErrorCode::InsufficientSamples,
            "need at least |S||A| = " + std::to_string(rows) + " samples, got " + std::to_string(n_samples));

    std::vector<std::uint32_t> states(n_samples);
    std::vector<std::uint32_t> actions(n_samples);
    std::vector<std::uint32_t> next_states(n_samples);
    const std::int64_t num_shards = (n_samples + kShardSize - 1) / kShardSize;
    const TransitionTensor& P = mdp.transition();

    auto run_shard = [&](std::int64_t shard) {
        Rng rng = make_rng(seed, stream::kBuffer, static_cast<std::uint64_t>(shard));
        std::uniform_int_distribution<std::int64_t> pick_row(0, rows - 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const std::int64_t first = shard * kShardSize;
        const std::int64_t last = std::min(n_samples, first + kShardSize);
        for (std::int64_t k = first; k < last; ++k) {
            const std::int64_t row = pick_row(rng);
            const int s = static_cast<int>(row / A);
            const int a = static_cast<int>(row % A);
            const double x = unit(rng);
            double cumulative = 0.0;
            int chosen = -1;
            P.for_each_in_row(s, a, [&](int next, double p) {
                if (chosen >= 0 && cumulative > x) return;
                cumulative += p;
                chosen = next;
            });
            states[k] = static_cast<std::uint32_t>(s);
            actions[k] = static_cast<std::uint32_t>(a);
            next_states[k] = static_cast<std::uint32_t>(chosen);
        }
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(num_shards)));
    if (workers == 1) {
        for (std::int64_t shard = 0; shard < num_shards; ++shard) run_shard(shard);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::int64_t shard = w; shard < num_shards; shard += workers) run_shard(shard);
            });
        for (auto& t : pool) t.join();
    }
    return SampleBuffer(S, A, seed, std::move(states), std::move(actions), std::move(next_states));
}

BatchEstimate estimate_k_hat(const SampleBuffer& buffer, std::int64_t batch_size, double discount, std::uint64_t seed,
                             FallbackPolicy fallback, const BatchEstimate* previous) {
    require(buffer.size() > 0, ErrorCode::EmptyBuffer, "buffer holds no samples");
    const auto n = static_cast<std::int64_t>(buffer.size());
    require(batch_size > 0 && batch_size <= n, ErrorCode::InvalidConfig,
            "batch size " + std::to_string(batch_size) + " not in [1, " + std::to_string(n) + "]");
    const int S = buffer.num_states();
    const int A = buffer.num_actions();
    const std::int64_t rows = static_cast<std::int64_t>(S) * A;

    std::vector<std::int64_t> batch;
    if (batch_size == n) {
        batch.resize(n);
        for (std::int64_t k = 0; k < n; ++k) batch[k] = k;
    } else {
        Rng rng(derive_seed(seed, stream::kBatch));
        batch = sample_without_replacement(n, batch_size, rng);
    }

    const auto s_col = buffer.states();
    const auto a_col = buffer.actions();
    const auto next_col = buffer.next_states();
    RowCounts agg = aggregate_rows(
        rows, batch_size,
        [&](std::int64_t k) { return static_cast<std::int64_t>(s_col[batch[k]]) * A + a_col[batch[k]]; },
        [&](std::int64_t k) { return static_cast<std::int32_t>(next_col[batch[k]]); });

    const bool carry = fallback == FallbackPolicy::CarryPrevious && previous != nullptr;
    if (carry)
        require(previous->p_hat.num_states() == S && previous->p_hat.num_actions() == A && previous->p_hat.is_sparse(),
                ErrorCode::DimensionMismatch, "previous estimate does not match buffer");

    std::vector<std::int64_t> row_ptr(rows + 1, 0);
    std::vector<std::int32_t> cols;
    std::vector<double> values;
    cols.reserve(agg.cols.size() * 2);
    values.reserve(agg.cols.size() * 2);
    for (std::int64_t row = 0; row < rows; ++row) {
        const std::int64_t total = agg.totals[row];
        if (total > 0) {
            for (std::int64_t k = agg.row_ptr[row]; k < agg.row_ptr[row + 1]; ++k) {
                cols.push_back(agg.cols[k]);
                values.push_back(static_cast<double>(agg.counts[k]) / static_cast<double>(total));
            }
        } else if (fallback == FallbackPolicy::Uniform) {
            append_uniform_row(S, cols, values);
        } else if (carry) {
            const auto& ptr = previous->p_hat.row_ptr();
            for (std::int64_t k = ptr[row]; k < ptr[row + 1]; ++k) {
                cols.push_back(previous->p_hat.cols()[k]);
                values.push_back(previous->p_hat.values()[k]);
            }
        } else {
            append_buffer_row(buffer, row, cols, values);
        }
        row_ptr[row + 1] = static_cast<std::int64_t>(cols.size());
    }

    BatchEstimate est;
    est.p_hat = TransitionTensor::sparse(S, A, std::move(row_ptr), std::move(cols), std::move(values));
    est.discount = discount;
    est.batch_size = batch_size;
    est.coverage = std::move(agg.totals);
    return est;
}

Matrix noisy_reward(const MdpModel& mdp, const NoiseConfig& noise, long iteration) {
    require(noise.sigma >= 0.0, ErrorCode::InvalidConfig, "sigma must be nonnegative");
    Matrix r = mdp.reward();
    if (noise.sigma == 0.0) return r;
    Rng rng = make_rng(noise.seed, stream::kRewardNoise, static_cast<std::uint64_t>(iteration));
    std::normal_distribution<double> xi(0.0, noise.sigma);
    for (Eigen::Index k = 0; k < r.size(); ++k) r.data()[k] += xi(rng);
    return r;
}

MdpModel empirical_mdp(const MdpModel& mdp, const SampleBuffer& buffer) {
    require(buffer.num_states() == mdp.num_states() && buffer.num_actions() == mdp.num_actions(),
            ErrorCode::DimensionMismatch, "buffer dimensions do not match MDP");
    return MdpModel(buffer.empirical_transition(), mdp.reward(), mdp.discount());
}

SolverTrace run_sample_based_ingad(const MdpModel& mdp_for_oracle, const SampleBuffer& buffer,
                                   const SolverConfig& config, std::int64_t batch_size, const SolverState& init,
                                   const OracleSolution* oracle, std::uint64_t batch_seed, FallbackPolicy fallback) {
    require(buffer.num_states() == mdp_for_oracle.num_states() &&
                buffer.num_actions() == mdp_for_oracle.num_actions(),
            ErrorCode::DimensionMismatch, "buffer dimensions do not match MDP");
    const double discount = mdp_for_oracle.discount();
    std::optional<BatchEstimate> previous;
    SolverTrace trace =
        run_iterations(mdp_for_oracle, config, init, Variant::INGAD, oracle, [&](long i, const SolverState& state) {
            BatchEstimate estimate =
                estimate_k_hat(buffer, batch_size, discount, derive_seed(batch_seed, static_cast<std::uint64_t>(i)),
                               fallback, previous ? &*previous : nullptr);
            SolverState next =
                natural_step(estimate.p_hat, discount, mdp_for_oracle.reward(), state, config, config.c);
            if (fallback == FallbackPolicy::CarryPrevious) previous = std::move(estimate);
            return next;
        });
    trace.seeds = {{"buffer_seed", buffer.seed()}, {"batch_seed", batch_seed}};
    return trace;
}

SolverTrace run_noisy_reward_ingad(const MdpModel& mdp, const NoiseConfig& noise, const SolverConfig& config,
                                   const SolverState& init, const OracleSolution* oracle) {
    SolverTrace trace = run_iterations(mdp, config, init, Variant::INGAD, oracle, [&](long i, const SolverState& state) {
        const Matrix reward = noisy_reward(mdp, noise, i);
        return natural_step(mdp.transition(), mdp.discount(), reward, state, config, config.c);
    });
    trace.seeds = {{"noise_seed", noise.seed}};
    return trace;
}

}  // namespace ermdp
