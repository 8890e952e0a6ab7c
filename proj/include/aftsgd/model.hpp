#pragma once

// Gehan rank objective for the accelerated failure time model
//
//     log T = beta' X + eps
//
// with right-censored responses. Residuals e(beta) = log T~ - beta' X are
// computed on demand; nothing here caches per-beta state, so every function
// is a pure function of its arguments and safe to call concurrently.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace aftsgd {

using Coefficients = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One right-censored observation. log_time is ln(min(T, C)).
struct Observation {
    double log_time = 0.0;
    bool event = false;
    std::vector<double> covariates;
};

using Dataset = std::vector<Observation>;

/// Non-negative multipliers, one per batch member.
struct PerturbationWeights {
    std::vector<double> values;
};

/// A group of k consecutive observations, stored column-wise so the score
/// kernels can walk contiguous memory. `index` is the 1-based position of the
/// batch in its stream.
class MiniBatch {
public:
    MiniBatch() = default;
    MiniBatch(std::uint64_t index, std::size_t dim);

    static MiniBatch from_observations(std::span<const Observation> members,
                                       std::uint64_t index);

    void push_back(const Observation& obs);
    void push_back(double log_time, bool event, std::span<const double> x);
    void clear() noexcept;
    void reserve(std::size_t k);

    std::size_t size() const noexcept { return log_time_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    std::uint64_t index() const noexcept { return index_; }
    void set_index(std::uint64_t index) noexcept { index_ = index; }

    double log_time(std::size_t l) const { return log_time_[l]; }
    bool event(std::size_t l) const { return event_[l] != 0; }
    std::span<const double> covariates(std::size_t l) const {
        return {covariates_.data() + l * dim_, dim_};
    }

    std::span<const double> log_times() const noexcept { return log_time_; }
    std::span<const std::uint8_t> events() const noexcept { return event_; }
    /// Row-major size() x dim() covariate block.
    std::span<const double> covariate_block() const noexcept { return covariates_; }

    /// Copy with every log_time shifted by c.
    MiniBatch shifted(double c) const;
    Observation observation(std::size_t l) const;

private:
    std::uint64_t index_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> log_time_;
    std::vector<std::uint8_t> event_;
    std::vector<double> covariates_;
};

/// l(beta) = (1/k) sum_l sum_j delta_l {e_l - e_j}^-.
double batch_loss(const MiniBatch& batch, const Coefficients& beta);

/// s(beta) = (1/k) sum_l sum_j delta_l (X_l - X_j) 1{e_l <= e_j}; a
/// subgradient of batch_loss. Ties (including l == j) count as active.
Coefficients batch_score(const MiniBatch& batch, const Coefficients& beta);

/// batch_score with row l scaled by weights[l]. With unit weights the result
/// is bit-identical to batch_score.
Coefficients perturbed_batch_score(const MiniBatch& batch, const Coefficients& beta,
                                   const PerturbationWeights& weights);

/// Allocation-free variant of perturbed_batch_score used by the SGD engine.
/// `weights` may be empty (unit weights). `out` must have size dim().
void accumulate_batch_score(const MiniBatch& batch, std::span<const double> beta,
                            std::span<const double> weights, std::span<double> out);

/// Full-data objective L(beta) = N^{-1} sum_i sum_j delta_i {e_i - e_j}^-,
/// evaluated by direct O(N^2) pair enumeration.
double full_loss(std::span<const Observation> data, const Coefficients& beta);

/// Full-data Gehan score S(beta), O(N^2) pair enumeration.
Coefficients full_score(std::span<const Observation> data, const Coefficients& beta);

struct LossAndScore {
    double loss = 0.0;
    Coefficients score;
};

/// Both full-data quantities in one O(N^2) sweep over a dataset packed as a
/// MiniBatch (the batch index is ignored; normalization is 1/N).
LossAndScore full_loss_and_score(const MiniBatch& packed, const Coefficients& beta);

/// Validates a stream of observations against a common dimension p and
/// returns p. Throws InputError on ragged or non-finite data.
std::size_t validate_dataset(std::span<const Observation> data);

} // namespace aftsgd
