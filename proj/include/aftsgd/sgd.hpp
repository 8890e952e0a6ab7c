#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "aftsgd/model.hpp"

namespace aftsgd {

/// gamma_i = gamma1 * i^{-alpha}, with gamma1 > 0 and alpha in (0.5, 1).
class LearningRateSchedule {
public:
    static constexpr double kDefaultGamma1 = 1.0;
    static constexpr double kDefaultAlpha = 0.7;

    LearningRateSchedule() = default;
    /// Throws ConfigError outside the admissible range.
    LearningRateSchedule(double gamma1, double alpha);

    /// gamma1 = kBatchScale / k. The batch score grows linearly in k, so a
    /// fixed gamma1 overshoots from the zero start for large k.
    static constexpr double kBatchScale = 3.0;
    static LearningRateSchedule for_batch_size(std::size_t k, double alpha = kDefaultAlpha);

    double gamma1() const noexcept { return gamma1_; }
    double alpha() const noexcept { return alpha_; }

    friend bool operator==(const LearningRateSchedule&, const LearningRateSchedule&) = default;

private:
    double gamma1_ = kDefaultGamma1;
    double alpha_ = kDefaultAlpha;
};

double learning_rate(std::uint64_t i, const LearningRateSchedule& schedule);

/// SGD iterate and its running (Polyak-Ruppert) average. By convention the
/// average equals the initial iterate until the first batch is consumed.
struct EstimatorState {
    std::uint64_t batch_count = 0;
    Coefficients beta_hat;
    Coefficients beta_bar;
    LearningRateSchedule schedule;

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(beta_hat.size()); }
    friend bool operator==(const EstimatorState& a, const EstimatorState& b) {
        return a.batch_count == b.batch_count && a.schedule == b.schedule &&
               a.beta_hat.size() == b.beta_hat.size() && a.beta_hat == b.beta_hat &&
               a.beta_bar == b.beta_bar;
    }
};

/// Starts a chain at beta0 (zero vector when omitted).
EstimatorState init_state(std::size_t p, const LearningRateSchedule& schedule,
                          const std::optional<Coefficients>& beta0 = std::nullopt);

/// One update: beta_hat_i = beta_hat_{i-1} - gamma_i s_i(beta_hat_{i-1}), then
/// beta_bar_i = ((i-1) beta_bar_{i-1} + beta_hat_i) / i.
EstimatorState sgd_step(const EstimatorState& state, const MiniBatch& batch);

/// In-place sgd_step; `weights` empty means unit weights.
void advance(EstimatorState& state, const MiniBatch& batch,
             std::span<const double> weights = {});

/// The reported estimator beta_bar_n. Throws NoDataError before the first batch.
Coefficients finalize(const EstimatorState& state);

} // namespace aftsgd
