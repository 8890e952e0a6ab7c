#include "aftsgd/sgd.hpp"

#include <cmath>
#include <string>

#include "aftsgd/error.hpp"

namespace aftsgd {

LearningRateSchedule::LearningRateSchedule(double gamma1, double alpha)
    : gamma1_(gamma1), alpha_(alpha) {
    if (!(gamma1 > 0.0) || !std::isfinite(gamma1)) {
        throw ConfigError("learning-rate gamma1 must be positive, got " + std::to_string(gamma1));
    }
    if (!(alpha > 0.5 && alpha < 1.0)) {
        throw ConfigError("learning-rate alpha must lie in (0.5, 1), got " + std::to_string(alpha));
    }
}

LearningRateSchedule LearningRateSchedule::for_batch_size(std::size_t k, double alpha) {
    if (k < 2) throw ConfigError("batch size k must be at least 2");
    return LearningRateSchedule(kBatchScale / static_cast<double>(k), alpha);
}

double learning_rate(std::uint64_t i, const LearningRateSchedule& schedule) {
    if (i == 0) throw InputError("learning rate is indexed from 1");
    return schedule.gamma1() * std::pow(static_cast<double>(i), -schedule.alpha());
}

EstimatorState init_state(std::size_t p, const LearningRateSchedule& schedule,
                          const std::optional<Coefficients>& beta0) {
    if (p == 0) throw ConfigError("model dimension must be positive");
    EstimatorState state;
    state.schedule = schedule;
    if (beta0) {
        if (static_cast<std::size_t>(beta0->size()) != p) {
            throw ConfigError("initial coefficients have dimension " +
                              std::to_string(beta0->size()) + ", expected " + std::to_string(p));
        }
        if (!beta0->allFinite()) throw ConfigError("initial coefficients must be finite");
        state.beta_hat = *beta0;
    } else {
        state.beta_hat = Coefficients::Zero(static_cast<Eigen::Index>(p));
    }
    state.beta_bar = state.beta_hat;
    return state;
}

void advance(EstimatorState& state, const MiniBatch& batch, std::span<const double> weights) {
    const std::uint64_t i = state.batch_count + 1;
    if (batch.index() != i) {
        throw SequencingError("expected batch " + std::to_string(i) + ", got batch " +
                              std::to_string(batch.index()));
    }
    const std::size_t p = state.dimension();
    thread_local Coefficients score;
    score.resize(static_cast<Eigen::Index>(p));
    accumulate_batch_score(batch, {state.beta_hat.data(), p}, weights, {score.data(), p});

    const double gamma = learning_rate(i, state.schedule);
    state.beta_hat -= gamma * score;
    // Same recursion as ((i-1) bar + hat) / i, but exact when hat == bar.
    state.beta_bar += (state.beta_hat - state.beta_bar) / static_cast<double>(i);
    state.batch_count = i;
}

EstimatorState sgd_step(const EstimatorState& state, const MiniBatch& batch) {
    EstimatorState next = state;
    advance(next, batch);
    return next;
}

Coefficients finalize(const EstimatorState& state) {
    if (state.batch_count == 0) throw NoDataError("no batches consumed; nothing to report");
    return state.beta_bar;
}

} // namespace aftsgd
