#pragma once

// Online perturbation bootstrap.
//
// Alongside the main SGD chain, B replicate chains consume the same batches
// but scale each member's score row by an i.i.d. non-negative weight with
// mean 1 and variance 1. The spread of the replicate averages around the main
// average estimates the sampling law of the main average; everything is built
// in the single pass over the data.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "aftsgd/model.hpp"
#include "aftsgd/sgd.hpp"

namespace aftsgd {

/// Law of the perturbation weights. `unit` (every weight 1) is a test hook
/// that must reproduce the main chain exactly.
enum class WeightLaw : std::uint8_t { exponential = 0, poisson = 1, unit = 2 };

std::string_view to_string(WeightLaw law);
WeightLaw parse_weight_law(std::string_view name);

/// k weights for replicate `replicate_id` at batch `batch_index`, drawn from
/// the counter-based stream keyed by (seed, replicate_id, batch_index).
PerturbationWeights draw_weights(std::uint32_t replicate_id, std::uint64_t batch_index,
                                 std::size_t k, std::uint64_t seed,
                                 WeightLaw law = WeightLaw::exponential);

struct ReplicateState {
    std::uint32_t replicate_id = 0;  ///< 1..B; keys the weight stream.
    EstimatorState state;
    friend bool operator==(const ReplicateState&, const ReplicateState&) = default;
};

struct BootstrapEnsemble {
    EstimatorState main;
    std::vector<ReplicateState> replicates;
    std::uint64_t seed = 0;
    WeightLaw weight_law = WeightLaw::exponential;

    std::size_t B() const noexcept { return replicates.size(); }
    std::uint64_t batch_count() const noexcept { return main.batch_count; }
    /// Bitwise equality of every chain.
    friend bool operator==(const BootstrapEnsemble&, const BootstrapEnsemble&) = default;
};

/// Main chain plus B replicates, all started from the same beta0.
BootstrapEnsemble make_ensemble(std::size_t p, std::size_t B, const LearningRateSchedule& schedule,
                                std::uint64_t seed, WeightLaw law = WeightLaw::exponential,
                                const std::optional<Coefficients>& beta0 = std::nullopt);

/// Advances the main chain and every replicate by one batch. Replicate order
/// does not affect the result.
void ensemble_step(BootstrapEnsemble& ensemble, const MiniBatch& batch);

/// Value-returning form of ensemble_step.
BootstrapEnsemble ensemble_stepped(const BootstrapEnsemble& ensemble, const MiniBatch& batch);

/// Sample covariance (divisor B-1) of the replicate averages.
Matrix covariance(const BootstrapEnsemble& ensemble);

enum class CiMethod : std::uint8_t { normal = 0, percentile = 1 };

std::string_view to_string(CiMethod method);
CiMethod parse_ci_method(std::string_view name);

struct IntervalEstimate {
    Coefficients lower;
    Coefficients upper;
    double level = 0.95;
    CiMethod method = CiMethod::normal;
};

/// Normal: beta_bar +- z_{1-a/2} * bootstrap SE. Percentile (basic bootstrap):
/// [beta_bar - q_{1-a/2}, beta_bar - q_{a/2}] of the differences
/// beta_bar*_b - beta_bar, componentwise.
IntervalEstimate confidence_intervals(const BootstrapEnsemble& ensemble, double level,
                                      CiMethod method = CiMethod::normal);

/// Type-7 (linear interpolation) sample quantile of an ascending range.
double sorted_quantile(const std::vector<double>& sorted, double prob);

} // namespace aftsgd
