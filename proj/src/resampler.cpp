#include "aftsgd/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "aftsgd/error.hpp"
#include "aftsgd/random.hpp"

namespace aftsgd {

std::string_view to_string(WeightLaw law) {
    switch (law) {
        case WeightLaw::exponential: return "exponential";
        case WeightLaw::poisson: return "poisson";
        case WeightLaw::unit: return "unit";
    }
    return "unknown";
}

WeightLaw parse_weight_law(std::string_view name) {
    if (name == "exponential") return WeightLaw::exponential;
    if (name == "poisson") return WeightLaw::poisson;
    if (name == "unit") return WeightLaw::unit;
    throw ConfigError("unknown weight law '" + std::string(name) + "'");
}

std::string_view to_string(CiMethod method) {
    return method == CiMethod::normal ? "normal" : "percentile";
}

CiMethod parse_ci_method(std::string_view name) {
    if (name == "normal") return CiMethod::normal;
    if (name == "percentile") return CiMethod::percentile;
    throw ConfigError("unknown CI method '" + std::string(name) + "'");
}

namespace {

void fill_weights(std::span<double> out, std::uint32_t replicate_id, std::uint64_t batch_index,
                  std::uint64_t seed, WeightLaw law) {
    if (law == WeightLaw::unit) {
        std::fill(out.begin(), out.end(), 1.0);
        return;
    }
    KeyedStream stream(seed, StreamDomain::bootstrap_weights, replicate_id, batch_index);
    if (law == WeightLaw::exponential) {
        for (auto& w : out) w = stream.exponential();
    } else {
        for (auto& w : out) w = stream.poisson_one();
    }
}

void check_lockstep(const BootstrapEnsemble& ensemble, const MiniBatch& batch) {
    const std::uint64_t expected = ensemble.main.batch_count + 1;
    if (batch.index() != expected) {
        throw SequencingError("ensemble expected batch " + std::to_string(expected) +
                              ", got batch " + std::to_string(batch.index()));
    }
    for (const auto& r : ensemble.replicates) {
        if (r.state.batch_count != ensemble.main.batch_count) {
            throw SequencingError("replicate " + std::to_string(r.replicate_id) +
                                  " is out of lockstep with the main chain");
        }
    }
}

void require_data(const BootstrapEnsemble& ensemble) {
    if (ensemble.main.batch_count == 0) throw NoDataError("no batches consumed; nothing to report");
}

} // namespace

PerturbationWeights draw_weights(std::uint32_t replicate_id, std::uint64_t batch_index,
                                 std::size_t k, std::uint64_t seed, WeightLaw law) {
    if (k < 2) throw ConfigError("batch size k must be at least 2");
    PerturbationWeights w{std::vector<double>(k)};
    fill_weights(w.values, replicate_id, batch_index, seed, law);
    return w;
}

BootstrapEnsemble make_ensemble(std::size_t p, std::size_t B, const LearningRateSchedule& schedule,
                                std::uint64_t seed, WeightLaw law,
                                const std::optional<Coefficients>& beta0) {
    BootstrapEnsemble ensemble;
    ensemble.main = init_state(p, schedule, beta0);
    ensemble.seed = seed;
    ensemble.weight_law = law;
    ensemble.replicates.reserve(B);
    for (std::size_t b = 0; b < B; ++b) {
        ensemble.replicates.push_back({static_cast<std::uint32_t>(b + 1), ensemble.main});
    }
    return ensemble;
}

void ensemble_step(BootstrapEnsemble& ensemble, const MiniBatch& batch) {
    check_lockstep(ensemble, batch);
    thread_local std::vector<double> weights;
    weights.resize(batch.size());
    for (auto& r : ensemble.replicates) {
        fill_weights(weights, r.replicate_id, batch.index(), ensemble.seed, ensemble.weight_law);
        advance(r.state, batch, weights);
    }
    advance(ensemble.main, batch);
}

BootstrapEnsemble ensemble_stepped(const BootstrapEnsemble& ensemble, const MiniBatch& batch) {
    BootstrapEnsemble next = ensemble;
    ensemble_step(next, batch);
    return next;
}

Matrix covariance(const BootstrapEnsemble& ensemble) {
    const std::size_t B = ensemble.B();
    if (B < 2) {
        throw InsufficientReplicatesError("bootstrap covariance needs B >= 2 replicates, have " +
                                          std::to_string(B));
    }
    require_data(ensemble);
    const auto p = static_cast<Eigen::Index>(ensemble.main.dimension());
    Coefficients mean = Coefficients::Zero(p);
    for (const auto& r : ensemble.replicates) mean += r.state.beta_bar;
    mean /= static_cast<double>(B);
    Matrix cov = Matrix::Zero(p, p);
    for (const auto& r : ensemble.replicates) {
        const Coefficients d = r.state.beta_bar - mean;
        cov.noalias() += d * d.transpose();
    }
    cov /= static_cast<double>(B - 1);
    return 0.5 * (cov + cov.transpose());
}

double sorted_quantile(const std::vector<double>& sorted, double prob) {
    if (sorted.empty()) throw InputError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

IntervalEstimate confidence_intervals(const BootstrapEnsemble& ensemble, double level,
                                      CiMethod method) {
    if (!(level > 0.0 && level < 1.0)) {
        throw InputError("confidence level must lie in (0, 1), got " + std::to_string(level));
    }
    const std::size_t B = ensemble.B();
    const std::size_t min_b = method == CiMethod::percentile ? 20 : 2;
    if (B < min_b) {
        throw InsufficientReplicatesError(std::string(to_string(method)) + " intervals need B >= " +
                                          std::to_string(min_b) + ", have " + std::to_string(B));
    }
    require_data(ensemble);

    const Coefficients& center = ensemble.main.beta_bar;
    const auto p = center.size();
    IntervalEstimate out{Coefficients(p), Coefficients(p), level, method};
    const double tail = 0.5 * (1.0 - level);

    if (method == CiMethod::normal) {
        const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - tail);
        const Matrix cov = covariance(ensemble);
        for (Eigen::Index c = 0; c < p; ++c) {
            const double half = z * std::sqrt(std::max(0.0, cov(c, c)));
            out.lower[c] = center[c] - half;
            out.upper[c] = center[c] + half;
        }
        return out;
    }

    std::vector<double> diffs(B);
    for (Eigen::Index c = 0; c < p; ++c) {
        for (std::size_t b = 0; b < B; ++b) {
            diffs[b] = ensemble.replicates[b].state.beta_bar[c] - center[c];
        }
        std::sort(diffs.begin(), diffs.end());
        out.lower[c] = center[c] - sorted_quantile(diffs, 1.0 - tail);
        out.upper[c] = center[c] - sorted_quantile(diffs, tail);
    }
    return out;
}

} // namespace aftsgd
