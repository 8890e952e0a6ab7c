// Synthetic stand-in for a registry breast-cancer extract.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "aftsgd/error.hpp"
#include "aftsgd/random.hpp"
#include "aftsgd/simlab.hpp"
#include "detail/uniform_censoring.hpp"

namespace aftsgd {

namespace {

constexpr std::array<const char*, 15> kNames = {
    "age_below35",    "age_36_45",       "age_46_55",      "age_56_65",     "age_66_75",
    "race_white",     "grade_well",      "grade_moderate", "grade_poor",    "stage_insitu",
    "stage_localized", "stage_regional", "year_1997_2003", "year_2004_2009", "log_tumor_size"};

constexpr std::array<double, 15> kBeta = {0.3412, 0.4326, 0.4099, 0.3963, 0.3565,
                                          0.1120, 0.1572, 0.1515, 0.1333, 0.9938,
                                          0.9613, 0.9396, 1.2320, 0.8431, -0.0099};

constexpr double kIntercept = 3.0;
constexpr double kNoiseScale = 0.5;
constexpr double kCensorTarget = 0.10;
constexpr std::size_t kPilot = 200'000;

// Category index for cumulative probabilities; the last category is the
// reference level and gets no dummy.
template <std::size_t K>
std::size_t pick(double u, const std::array<double, K>& probs) {
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < K; ++j) {
        acc += probs[j];
        if (u < acc) return j;
    }
    return K - 1;
}

void draw_covariates(KeyedStream& rng, std::vector<double>& x) {
    static constexpr std::array<double, 6> age{0.05, 0.15, 0.25, 0.25, 0.18, 0.12};
    static constexpr std::array<double, 4> grade{0.25, 0.40, 0.30, 0.05};
    static constexpr std::array<double, 4> stage{0.25, 0.50, 0.20, 0.05};
    static constexpr std::array<double, 3> year{0.30, 0.35, 0.35};
    x.assign(kNames.size(), 0.0);
    if (auto a = pick(rng.uniform(), age); a < 5) x[a] = 1.0;
    x[5] = rng.uniform() < 0.85 ? 1.0 : 0.0;
    if (auto g = pick(rng.uniform(), grade); g < 3) x[6 + g] = 1.0;
    if (auto s = pick(rng.uniform(), stage); s < 3) x[9 + s] = 1.0;
    if (auto y = pick(rng.uniform(), year); y < 2) x[12 + y] = 1.0;
    x[14] = std::log(1.0 + 19.0 * rng.uniform());
}

double draw_log_failure(KeyedStream& rng, std::vector<double>& x) {
    draw_covariates(rng, x);
    double eta = kIntercept;
    for (std::size_t j = 0; j < kBeta.size(); ++j) eta += kBeta[j] * x[j];
    return eta + kNoiseScale * rng.normal();
}

} // namespace

SyntheticCohort make_synthetic_seer(std::size_t n, std::uint64_t seed) {
    if (n < 2) throw ConfigError("cohort needs at least 2 subjects");

    std::vector<double> x;
    double bound = 0.0;
    {
        KeyedStream pilot(seed, StreamDomain::synthetic_seer, 2, 0);
        std::vector<double> times(kPilot);
        for (auto& t : times) t = std::exp(draw_log_failure(pilot, x));
        std::sort(times.begin(), times.end());
        bound = detail::UniformCensoring(std::move(times)).solve_bound(kCensorTarget);
    }

    SyntheticCohort out;
    out.covariate_names.assign(kNames.begin(), kNames.end());
    out.true_beta = Coefficients(static_cast<Eigen::Index>(kBeta.size()));
    for (std::size_t j = 0; j < kBeta.size(); ++j) out.true_beta[static_cast<Eigen::Index>(j)] = kBeta[j];
    out.times.reserve(n);
    out.data.reserve(n);

    KeyedStream failure(seed, StreamDomain::synthetic_seer, 0, 0);
    KeyedStream censor(seed, StreamDomain::synthetic_seer, 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::exp(draw_log_failure(failure, x));
        const double c = bound * censor.uniform_open();
        const bool event = t <= c;
        const double observed = event ? t : c;
        out.times.push_back(observed);
        out.data.push_back(Observation{std::log(observed), event, x});
    }
    return out;
}

} // namespace aftsgd
