#pragma once

// Synthetic censored AFT experiments.
//
// Data follow log T = beta0' X + eps with X ~ N(0, I_p), eps from a standard
// normal, logistic, or minimum extreme-value (log-Weibull) law, and censoring
// C ~ Uniform(0, c) independent of (T, X). The bound c is calibrated so that
// P(T > C) hits a target censoring proportion.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aftsgd/model.hpp"
#include "aftsgd/random.hpp"
#include "aftsgd/resampler.hpp"
#include "aftsgd/sgd.hpp"

namespace aftsgd {

enum class ErrorLaw : std::uint8_t { normal = 0, logistic = 1, extreme_value = 2 };

std::string_view to_string(ErrorLaw law);
ErrorLaw parse_error_law(std::string_view name);

struct SimSpec {
    std::size_t p = 2;
    Coefficients beta0 = Coefficients::Ones(2);
    ErrorLaw error_law = ErrorLaw::normal;
    double censor_target = 0.2;  ///< 0 means no censoring.
    std::size_t N = 50000;
    std::size_t k = 50;
    std::size_t reps = 200;
    std::size_t B = 200;
    std::uint64_t seed = 1;
    /// Unset means LearningRateSchedule::for_batch_size(k, alpha).
    std::optional<double> gamma1;
    double alpha = LearningRateSchedule::kDefaultAlpha;
    double level = 0.95;
    CiMethod ci_method = CiMethod::normal;
    /// Worker threads for replications; 0 picks hardware concurrency.
    unsigned threads = 0;

    /// Throws ConfigError on inconsistent fields.
    void validate() const;
    LearningRateSchedule schedule() const;
};

/// Bound c of the uniform censoring law such that a Monte-Carlo estimate
/// (10^6 draws) of P(T > C) matches spec.censor_target; solved by bisection.
double calibrate_censoring(const SimSpec& spec, std::size_t draws = 1'000'000);

/// P(T > C) for C ~ U(0, c), estimated from `draws` fresh failure times keyed
/// by `seed`. Exposed so calibration can be checked independently.
double censoring_probability(const SimSpec& spec, double bound, std::size_t draws,
                             std::uint64_t seed);

/// Streams the observations of replication `rep_index` one at a time.
/// An infinite bound disables censoring.
class DatasetGenerator {
public:
    DatasetGenerator(const SimSpec& spec, std::uint64_t rep_index, double censor_bound);
    DatasetGenerator(const SimSpec& spec, std::uint64_t rep_index, double censor_bound,
                     StreamDomain domain);

    Observation next();
    /// next() into existing storage, reusing its covariate buffer.
    void next_into(Observation& obs);
    /// Appends the next observation to `batch` without building an Observation.
    void append_to(MiniBatch& batch);

private:
    double draw_log_time(std::vector<double>& x);

    const SimSpec* spec_;
    double censor_bound_;
    KeyedStream failure_stream_;
    KeyedStream censor_stream_;
    std::vector<double> x_;
};

/// N observations of replication `rep_index`. Deterministic in
/// (spec.seed, rep_index).
Dataset generate_dataset(const SimSpec& spec, std::uint64_t rep_index, double censor_bound);

struct ExperimentSummary {
    SimSpec spec;
    double censor_bound = 0.0;
    Coefficients bias;
    Coefficients emp_sd;
    Coefficients coverage;             ///< for spec.ci_method
    Coefficients coverage_normal;      ///< NaN when B < 2
    Coefficients coverage_percentile;  ///< NaN when B < 20
    Coefficients mean_bootstrap_se;    ///< NaN when B < 2
    double mean_runtime_s = 0.0;
    double realized_censoring = 0.0;
    std::size_t reps = 0;
    /// Per-replication averaged estimates (reps x p).
    std::vector<Coefficients> estimates;
    /// Per-replication replicate averages minus the main average, only filled
    /// when requested (reps x B entries of dimension p).
    std::vector<std::vector<Coefficients>> bootstrap_differences;
};

struct ExperimentOptions {
    bool keep_bootstrap_differences = false;
};

/// Runs spec.reps independent replications (generate, stream through the
/// bootstrap ensemble, score the intervals against beta0) and aggregates.
ExperimentSummary run_table_experiment(const SimSpec& spec, const ExperimentOptions& options = {});

/// Same as run_table_experiment with a caller-supplied censoring bound.
ExperimentSummary run_table_experiment(const SimSpec& spec, double censor_bound,
                                       const ExperimentOptions& options);

struct TimingRow {
    std::size_t N = 0;
    double sgd_seconds = 0.0;
    std::optional<double> oracle_seconds;
};

struct TimingOptions {
    std::size_t sgd_repeats = 10;
    std::size_t oracle_repeats = 1;
    std::uint64_t seed = 7;
    ErrorLaw error_law = ErrorLaw::normal;
    double censor_target = 0.2;
};

/// Mean wall time of one SGD pass per N; the batch oracle is timed only for
/// N <= include_oracle_upto.
std::vector<TimingRow> run_timing_experiment(const std::vector<std::size_t>& N_grid, std::size_t k,
                                             std::size_t include_oracle_upto,
                                             const TimingOptions& options = {});

/// Monte-Carlo pieces of the asymptotic efficiency of k-batch SGD relative to
/// the full-data Gehan estimator. q(Z1, Z2) is the symmetrized pair score;
/// q1(z) = E q(z, Z); Q1 = Cov q1(Z1), Q2 = Cov q(Z1, Z2); H is the Jacobian
/// of the pair-level population score at beta0 (any positive multiple of the
/// Hessian gives the same efficiency).
struct ReComponents {
    Matrix Q1;
    Matrix Q2;
    Matrix H;
    std::size_t M = 0;
    std::size_t inner = 0;
    std::size_t blocks = 0;
    /// Leave-one-block-out versions of the three matrices, for the jackknife.
    std::vector<Matrix> Q1_jack;
    std::vector<Matrix> Q2_jack;
    std::vector<Matrix> H_jack;
};

struct ReEstimate {
    std::size_t k = 0;
    Coefficients direction;
    double value = 0.0;   ///< RE(k) <= 1 by construction of the efficiency ratio.
    double mc_se = 0.0;   ///< Jackknife Monte-Carlo standard error of value.
    double reciprocal() const { return 1.0 / value; }
};

/// Estimates Q1 (M outer draws x sqrt(M) inner draws each; M >= 10^5), Q2 (M pairs) and H
/// (central differences, step h, of the Monte-Carlo pair score over M pairs).
ReComponents estimate_re_components(const SimSpec& spec, std::size_t M, double h = 0.01,
                                    std::size_t blocks = 20);

/// RE(k) = 4(k-1)^2 w'Q1w / (4(k-2)(k-1) w'Q1w + 2(k-1) w'Q2w), w = H^{-1} a.
ReEstimate re_from_components(const ReComponents& components, std::size_t k,
                              const Coefficients& a);

ReEstimate estimate_re(const SimSpec& spec, std::size_t k, const Coefficients& a, std::size_t M);

/// Smallest eigenvalue of Q2 - 2 Q1 with its jackknife standard error.
struct EigenCheck {
    double min_eigenvalue = 0.0;
    double mc_se = 0.0;
};
EigenCheck q2_minus_2q1(const ReComponents& components);

/// Synthetic registry-style breast-cancer cohort with the covariate schema of
/// a public-use cancer registry extract: age bands, race, tumour grade,
/// stage, diagnosis-year bands and log tumour size. About 10% censored.
struct SyntheticCohort {
    std::vector<std::string> covariate_names;
    std::vector<double> times;  ///< raw observed times, ln() gives log_time
    Dataset data;
    Coefficients true_beta;
};

SyntheticCohort make_synthetic_seer(std::size_t n, std::uint64_t seed);

/// Key = value experiment description; unknown keys are rejected.
SimSpec parse_sim_spec(std::string_view text);

} // namespace aftsgd
