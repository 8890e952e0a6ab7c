#include "aftsgd/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>

#include "aftsgd/error.hpp"
#include "aftsgd/oracle.hpp"
#include "detail/parallel.hpp"
#include "detail/uniform_censoring.hpp"

namespace aftsgd {

std::string_view to_string(ErrorLaw law) {
    switch (law) {
        case ErrorLaw::normal: return "normal";
        case ErrorLaw::logistic: return "logistic";
        case ErrorLaw::extreme_value: return "extreme_value";
    }
    return "unknown";
}

ErrorLaw parse_error_law(std::string_view name) {
    if (name == "normal") return ErrorLaw::normal;
    if (name == "logistic") return ErrorLaw::logistic;
    if (name == "extreme_value" || name == "extreme-value" || name == "gumbel") {
        return ErrorLaw::extreme_value;
    }
    throw ConfigError("unknown error law '" + std::string(name) + "'");
}

void SimSpec::validate() const {
    if (p == 0) throw ConfigError("p must be positive");
    if (static_cast<std::size_t>(beta0.size()) != p) {
        throw ConfigError("beta0 has " + std::to_string(beta0.size()) + " entries, p is " +
                          std::to_string(p));
    }
    if (!(censor_target >= 0.0 && censor_target < 1.0)) {
        throw ConfigError("censor_target must lie in [0, 1)");
    }
    if (k < 2) throw ConfigError("batch size k must be at least 2");
    if (N < k) throw ConfigError("N must be at least k");
    if (reps == 0) throw ConfigError("reps must be positive");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    (void)schedule();
}

LearningRateSchedule SimSpec::schedule() const {
    return gamma1 ? LearningRateSchedule(*gamma1, alpha) : LearningRateSchedule::for_batch_size(k, alpha);
}

namespace {

double draw_error(KeyedStream& s, ErrorLaw law) {
    switch (law) {
        case ErrorLaw::normal: return s.normal();
        case ErrorLaw::logistic: return s.logistic();
        case ErrorLaw::extreme_value: return s.extreme_value();
    }
    return 0.0;
}

// Ascending failure times from `draws` fresh observations.
std::vector<double> sample_failure_times(const SimSpec& spec, std::size_t draws, std::uint64_t seed) {
    KeyedStream s(seed, StreamDomain::calibration, 0, 0);
    std::vector<double> t(draws);
    const auto p = static_cast<Eigen::Index>(spec.p);
    for (auto& v : t) {
        double fit = 0.0;
        for (Eigen::Index c = 0; c < p; ++c) fit += spec.beta0[c] * s.normal();
        v = std::exp(fit + draw_error(s, spec.error_law));
    }
    std::sort(t.begin(), t.end());
    return t;
}

} // namespace

double censoring_probability(const SimSpec& spec, double bound, std::size_t draws,
                             std::uint64_t seed) {
    if (!std::isfinite(bound)) return 0.0;
    const detail::UniformCensoring model(sample_failure_times(spec, draws, seed));
    return model.censored_fraction(bound);
}

double calibrate_censoring(const SimSpec& spec, std::size_t draws) {
    if (!(spec.censor_target > 0.0 && spec.censor_target < 1.0)) {
        throw ConfigError("censoring calibration needs a target in (0, 1), got " +
                          std::to_string(spec.censor_target));
    }
    const detail::UniformCensoring model(sample_failure_times(spec, draws, spec.seed));
    return model.solve_bound(spec.censor_target);
}

DatasetGenerator::DatasetGenerator(const SimSpec& spec, std::uint64_t rep_index, double censor_bound)
    : DatasetGenerator(spec, rep_index, censor_bound, StreamDomain::simulation) {}

DatasetGenerator::DatasetGenerator(const SimSpec& spec, std::uint64_t rep_index,
                                   double censor_bound, StreamDomain domain)
    : spec_(&spec),
      censor_bound_(censor_bound),
      failure_stream_(spec.seed, domain, 0, rep_index),
      censor_stream_(spec.seed, domain, 1, rep_index),
      x_(spec.p) {
    if (!(censor_bound > 0.0)) throw ConfigError("censoring bound must be positive");
}

double DatasetGenerator::draw_log_time(std::vector<double>& x) {
    double fit = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
        x[c] = failure_stream_.normal();
        fit += spec_->beta0[static_cast<Eigen::Index>(c)] * x[c];
    }
    return fit + draw_error(failure_stream_, spec_->error_law);
}

Observation DatasetGenerator::next() {
    Observation obs;
    next_into(obs);
    return obs;
}

void DatasetGenerator::next_into(Observation& obs) {
    obs.covariates.resize(spec_->p);
    const double log_t = draw_log_time(obs.covariates);
    if (std::isinf(censor_bound_)) {
        obs.log_time = log_t;
        obs.event = true;
        return;
    }
    const double log_c = std::log(censor_bound_ * censor_stream_.uniform_open());
    obs.event = log_t <= log_c;
    obs.log_time = std::min(log_t, log_c);
}

void DatasetGenerator::append_to(MiniBatch& batch) {
    const double log_t = draw_log_time(x_);
    if (std::isinf(censor_bound_)) {
        batch.push_back(log_t, true, x_);
        return;
    }
    const double log_c = std::log(censor_bound_ * censor_stream_.uniform_open());
    batch.push_back(std::min(log_t, log_c), log_t <= log_c, x_);
}

Dataset generate_dataset(const SimSpec& spec, std::uint64_t rep_index, double censor_bound) {
    spec.validate();
    DatasetGenerator gen(spec, rep_index, censor_bound);
    Dataset data;
    data.reserve(spec.N);
    for (std::size_t i = 0; i < spec.N; ++i) data.push_back(gen.next());
    return data;
}

namespace {

double bound_for(const SimSpec& spec) {
    return spec.censor_target > 0.0 ? calibrate_censoring(spec)
                                    : std::numeric_limits<double>::infinity();
}

struct RepOutcome {
    Coefficients estimate;
    std::vector<bool> hit_normal;
    std::vector<bool> hit_percentile;
    Coefficients bootstrap_se;
    std::vector<Coefficients> differences;
    double seconds = 0.0;
    std::size_t events = 0;
};

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t rep) {
    return splitmix64(seed ^ splitmix64(0xB0075EEDull + rep));
}

RepOutcome run_replication(const SimSpec& spec, double bound, std::uint64_t rep,
                           const ExperimentOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    RepOutcome out;
    DatasetGenerator gen(spec, rep, bound);
    BootstrapEnsemble ensemble =
        make_ensemble(spec.p, spec.B, spec.schedule(), replicate_seed(spec.seed, rep));
    const std::size_t n = spec.N / spec.k;
    MiniBatch batch(1, spec.p);
    batch.reserve(spec.k);
    for (std::size_t i = 1; i <= n; ++i) {
        batch.clear();
        batch.set_index(i);
        for (std::size_t l = 0; l < spec.k; ++l) gen.append_to(batch);
        for (auto e : batch.events()) out.events += e;
        ensemble_step(ensemble, batch);
    }
    out.estimate = finalize(ensemble.main);
    const auto p = static_cast<Eigen::Index>(spec.p);
    auto score_hits = [&](const IntervalEstimate& ci, std::vector<bool>& hits) {
        hits.resize(spec.p);
        for (Eigen::Index c = 0; c < p; ++c) {
            hits[static_cast<std::size_t>(c)] =
                ci.lower[c] <= spec.beta0[c] && spec.beta0[c] <= ci.upper[c];
        }
    };
    if (spec.B >= 2) {
        score_hits(confidence_intervals(ensemble, spec.level, CiMethod::normal), out.hit_normal);
        out.bootstrap_se = covariance(ensemble).diagonal().cwiseMax(0.0).cwiseSqrt();
    }
    if (spec.B >= 20) {
        score_hits(confidence_intervals(ensemble, spec.level, CiMethod::percentile),
                   out.hit_percentile);
    }
    if (options.keep_bootstrap_differences) {
        out.differences.reserve(spec.B);
        for (const auto& r : ensemble.replicates) {
            out.differences.push_back(r.state.beta_bar - ensemble.main.beta_bar);
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

Coefficients hit_rate(const std::vector<RepOutcome>& outcomes, std::size_t p,
                      std::vector<bool> RepOutcome::*field) {
    Coefficients rate = Coefficients::Constant(static_cast<Eigen::Index>(p),
                                               std::numeric_limits<double>::quiet_NaN());
    if ((outcomes.front().*field).empty()) return rate;
    rate.setZero();
    for (const auto& o : outcomes) {
        for (std::size_t c = 0; c < p; ++c) rate[static_cast<Eigen::Index>(c)] += (o.*field)[c];
    }
    return rate / static_cast<double>(outcomes.size());
}

} // namespace

ExperimentSummary run_table_experiment(const SimSpec& spec, const ExperimentOptions& options) {
    spec.validate();
    return run_table_experiment(spec, bound_for(spec), options);
}

ExperimentSummary run_table_experiment(const SimSpec& spec, double censor_bound,
                                       const ExperimentOptions& options) {
    spec.validate();
    std::vector<RepOutcome> outcomes(spec.reps);
    detail::parallel_for(spec.reps, spec.threads, [&](std::size_t rep) {
        outcomes[rep] = run_replication(spec, censor_bound, rep, options);
    });

    const auto p = static_cast<Eigen::Index>(spec.p);
    const double reps = static_cast<double>(spec.reps);
    ExperimentSummary summary;
    summary.spec = spec;
    summary.censor_bound = censor_bound;
    summary.reps = spec.reps;

    Coefficients mean = Coefficients::Zero(p);
    double seconds = 0.0;
    std::size_t events = 0;
    for (const auto& o : outcomes) {
        mean += o.estimate;
        seconds += o.seconds;
        events += o.events;
        summary.estimates.push_back(o.estimate);
    }
    mean /= reps;
    summary.bias = mean - spec.beta0;
    summary.emp_sd = Coefficients::Zero(p);
    if (spec.reps > 1) {
        for (const auto& o : outcomes) summary.emp_sd += (o.estimate - mean).cwiseAbs2();
        summary.emp_sd = (summary.emp_sd / (reps - 1.0)).cwiseSqrt();
    }
    summary.coverage_normal = hit_rate(outcomes, spec.p, &RepOutcome::hit_normal);
    summary.coverage_percentile = hit_rate(outcomes, spec.p, &RepOutcome::hit_percentile);
    summary.coverage = spec.ci_method == CiMethod::normal ? summary.coverage_normal
                                                          : summary.coverage_percentile;
    summary.mean_bootstrap_se =
        Coefficients::Constant(p, std::numeric_limits<double>::quiet_NaN());
    if (spec.B >= 2) {
        summary.mean_bootstrap_se.setZero();
        for (const auto& o : outcomes) summary.mean_bootstrap_se += o.bootstrap_se;
        summary.mean_bootstrap_se /= reps;
    }
    summary.mean_runtime_s = seconds / reps;
    const std::size_t n_used = (spec.N / spec.k) * spec.k;
    summary.realized_censoring =
        1.0 - static_cast<double>(events) / (reps * static_cast<double>(n_used));
    if (options.keep_bootstrap_differences) {
        for (auto& o : outcomes) summary.bootstrap_differences.push_back(std::move(o.differences));
    }
    return summary;
}

std::vector<TimingRow> run_timing_experiment(const std::vector<std::size_t>& N_grid, std::size_t k,
                                             std::size_t include_oracle_upto,
                                             const TimingOptions& options) {
    if (!std::is_sorted(N_grid.begin(), N_grid.end())) {
        throw ConfigError("timing grid must be sorted ascending");
    }
    if (k < 2) throw ConfigError("batch size k must be at least 2");
    using clock = std::chrono::steady_clock;
    std::vector<TimingRow> rows;
    for (std::size_t N : N_grid) {
        SimSpec spec;
        spec.N = N;
        spec.k = k;
        spec.seed = options.seed;
        spec.error_law = options.error_law;
        spec.censor_target = options.censor_target;
        spec.validate();
        const double bound = bound_for(spec);
        const Dataset data = generate_dataset(spec, 0, bound);

        std::vector<MiniBatch> batches;
        for (std::size_t i = 0; i + k <= N; i += k) {
            batches.push_back(MiniBatch::from_observations(
                std::span<const Observation>(data).subspan(i, k), batches.size() + 1));
        }

        TimingRow row;
        row.N = N;
        double checksum = 0.0;
        const auto t0 = clock::now();
        for (std::size_t r = 0; r < options.sgd_repeats; ++r) {
            EstimatorState state = init_state(spec.p, spec.schedule());
            for (const auto& b : batches) advance(state, b);
            checksum += state.beta_bar.sum();
        }
        row.sgd_seconds = std::chrono::duration<double>(clock::now() - t0).count() /
                          static_cast<double>(std::max<std::size_t>(1, options.sgd_repeats));
        if (!std::isfinite(checksum)) throw EstimationError("SGD diverged during timing");

        if (N <= include_oracle_upto) {
            const auto o0 = clock::now();
            for (std::size_t r = 0; r < options.oracle_repeats; ++r) {
                (void)solve_batch(data);
            }
            row.oracle_seconds = std::chrono::duration<double>(clock::now() - o0).count() /
                                 static_cast<double>(std::max<std::size_t>(1, options.oracle_repeats));
        }
        rows.push_back(row);
    }
    return rows;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
    }
}

std::uint64_t to_count(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(value, &used);
        if (used != value.size() || value.front() == '-') throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a non-negative integer, got '" + value + "'");
    }
}

} // namespace

SimSpec parse_sim_spec(std::string_view text) {
    SimSpec spec;
    std::optional<Coefficients> beta0;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key == "p") spec.p = to_count(key, value);
        else if (key == "beta0") {
            std::vector<double> vals;
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) vals.push_back(to_double(key, trim(item)));
            beta0 = Eigen::Map<Coefficients>(vals.data(), static_cast<Eigen::Index>(vals.size()));
        } else if (key == "error_law") spec.error_law = parse_error_law(value);
        else if (key == "censor_target") spec.censor_target = to_double(key, value);
        else if (key == "N") spec.N = to_count(key, value);
        else if (key == "k") spec.k = to_count(key, value);
        else if (key == "reps") spec.reps = to_count(key, value);
        else if (key == "B") spec.B = to_count(key, value);
        else if (key == "seed") spec.seed = to_count(key, value);
        else if (key == "gamma1") spec.gamma1 = to_double(key, value);
        else if (key == "alpha") spec.alpha = to_double(key, value);
        else if (key == "level") spec.level = to_double(key, value);
        else if (key == "ci_method") spec.ci_method = parse_ci_method(value);
        else if (key == "threads") spec.threads = static_cast<unsigned>(to_count(key, value));
        else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    spec.beta0 = beta0 ? *beta0 : Coefficients::Ones(static_cast<Eigen::Index>(spec.p));
    spec.validate();
    return spec;
}

} // namespace aftsgd
