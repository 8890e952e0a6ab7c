// aftsgd: streaming Gehan-AFT estimation with online bootstrap inference.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "aftsgd/checkpoint.hpp"
#include "aftsgd/error.hpp"
#include "aftsgd/io.hpp"
#include "aftsgd/oracle.hpp"
#include "aftsgd/report.hpp"
#include "aftsgd/simlab.hpp"

namespace {

using namespace aftsgd;

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, data_error = 3, checkpoint_error = 4 };

// Keeps either an owned file stream or std::cin.
class InputSource {
public:
    explicit InputSource(const std::string& path) {
        if (path == "-") {
            stream_ = &std::cin;
            return;
        }
        file_ = std::make_unique<std::ifstream>(path);
        if (!*file_) throw InputError("cannot open input " + path);
        stream_ = file_.get();
    }
    std::istream& get() { return *stream_; }

private:
    std::unique_ptr<std::ifstream> file_;
    std::istream* stream_ = nullptr;
};

class OutputSink {
public:
    explicit OutputSink(const std::string& path) {
        if (path.empty() || path == "-") {
            stream_ = &std::cout;
            return;
        }
        file_ = std::make_unique<std::ofstream>(path);
        if (!*file_) throw InputError("cannot open output " + path);
        stream_ = file_.get();
    }
    std::ostream& get() { return *stream_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_ = nullptr;
};

struct FitArgs {
    RunConfig config;
    std::string ci_method = "normal";
    std::string format = "table";
    std::string weight_law = "exponential";
    std::string resume;
    std::size_t checkpoint_every = 0;
    bool both = false;
};

Checkpoint snapshot(const BootstrapEnsemble& ens, const RunConfig& cfg, const BatchReader& reader,
                    std::uint64_t prior_read, std::uint64_t prior_skipped) {
    Checkpoint c;
    c.config = cfg;
    c.ensemble = ens;
    c.batches_consumed = ens.batch_count();
    c.records_read = prior_read + reader.records_read();
    c.records_skipped = prior_skipped + reader.records_skipped();
    c.pending = reader.pending();
    c.column_names = reader.column_names();
    return c;
}

int run_fit(FitArgs& a) {
    RunConfig& cfg = a.config;
    cfg.ci_method = parse_ci_method(a.ci_method);
    cfg.output_format = parse_output_format(a.format);
    cfg.weight_law = parse_weight_law(a.weight_law);
    cfg.validate();

    std::optional<BootstrapEnsemble> ensemble;
    ReaderOptions ro;
    ro.header = cfg.header;
    ro.skip_bad = cfg.skip_bad;
    std::uint64_t prior_read = 0;
    std::uint64_t prior_skipped = 0;
    std::vector<std::string> names;
    if (!a.resume.empty()) {
        Checkpoint c = load_checkpoint(a.resume);
        check_resume_compatible(c, cfg);
        ensemble = std::move(c.ensemble);
        ro.dim = ensemble->main.dimension();
        ro.first_batch_index = c.batches_consumed + 1;
        ro.carried = std::move(c.pending);
        prior_read = c.records_read;
        prior_skipped = c.records_skipped;
        names = std::move(c.column_names);
        spdlog::info("resumed after {} batches", c.batches_consumed);
    }

    InputSource source(cfg.input);
    BatchReader reader(source.get(), cfg.k, std::move(ro));
    while (auto batch = reader.next()) {
        if (!ensemble) ensemble = make_ensemble(reader.dim(), cfg.B, cfg.schedule(), cfg.seed, cfg.weight_law);
        ensemble_step(*ensemble, *batch);
        if (cfg.checkpoint_path && a.checkpoint_every > 0 && ensemble->batch_count() % a.checkpoint_every == 0) {
            save_checkpoint(snapshot(*ensemble, cfg, reader, prior_read, prior_skipped), *cfg.checkpoint_path);
        }
    }
    if (!ensemble) throw NoDataError("input held no complete batch of k records");
    if (cfg.checkpoint_path) {
        save_checkpoint(snapshot(*ensemble, cfg, reader, prior_read, prior_skipped), *cfg.checkpoint_path);
    }
    if (reader.column_names().size() == ensemble->main.dimension() && (names.empty() || cfg.header)) {
        names = reader.column_names();
    }
    StreamCounters counters;
    counters.records_read = prior_read + reader.records_read();
    counters.records_skipped = prior_skipped + reader.records_skipped();
    counters.records_dropped = reader.dropped();
    const Report report = make_report(*ensemble, cfg, names, counters, a.both);
    emit_report(report, cfg.output_format, std::cout);
    return ok;
}

struct OracleArgs {
    std::string input = "-";
    bool header = false;
    bool skip_bad = false;
    OracleOptions options;
    std::string format = "table";
};

int run_oracle(const OracleArgs& a) {
    const OutputFormat format = parse_output_format(a.format);
    InputSource source(a.input);
    ReaderOptions ro;
    ro.header = a.header;
    ro.skip_bad = a.skip_bad;
    // Batch size 2 only groups records; the oracle sees all of them.
    BatchReader reader(source.get(), 2, ro);
    Dataset data;
    while (auto batch = reader.next()) {
        for (std::size_t l = 0; l < batch->size(); ++l) data.push_back(batch->observation(l));
    }
    for (auto& obs : reader.pending()) data.push_back(std::move(obs));
    if (data.size() < 2) throw NoDataError("oracle needs at least 2 records");
    const OracleResult res = solve_batch(data, a.options);
    const auto& names = reader.column_names();
    if (format == OutputFormat::json) {
        nlohmann::json doc = {{"objective", res.objective},   {"score_norm", res.score_norm},
                              {"iterations", res.iterations}, {"converged", res.converged},
                              {"rank_deficient", res.rank_deficient}};
        nlohmann::json coefs = nlohmann::json::array();
        for (std::size_t j = 0; j < names.size(); ++j) {
            coefs.push_back({{"name", names[j]}, {"estimate", res.beta[static_cast<Eigen::Index>(j)]}});
        }
        doc["coefficients"] = coefs;
        std::cout << doc.dump(2) << '\n';
    } else if (format == OutputFormat::csv) {
        std::cout << "name,estimate\n";
        for (std::size_t j = 0; j < names.size(); ++j) {
            std::cout << names[j] << ',' << fmt::format("{}", res.beta[static_cast<Eigen::Index>(j)]) << '\n';
        }
    } else {
        for (std::size_t j = 0; j < names.size(); ++j) {
            std::cout << fmt::format("{:<16} {:>10.5f}\n", names[j], res.beta[static_cast<Eigen::Index>(j)]);
        }
        std::cout << fmt::format("objective {:.8g}  evaluations {}  converged {}\n", res.objective, res.iterations,
                                 res.converged ? "yes" : "no");
    }
    return ok;
}

struct SimArgs {
    std::string spec_file;
    std::string error_law;
    std::string ci_method;
    std::string format = "table";
    std::optional<std::size_t> p, N, k, reps, B, threads;
    std::optional<double> censor, level, gamma1, alpha;
    std::optional<std::uint64_t> seed;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SimSpec build_spec(const SimArgs& a) {
    SimSpec s = a.spec_file.empty() ? SimSpec{} : parse_sim_spec(slurp(a.spec_file));
    if (a.p && *a.p != s.p) {
        s.p = *a.p;
        s.beta0 = Coefficients::Ones(static_cast<Eigen::Index>(s.p));
    }
    if (a.N) s.N = *a.N;
    if (a.k) s.k = *a.k;
    if (a.reps) s.reps = *a.reps;
    if (a.B) s.B = *a.B;
    if (a.threads) s.threads = static_cast<unsigned>(*a.threads);
    if (a.censor) s.censor_target = *a.censor;
    if (a.level) s.level = *a.level;
    if (a.seed) s.seed = *a.seed;
    if (a.gamma1) s.gamma1 = a.gamma1;
    if (a.alpha) s.alpha = *a.alpha;
    if (!a.error_law.empty()) s.error_law = parse_error_law(a.error_law);
    if (!a.ci_method.empty()) s.ci_method = parse_ci_method(a.ci_method);
    s.validate();
    return s;
}

int run_simulate(const SimArgs& a) {
    const SimSpec spec = build_spec(a);
    const OutputFormat format = parse_output_format(a.format);
    const ExperimentSummary s = run_table_experiment(spec);
    if (format == OutputFormat::json) {
        auto arr = [](const Coefficients& v) {
            nlohmann::json j = nlohmann::json::array();
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                if (std::isfinite(v[i])) j.push_back(v[i]);
                else j.push_back(nullptr);
            }
            return j;
        };
        nlohmann::json doc = {{"error_law", std::string(to_string(spec.error_law))},
                              {"N", spec.N},
                              {"k", spec.k},
                              {"reps", s.reps},
                              {"B", spec.B},
                              {"censor_bound", s.censor_bound},
                              {"realized_censoring", s.realized_censoring},
                              {"bias", arr(s.bias)},
                              {"emp_sd", arr(s.emp_sd)},
                              {"mean_bootstrap_se", arr(s.mean_bootstrap_se)},
                              {"coverage", arr(s.coverage)},
                              {"mean_runtime_s", s.mean_runtime_s}};
        std::cout << doc.dump(2) << '\n';
        return ok;
    }
    const bool csv = format == OutputFormat::csv;
    std::cout << (csv ? "coef,bias,emp_sd,boot_se,coverage\n"
                      : fmt::format("{:<6} {:>10} {:>10} {:>10} {:>9}\n", "coef", "bias", "EmSd", "SE", "CovP"));
    for (Eigen::Index j = 0; j < s.bias.size(); ++j) {
        const std::string name = fmt::format("b{}", j + 1);
        if (csv) {
            std::cout << fmt::format("{},{},{},{},{}\n", name, s.bias[j], s.emp_sd[j], s.mean_bootstrap_se[j],
                                     s.coverage[j]);
        } else {
            std::cout << fmt::format("{:<6} {:>10.5f} {:>10.5f} {:>10.5f} {:>9.3f}\n", name, s.bias[j], s.emp_sd[j],
                                     s.mean_bootstrap_se[j], s.coverage[j]);
        }
    }
    if (!csv) {
        std::cout << fmt::format("reps {}  censoring {:.3f}  mean runtime {:.3f}s\n", s.reps, s.realized_censoring,
                                 s.mean_runtime_s);
    }
    return ok;
}

struct ReArgs {
    SimArgs sim;
    std::vector<std::size_t> ks{10, 50, 200};
    std::size_t M = 100000;
    std::vector<double> direction;
};

int run_re_eval(const ReArgs& a) {
    const SimSpec spec = build_spec(a.sim);
    const OutputFormat format = parse_output_format(a.sim.format);
    Coefficients dir = Coefficients::Zero(static_cast<Eigen::Index>(spec.p));
    if (a.direction.empty()) dir[0] = 1.0;
    else if (a.direction.size() != spec.p) throw ConfigError("--direction needs p entries");
    else for (std::size_t j = 0; j < spec.p; ++j) dir[static_cast<Eigen::Index>(j)] = a.direction[j];

    const ReComponents comp = estimate_re_components(spec, a.M);
    const EigenCheck eig = q2_minus_2q1(comp);
    nlohmann::json rows = nlohmann::json::array();
    if (format == OutputFormat::table) std::cout << fmt::format("{:>6} {:>10} {:>10} {:>10}\n", "k", "RE", "1/RE", "mc_se");
    if (format == OutputFormat::csv) std::cout << "k,re,reciprocal,mc_se\n";
    for (std::size_t k : a.ks) {
        const ReEstimate re = re_from_components(comp, k, dir);
        if (format == OutputFormat::table) {
            std::cout << fmt::format("{:>6} {:>10.5f} {:>10.5f} {:>10.5f}\n", k, re.value, re.reciprocal(), re.mc_se);
        } else if (format == OutputFormat::csv) {
            std::cout << fmt::format("{},{},{},{}\n", k, re.value, re.reciprocal(), re.mc_se);
        }
        rows.push_back({{"k", k}, {"re", re.value}, {"reciprocal", re.reciprocal()}, {"mc_se", re.mc_se}});
    }
    if (format == OutputFormat::json) {
        nlohmann::json doc = {{"M", a.M},
                              {"rows", rows},
                              {"min_eigenvalue_q2_minus_2q1", eig.min_eigenvalue},
                              {"min_eigenvalue_se", eig.mc_se}};
        std::cout << doc.dump(2) << '\n';
    } else if (format == OutputFormat::table) {
        std::cout << fmt::format("min eig(Q2 - 2 Q1) = {:.3e} (se {:.1e})\n", eig.min_eigenvalue, eig.mc_se);
    }
    return ok;
}

int run_gen_seer(std::size_t n, std::uint64_t seed, const std::string& output) {
    const SyntheticCohort cohort = make_synthetic_seer(n, seed);
    OutputSink sink(output);
    std::ostream& out = sink.get();
    out << "time,delta";
    for (const auto& name : cohort.covariate_names) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < cohort.data.size(); ++i) {
        const Observation& obs = cohort.data[i];
        out << fmt::format("{},{}", cohort.times[i], obs.event ? 1 : 0);
        for (double x : obs.covariates) out << fmt::format(",{}", x);
        out << '\n';
    }
    return ok;
}

int run_inspect(const std::string& path) {
    const Checkpoint c = load_checkpoint(path);
    const RunConfig& cfg = c.config;
    std::cout << fmt::format("version          {}\n", c.version);
    std::cout << fmt::format("k                {}\n", cfg.k);
    std::cout << fmt::format("replicates       {}\n", c.ensemble.B());
    std::cout << fmt::format("seed             {}\n", cfg.seed);
    std::cout << fmt::format("schedule         gamma1={} alpha={}\n", cfg.schedule().gamma1(), cfg.schedule().alpha());
    std::cout << fmt::format("weight law       {}\n", to_string(cfg.weight_law));
    std::cout << fmt::format("batches consumed {}\n", c.batches_consumed);
    std::cout << fmt::format("records read     {}\n", c.records_read);
    std::cout << fmt::format("records skipped  {}\n", c.records_skipped);
    std::cout << fmt::format("pending records  {}\n", c.pending.size());
    if (c.batches_consumed > 0) {
        const Coefficients bar = finalize(c.ensemble.main);
        for (Eigen::Index j = 0; j < bar.size(); ++j) {
            const std::string name = static_cast<std::size_t>(j) < c.column_names.size()
                                         ? c.column_names[static_cast<std::size_t>(j)]
                                         : fmt::format("x{}", j + 1);
            std::cout << fmt::format("  {:<16} {:.10g}\n", name, bar[j]);
        }
    }
    return ok;
}

void add_sim_flags(CLI::App* cmd, SimArgs& a) {
    cmd->add_option("--spec", a.spec_file, "key=value experiment file");
    cmd->add_option("--p", a.p, "covariate dimension (beta0 = ones)");
    cmd->add_option("--N", a.N, "observations per replication");
    cmd->add_option("--k", a.k, "batch size");
    cmd->add_option("--reps", a.reps, "replications");
    cmd->add_option("--replicates,--B", a.B, "bootstrap replicates");
    cmd->add_option("--error-law", a.error_law, "normal | logistic | extreme_value");
    cmd->add_option("--censor", a.censor, "target censoring proportion");
    cmd->add_option("--seed", a.seed, "master seed");
    cmd->add_option("--threads", a.threads, "worker threads (0 = all cores)");
    cmd->add_option("--level", a.level, "confidence level");
    cmd->add_option("--ci-method", a.ci_method, "normal | percentile");
    cmd->add_option("--gamma1", a.gamma1, "learning-rate scale (default 3/k)");
    cmd->add_option("--alpha", a.alpha, "learning-rate decay exponent");
    cmd->add_option("--format", a.format, "json | csv | table");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming Gehan-AFT estimation with online bootstrap inference"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "stream a CSV through SGD with bootstrap replicates");
    fit_cmd->add_option("input", fit.config.input, "CSV path or - for stdin")->capture_default_str();
    fit_cmd->add_option("--k", fit.config.k, "batch size")->capture_default_str();
    fit_cmd->add_option("--replicates,-B", fit.config.B, "bootstrap replicates")->capture_default_str();
    fit_cmd->add_option("--level", fit.config.ci_level, "confidence level")->capture_default_str();
    fit_cmd->add_option("--ci-method", fit.ci_method, "normal | percentile")->capture_default_str();
    fit_cmd->add_flag("--both-intervals", fit.both, "report both interval methods");
    fit_cmd->add_option("--gamma1", fit.config.gamma1, "learning-rate scale (default 3/k)");
    fit_cmd->add_option("--alpha", fit.config.alpha, "learning-rate decay exponent")->capture_default_str();
    fit_cmd->add_option("--seed", fit.config.seed, "bootstrap weight seed")->capture_default_str();
    fit_cmd->add_option("--weight-law", fit.weight_law, "exponential | poisson")->capture_default_str();
    fit_cmd->add_option("--checkpoint", fit.config.checkpoint_path, "write a checkpoint here");
    fit_cmd->add_option("--checkpoint-every", fit.checkpoint_every, "also checkpoint every n batches");
    fit_cmd->add_option("--resume", fit.resume, "continue from a checkpoint; input continues its stream");
    fit_cmd->add_option("--format", fit.format, "json | csv | table")->capture_default_str();
    fit_cmd->add_flag("--skip-bad", fit.config.skip_bad, "skip malformed records instead of aborting");
    fit_cmd->add_flag("--header", fit.config.header, "first line holds column names");

    OracleArgs oracle;
    auto* oracle_cmd = app.add_subcommand("oracle", "full-data Gehan estimate (O(N^2) per evaluation)");
    oracle_cmd->add_option("input", oracle.input, "CSV path or - for stdin");
    oracle_cmd->add_flag("--header", oracle.header, "first line holds column names");
    oracle_cmd->add_flag("--skip-bad", oracle.skip_bad, "skip malformed records");
    oracle_cmd->add_option("--tol", oracle.options.tol, "objective tolerance")->capture_default_str();
    oracle_cmd->add_option("--max-iter", oracle.options.max_iter, "objective evaluations")->capture_default_str();
    oracle_cmd->add_option("--format", oracle.format, "json | csv | table")->capture_default_str();

    SimArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "bias / EmSd / coverage experiment");
    add_sim_flags(sim_cmd, sim);

    ReArgs re;
    auto* re_cmd = app.add_subcommand("re-eval", "Monte-Carlo relative efficiency RE(k)");
    add_sim_flags(re_cmd, re.sim);
    re_cmd->add_option("--ks", re.ks, "batch sizes")->delimiter(',')->capture_default_str();
    re_cmd->add_option("--M", re.M, "Monte-Carlo draws")->capture_default_str();
    re_cmd->add_option("--direction", re.direction, "contrast a (default e1)");

    std::size_t seer_n = 100000;
    std::uint64_t seer_seed = 2024;
    std::string seer_out = "-";
    auto* seer_cmd = app.add_subcommand("gen-seer", "write a synthetic registry-style cohort as CSV");
    seer_cmd->add_option("--n", seer_n, "subjects")->capture_default_str();
    seer_cmd->add_option("--seed", seer_seed, "seed")->capture_default_str();
    seer_cmd->add_option("--output,-o", seer_out, "output path or -")->capture_default_str();

    std::string inspect_path;
    auto* inspect_cmd = app.add_subcommand("inspect", "dump a checkpoint");
    inspect_cmd->add_option("checkpoint", inspect_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }
    spdlog::set_default_logger(spdlog::stderr_color_st("aftsgd"));
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
    spdlog::set_pattern("%^%l%$: %v");

    try {
        if (*fit_cmd) return run_fit(fit);
        if (*oracle_cmd) return run_oracle(oracle);
        if (*sim_cmd) return run_simulate(sim);
        if (*re_cmd) return run_re_eval(re);
        if (*seer_cmd) return run_gen_seer(seer_n, seer_seed, seer_out);
        if (*inspect_cmd) return run_inspect(inspect_path);
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return config_error;
    } catch (const CheckpointError& e) {
        spdlog::error("{}", e.what());
        return checkpoint_error;
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return data_error;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return failure;
    }
    return failure;
}
