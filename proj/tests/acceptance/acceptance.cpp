// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. `acceptance 3 5` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "aftsgd/oracle.hpp"
#include "aftsgd/simlab.hpp"
#include "support/invariants.hpp"

using namespace aftsgd;

namespace {

constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
    bool pass = false;
    std::string detail;
};

void note(const std::string& s) { fmt::print("    {}\n", s); }

std::string vec(const Coefficients& v, int digits = 5) {
    std::string s = "(";
    for (Eigen::Index j = 0; j < v.size(); ++j) s += fmt::format("{}{:.{}f}", j ? ", " : "", v[j], digits);
    return s + ")";
}

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

SimSpec table_design() {
    SimSpec s;
    s.N = 50000;
    s.k = 50;
    s.alpha = 0.7;
    s.B = 200;
    s.reps = 200;
    s.censor_target = 0.2;
    s.error_law = ErrorLaw::normal;
    s.seed = kSeed;
    return s;
}

// 1. bias / EmSd / coverage on the k = 50 normal design.
Outcome criterion1() {
    const SimSpec spec = table_design();
    const ExperimentSummary r = run_table_experiment(spec);
    note(fmt::format("bias {}  EmSd {}  mean bootstrap SE {}", vec(r.bias), vec(r.emp_sd), vec(r.mean_bootstrap_se)));
    note(fmt::format("coverage normal {}  percentile {}  realized censoring {:.3f}  {:.2f} s/rep",
                     vec(r.coverage_normal, 3), vec(r.coverage_percentile, 3), r.realized_censoring, r.mean_runtime_s));
    const bool ok = std::abs(r.bias[0]) <= 0.003 && within(r.emp_sd[0], 0.0027, 0.0107) &&
                    within(r.coverage[0], 0.91, 0.98) && within(r.coverage[1], 0.91, 0.98);
    return {ok, fmt::format("|bias b1| {:.5f} <= 0.003, EmSd b1 {:.5f} in [0.0027, 0.0107], coverage {} in [0.91, 0.98]",
                            std::abs(r.bias[0]), r.emp_sd[0], vec(r.coverage, 3))};
}

// 2. bias stays small for every batch size.
Outcome criterion2() {
    bool ok = true;
    double worst = 0.0;
    for (std::size_t k : {10, 20, 50, 100}) {
        SimSpec spec = table_design();
        spec.k = k;
        spec.B = 0;
        const ExperimentSummary r = run_table_experiment(spec);
        const double m = r.bias.cwiseAbs().maxCoeff();
        worst = std::max(worst, m);
        ok = ok && m <= 0.004;
        note(fmt::format("k = {:>3}: bias {}  EmSd {}", k, vec(r.bias), vec(r.emp_sd)));
    }
    return {ok, fmt::format("max |bias| over k in {{10, 20, 50, 100}} and both coefficients = {:.5f} <= 0.004", worst)};
}

// 3. EmSd shrinks like N^-1/2.
Outcome criterion3() {
    bool ok = true;
    std::string detail;
    for (ErrorLaw law : {ErrorLaw::normal, ErrorLaw::logistic, ErrorLaw::extreme_value}) {
        SimSpec spec = table_design();
        spec.error_law = law;
        spec.B = 0;
        spec.reps = 1000;
        const ExperimentSummary half = run_table_experiment(spec);
        spec.N = 100000;
        const ExperimentSummary full = run_table_experiment(spec);
        const Coefficients ratio = full.emp_sd.cwiseQuotient(half.emp_sd);
        for (Eigen::Index j = 0; j < ratio.size(); ++j) ok = ok && within(ratio[j], 0.6, 0.8);
        note(fmt::format("{:<13} EmSd N=5e4 {}  N=1e5 {}  ratio {}", to_string(law), vec(half.emp_sd),
                         vec(full.emp_sd), vec(ratio, 3)));
        detail += fmt::format("{}{} {}", detail.empty() ? "" : ", ", to_string(law), vec(ratio, 3));
    }
    return {ok, "EmSd(1e5)/EmSd(5e4) in [0.6, 0.8]: " + detail};
}

// 4. streaming estimate tracks the batch oracle; oracle beats dense grids.
Outcome criterion4() {
    SimSpec spec;
    spec.N = 2000;
    spec.k = 20;
    spec.B = 0;
    spec.seed = kSeed;
    const double bound = calibrate_censoring(spec);
    double total = 0.0;
    double worst = 0.0;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        const Dataset d = generate_dataset(spec, rep, bound);
        EstimatorState st = init_state(2, spec.schedule());
        for (std::size_t i = 0; i < d.size() / spec.k; ++i) {
            advance(st, MiniBatch::from_observations(std::span<const Observation>(d).subspan(i * spec.k, spec.k), i + 1));
        }
        const Coefficients sgd = finalize(st);
        const OracleResult o = solve_batch(d, sgd);
        const double gap = (sgd - o.beta).lpNorm<Eigen::Infinity>();
        total += gap;
        worst = std::max(worst, gap);
    }
    const double mean_gap = total / 50.0;
    note(fmt::format("N = 2000, k = 20: mean sup-norm gap {:.4f}, largest {:.4f}", mean_gap, worst));

    // Grid check on small problems.
    bool grid_ok = true;
    double worst_excess = -std::numeric_limits<double>::infinity();
    std::size_t instances = 0;
    for (std::size_t p : {1, 2}) {
        for (std::size_t N : {40, 100, 200, 300}) {
            SimSpec small;
            small.p = p;
            small.beta0 = Coefficients::Ones(static_cast<Eigen::Index>(p));
            small.N = N;
            small.k = 20;
            small.seed = kSeed + N;
            const Dataset d = generate_dataset(small, 0, calibrate_censoring(small, 200000));
            const OracleResult o = solve_batch(d);
            // Coarse grid over the box, then a fine grid around its best cell.
            const double coarse = p == 1 ? 1e-3 : 0.02;
            const double fine = p == 1 ? 2e-5 : 5e-4;
            const int half = p == 1 ? 50 : 40;
            auto eval = [&](double a, double b) {
                Coefficients x(static_cast<Eigen::Index>(p));
                x[0] = a;
                if (p == 2) x[1] = b;
                return full_loss(d, x);
            };
            double best = std::numeric_limits<double>::infinity();
            double ba = 0.0, bb = 0.0;
            const int steps = static_cast<int>(std::lround(2.0 / coarse));
            for (int i = 0; i <= steps; ++i) {
                for (int j = 0; j <= (p == 2 ? steps : 0); ++j) {
                    const double v = eval(i * coarse, j * coarse);
                    if (v < best) {
                        best = v;
                        ba = i * coarse;
                        bb = j * coarse;
                    }
                }
            }
            const double ca = ba, cb = bb;
            for (int i = -half; i <= half; ++i) {
                for (int j = (p == 2 ? -half : 0); j <= (p == 2 ? half : 0); ++j) {
                    best = std::min(best, eval(ca + i * fine, cb + j * fine));
                }
            }
            const double excess = o.objective - best;
            worst_excess = std::max(worst_excess, excess);
            grid_ok = grid_ok && excess <= 1e-4;
            ++instances;
        }
    }
    note(fmt::format("{} grid instances (p <= 2, N <= 300): largest oracle - grid = {:.3g}", instances, worst_excess));
    return {mean_gap <= 0.05 && grid_ok,
            fmt::format("mean gap {:.4f} <= 0.05 over 50 seeds; oracle <= grid min + 1e-4 on {} instances", mean_gap,
                        instances)};
}

// 5. linear SGD cost, superlinear oracle cost.
Outcome criterion5() {
    TimingOptions opts;
    opts.sgd_repeats = 40;
    // Best of three passes damps scheduler noise on a shared machine.
    std::vector<double> sgd(4, std::numeric_limits<double>::infinity());
    const std::vector<std::size_t> grid{12500, 25000, 50000, 100000};
    for (int pass = 0; pass < 3; ++pass) {
        const auto rows = run_timing_experiment(grid, 50, 0, opts);
        for (std::size_t i = 0; i < rows.size(); ++i) sgd[i] = std::min(sgd[i], rows[i].sgd_seconds);
    }
    bool ok = true;
    std::string sgd_ratios;
    for (std::size_t i = 1; i < sgd.size(); ++i) {
        const double r = sgd[i] / sgd[i - 1];
        ok = ok && within(r, 1.5, 2.8);
        sgd_ratios += fmt::format("{}{:.2f}", i > 1 ? ", " : "", r);
    }
    note(fmt::format("SGD seconds at N = 12500..100000: {:.4f} {:.4f} {:.4f} {:.4f}", sgd[0], sgd[1], sgd[2], sgd[3]));

    TimingOptions oopts;
    oopts.sgd_repeats = 1;
    const auto orows = run_timing_experiment({500, 1000, 2000}, 20, 2000, oopts);
    std::string oracle_ratios;
    for (std::size_t i = 1; i < orows.size(); ++i) {
        const double r = *orows[i].oracle_seconds / *orows[i - 1].oracle_seconds;
        ok = ok && r >= 3.0;
        oracle_ratios += fmt::format("{}{:.2f}", i > 1 ? ", " : "", r);
    }
    note(fmt::format("oracle seconds at N = 500, 1000, 2000: {:.3f} {:.3f} {:.3f}", *orows[0].oracle_seconds,
                     *orows[1].oracle_seconds, *orows[2].oracle_seconds));
    return {ok, fmt::format("SGD doubling ratios [{}] in [1.5, 2.8]; oracle doubling ratios [{}] >= 3", sgd_ratios,
                            oracle_ratios)};
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

// 6. bootstrap law against the Monte-Carlo sampling law.
Outcome criterion6() {
    SimSpec spec = table_design();
    spec.N = 10000;
    spec.k = 20;
    spec.reps = 100;
    spec.B = 200;
    ExperimentOptions opts;
    opts.keep_bootstrap_differences = true;
    const ExperimentSummary r = run_table_experiment(spec, opts);
    const double root_n = std::sqrt(static_cast<double>(spec.N / spec.k));
    bool ok = true;
    std::string detail;
    for (Eigen::Index j = 0; j < 2; ++j) {
        std::vector<double> boot, mc;
        for (const auto& per_rep : r.bootstrap_differences) {
            for (const auto& d : per_rep) boot.push_back(root_n * d[j]);
        }
        for (const auto& est : r.estimates) mc.push_back(root_n * (est[j] - spec.beta0[j]));
        const double ks = ks_distance(boot, mc);
        ok = ok && ks < 0.15;
        detail += fmt::format("{}b{} {:.3f}", j ? ", " : "", j + 1, ks);
    }
    note(fmt::format("{} pooled bootstrap draws against {} replications; mean bootstrap SE {} vs EmSd {}",
                     r.reps * spec.B, r.reps, vec(r.mean_bootstrap_se), vec(r.emp_sd)));
    return {ok, "KS distance < 0.15: " + detail};
}

// 7. efficiency bound, trend in k, and the U-statistic ordering.
Outcome criterion7() {
    SimSpec spec;
    spec.seed = kSeed;
    const ReComponents c = estimate_re_components(spec, 400000);
    bool ok = true;
    std::string detail;
    for (Eigen::Index j = 0; j < 2; ++j) {
        Coefficients a = Coefficients::Zero(2);
        a[j] = 1.0;
        std::vector<ReEstimate> est;
        for (std::size_t k : {10, 50, 200}) {
            est.push_back(re_from_components(c, k, a));
            ok = ok && est.back().value <= 1.0 + 3.0 * est.back().mc_se;
        }
        const bool trend = std::abs(1.0 - est[2].value) < std::abs(1.0 - est[0].value);
        ok = ok && trend;
        note(fmt::format("b{}: RE(10) {:.4f} ({:.4f})  RE(50) {:.4f} ({:.4f})  RE(200) {:.4f} ({:.4f});  1/RE(10) {:.4f}",
                         j + 1, est[0].value, est[0].mc_se, est[1].value, est[1].mc_se, est[2].value, est[2].mc_se,
                         est[0].reciprocal()));
        detail += fmt::format("{}b{} RE(10,50,200) = {:.4f}, {:.4f}, {:.4f}", j ? "; " : "", j + 1, est[0].value,
                              est[1].value, est[2].value);
    }
    const EigenCheck e = q2_minus_2q1(c);
    ok = ok && e.min_eigenvalue >= -3.0 * e.mc_se;
    note(fmt::format("min eigenvalue of Q2 - 2 Q1 = {:.4g} (jackknife se {:.2g}), tolerance -3 se", e.min_eigenvalue,
                     e.mc_se));
    return {ok, detail + fmt::format("; min eig(Q2 - 2Q1) {:.4g} >= {:.2g}", e.min_eigenvalue, -3.0 * e.mc_se)};
}

// 8. randomized invariant suites.
Outcome criterion8() {
    bool ok = true;
    std::string detail;
    for (const auto& s : testsupport::run_all_invariants(1000, kSeed)) {
        ok = ok && s.ok() && s.cases == 1000;
        detail += fmt::format("{}{} {}/{}", detail.empty() ? "" : ", ", s.name, s.cases - s.failures, s.cases);
        if (!s.ok()) note(s.name + " first failure: " + s.first_failure);
    }
    return {ok, detail};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                         criterion5, criterion6, criterion7, criterion8};
    std::set<int> chosen;
    for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!chosen.empty() && !chosen.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        fmt::print("{} criterion {}: {} [{:.0f} s]\n", o.pass ? "PASS" : "FAIL", id, o.detail, secs);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
