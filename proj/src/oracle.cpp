#include "aftsgd/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "aftsgd/error.hpp"

namespace aftsgd {

namespace {

bool centered_rank_deficient(const MiniBatch& packed) {
    const auto n = static_cast<Eigen::Index>(packed.size());
    const auto p = static_cast<Eigen::Index>(packed.dim());
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
        packed.covariate_block().data(), n, p);
    const Matrix centered = x.rowwise() - x.colwise().mean();
    Eigen::ColPivHouseholderQR<Matrix> qr(centered);
    qr.setThreshold(1e-10);
    return qr.rank() < p;
}

// Offsets of the certification probe: the full {-1,0,1}^p stencil for small
// p, the 2p axis directions otherwise.
std::vector<Coefficients> probe_offsets(Eigen::Index p, double step) {
    std::vector<Coefficients> out;
    if (p <= 3) {
        const auto total = static_cast<int>(std::pow(3, p));
        for (int code = 0; code < total; ++code) {
            Coefficients d(p);
            int rest = code;
            bool zero = true;
            for (Eigen::Index c = 0; c < p; ++c) {
                d[c] = static_cast<double>(rest % 3 - 1) * step;
                zero = zero && rest % 3 == 1;
                rest /= 3;
            }
            if (!zero) out.push_back(d);
        }
        return out;
    }
    for (Eigen::Index c = 0; c < p; ++c) {
        for (double sign : {-1.0, 1.0}) {
            Coefficients d = Coefficients::Zero(p);
            d[c] = sign * step;
            out.push_back(d);
        }
    }
    return out;
}

} // namespace

OracleResult solve_batch(std::span<const Observation> data, const Coefficients& init,
                         const OracleOptions& options) {
    if (data.size() < 2) throw InputError("batch oracle needs N >= 2 observations");
    const std::size_t p = validate_dataset(data);
    if (static_cast<std::size_t>(init.size()) != p) {
        throw ConfigError("initial coefficients have the wrong dimension");
    }
    if (std::none_of(data.begin(), data.end(), [](const Observation& o) { return o.event; })) {
        throw DegenerateProblemError("every observation is censored; the objective is identically zero");
    }
    if (!(options.tol > 0.0)) throw ConfigError("oracle tolerance must be positive");

    const MiniBatch packed = MiniBatch::from_observations(data, 0);
    OracleResult result;
    result.rank_deficient = centered_rank_deficient(packed);
    if (result.rank_deficient) {
        spdlog::warn("covariate matrix is rank deficient; the minimizer is not unique");
    }

    auto eval = [&](const Coefficients& beta) {
        ++result.iterations;
        return full_loss_and_score(packed, beta);
    };
    auto within_tol = [&](double f, double reference) {
        return f <= reference + options.tol * (1.0 + std::abs(reference));
    };

    Coefficients best = init;
    LossAndScore at_best = eval(best);
    double best_f = at_best.loss;
    bool stationary = at_best.score.squaredNorm() == 0.0;
    double radius = options.initial_radius;
    const auto offsets_unit = probe_offsets(static_cast<Eigen::Index>(p), 1.0);

    while (!stationary && result.iterations < options.max_iter) {
        const Coefficients round_start = best;
        Coefficients x = best;
        Coefficients avg = Coefficients::Zero(static_cast<Eigen::Index>(p));
        for (std::size_t t = 1; t <= options.round_length; ++t) {
            const LossAndScore ls = eval(x);
            if (ls.loss < best_f) {
                best_f = ls.loss;
                best = x;
            }
            const double gnorm = ls.score.norm();
            if (gnorm == 0.0) {
                best_f = ls.loss;
                best = x;
                stationary = true;
                break;
            }
            x -= (radius / std::sqrt(static_cast<double>(t))) / gnorm * ls.score;
            avg += (x - avg) / static_cast<double>(t);
        }
        if (stationary) break;
        const LossAndScore at_avg = eval(avg);
        if (at_avg.loss < best_f) {
            best_f = at_avg.loss;
            best = avg;
        }
        result.objective_trace.push_back(best_f);

        if ((best - round_start).norm() < 0.5 * radius) radius *= 0.5;
        if (radius >= options.tol) continue;

        // Certify on the probe grid; a better probe point restarts the descent.
        bool certified = true;
        Coefficients probe_best = best;
        double probe_f = best_f;
        for (const auto& d : offsets_unit) {
            const Coefficients q = best + options.tol * d;
            const double fq = eval(q).loss;
            if (!within_tol(best_f, fq)) certified = false;
            if (fq < probe_f) {
                probe_f = fq;
                probe_best = q;
            }
        }
        if (certified) {
            result.converged = true;
            break;
        }
        best = probe_best;
        best_f = probe_f;
        radius = 16.0 * options.tol;
    }

    const LossAndScore final_eval = full_loss_and_score(packed, best);
    result.beta = best;
    result.objective = final_eval.loss;
    result.score_norm = final_eval.score.norm();
    if (stationary) result.converged = true;
    if (result.rank_deficient) result.converged = false;
    if (result.objective_trace.empty() || result.objective_trace.back() != result.objective) {
        result.objective_trace.push_back(result.objective);
    }
    return result;
}

OracleResult solve_batch(std::span<const Observation> data, const OracleOptions& options) {
    if (data.empty()) throw InputError("batch oracle needs N >= 2 observations");
    return solve_batch(data, Coefficients::Zero(static_cast<Eigen::Index>(data.front().covariates.size())),
                       options);
}

} // namespace aftsgd
