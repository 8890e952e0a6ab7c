// Monte-Carlo evaluation of the asymptotic relative efficiency RE(k).
//
// The k-batch score is (k-1) times a U-statistic of order 2 with kernel
// q(Z1, Z2) = 1/2 (X1 - X2) [d1 1{e1 <= e2} - d2 1{e2 <= e1}], so both the
// batch-SGD covariance and the full-data covariance are quadratic forms in
// Q1 = Cov q1(Z1) and Q2 = Cov q(Z1, Z2), sandwiched by the inverse of the
// population Hessian. The Hessian's scale cancels in the ratio.

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "aftsgd/error.hpp"
#include "aftsgd/simlab.hpp"
#include "detail/parallel.hpp"

namespace aftsgd {

namespace {

struct Accumulator {
    std::size_t p = 0;
    // Q1: unbiased per-outer-draw estimates of q1(z) q1(z)' and of q1(z).
    Matrix q1_outer;
    Coefficients q1_sum;
    double q1_count = 0.0;
    // Q2: raw moments of the kernel over independent pairs.
    Matrix q2_outer;
    Coefficients q2_sum;
    double q2_count = 0.0;
    // H: kernel means at beta0 +- h e_c, column c.
    Matrix h_plus;
    Matrix h_minus;
    double h_count = 0.0;

    explicit Accumulator(std::size_t dim = 0)
        : p(dim),
          q1_outer(Matrix::Zero(dim, dim)),
          q1_sum(Coefficients::Zero(dim)),
          q2_outer(Matrix::Zero(dim, dim)),
          q2_sum(Coefficients::Zero(dim)),
          h_plus(Matrix::Zero(dim, dim)),
          h_minus(Matrix::Zero(dim, dim)) {}

    Accumulator& operator+=(const Accumulator& o) {
        q1_outer += o.q1_outer;
        q1_sum += o.q1_sum;
        q1_count += o.q1_count;
        q2_outer += o.q2_outer;
        q2_sum += o.q2_sum;
        q2_count += o.q2_count;
        h_plus += o.h_plus;
        h_minus += o.h_minus;
        h_count += o.h_count;
        return *this;
    }
    Accumulator& operator-=(const Accumulator& o) {
        q1_outer -= o.q1_outer;
        q1_sum -= o.q1_sum;
        q1_count -= o.q1_count;
        q2_outer -= o.q2_outer;
        q2_sum -= o.q2_sum;
        q2_count -= o.q2_count;
        h_plus -= o.h_plus;
        h_minus -= o.h_minus;
        h_count -= o.h_count;
        return *this;
    }
};

// Scalar multiplier c with q(a, b; beta) = c (X_a - X_b).
double kernel_coefficient(const Observation& a, const Observation& b, const Coefficients& beta) {
    double fa = 0.0;
    double fb = 0.0;
    for (std::size_t c = 0; c < a.covariates.size(); ++c) {
        fa += beta[static_cast<Eigen::Index>(c)] * a.covariates[c];
        fb += beta[static_cast<Eigen::Index>(c)] * b.covariates[c];
    }
    const double ea = a.log_time - fa;
    const double eb = b.log_time - fb;
    return 0.5 * ((a.event && ea <= eb ? 1.0 : 0.0) - (b.event && eb <= ea ? 1.0 : 0.0));
}

struct Finished {
    Matrix Q1;
    Matrix Q2;
    Matrix H;
};

Finished finish(const Accumulator& acc, double h) {
    Finished f;
    const Coefficients m1 = acc.q1_sum / acc.q1_count;
    f.Q1 = acc.q1_outer / acc.q1_count - m1 * m1.transpose();
    const Coefficients m2 = acc.q2_sum / acc.q2_count;
    f.Q2 = acc.q2_outer / acc.q2_count - m2 * m2.transpose();
    const Matrix jac = (acc.h_plus - acc.h_minus) / (2.0 * h * acc.h_count);
    f.Q1 = 0.5 * (f.Q1 + f.Q1.transpose());
    f.Q2 = 0.5 * (f.Q2 + f.Q2.transpose());
    f.H = 0.5 * (jac + jac.transpose());
    return f;
}

Accumulator run_block(const SimSpec& spec, double bound, std::size_t block, std::size_t blocks,
                      std::size_t outer, std::size_t inner, std::size_t pairs, double h) {
    const std::size_t p = spec.p;
    const auto P = static_cast<Eigen::Index>(p);
    Accumulator acc(p);
    Observation z;
    Observation w;
    Coefficients d(P);

    // Q1: for each outer z, an inner sample gives
    //   q1(z) q1(z)' ~ (S S' - sum q q') / (m (m - 1)),  S = sum_a q(z, Z_a),
    // which is unbiased because distinct inner draws are independent given z.
    {
        DatasetGenerator gen(spec, block, bound, StreamDomain::monte_carlo);
        Coefficients s(P);
        Matrix ss(P, P);
        const double m = static_cast<double>(inner);
        for (std::size_t o = 0; o < outer; ++o) {
            gen.next_into(z);
            s.setZero();
            ss.setZero();
            for (std::size_t a = 0; a < inner; ++a) {
                gen.next_into(w);
                const double c = kernel_coefficient(z, w, spec.beta0);
                if (c == 0.0) continue;
                for (std::size_t j = 0; j < p; ++j) {
                    d[static_cast<Eigen::Index>(j)] = c * (z.covariates[j] - w.covariates[j]);
                }
                s += d;
                ss.noalias() += d * d.transpose();
            }
            acc.q1_outer += (s * s.transpose() - ss) / (m * (m - 1.0));
            acc.q1_sum += s / m;
        }
        acc.q1_count = static_cast<double>(outer);
    }

    // Q2 over independent pairs.
    {
        DatasetGenerator gen(spec, blocks + block, bound, StreamDomain::monte_carlo);
        for (std::size_t t = 0; t < pairs; ++t) {
            gen.next_into(z);
            gen.next_into(w);
            const double c = kernel_coefficient(z, w, spec.beta0);
            for (std::size_t j = 0; j < p; ++j) {
                d[static_cast<Eigen::Index>(j)] = c * (z.covariates[j] - w.covariates[j]);
            }
            acc.q2_sum += d;
            acc.q2_outer.noalias() += d * d.transpose();
        }
        acc.q2_count = static_cast<double>(pairs);
    }

    // H by central differences with common pairs across all 2p evaluations.
    {
        DatasetGenerator gen(spec, 2 * blocks + block, bound, StreamDomain::monte_carlo);
        Coefficients beta(P);
        for (std::size_t t = 0; t < pairs; ++t) {
            gen.next_into(z);
            gen.next_into(w);
            for (std::size_t j = 0; j < p; ++j) {
                d[static_cast<Eigen::Index>(j)] = z.covariates[j] - w.covariates[j];
            }
            for (Eigen::Index c = 0; c < P; ++c) {
                beta = spec.beta0;
                beta[c] += h;
                acc.h_plus.col(c) += kernel_coefficient(z, w, beta) * d;
                beta[c] -= 2.0 * h;
                acc.h_minus.col(c) += kernel_coefficient(z, w, beta) * d;
            }
        }
        acc.h_count = static_cast<double>(pairs);
    }
    return acc;
}

double jackknife_se(const std::vector<double>& leave_one_out) {
    const double g = static_cast<double>(leave_one_out.size());
    double mean = 0.0;
    for (double v : leave_one_out) mean += v;
    mean /= g;
    double ss = 0.0;
    for (double v : leave_one_out) ss += (v - mean) * (v - mean);
    return std::sqrt((g - 1.0) / g * ss);
}

double re_value(const Matrix& Q1, const Matrix& Q2, const Matrix& H, std::size_t k,
                const Coefficients& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
    if (eig.eigenvalues().minCoeff() <= 0.0) {
        throw EstimationError("Hessian estimate is not positive definite; increase M");
    }
    const Coefficients w = H.ldlt().solve(a);
    const double kk = static_cast<double>(k);
    const double q1 = w.dot(Q1 * w);
    const double q2 = w.dot(Q2 * w);
    const double num = 4.0 * (kk - 1.0) * (kk - 1.0) * q1;
    const double den = 4.0 * (kk - 2.0) * (kk - 1.0) * q1 + 2.0 * (kk - 1.0) * q2;
    if (!(den > 0.0)) throw EstimationError("efficiency denominator is not positive");
    return num / den;
}

} // namespace

ReComponents estimate_re_components(const SimSpec& spec, std::size_t M, double h,
                                    std::size_t blocks) {
    spec.validate();
    if (M < 100000) throw ConfigError("RE evaluation needs at least 10^5 Monte-Carlo draws");
    if (blocks < 2 || blocks > M) throw ConfigError("jackknife needs 2 <= blocks <= M");
    if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");

    const double bound = spec.censor_target > 0.0 ? calibrate_censoring(spec)
                                                  : std::numeric_limits<double>::infinity();
    const auto inner = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(M))));

    std::vector<Accumulator> per_block(blocks);
    detail::parallel_for(blocks, spec.threads, [&](std::size_t b) {
        const std::size_t share = M / blocks + (b < M % blocks ? 1 : 0);
        per_block[b] = run_block(spec, bound, b, blocks, share, inner, share, h);
    });

    Accumulator total(spec.p);
    for (const auto& acc : per_block) total += acc;
    const Finished all = finish(total, h);

    ReComponents out;
    out.Q1 = all.Q1;
    out.Q2 = all.Q2;
    out.H = all.H;
    out.M = M;
    out.inner = inner;
    out.blocks = blocks;
    for (const auto& acc : per_block) {
        Accumulator rest = total;
        rest -= acc;
        const Finished f = finish(rest, h);
        out.Q1_jack.push_back(f.Q1);
        out.Q2_jack.push_back(f.Q2);
        out.H_jack.push_back(f.H);
    }
    return out;
}

ReEstimate re_from_components(const ReComponents& components, std::size_t k,
                              const Coefficients& a) {
    if (k < 2) throw ConfigError("batch size k must be at least 2");
    if (a.size() != components.H.rows()) throw ConfigError("contrast has the wrong dimension");
    if (a.norm() == 0.0) throw ConfigError("contrast must be non-zero");
    ReEstimate out;
    out.k = k;
    out.direction = a;
    out.value = re_value(components.Q1, components.Q2, components.H, k, a);
    if (!(out.value > 0.0)) throw EstimationError("RE estimate is not positive");
    std::vector<double> loo;
    for (std::size_t b = 0; b < components.Q1_jack.size(); ++b) {
        loo.push_back(re_value(components.Q1_jack[b], components.Q2_jack[b], components.H_jack[b], k, a));
    }
    out.mc_se = loo.size() >= 2 ? jackknife_se(loo) : 0.0;
    return out;
}

ReEstimate estimate_re(const SimSpec& spec, std::size_t k, const Coefficients& a, std::size_t M) {
    return re_from_components(estimate_re_components(spec, M), k, a);
}

EigenCheck q2_minus_2q1(const ReComponents& components) {
    auto smallest = [](const Matrix& q1, const Matrix& q2) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(q2 - 2.0 * q1);
        return eig.eigenvalues().minCoeff();
    };
    EigenCheck out;
    out.min_eigenvalue = smallest(components.Q1, components.Q2);
    std::vector<double> loo;
    for (std::size_t b = 0; b < components.Q1_jack.size(); ++b) {
        loo.push_back(smallest(components.Q1_jack[b], components.Q2_jack[b]));
    }
    out.mc_se = loo.size() >= 2 ? jackknife_se(loo) : 0.0;
    return out;
}

} // namespace aftsgd
