#include "aftsgd/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "aftsgd/error.hpp"

namespace aftsgd {

MiniBatch::MiniBatch(std::uint64_t index, std::size_t dim) : index_(index), dim_(dim) {}

MiniBatch MiniBatch::from_observations(std::span<const Observation> members,
                                       std::uint64_t index) {
    MiniBatch batch(index, members.empty() ? 0 : members.front().covariates.size());
    batch.reserve(members.size());
    for (const auto& obs : members) batch.push_back(obs);
    return batch;
}

void MiniBatch::push_back(const Observation& obs) {
    push_back(obs.log_time, obs.event, obs.covariates);
}

void MiniBatch::push_back(double log_time, bool event, std::span<const double> x) {
    if (x.size() != dim_) {
        throw ConfigError("observation has " + std::to_string(x.size()) +
                          " covariates, batch dimension is " + std::to_string(dim_));
    }
    log_time_.push_back(log_time);
    event_.push_back(event ? 1 : 0);
    covariates_.insert(covariates_.end(), x.begin(), x.end());
}

void MiniBatch::clear() noexcept {
    log_time_.clear();
    event_.clear();
    covariates_.clear();
}

void MiniBatch::reserve(std::size_t k) {
    log_time_.reserve(k);
    event_.reserve(k);
    covariates_.reserve(k * dim_);
}

MiniBatch MiniBatch::shifted(double c) const {
    MiniBatch out = *this;
    for (auto& t : out.log_time_) t += c;
    return out;
}

Observation MiniBatch::observation(std::size_t l) const {
    auto x = covariates(l);
    return Observation{log_time_[l], event_[l] != 0, std::vector<double>(x.begin(), x.end())};
}

namespace {

struct Scratch {
    std::vector<double> residual;
    std::vector<std::uint32_t> order;
    std::vector<double> suffix_x;
};

Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

void check_batch(const MiniBatch& batch, std::size_t beta_dim) {
    if (batch.size() < 2) {
        throw ConfigError("mini-batch needs at least 2 members, got " +
                          std::to_string(batch.size()));
    }
    if (batch.dim() != beta_dim) {
        throw ConfigError("coefficient dimension " + std::to_string(beta_dim) +
                          " does not match covariate dimension " +
                          std::to_string(batch.dim()));
    }
}

void compute_residuals(const MiniBatch& batch, std::span<const double> beta,
                       std::vector<double>& e) {
    const std::size_t k = batch.size();
    const std::size_t p = batch.dim();
    const double* x = batch.covariate_block().data();
    e.resize(k);
    for (std::size_t l = 0; l < k; ++l) {
        double fit = 0.0;
        for (std::size_t c = 0; c < p; ++c) fit += x[l * p + c] * beta[c];
        e[l] = batch.log_time(l) - fit;
    }
}

// Indices sorted by residual, largest first.
void sort_descending(const std::vector<double>& e, std::vector<std::uint32_t>& order) {
    order.resize(e.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&e](std::uint32_t a, std::uint32_t b) { return e[a] > e[b]; });
}

} // namespace

// Walks members from the largest residual down. When member l is visited, the
// running suffix holds every j with e_j >= e_l (tie groups are absorbed whole
// before any member of the group is scored), so
//   sum_j (X_l - X_j) 1{e_l <= e_j} = cnt * X_l - sum_{suffix} X_j.
void accumulate_batch_score(const MiniBatch& batch, std::span<const double> beta,
                            std::span<const double> weights, std::span<double> out) {
    check_batch(batch, beta.size());
    const std::size_t k = batch.size();
    const std::size_t p = batch.dim();
    if (out.size() != p) throw ConfigError("score output has wrong dimension");
    if (!weights.empty() && weights.size() != k) {
        throw InputError("perturbation weights have length " + std::to_string(weights.size()) +
                         ", batch has " + std::to_string(k) + " members");
    }

    auto& s = scratch();
    compute_residuals(batch, beta, s.residual);
    sort_descending(s.residual, s.order);
    s.suffix_x.assign(p, 0.0);

    const auto& e = s.residual;
    const double* x = batch.covariate_block().data();
    std::fill(out.begin(), out.end(), 0.0);
    double count = 0.0;
    std::size_t g = 0;
    while (g < k) {
        std::size_t h = g;
        const double level = e[s.order[g]];
        for (; h < k && e[s.order[h]] == level; ++h) {
            const double* xj = x + std::size_t{s.order[h]} * p;
            for (std::size_t c = 0; c < p; ++c) s.suffix_x[c] += xj[c];
            count += 1.0;
        }
        for (std::size_t t = g; t < h; ++t) {
            const std::uint32_t l = s.order[t];
            if (!batch.event(l)) continue;
            const double w = weights.empty() ? 1.0 : weights[l];
            const double* xl = x + std::size_t{l} * p;
            for (std::size_t c = 0; c < p; ++c) out[c] += w * (count * xl[c] - s.suffix_x[c]);
        }
        g = h;
    }
    const double inv_k = 1.0 / static_cast<double>(k);
    for (auto& v : out) v *= inv_k;
}

double batch_loss(const MiniBatch& batch, const Coefficients& beta) {
    check_batch(batch, static_cast<std::size_t>(beta.size()));
    const std::size_t k = batch.size();
    auto& s = scratch();
    compute_residuals(batch, {beta.data(), static_cast<std::size_t>(beta.size())}, s.residual);
    sort_descending(s.residual, s.order);

    // {e_l - e_j}^- = (e_j - e_l) 1{e_j > e_l}; equal residuals add zero, so
    // the suffix may include the tie group.
    const auto& e = s.residual;
    double loss = 0.0;
    double count = 0.0;
    double suffix_e = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
        const std::uint32_t l = s.order[t];
        count += 1.0;
        suffix_e += e[l];
        if (batch.event(l)) loss += suffix_e - count * e[l];
    }
    return std::max(0.0, loss) / static_cast<double>(k);
}

Coefficients batch_score(const MiniBatch& batch, const Coefficients& beta) {
    Coefficients out = Coefficients::Zero(beta.size());
    accumulate_batch_score(batch, {beta.data(), static_cast<std::size_t>(beta.size())}, {},
                           {out.data(), static_cast<std::size_t>(out.size())});
    return out;
}

Coefficients perturbed_batch_score(const MiniBatch& batch, const Coefficients& beta,
                                   const PerturbationWeights& weights) {
    if (weights.values.size() != batch.size()) {
        throw InputError("perturbation weights have length " +
                         std::to_string(weights.values.size()) + ", batch has " +
                         std::to_string(batch.size()) + " members");
    }
    for (double w : weights.values) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw InputError("perturbation weights must be finite and non-negative");
        }
    }
    Coefficients out = Coefficients::Zero(beta.size());
    accumulate_batch_score(batch, {beta.data(), static_cast<std::size_t>(beta.size())},
                           weights.values, {out.data(), static_cast<std::size_t>(out.size())});
    return out;
}

std::size_t validate_dataset(std::span<const Observation> data) {
    if (data.empty()) throw InputError("dataset is empty");
    const std::size_t p = data.front().covariates.size();
    if (p == 0) throw InputError("observations have no covariates");
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& obs = data[i];
        if (obs.covariates.size() != p) {
            throw InputError("observation " + std::to_string(i) + " has " +
                             std::to_string(obs.covariates.size()) + " covariates, expected " +
                             std::to_string(p));
        }
        if (!std::isfinite(obs.log_time)) {
            throw InputError("observation " + std::to_string(i) + " has non-finite log time");
        }
        for (double v : obs.covariates) {
            if (!std::isfinite(v)) {
                throw InputError("observation " + std::to_string(i) +
                                 " has a non-finite covariate");
            }
        }
    }
    return p;
}

LossAndScore full_loss_and_score(const MiniBatch& packed, const Coefficients& beta) {
    const std::size_t n = packed.size();
    const std::size_t p = packed.dim();
    if (n < 2) throw InputError("full objective needs N >= 2 observations");
    if (static_cast<std::size_t>(beta.size()) != p) {
        throw ConfigError("coefficient dimension does not match covariate dimension");
    }

    // Column-major copy so the inner loops vectorize.
    std::vector<double> e(n);
    std::vector<double> cols(n * p);
    const double* x = packed.covariate_block().data();
    for (std::size_t i = 0; i < n; ++i) {
        double fit = 0.0;
        for (std::size_t c = 0; c < p; ++c) {
            fit += x[i * p + c] * beta[static_cast<Eigen::Index>(c)];
            cols[c * n + i] = x[i * p + c];
        }
        e[i] = packed.log_time(i) - fit;
    }

    LossAndScore out{0.0, Coefficients::Zero(static_cast<Eigen::Index>(p))};
    std::vector<double> mask(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!packed.event(i)) continue;
        const double ei = e[i];
        double loss = 0.0;
        double count = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = e[j] - ei;
            const double m = d >= 0.0 ? 1.0 : 0.0;
            mask[j] = m;
            loss += m * d;
            count += m;
        }
        out.loss += loss;
        for (std::size_t c = 0; c < p; ++c) {
            const double* col = cols.data() + c * n;
            double active = 0.0;
            for (std::size_t j = 0; j < n; ++j) active += mask[j] * col[j];
            out.score[static_cast<Eigen::Index>(c)] += count * col[i] - active;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    out.loss *= inv_n;
    out.score *= inv_n;
    return out;
}

double full_loss(std::span<const Observation> data, const Coefficients& beta) {
    if (data.size() < 2) throw InputError("full objective needs N >= 2 observations");
    validate_dataset(data);
    return full_loss_and_score(MiniBatch::from_observations(data, 0), beta).loss;
}

Coefficients full_score(std::span<const Observation> data, const Coefficients& beta) {
    if (data.size() < 2) throw InputError("full objective needs N >= 2 observations");
    validate_dataset(data);
    return full_loss_and_score(MiniBatch::from_observations(data, 0), beta).score;
}

} // namespace aftsgd
