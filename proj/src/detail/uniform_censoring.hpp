#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "aftsgd/error.hpp"

namespace aftsgd::detail {

// For censoring C ~ Uniform(0, c) and a fixed sample of failure times,
//   P(T > C) = E[min(T, c)] / c,
// which is continuous and strictly decreasing in c. Prefix sums over the
// sorted sample make each evaluation O(log M).
class UniformCensoring {
public:
    explicit UniformCensoring(std::vector<double> ascending_times)
        : times_(std::move(ascending_times)), prefix_(times_.size() + 1, 0.0) {
        if (times_.empty()) throw InputError("censoring model needs failure times");
        for (std::size_t i = 0; i < times_.size(); ++i) prefix_[i + 1] = prefix_[i] + times_[i];
    }

    double censored_fraction(double bound) const {
        const auto below = static_cast<std::size_t>(
            std::lower_bound(times_.begin(), times_.end(), bound) - times_.begin());
        const double total = prefix_[below] + bound * static_cast<double>(times_.size() - below);
        return total / (bound * static_cast<double>(times_.size()));
    }

    /// Bisection on log(c).
    double solve_bound(double target) const {
        if (!(target > 0.0 && target < 1.0)) {
            throw ConfigError("censoring target must lie in (0, 1)");
        }
        double lo = std::log(times_.front()) - 1.0;
        double hi = std::log(times_.back()) + 1.0;
        // The sample cannot produce a proportion outside (f(hi), f(lo)).
        if (censored_fraction(std::exp(lo)) < target || censored_fraction(std::exp(hi)) > target) {
            throw ConfigError("censoring target is not attainable for this design");
        }
        for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (censored_fraction(std::exp(mid)) > target) lo = mid;
            else hi = mid;
        }
        return std::exp(0.5 * (lo + hi));
    }

private:
    std::vector<double> times_;
    std::vector<double> prefix_;
};

} // namespace aftsgd::detail
