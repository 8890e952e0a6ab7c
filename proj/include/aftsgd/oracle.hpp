#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "aftsgd/model.hpp"

namespace aftsgd {

struct OracleOptions {
    std::size_t max_iter = 20000;
    /// Relative objective tolerance; also the step of the final probe grid.
    double tol = 1e-6;
    /// Subgradient steps per restart round.
    std::size_t round_length = 40;
    /// Step radius of the first round; rounds halve it when they stall.
    double initial_radius = 0.5;
};

struct OracleResult {
    Coefficients beta;
    double objective = 0.0;
    double score_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    bool rank_deficient = false;
    /// Best objective after each restart round; non-increasing.
    std::vector<double> objective_trace;
};

/// Minimizes the full-data Gehan objective by restarted, normalized
/// subgradient descent with Polyak averaging inside each round. Converged
/// results are certified against a probe grid of step `tol` around the
/// returned point. Throws DegenerateProblemError when every observation is
/// censored.
OracleResult solve_batch(std::span<const Observation> data, const Coefficients& init,
                         const OracleOptions& options = {});

/// Convenience overload starting from the zero vector.
OracleResult solve_batch(std::span<const Observation> data, const OracleOptions& options = {});

} // namespace aftsgd
