// Evolutionary search for a discrete price path with a given lead-lag
// log-signature.

#ifndef SIGMARKET_INVERSION_HPP
#define SIGMARKET_INVERSION_HPP

#include <cstdint>
#include <vector>

#include "sigmarket/path_sig.hpp"

namespace sigmarket {

struct InversionConfig {
    int population_size = 200;
    int generations = 500;
    double elite_fraction = 0.1;
    // Initial per-increment mutation std in price units; <= 0 derives it from
    // the target's quadratic variation.
    double mutation_scale = 0.0;
    double anneal = 0.99;
    double pip_size = 0.01;
    int path_length = 6;  // number of points k
    double tolerance = 1e-3;
    // Compare log-signatures of ln(price) rather than of the prices themselves.
    bool log_prices = true;
    // Stop as soon as the best distance drops below tolerance.
    bool early_stop = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct InversionResult {
    PathSample path;  // prices on the pip grid, times 0..k-1
    double distance = 0.0;
    bool converged = false;
    int generations_run = 0;
    std::vector<double> best_history;  // best-ever distance after each generation
};

/// Euclidean distance between the Lyndon coordinates of the candidate
/// stream's lead-lag log-signature and the target.
double fitness(const PathSample& candidate, const LogSigVector& target);

/// Seed for row `index` of a batch inversion rooted at `root`.
std::uint64_t inversion_seed(std::uint64_t root, std::size_t index);

/// Never throws for an unreachable target; `converged` is false instead.
/// Throws std::invalid_argument for inconsistent dimensions or a non-positive
/// start price in log mode.
InversionResult invert_logsig(const LogSigVector& target, double start_value, const InversionConfig& config);

}  // namespace sigmarket

#endif  // SIGMARKET_INVERSION_HPP
