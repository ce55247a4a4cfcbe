// Synthetic price generators: rough Bergomi and geometric Brownian motion.
//
// Time is measured in years internally with `days_per_year` trading days per
// year; generated paths are log-prices sampled once per day, with PathSample
// times equal to the day index.

#ifndef SIGMARKET_MODELS_HPP
#define SIGMARKET_MODELS_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sigmarket/path_sig.hpp"

namespace sigmarket {

struct RBergomiParams {
    double hurst = 0.1;
    double nu = 1.2;
    double rho = -0.7;
    double xi0 = 0.04;
    double s0 = 2000.0;

    void validate() const;
};

struct GbmParams {
    double mu = 0.0;
    double sigma = 0.2;
    double s0 = 2000.0;

    void validate() const;
};

struct SimulationGrid {
    int horizon_days = 20;
    int steps_per_day = 1;
    double days_per_year = 252.0;

    void validate() const;
    int steps() const { return horizon_days * steps_per_day; }
    double dt() const { return 1.0 / (days_per_year * steps_per_day); }
};

/// C_H = 2H Gamma(3/2 - H) / (Gamma(H + 1/2) Gamma(2 - 2H)), H in (0, 1).
double c_h(double hurst);

/// Cov(V_t, V_s) for the Volterra process V_t = int_0^t (t-u)^{H-1/2} dZ_u.
double volterra_covariance(double t, double s, double hurst);

/// Exact joint Gaussian sampler for (W increments, Volterra values) on a
/// uniform grid; the Cholesky factor is built once and shared read-only.
class RBergomiSimulator {
public:
    RBergomiSimulator(const RBergomiParams& params, const SimulationGrid& grid);

    struct Draw {
        std::vector<double> volterra;   // V at t_1..t_n
        std::vector<double> variance;   // instantaneous variance at t_0..t_{n-1}
        std::vector<double> log_price;  // X at t_0..t_n
    };

    /// Full fine-grid draw for path `index` of the stream keyed by `seed`.
    Draw draw(std::uint64_t seed, std::uint64_t index) const;

    /// Daily log-price path.
    PathSample path(std::uint64_t seed, std::uint64_t index) const;

    /// Smallest eigenvalue of the joint covariance before any regularisation.
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }
    bool regularised() const noexcept { return regularised_; }
    const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }

private:
    RBergomiParams params_;
    SimulationGrid grid_;
    Eigen::MatrixXd covariance_;
    Eigen::MatrixXd factor_;
    double min_eigenvalue_ = 0.0;
    bool regularised_ = false;
};

std::vector<PathSample> simulate_rbergomi(const RBergomiParams& params, const SimulationGrid& grid,
                                          std::size_t n_paths, std::uint64_t seed);

std::vector<PathSample> simulate_gbm(const GbmParams& params, const SimulationGrid& grid, std::size_t n_paths,
                                     std::uint64_t seed);

}  // namespace sigmarket

#endif  // SIGMARKET_MODELS_HPP
