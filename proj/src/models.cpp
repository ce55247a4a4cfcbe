#include "sigmarket/models.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "sigmarket/random.hpp"

namespace sigmarket {

namespace {

constexpr double kEigenFloor = -1e-10;
constexpr double kDiagonalJitter = 1e-12;

std::vector<double> daily_subsample(const std::vector<double>& fine, int steps_per_day) {
    std::vector<double> out;
    out.reserve(fine.size() / static_cast<std::size_t>(steps_per_day) + 1);
    for (std::size_t i = 0; i < fine.size(); i += static_cast<std::size_t>(steps_per_day)) out.push_back(fine[i]);
    return out;
}

PathSample daily_path(std::vector<double> log_prices) {
    std::vector<double> times(log_prices.size());
    for (std::size_t i = 0; i < times.size(); ++i) times[i] = static_cast<double>(i);
    return PathSample(std::move(times), std::move(log_prices), 1);
}

}  // namespace

void RBergomiParams::validate() const {
    if (!(hurst > 0.0 && hurst < 0.5)) throw std::invalid_argument("rbergomi: H must lie in (0, 1/2)");
    if (!(nu > 0.0)) throw std::invalid_argument("rbergomi: nu must be > 0");
    if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("rbergomi: rho must lie in (-1, 1)");
    if (!(xi0 > 0.0)) throw std::invalid_argument("rbergomi: xi0 must be > 0");
    if (!(s0 > 0.0)) throw std::invalid_argument("rbergomi: s0 must be > 0");
}

void GbmParams::validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gbm: sigma must be >= 0");
    if (!std::isfinite(mu)) throw std::invalid_argument("gbm: mu must be finite");
    if (!(s0 > 0.0)) throw std::invalid_argument("gbm: s0 must be > 0");
}

void SimulationGrid::validate() const {
    if (horizon_days < 1) throw std::invalid_argument("grid: horizon must be >= 1 day");
    if (steps_per_day < 1) throw std::invalid_argument("grid: steps_per_day must be >= 1");
    if (!(days_per_year > 0.0)) throw std::invalid_argument("grid: days_per_year must be > 0");
}

double c_h(double hurst) {
    if (!(hurst > 0.0 && hurst < 1.0)) {
        throw std::invalid_argument("c_h: H must lie in (0, 1), got " + std::to_string(hurst));
    }
    return 2.0 * hurst * std::tgamma(1.5 - hurst) / (std::tgamma(hurst + 0.5) * std::tgamma(2.0 - 2.0 * hurst));
}

double volterra_covariance(double t, double s, double hurst) {
    if (t < s) std::swap(t, s);
    if (s <= 0.0) return 0.0;
    if (t == s) return std::pow(s, 2.0 * hurst) / (2.0 * hurst);
    // int_0^s (t-u)^a (s-u)^a du with v = s - u
    const double a = hurst - 0.5;
    const double gap = t - s;
    thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    auto f = [&](double v) { return std::pow(v, a) * std::pow(gap + v, a); };
    return integrator.integrate(f, 0.0, s);
}

RBergomiSimulator::RBergomiSimulator(const RBergomiParams& params, const SimulationGrid& grid)
    : params_(params), grid_(grid) {
    params_.validate();
    grid_.validate();
    const int n = grid_.steps();
    const double dt = grid_.dt();
    const double a1 = params_.hurst + 0.5;

    // Layout: [dW_1 .. dW_n, V_{t_1} .. V_{t_n}]
    covariance_ = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) covariance_(j, j) = dt;
    for (int i = 0; i < n; ++i) {
        const double ti = (i + 1) * dt;
        for (int k = 0; k <= i; ++k) {
            const double c = volterra_covariance(ti, (k + 1) * dt, params_.hurst);
            covariance_(n + i, n + k) = c;
            covariance_(n + k, n + i) = c;
        }
        for (int j = 0; j < n; ++j) {
            const double lo = j * dt;
            if (lo >= ti) break;
            const double hi = std::min((j + 1) * dt, ti);
            // rho * int_lo^hi (ti - u)^{H-1/2} du
            const double c = params_.rho / a1 * (std::pow(ti - lo, a1) - std::pow(ti - hi, a1));
            covariance_(n + i, j) = c;
            covariance_(j, n + i) = c;
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance_, Eigen::EigenvaluesOnly);
    min_eigenvalue_ = eig.eigenvalues().minCoeff();
    if (min_eigenvalue_ < kEigenFloor) {
        throw std::runtime_error("rbergomi: covariance is not positive semidefinite (min eigenvalue " +
                                 std::to_string(min_eigenvalue_) + ")");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
    if (llt.info() != Eigen::Success) {
        Eigen::MatrixXd jittered = covariance_;
        jittered.diagonal().array() += kDiagonalJitter;
        llt.compute(jittered);
        if (llt.info() != Eigen::Success) throw std::runtime_error("rbergomi: Cholesky factorisation failed");
        regularised_ = true;
        std::clog << "rbergomi: added " << kDiagonalJitter << " to the covariance diagonal before Cholesky\n";
    }
    factor_ = llt.matrixL();
}

RBergomiSimulator::Draw RBergomiSimulator::draw(std::uint64_t seed, std::uint64_t index) const {
    const int n = grid_.steps();
    const double dt = grid_.dt();
    Rng rng = make_rng(seed, index, "rbergomi");
    std::normal_distribution<double> n01;
    Eigen::VectorXd z(2 * n);
    for (int i = 0; i < 2 * n; ++i) z(i) = n01(rng);
    const Eigen::VectorXd g = factor_.triangularView<Eigen::Lower>() * z;

    const double eta = 2.0 * params_.nu * c_h(params_.hurst);
    const double two_h = 2.0 * params_.hurst;
    Draw out;
    out.volterra.resize(static_cast<std::size_t>(n));
    out.variance.resize(static_cast<std::size_t>(n));
    out.log_price.resize(static_cast<std::size_t>(n) + 1);
    out.log_price[0] = std::log(params_.s0);
    double v = params_.xi0;  // variance at t_0 = 0
    for (int k = 0; k < n; ++k) {
        out.variance[static_cast<std::size_t>(k)] = v;
        out.log_price[static_cast<std::size_t>(k) + 1] =
            out.log_price[static_cast<std::size_t>(k)] - 0.5 * v * dt + std::sqrt(v) * g(k);
        const double vol = g(n + k);
        out.volterra[static_cast<std::size_t>(k)] = vol;
        const double t = (k + 1) * dt;
        // Stochastic exponential of the Gaussian eta * V_t.
        v = params_.xi0 * std::exp(eta * vol - 0.5 * eta * eta * std::pow(t, two_h) / two_h);
    }
    return out;
}

PathSample RBergomiSimulator::path(std::uint64_t seed, std::uint64_t index) const {
    return daily_path(daily_subsample(draw(seed, index).log_price, grid_.steps_per_day));
}

std::vector<PathSample> simulate_rbergomi(const RBergomiParams& params, const SimulationGrid& grid,
                                          std::size_t n_paths, std::uint64_t seed) {
    const RBergomiSimulator sim(params, grid);
    std::vector<std::vector<double>> log_prices(n_paths);
    parallel_for(n_paths, [&](std::size_t i) {
        log_prices[i] = daily_subsample(sim.draw(seed, i).log_price, grid.steps_per_day);
    });
    std::vector<PathSample> out;
    out.reserve(n_paths);
    for (auto& lp : log_prices) out.push_back(daily_path(std::move(lp)));
    return out;
}

std::vector<PathSample> simulate_gbm(const GbmParams& params, const SimulationGrid& grid, std::size_t n_paths,
                                     std::uint64_t seed) {
    params.validate();
    grid.validate();
    const int n = grid.steps();
    const double dt = grid.dt();
    const double drift = (params.mu - 0.5 * params.sigma * params.sigma) * dt;
    const double diffusion = params.sigma * std::sqrt(dt);
    std::vector<std::vector<double>> log_prices(n_paths);
    parallel_for(n_paths, [&](std::size_t i) {
        Rng rng = make_rng(seed, i, "gbm");
        std::normal_distribution<double> n01;
        std::vector<double> x(static_cast<std::size_t>(n) + 1);
        x[0] = std::log(params.s0);
        for (int k = 0; k < n; ++k) x[static_cast<std::size_t>(k) + 1] = x[static_cast<std::size_t>(k)] + drift + diffusion * n01(rng);
        log_prices[i] = daily_subsample(x, grid.steps_per_day);
    });
    std::vector<PathSample> out;
    out.reserve(n_paths);
    for (auto& lp : log_prices) out.push_back(daily_path(std::move(lp)));
    return out;
}

}  // namespace sigmarket
