#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "sigmarket/models.hpp"

using namespace sigmarket;

namespace {

struct Moments {
    double mean;
    double var;
};

Moments moments(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, ss / (n - 1)};
}

// int_0^s (t-u)^a (s-u)^a du after w = v^{a+1}, v = s - u, which leaves a
// bounded integrand; composite Simpson on a fine grid.
double covariance_by_substitution(double t, double s, double hurst) {
    const double a = hurst - 0.5;
    const double p = a + 1.0;
    const double upper = std::pow(s, p);
    const int m = 200000;
    const double h = upper / m;
    auto f = [&](double w) { return std::pow(t - s + std::pow(w, 1.0 / p), a) / p; };
    double sum = f(0.0) + f(upper);
    for (int i = 1; i < m; ++i) sum += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

}  // namespace

TEST(CH, HalfIsOne) { EXPECT_NEAR(c_h(0.5), 1.0, 1e-15); }

TEST(CH, AgreesWithIndependentGamma) {
    for (double h : {0.05, 0.1, 0.2, 0.3, 0.45, 0.7}) {
        const double ref = 2.0 * h * boost::math::tgamma(1.5 - h) /
                           (boost::math::tgamma(h + 0.5) * boost::math::tgamma(2.0 - 2.0 * h));
        EXPECT_NEAR(c_h(h), ref, 1e-10) << h;
    }
}

TEST(CH, PositiveAndContinuousOnGrid) {
    double prev = c_h(0.05);
    for (double h = 0.06; h <= 0.45 + 1e-12; h += 0.01) {
        const double v = c_h(h);
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GT(v, 0.0);
        EXPECT_LT(std::abs(v - prev), 0.05);
        prev = v;
    }
    EXPECT_THROW(c_h(0.0), std::invalid_argument);
    EXPECT_THROW(c_h(1.0), std::invalid_argument);
}

TEST(VolterraCovariance, ClosedFormsAndQuadratureCrossCheck) {
    EXPECT_NEAR(volterra_covariance(0.3, 0.3, 0.1), std::pow(0.3, 0.2) / 0.2, 1e-14);
    EXPECT_NEAR(volterra_covariance(0.7, 0.2, 0.5 - 1e-12), 0.2, 1e-9);  // Brownian limit
    for (auto [t, s] : {std::pair{0.08, 0.04}, std::pair{0.08, 0.0794}, std::pair{1.0, 0.01}}) {
        EXPECT_NEAR(volterra_covariance(t, s, 0.1), covariance_by_substitution(t, s, 0.1), 1e-7);
        EXPECT_DOUBLE_EQ(volterra_covariance(t, s, 0.1), volterra_covariance(s, t, 0.1));
    }
}

TEST(RBergomi, ParameterValidation) {
    RBergomiParams p;
    p.hurst = 0.5;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = {};
    p.rho = -1.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = {};
    p.xi0 = 0.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(RBergomi, CovarianceIsSymmetricPsd) {
    RBergomiSimulator sim(RBergomiParams{}, SimulationGrid{20, 1, 252.0});
    const auto& c = sim.covariance();
    EXPECT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_GE(sim.min_eigenvalue(), -1e-10);
}

TEST(RBergomi, SeededDeterminism) {
    SimulationGrid grid{20, 1, 252.0};
    auto a = simulate_rbergomi(RBergomiParams{}, grid, 5, 99);
    auto b = simulate_rbergomi(RBergomiParams{}, grid, 5, 99);
    auto c = simulate_rbergomi(RBergomiParams{}, grid, 5, 100);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].values(), b[i].values());
        EXPECT_NE(a[i].values(), c[i].values());
    }
    ASSERT_EQ(a[0].size(), 21u);
    EXPECT_DOUBLE_EQ(a[0].value(0), std::log(2000.0));
}

TEST(RBergomi, VanishingVolOfVolIsLognormal) {
    RBergomiParams p;
    p.nu = 1e-9;
    SimulationGrid grid{20, 1, 252.0};
    auto paths = simulate_rbergomi(p, grid, 10000, 7);
    std::vector<double> terminal;
    for (const auto& path : paths) terminal.push_back(path.value(20) - path.value(0));
    const auto m = moments(terminal);
    const double T = 20.0 / 252.0;
    const double target = p.xi0 * T;
    EXPECT_NEAR(m.var, target, 3.0 * target * std::sqrt(2.0 / (terminal.size() - 1)));
}

TEST(RBergomi, VolterraVarianceMatchesItoIsometry) {
    RBergomiParams p;
    SimulationGrid grid{20, 1, 252.0};
    RBergomiSimulator sim(p, grid);
    const std::size_t n = 10000;
    for (int k : {4, 19}) {
        std::vector<double> v;
        for (std::size_t i = 0; i < n; ++i) v.push_back(sim.draw(11, i).volterra[static_cast<std::size_t>(k)]);
        const auto m = moments(v);
        const double t = (k + 1) * grid.dt();
        const double target = std::pow(t, 2 * p.hurst) / (2 * p.hurst);
        EXPECT_NEAR(m.var, target, 3.0 * target * std::sqrt(2.0 / (n - 1))) << k;
        EXPECT_NEAR(m.mean, 0.0, 3.0 * std::sqrt(target / n));
    }
}

TEST(RBergomi, VarianceIsMartingale) {
    RBergomiParams p;
    SimulationGrid grid{20, 1, 252.0};
    RBergomiSimulator sim(p, grid);
    const std::size_t n = 10000;
    for (int k : {5, 19}) {
        std::vector<double> v;
        for (std::size_t i = 0; i < n; ++i) v.push_back(sim.draw(13, i).variance[static_cast<std::size_t>(k)]);
        const auto m = moments(v);
        EXPECT_NEAR(m.mean, p.xi0, 3.0 * std::sqrt(m.var / n)) << k;
    }
}

TEST(RBergomi, FineGridSubsamplesToDays) {
    auto paths = simulate_rbergomi(RBergomiParams{}, SimulationGrid{5, 4, 252.0}, 2, 3);
    ASSERT_EQ(paths[0].size(), 6u);
    EXPECT_EQ(paths[0].times().back(), 5.0);
}

TEST(Gbm, ZeroVolatilityIsDeterministicDrift) {
    GbmParams p{0.05, 0.0, 100.0};
    auto paths = simulate_gbm(p, SimulationGrid{10, 1, 252.0}, 3, 1);
    for (const auto& path : paths)
        for (std::size_t k = 0; k < path.size(); ++k) EXPECT_NEAR(path.value(k), std::log(100.0) + 0.05 * k / 252.0, 1e-14);
}

TEST(Gbm, TerminalMean) {
    GbmParams p{0.1, 0.3, 50.0};
    SimulationGrid grid{60, 1, 252.0};
    auto paths = simulate_gbm(p, grid, 20000, 5);
    std::vector<double> st;
    for (const auto& path : paths) st.push_back(std::exp(path.value(60)));
    const auto m = moments(st);
    EXPECT_NEAR(m.mean, 50.0 * std::exp(0.1 * 60.0 / 252.0), 3.0 * std::sqrt(m.var / st.size()));
}

TEST(Gbm, SameSeedBitIdentical) {
    auto a = simulate_gbm(GbmParams{}, SimulationGrid{}, 4, 42);
    auto b = simulate_gbm(GbmParams{}, SimulationGrid{}, 4, 42);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values(), b[i].values());
    GbmParams bad;
    bad.sigma = -1;
    EXPECT_THROW(simulate_gbm(bad, SimulationGrid{}, 1, 1), std::invalid_argument);
}
