#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "sigmarket/vae.hpp"

using namespace sigmarket;

namespace {

VaeConfig small_config(int input, int latent, int hidden, int cond) {
    VaeConfig c;
    c.input_dim = input;
    c.latent_dim = latent;
    c.hidden_units = hidden;
    c.cond_dim = cond;
    return c;
}

std::vector<double> uniform_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

// Perturb all parameters so biases are nonzero and no activation sits on a kink.
void randomise(VaeParams& p, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n01(0.0, scale);
    for (auto t : p.tensors())
        for (double& v : t) v += n01(rng);
}

}  // namespace

TEST(VaeConfig, Validation) {
    EXPECT_THROW(small_config(0, 2, 4, 0).validate(), std::invalid_argument);
    EXPECT_THROW(small_config(3, 0, 4, 0).validate(), std::invalid_argument);
    EXPECT_THROW(small_config(3, 2, 4, -1).validate(), std::invalid_argument);
    auto c = small_config(3, 2, 4, 0);
    c.leaky_alpha = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.leaky_alpha = 0.3;
    c.recon_sigma = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    EXPECT_NO_THROW(small_config(3, 2, 4, 0).validate());
}

TEST(VaeEncode, ZeroParamsAndShapes) {
    auto p = VaeParams::zeros(small_config(5, 8, 50, 0));
    auto e = encode(p, std::vector<double>{0.1, 0.9, 0.3, 0.5, 0.7});
    ASSERT_EQ(e.mu.size(), 8u);
    ASSERT_EQ(e.log_var.size(), 8u);
    for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_EQ(e.mu[j], 0.0);
        EXPECT_EQ(e.log_var[j], 0.0);
    }
    EXPECT_THROW(encode(p, std::vector<double>{0.1, 0.2}), std::invalid_argument);
    EXPECT_THROW(encode(p, std::vector<double>(5, 0.5), std::vector<double>{1.0}), std::invalid_argument);
    EXPECT_EQ(p.enc_hidden.out, 50);
    EXPECT_EQ(p.dec_hidden.out, 50);
}

TEST(VaeEncode, LeakyReluSlope) {
    EXPECT_DOUBLE_EQ(leaky_relu(-2.0, 0.3), -0.6);
    EXPECT_DOUBLE_EQ(leaky_relu(1.5, 0.3), 1.5);
    // one hidden unit fed by a negative pre-activation, read out through the mu head
    auto p = VaeParams::zeros(small_config(1, 1, 1, 0));
    p.enc_hidden.weight[0] = 1.0;
    p.enc_mu.weight[0] = 1.0;
    EXPECT_DOUBLE_EQ(encode(p, std::vector<double>{-0.5}).mu[0], 0.3 * -0.5);
    EXPECT_DOUBLE_EQ(encode(p, std::vector<double>{0.5}).mu[0], 0.5);
}

TEST(VaeReparameterize, Examples) {
    std::vector<double> mu{0.5, -1.0}, lv{0.0, 0.0};
    EXPECT_EQ(reparameterize(mu, lv, std::vector<double>{0.0, 0.0}), mu);
    auto z = reparameterize(mu, lv, std::vector<double>{0.25, 2.0});
    EXPECT_DOUBLE_EQ(z[0], 0.75);
    EXPECT_DOUBLE_EQ(z[1], 1.0);
    EXPECT_THROW(reparameterize(mu, lv, std::vector<double>{0.0}), std::invalid_argument);
}

TEST(VaeReparameterize, MonteCarloMoments) {
    const std::vector<double> mu{0.3, -1.2}, lv{std::log(0.5), std::log(2.0)};
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n01;
    const int n = 100000;
    double s[2] = {0, 0}, sq[2] = {0, 0};
    for (int i = 0; i < n; ++i) {
        auto z = reparameterize(mu, lv, std::vector<double>{n01(rng), n01(rng)});
        for (int j = 0; j < 2; ++j) {
            s[j] += z[j];
            sq[j] += z[j] * z[j];
        }
    }
    for (int j = 0; j < 2; ++j) {
        const double var = std::exp(lv[j]);
        const double mean = s[j] / n;
        const double sample_var = sq[j] / n - mean * mean;
        EXPECT_LT(std::abs(mean - mu[j]), 3.0 * std::sqrt(var / n));
        // Var of the sample variance for a Gaussian is 2 sigma^4 / n
        EXPECT_LT(std::abs(sample_var - var), 3.0 * std::sqrt(2.0 * var * var / n));
    }
}

TEST(VaeDecode, ZeroParamsAndRange) {
    auto zp = VaeParams::zeros(small_config(4, 3, 50, 0));
    for (double v : decode(zp, std::vector<double>{1.0, -2.0, 3.0})) EXPECT_EQ(v, 0.5);

    auto p = VaeParams::initialise(small_config(6, 3, 50, 2), 4);
    std::mt19937_64 rng(1);
    randomise(p, rng, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        for (double v : decode(p, uniform_vec(rng, 3, -20, 20), uniform_vec(rng, 2, -5, 5))) {
            EXPECT_GT(v, 0.0);
            EXPECT_LT(v, 1.0);
        }
    }
}

TEST(VaeElbo, KlExamples) {
    auto p = VaeParams::zeros(small_config(2, 1, 4, 0));
    auto e = elbo_loss(p, std::vector<double>{0.5, 0.5}, {}, std::vector<double>{0.7});
    EXPECT_EQ(e.kl, 0.0);
    EXPECT_EQ(e.recon, 0.0);  // zero decoder emits 0.5 exactly
    p.enc_mu.bias[0] = 1.0;
    e = elbo_loss(p, std::vector<double>{0.5, 0.5}, {}, std::vector<double>{0.0});
    EXPECT_DOUBLE_EQ(e.kl, 0.5);
    EXPECT_DOUBLE_EQ(e.loss, e.recon + e.kl);
}

TEST(VaeElbo, KlNonNegative) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        auto p = VaeParams::initialise(small_config(3, 4, 6, 0), trial);
        randomise(p, rng, 2.0);
        auto e = elbo_loss(p, uniform_vec(rng, 3, 0, 1), {}, uniform_vec(rng, 4, -2, 2));
        EXPECT_GE(e.kl, 0.0);
        EXPECT_GE(e.recon, 0.0);
    }
}

TEST(VaeGradient, KlGradientIsMu) {
    // Zero decoder: recon does not depend on z, so d loss / d mu-bias = mu.
    auto p = VaeParams::zeros(small_config(2, 3, 4, 0));
    p.enc_mu.bias = {0.4, -1.1, 2.0};
    auto g = VaeParams::zeros(p.config);
    elbo_gradient(p, std::vector<double>{0.5, 0.5}, {}, std::vector<double>{0.3, -0.2, 0.9}, g);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(g.enc_mu.bias[j], p.enc_mu.bias[j]);
}

TEST(VaeGradient, ZeroLossRegionHasZeroGradient) {
    auto p = VaeParams::zeros(small_config(3, 2, 5, 1));
    auto g = VaeParams::zeros(p.config);
    auto e = elbo_gradient(p, std::vector<double>(3, 0.5), std::vector<double>{1.0}, std::vector<double>{0.0, 0.0}, g);
    EXPECT_EQ(e.loss, 0.0);
    for (auto t : g.tensors())
        for (double v : t) EXPECT_EQ(v, 0.0);
}

TEST(VaeGradient, MatchesCentralDifferences) {
    struct Case {
        int input, latent, hidden, cond;
        double sigma;
    };
    const Case cases[] = {{3, 2, 5, 0, 0.1}, {5, 3, 7, 2, 0.3}, {4, 1, 6, 3, 1.0}, {6, 4, 8, 0, 0.5}};
    std::mt19937_64 rng(2024);
    const double h = 1e-5;
    for (const auto& cs : cases) {
        auto cfg = small_config(cs.input, cs.latent, cs.hidden, cs.cond);
        cfg.recon_sigma = cs.sigma;
        auto p = VaeParams::initialise(cfg, rng());
        randomise(p, rng, 0.3);
        const auto x = uniform_vec(rng, cs.input, 0, 1);
        const auto c = uniform_vec(rng, cs.cond, -1, 1);
        const auto eps = uniform_vec(rng, cs.latent, -1.5, 1.5);

        auto g = VaeParams::zeros(cfg);
        elbo_gradient(p, x, c, eps, g);

        auto pt = p.tensors();
        auto gt = g.tensors();
        const auto names = p.tensor_names();
        for (std::size_t k = 0; k < pt.size(); ++k) {
            double max_err = 0.0, max_ref = 0.0;
            std::vector<double> numeric(pt[k].size());
            for (std::size_t i = 0; i < pt[k].size(); ++i) {
                const double saved = pt[k][i];
                pt[k][i] = saved + h;
                const double up = elbo_loss(p, x, c, eps).loss;
                pt[k][i] = saved - h;
                const double down = elbo_loss(p, x, c, eps).loss;
                pt[k][i] = saved;
                numeric[i] = (up - down) / (2.0 * h);
                max_err = std::max(max_err, std::abs(numeric[i] - gt[k][i]));
                max_ref = std::max(max_ref, std::max(std::abs(numeric[i]), std::abs(gt[k][i])));
            }
            // relative to the tensor's gradient scale
            EXPECT_LE(max_err / std::max(max_ref, 1e-8), 1e-4)
                << names[k] << " in config (" << cs.input << "," << cs.latent << "," << cs.hidden << "," << cs.cond << ")";
        }
    }
}

TEST(VaeTrain, MemorisesRepeatedVector) {
    auto cfg = small_config(6, 2, 50, 0);
    cfg.epochs = 300;
    cfg.batch_size = 8;
    cfg.learning_rate = 5e-3;
    cfg.seed = 11;
    const std::vector<double> row{0.1, 0.8, 0.35, 0.6, 0.92, 0.2};
    std::vector<std::vector<double>> data(32, row);
    auto [params, report] = train(data, {}, cfg);
    ASSERT_EQ(report.elbo.size(), 300u);
    for (double v : report.elbo) EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(report.elbo.back(), report.elbo.front());
    auto enc = encode(params, row);
    auto xhat = decode(params, enc.mu);
    double err = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) err += (xhat[i] - row[i]) * (xhat[i] - row[i]);
    EXPECT_LT(err, 1e-3);
}

TEST(VaeTrain, DeterministicAndSeedSensitive) {
    auto cfg = small_config(4, 2, 10, 1);
    cfg.epochs = 5;
    cfg.seed = 3;
    std::mt19937_64 rng(5);
    std::vector<std::vector<double>> data, conds;
    for (int i = 0; i < 40; ++i) {
        data.push_back(uniform_vec(rng, 4, 0, 1));
        conds.push_back(uniform_vec(rng, 1, -1, 1));
    }
    auto a = train(data, conds, cfg);
    auto b = train(data, conds, cfg);
    EXPECT_EQ(a.second.checksum, b.second.checksum);
    EXPECT_EQ(a.first.checksum(), a.second.checksum);
    cfg.seed = 4;
    EXPECT_NE(train(data, conds, cfg).second.checksum, a.second.checksum);
}

TEST(VaeTrain, SmallDataRegimeCompletes) {
    auto cfg = small_config(14, 8, 50, 0);
    cfg.epochs = 20;
    std::mt19937_64 rng(6);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 250; ++i) data.push_back(uniform_vec(rng, 14, 0.05, 0.95));
    auto [params, report] = train(data, {}, cfg);
    EXPECT_EQ(report.elbo.size(), 20u);
    EXPECT_GT(report.elbo.back(), report.elbo.front());
}

TEST(VaeTrain, InputErrors) {
    auto cfg = small_config(3, 2, 4, 0);
    cfg.epochs = 1;
    EXPECT_THROW(train({}, {}, cfg), std::invalid_argument);
    EXPECT_THROW(train({{0.1, 0.2}}, {}, cfg), std::invalid_argument);
    EXPECT_THROW(train({{0.1, 0.2, 0.3}}, {{1.0}}, cfg), std::invalid_argument);
    cfg.cond_dim = 1;
    EXPECT_THROW(train({{0.1, 0.2, 0.3}}, {}, cfg), std::invalid_argument);
}

TEST(VaeTrain, NonFiniteLossAborts) {
    auto cfg = small_config(2, 1, 3, 0);
    cfg.epochs = 1;
    EXPECT_THROW(train({{0.5, std::nan("")}}, {}, cfg), std::runtime_error);
}

TEST(VaeGenerate, ContractAndDeterminism) {
    auto p = VaeParams::initialise(small_config(5, 3, 20, 0), 1);
    EXPECT_TRUE(generate(p, 0, std::nullopt, 1).empty());
    auto a = generate(p, 50, std::nullopt, 9);
    auto b = generate(p, 50, std::nullopt, 9);
    ASSERT_EQ(a.size(), 50u);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, generate(p, 50, std::nullopt, 10));
    for (const auto& row : a) {
        ASSERT_EQ(row.size(), 5u);
        for (double v : row) {
            EXPECT_GT(v, 0.0);
            EXPECT_LT(v, 1.0);
        }
    }
    EXPECT_THROW(generate(p, 3, std::vector<double>{1.0}, 1), std::invalid_argument);
    auto cp = VaeParams::initialise(small_config(5, 3, 20, 2), 1);
    EXPECT_THROW(generate(cp, 3, std::nullopt, 1), std::invalid_argument);
    EXPECT_EQ(generate(cp, 3, std::vector<double>{0.1, 0.2}, 1).size(), 3u);
}

TEST(VaeGenerate, ConditioningReachesEncoderAndDecoder) {
    auto p = VaeParams::initialise(small_config(3, 2, 8, 1), 2);
    const std::vector<double> x{0.2, 0.4, 0.6}, z{0.1, -0.3};
    EXPECT_NE(encode(p, x, std::vector<double>{0.0}).mu, encode(p, x, std::vector<double>{2.0}).mu);
    EXPECT_NE(decode(p, z, std::vector<double>{0.0}), decode(p, z, std::vector<double>{2.0}));
}

TEST(VaePersistence, RoundTripAndShapeValidation) {
    auto cfg = small_config(4, 3, 7, 2);
    cfg.seed = 77;
    auto p = VaeParams::initialise(cfg, 12);
    std::stringstream buf;
    save_vae(buf, p);
    const std::string text = buf.str();
    auto q = load_vae(buf);
    EXPECT_EQ(q.checksum(), p.checksum());
    EXPECT_EQ(q.config.seed, 77u);
    EXPECT_EQ(q.config.cond_dim, 2);

    // claim a wider hidden layer than the stored tensors carry
    std::string bad = text;
    bad.replace(bad.find("hidden_units 7"), 14, "hidden_units 8");
    std::istringstream in(bad);
    EXPECT_THROW(load_vae(in), std::invalid_argument);
    std::istringstream junk("not a model");
    EXPECT_THROW(load_vae(junk), std::invalid_argument);
    std::istringstream truncated(text.substr(0, text.size() / 2));
    EXPECT_THROW(load_vae(truncated), std::invalid_argument);
}
