#include "sigmarket/vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "sigmarket/random.hpp"

namespace sigmarket {

namespace {

constexpr const char* kMagic = "sigmarket-vae";
constexpr int kFormatVersion = 1;

void forward(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
    out.assign(layer.bias.begin(), layer.bias.end());
    const std::size_t n_in = static_cast<std::size_t>(layer.in);
    for (int o = 0; o < layer.out; ++o) {
        const double* w = layer.weight.data() + static_cast<std::size_t>(o) * n_in;
        double acc = 0.0;
        for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * in[i];
        out[static_cast<std::size_t>(o)] += acc;
    }
}

// grad_w += scale * delta (x) in; grad_b += scale * delta; returns W^T delta when wanted.
void backward(const DenseLayer& layer, DenseLayer& grad, std::span<const double> in, std::span<const double> delta,
              double scale, std::vector<double>* delta_in) {
    const std::size_t n_in = static_cast<std::size_t>(layer.in);
    if (delta_in) delta_in->assign(n_in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        if (d == 0.0) continue;
        grad.bias[static_cast<std::size_t>(o)] += scale * d;
        double* gw = grad.weight.data() + static_cast<std::size_t>(o) * n_in;
        const double* w = layer.weight.data() + static_cast<std::size_t>(o) * n_in;
        for (std::size_t i = 0; i < n_in; ++i) {
            gw[i] += scale * d * in[i];
            if (delta_in) (*delta_in)[i] += w[i] * d;
        }
    }
}

double sigmoid(double v) noexcept {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

void check_dims(const VaeConfig& c, std::size_t x_size, std::size_t x_expected, std::size_t cond_size,
                const char* what) {
    if (x_size != x_expected) {
        throw std::invalid_argument(std::string(what) + ": expected input of size " + std::to_string(x_expected) +
                                    ", got " + std::to_string(x_size));
    }
    if (cond_size != static_cast<std::size_t>(c.cond_dim)) {
        throw std::invalid_argument(std::string(what) + ": expected conditioning of size " +
                                    std::to_string(c.cond_dim) + ", got " + std::to_string(cond_size));
    }
}

// Activations kept for the backward pass.
struct Trace {
    std::vector<double> enc_in, h_pre, h, mu, log_var, z, dec_in, g_pre, g, o_pre, x_hat;
};

ElboTerms run_forward(const VaeParams& p, std::span<const double> x, std::span<const double> cond,
                      std::span<const double> eps, Trace& t) {
    const auto& c = p.config;
    check_dims(c, x.size(), static_cast<std::size_t>(c.input_dim), cond.size(), "elbo");
    if (eps.size() != static_cast<std::size_t>(c.latent_dim)) throw std::invalid_argument("elbo: eps has wrong size");
    t.enc_in = concat(x, cond);
    forward(p.enc_hidden, t.enc_in, t.h_pre);
    t.h.resize(t.h_pre.size());
    for (std::size_t i = 0; i < t.h.size(); ++i) t.h[i] = leaky_relu(t.h_pre[i], c.leaky_alpha);
    forward(p.enc_mu, t.h, t.mu);
    forward(p.enc_logvar, t.h, t.log_var);
    t.z = reparameterize(t.mu, t.log_var, eps);
    t.dec_in = concat(t.z, cond);
    forward(p.dec_hidden, t.dec_in, t.g_pre);
    t.g.resize(t.g_pre.size());
    for (std::size_t i = 0; i < t.g.size(); ++i) t.g[i] = leaky_relu(t.g_pre[i], c.leaky_alpha);
    forward(p.dec_out, t.g, t.o_pre);
    t.x_hat.resize(t.o_pre.size());
    for (std::size_t i = 0; i < t.x_hat.size(); ++i) t.x_hat[i] = sigmoid(t.o_pre[i]);

    ElboTerms e;
    const double inv = 1.0 / (2.0 * c.recon_sigma * c.recon_sigma);
    for (std::size_t i = 0; i < x.size(); ++i) e.recon += (x[i] - t.x_hat[i]) * (x[i] - t.x_hat[i]) * inv;
    for (std::size_t j = 0; j < t.mu.size(); ++j) {
        e.kl += 0.5 * (t.mu[j] * t.mu[j] + std::exp(t.log_var[j]) - t.log_var[j] - 1.0);
    }
    e.loss = e.recon + e.kl;
    return e;
}

void write_layer(std::ostream& out, const std::string& name, const DenseLayer& l) {
    out << "tensor " << name << ".weight " << l.out << " " << l.in << "\n";
    for (std::size_t i = 0; i < l.weight.size(); ++i) out << (i ? " " : "") << l.weight[i];
    out << "\ntensor " << name << ".bias " << l.out << " 1\n";
    for (std::size_t i = 0; i < l.bias.size(); ++i) out << (i ? " " : "") << l.bias[i];
    out << "\n";
}

void read_tensor(std::istream& in, const std::string& name, int rows, int cols, std::vector<double>& dst) {
    std::string tag, got;
    int r = 0, c = 0;
    if (!(in >> tag >> got >> r >> c) || tag != "tensor") throw std::invalid_argument("load_vae: expected tensor " + name);
    if (got != name) throw std::invalid_argument("load_vae: expected tensor " + name + ", found " + got);
    if (r != rows || c != cols) {
        throw std::invalid_argument("load_vae: tensor " + name + " has shape " + std::to_string(r) + "x" +
                                    std::to_string(c) + ", config requires " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }
    dst.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (double& v : dst) {
        if (!(in >> v) || !std::isfinite(v)) throw std::invalid_argument("load_vae: bad value in tensor " + name);
    }
}

}  // namespace

void VaeConfig::validate() const {
    if (input_dim < 1) throw std::invalid_argument("vae: input_dim must be >= 1");
    if (latent_dim < 1) throw std::invalid_argument("vae: latent_dim must be >= 1");
    if (hidden_units < 1) throw std::invalid_argument("vae: hidden_units must be >= 1");
    if (cond_dim < 0) throw std::invalid_argument("vae: cond_dim must be >= 0");
    if (!(leaky_alpha > 0.0 && leaky_alpha < 1.0)) throw std::invalid_argument("vae: leaky_alpha must lie in (0, 1)");
    if (!(recon_sigma > 0.0)) throw std::invalid_argument("vae: recon_sigma must be > 0");
    if (epochs < 0) throw std::invalid_argument("vae: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("vae: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("vae: learning_rate must be > 0");
}

DenseLayer::DenseLayer(int in_dim, int out_dim)
    : in(in_dim), out(out_dim),
      weight(static_cast<std::size_t>(in_dim) * static_cast<std::size_t>(out_dim), 0.0),
      bias(static_cast<std::size_t>(out_dim), 0.0) {}

VaeParams VaeParams::zeros(const VaeConfig& config) {
    config.validate();
    VaeParams p;
    p.config = config;
    p.enc_hidden = DenseLayer(config.input_dim + config.cond_dim, config.hidden_units);
    p.enc_mu = DenseLayer(config.hidden_units, config.latent_dim);
    p.enc_logvar = DenseLayer(config.hidden_units, config.latent_dim);
    p.dec_hidden = DenseLayer(config.latent_dim + config.cond_dim, config.hidden_units);
    p.dec_out = DenseLayer(config.hidden_units, config.input_dim);
    return p;
}

VaeParams VaeParams::initialise(const VaeConfig& config, std::uint64_t seed) {
    VaeParams p = zeros(config);
    Rng rng = make_rng(seed, 0, "vae-init");
    for (DenseLayer* l : {&p.enc_hidden, &p.enc_mu, &p.enc_logvar, &p.dec_hidden, &p.dec_out}) {
        const double limit = std::sqrt(6.0 / (l->in + l->out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& w : l->weight) w = u(rng);
    }
    // Start the posterior variance head near zero so early samples stay close to mu.
    for (double& w : p.enc_logvar.weight) w *= 0.1;
    return p;
}

std::vector<std::span<double>> VaeParams::tensors() {
    std::vector<std::span<double>> out;
    for (DenseLayer* l : {&enc_hidden, &enc_mu, &enc_logvar, &dec_hidden, &dec_out}) {
        out.emplace_back(l->weight);
        out.emplace_back(l->bias);
    }
    return out;
}

std::vector<std::span<const double>> VaeParams::tensors() const {
    std::vector<std::span<const double>> out;
    for (const DenseLayer* l : {&enc_hidden, &enc_mu, &enc_logvar, &dec_hidden, &dec_out}) {
        out.emplace_back(l->weight);
        out.emplace_back(l->bias);
    }
    return out;
}

std::vector<std::string> VaeParams::tensor_names() const {
    std::vector<std::string> names;
    for (const char* l : {"enc_hidden", "enc_mu", "enc_logvar", "dec_hidden", "dec_out"}) {
        names.push_back(std::string(l) + ".weight");
        names.push_back(std::string(l) + ".bias");
    }
    return names;
}

std::size_t VaeParams::parameter_count() const {
    std::size_t n = 0;
    for (auto t : tensors()) n += t.size();
    return n;
}

std::uint64_t VaeParams::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto t : tensors()) {
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double)), h);
    }
    return h;
}

double leaky_relu(double v, double alpha) noexcept { return v > 0.0 ? v : alpha * v; }

Encoding encode(const VaeParams& params, std::span<const double> x, std::span<const double> cond) {
    const auto& c = params.config;
    check_dims(c, x.size(), static_cast<std::size_t>(c.input_dim), cond.size(), "encode");
    const auto in = concat(x, cond);
    std::vector<double> h;
    forward(params.enc_hidden, in, h);
    for (double& v : h) v = leaky_relu(v, c.leaky_alpha);
    Encoding e;
    forward(params.enc_mu, h, e.mu);
    forward(params.enc_logvar, h, e.log_var);
    return e;
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> log_var,
                                   std::span<const double> eps) {
    if (mu.size() != log_var.size() || mu.size() != eps.size()) throw std::invalid_argument("reparameterize: size mismatch");
    std::vector<double> z(mu.size());
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = mu[j] + std::exp(0.5 * log_var[j]) * eps[j];
    return z;
}

std::vector<double> decode(const VaeParams& params, std::span<const double> z, std::span<const double> cond) {
    const auto& c = params.config;
    check_dims(c, z.size(), static_cast<std::size_t>(c.latent_dim), cond.size(), "decode");
    const auto in = concat(z, cond);
    std::vector<double> g, o;
    forward(params.dec_hidden, in, g);
    for (double& v : g) v = leaky_relu(v, c.leaky_alpha);
    forward(params.dec_out, g, o);
    for (double& v : o) {
        // keep strictly inside (0, 1) even when the logistic saturates in floating point
        v = std::clamp(sigmoid(v), 1e-12, 1.0 - 1e-12);
    }
    return o;
}

ElboTerms elbo_loss(const VaeParams& params, std::span<const double> x, std::span<const double> cond,
                    std::span<const double> eps) {
    Trace t;
    return run_forward(params, x, cond, eps, t);
}

ElboTerms elbo_gradient(const VaeParams& p, std::span<const double> x, std::span<const double> cond,
                        std::span<const double> eps, VaeParams& grad, double weight) {
    Trace t;
    const ElboTerms e = run_forward(p, x, cond, eps, t);
    const auto& c = p.config;
    const double alpha = c.leaky_alpha;
    const double inv_var = 1.0 / (c.recon_sigma * c.recon_sigma);

    std::vector<double> d_o(t.x_hat.size());
    for (std::size_t i = 0; i < d_o.size(); ++i) {
        d_o[i] = (t.x_hat[i] - x[i]) * inv_var * t.x_hat[i] * (1.0 - t.x_hat[i]);
    }
    std::vector<double> d_g;
    backward(p.dec_out, grad.dec_out, t.g, d_o, weight, &d_g);
    for (std::size_t i = 0; i < d_g.size(); ++i) d_g[i] *= t.g_pre[i] > 0.0 ? 1.0 : alpha;
    std::vector<double> d_dec_in;
    backward(p.dec_hidden, grad.dec_hidden, t.dec_in, d_g, weight, &d_dec_in);

    const std::size_t latent = t.mu.size();
    std::vector<double> d_mu(latent), d_lv(latent);
    for (std::size_t j = 0; j < latent; ++j) {
        const double dz = d_dec_in[j];
        const double sd = std::exp(0.5 * t.log_var[j]);
        d_mu[j] = dz + t.mu[j];
        d_lv[j] = dz * eps[j] * 0.5 * sd + 0.5 * (std::exp(t.log_var[j]) - 1.0);
    }
    std::vector<double> d_h_mu, d_h_lv;
    backward(p.enc_mu, grad.enc_mu, t.h, d_mu, weight, &d_h_mu);
    backward(p.enc_logvar, grad.enc_logvar, t.h, d_lv, weight, &d_h_lv);
    std::vector<double> d_h(d_h_mu.size());
    for (std::size_t i = 0; i < d_h.size(); ++i) d_h[i] = (d_h_mu[i] + d_h_lv[i]) * (t.h_pre[i] > 0.0 ? 1.0 : alpha);
    backward(p.enc_hidden, grad.enc_hidden, t.enc_in, d_h, weight, nullptr);
    return e;
}

std::pair<VaeParams, TrainReport> train(const std::vector<std::vector<double>>& dataset,
                                        const std::vector<std::vector<double>>& conds, const VaeConfig& config) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    for (const auto& row : dataset) {
        if (row.size() != static_cast<std::size_t>(config.input_dim)) throw std::invalid_argument("train: row size differs from input_dim");
    }
    if (config.conditional()) {
        if (conds.size() != dataset.size()) throw std::invalid_argument("train: conditioning rows must align with data");
    } else if (!conds.empty()) {
        throw std::invalid_argument("train: conditioning given for an unconditional model");
    }

    VaeParams params = VaeParams::initialise(config, derive_seed(config.seed, "init"));
    VaeParams grad = VaeParams::zeros(config);
    VaeParams m1 = VaeParams::zeros(config);
    VaeParams m2 = VaeParams::zeros(config);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    Rng shuffle_rng = make_rng(config.seed, 0, "train-shuffle");
    Rng noise_rng = make_rng(config.seed, 0, "train-eps");
    std::normal_distribution<double> n01;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> eps(static_cast<std::size_t>(config.latent_dim));
    const std::vector<double> no_cond;

    TrainReport report;
    long long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double sum_loss = 0.0, sum_recon = 0.0, sum_kl = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const double w = 1.0 / static_cast<double>(end - start);
            for (auto t : grad.tensors()) std::fill(t.begin(), t.end(), 0.0);
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                for (double& e : eps) e = n01(noise_rng);
                const auto& cond = config.conditional() ? conds[i] : no_cond;
                const ElboTerms terms = elbo_gradient(params, dataset[i], cond, eps, grad, w);
                if (!std::isfinite(terms.loss)) {
                    throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + ", row " +
                                             std::to_string(i) + " (recon " + std::to_string(terms.recon) + ", kl " +
                                             std::to_string(terms.kl) + "); lower learning_rate or raise recon_sigma");
                }
                sum_loss += terms.loss;
                sum_recon += terms.recon;
                sum_kl += terms.kl;
            }
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            auto pt = params.tensors();
            auto gt = grad.tensors();
            auto mt = m1.tensors();
            auto vt = m2.tensors();
            for (std::size_t k = 0; k < pt.size(); ++k) {
                for (std::size_t i = 0; i < pt[k].size(); ++i) {
                    const double g = gt[k][i];
                    mt[k][i] = beta1 * mt[k][i] + (1.0 - beta1) * g;
                    vt[k][i] = beta2 * vt[k][i] + (1.0 - beta2) * g * g;
                    pt[k][i] -= config.learning_rate * (mt[k][i] / c1) / (std::sqrt(vt[k][i] / c2) + adam_eps);
                }
            }
        }
        const double n = static_cast<double>(dataset.size());
        report.elbo.push_back(-sum_loss / n);
        report.recon.push_back(sum_recon / n);
        report.kl.push_back(sum_kl / n);
    }
    report.checksum = params.checksum();
    return {std::move(params), std::move(report)};
}

std::vector<std::vector<double>> generate(const VaeParams& params, std::size_t n,
                                          const std::optional<std::vector<double>>& cond, std::uint64_t seed) {
    if (params.config.conditional() && !cond) throw std::invalid_argument("generate: conditional model requires a conditioning vector");
    if (!params.config.conditional() && cond) throw std::invalid_argument("generate: unconditional model does not accept conditioning");
    std::vector<std::vector<double>> conds(n, cond.value_or(std::vector<double>{}));
    return generate(params, conds, seed);
}

std::vector<std::vector<double>> generate(const VaeParams& params, const std::vector<std::vector<double>>& conds,
                                          std::uint64_t seed) {
    std::vector<std::vector<double>> out(conds.size());
    parallel_for(conds.size(), [&](std::size_t i) { out[i] = generate_at(params, conds[i], seed, i); });
    return out;
}

std::vector<double> generate_at(const VaeParams& params, std::span<const double> cond, std::uint64_t seed,
                                std::size_t index) {
    Rng rng = make_rng(seed, index, "vae-generate");
    std::normal_distribution<double> n01;
    std::vector<double> z(static_cast<std::size_t>(params.config.latent_dim));
    for (double& v : z) v = n01(rng);
    return decode(params, z, cond);
}

void save_vae(std::ostream& out, const VaeParams& p) {
    const auto& c = p.config;
    const auto old_precision = out.precision(17);
    out << kMagic << " " << kFormatVersion << "\n";
    out << "config input_dim " << c.input_dim << " latent_dim " << c.latent_dim << " hidden_units " << c.hidden_units
        << " leaky_alpha " << c.leaky_alpha << " cond_dim " << c.cond_dim << " recon_sigma " << c.recon_sigma
        << " epochs " << c.epochs << " batch_size " << c.batch_size << " learning_rate " << c.learning_rate
        << " seed " << c.seed << "\n";
    write_layer(out, "enc_hidden", p.enc_hidden);
    write_layer(out, "enc_mu", p.enc_mu);
    write_layer(out, "enc_logvar", p.enc_logvar);
    write_layer(out, "dec_hidden", p.dec_hidden);
    write_layer(out, "dec_out", p.dec_out);
    out << "end\n";
    out.precision(old_precision);
}

VaeParams load_vae(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic) throw std::invalid_argument("load_vae: not a sigmarket VAE file");
    if (version != kFormatVersion) throw std::invalid_argument("load_vae: unsupported format version " + std::to_string(version));
    std::string line, tag;
    std::getline(in, line);
    if (!std::getline(in, line)) throw std::invalid_argument("load_vae: missing config line");
    std::istringstream cfg(line);
    if (!(cfg >> tag) || tag != "config") throw std::invalid_argument("load_vae: missing config line");
    VaeConfig c;
    std::string key;
    while (cfg >> key) {
        if (key == "input_dim") cfg >> c.input_dim;
        else if (key == "latent_dim") cfg >> c.latent_dim;
        else if (key == "hidden_units") cfg >> c.hidden_units;
        else if (key == "leaky_alpha") cfg >> c.leaky_alpha;
        else if (key == "cond_dim") cfg >> c.cond_dim;
        else if (key == "recon_sigma") cfg >> c.recon_sigma;
        else if (key == "epochs") cfg >> c.epochs;
        else if (key == "batch_size") cfg >> c.batch_size;
        else if (key == "learning_rate") cfg >> c.learning_rate;
        else if (key == "seed") cfg >> c.seed;
        else throw std::invalid_argument("load_vae: unknown config key " + key);
        if (!cfg) throw std::invalid_argument("load_vae: bad value for " + key);
    }
    VaeParams p = VaeParams::zeros(c);
    for (auto [name, layer] : {std::pair<const char*, DenseLayer*>{"enc_hidden", &p.enc_hidden},
                               {"enc_mu", &p.enc_mu},
                               {"enc_logvar", &p.enc_logvar},
                               {"dec_hidden", &p.dec_hidden},
                               {"dec_out", &p.dec_out}}) {
        read_tensor(in, std::string(name) + ".weight", layer->out, layer->in, layer->weight);
        read_tensor(in, std::string(name) + ".bias", layer->out, 1, layer->bias);
    }
    if (!(in >> tag) || tag != "end") throw std::invalid_argument("load_vae: missing end marker");
    return p;
}

}  // namespace sigmarket
