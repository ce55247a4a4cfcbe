// (Conditional) variational autoencoder over flat feature vectors in [0,1]^n.
//
// Encoder: [x; c] -> hidden (leaky ReLU) -> (mu, log_var) heads.
// Decoder: [z; c] -> hidden (leaky ReLU) -> sigmoid output.
// Loss per sample: |x - x_hat|^2 / (2 sigma^2) + KL(N(mu, diag e^lv) || N(0, I)).

#ifndef SIGMARKET_VAE_HPP
#define SIGMARKET_VAE_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sigmarket {

struct VaeConfig {
    int input_dim = 0;
    int latent_dim = 8;
    int hidden_units = 50;
    double leaky_alpha = 0.3;
    int cond_dim = 0;
    double recon_sigma = 0.1;
    int epochs = 2000;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
    bool conditional() const noexcept { return cond_dim > 0; }
};

/// Fully connected layer, weight stored row-major as (out x in).
struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    DenseLayer() = default;
    DenseLayer(int in_dim, int out_dim);
};

struct VaeParams {
    VaeConfig config;
    DenseLayer enc_hidden;
    DenseLayer enc_mu;
    DenseLayer enc_logvar;
    DenseLayer dec_hidden;
    DenseLayer dec_out;

    /// All-zero parameters with shapes taken from the config.
    static VaeParams zeros(const VaeConfig& config);
    /// Glorot-uniform weights, zero biases.
    static VaeParams initialise(const VaeConfig& config, std::uint64_t seed);

    /// Every weight and bias array, in a fixed order.
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
    std::vector<std::string> tensor_names() const;

    std::size_t parameter_count() const;
    /// FNV-1a over the raw parameter bytes.
    std::uint64_t checksum() const;
};

struct Encoding {
    std::vector<double> mu;
    std::vector<double> log_var;
};

struct ElboTerms {
    double loss = 0.0;
    double recon = 0.0;
    double kl = 0.0;
};

struct TrainReport {
    std::vector<double> elbo;  // -mean loss per epoch
    std::vector<double> recon;
    std::vector<double> kl;
    std::uint64_t checksum = 0;
};

double leaky_relu(double v, double alpha) noexcept;

Encoding encode(const VaeParams& params, std::span<const double> x, std::span<const double> cond = {});

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> log_var,
                                   std::span<const double> eps);

std::vector<double> decode(const VaeParams& params, std::span<const double> z, std::span<const double> cond = {});

ElboTerms elbo_loss(const VaeParams& params, std::span<const double> x, std::span<const double> cond,
                    std::span<const double> eps);

/// Loss and its exact gradient w.r.t. every parameter for a fixed eps. The
/// gradient is scaled by `weight` and added into `grad` (same shapes as params).
ElboTerms elbo_gradient(const VaeParams& params, std::span<const double> x, std::span<const double> cond,
                        std::span<const double> eps, VaeParams& grad, double weight = 1.0);

/// Mini-batch Adam on the single-sample ELBO estimator. `conds` is empty for an
/// unconditional model, otherwise aligned with `dataset`.
std::pair<VaeParams, TrainReport> train(const std::vector<std::vector<double>>& dataset,
                                        const std::vector<std::vector<double>>& conds, const VaeConfig& config);

/// Decodes n draws z ~ N(0, I). `cond` is required exactly when the model is conditional.
std::vector<std::vector<double>> generate(const VaeParams& params, std::size_t n,
                                          const std::optional<std::vector<double>>& cond, std::uint64_t seed);

/// Row `index` of a generation run: the same value generate() produces at that row.
std::vector<double> generate_at(const VaeParams& params, std::span<const double> cond, std::uint64_t seed,
                                std::size_t index);

/// One conditioning vector per generated row.
std::vector<std::vector<double>> generate(const VaeParams& params, const std::vector<std::vector<double>>& conds,
                                          std::uint64_t seed);

void save_vae(std::ostream& out, const VaeParams& params);
/// Throws std::invalid_argument on malformed input or shape mismatch.
VaeParams load_vae(std::istream& in);

}  // namespace sigmarket

#endif  // SIGMARKET_VAE_HPP
