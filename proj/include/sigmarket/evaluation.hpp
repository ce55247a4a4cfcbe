// Two-sample tests and stylized-fact scores for real vs generated segments.

#ifndef SIGMARKET_EVALUATION_HPP
#define SIGMARKET_EVALUATION_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigmarket/inversion.hpp"
#include "sigmarket/market_data.hpp"
#include "sigmarket/path_sig.hpp"

namespace sigmarket {

struct KernelOptions {
    int order = 4;
    // Extra factor applied after dividing paths by the pooled scale.
    double amplitude = 1.0;
};

/// Signature kernel of two streams at amplitude scale 1/scale:
/// <S(a/scale), S(b/scale)> / sqrt(<S(a/scale),S(a/scale)> <S(b/scale),S(b/scale)>)
/// with S the truncated lead-lag signature.
double sig_kernel(const PathSample& a, const PathSample& b, int order, double scale = 1.0);

/// Same kernel on precomputed lead-lag signatures.
double sig_kernel(const TensorSeries& sa, const TensorSeries& sb, double scale = 1.0);

/// sqrt of the mean per-path quadratic variation (summed over channels), read
/// from lead-lag signatures of streams with stream_dim channels. 1 when all
/// paths are flat.
double pooled_scale(const std::vector<const TensorSeries*>& sigs, int stream_dim);

std::vector<std::vector<double>> gram_matrix(const std::vector<PathSample>& paths, const KernelOptions& opts = {});

/// Unbiased within-sample terms, biased cross term; inputs are lead-lag signatures.
double mmd_statistic(const std::vector<TensorSeries>& xs, const std::vector<TensorSeries>& ys, int stream_dim,
                     double amplitude = 1.0);
double mmd_statistic(const std::vector<PathSample>& xs, const std::vector<PathSample>& ys,
                     const KernelOptions& opts = {});

struct MmdResult {
    double statistic = 0.0;
    double threshold = 0.0;
    double alpha = 0.0;
    std::size_t n = 0;
    bool pass = false;  // same distribution not rejected
};

double mmd_threshold(double alpha, std::size_t n);

MmdResult mmd_test(const std::vector<PathSample>& xs, const std::vector<PathSample>& ys, double alpha,
                   const KernelOptions& opts = {});
MmdResult mmd_test(const std::vector<TensorSeries>& xs, const std::vector<TensorSeries>& ys, int stream_dim,
                   double alpha, double amplitude = 1.0);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
double ecdf_sup_distance(const std::vector<double>& a, const std::vector<double>& b);
/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

/// Sample autocorrelation at lags 1..max_lag. A constant series yields zeros
/// and sets *degenerate.
std::vector<double> acf(const std::vector<double>& x, int max_lag, bool* degenerate = nullptr);
std::vector<double> acf_abs(const std::vector<double>& x, int max_lag, bool* degenerate = nullptr);

/// Autocorrelation from (r_t, r_{t+lag}) pairs pooled within each row.
std::vector<double> pooled_acf(const std::vector<std::vector<double>>& rows, int max_lag, bool absolute);

double skewness(const std::vector<double>& x);
double kurtosis(const std::vector<double>& x);

struct MomentScores {
    double skew = 0.0;
    double kurt = 0.0;
};

/// Mean absolute difference of per-coordinate skewness and kurtosis.
MomentScores moment_scores(const std::vector<std::vector<double>>& real, const std::vector<std::vector<double>>& generated);

enum class Representation { Returns, LogSignature };

std::string to_string(Representation r);

/// Output of a generator. Returns bundles carry daily log-return rows;
/// log-signature bundles carry lead-lag log-signatures of log-price segments
/// and optionally the already inverted log-price paths.
struct GeneratedBundle {
    Representation representation = Representation::LogSignature;
    int segment_length = 0;
    std::vector<std::vector<double>> returns;
    std::vector<LogSigVector> logsigs;
    std::vector<PathSample> paths;
    std::size_t inversion_failures = 0;
};

struct EvalOptions {
    int order = 4;
    double alpha = 0.05;
    double amplitude = 1.0;
    int max_lag = 10;
    double max_failure_fraction = 0.1;
    InversionConfig inversion;
    double start_price = 100.0;
};

/// Raised when too many generated log-signatures fail to invert.
class InversionFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EvalReport {
    std::string representation;
    std::size_t n_real = 0;
    std::size_t n_generated = 0;
    std::size_t concat_factor = 1;
    std::size_t inversion_failures = 0;
    MmdResult mmd;
    std::vector<KsResult> ks_daily;  // marginal of day 1..L
    KsResult ks_total;               // segment total return
    double ecdf_distance = 0.0;      // pooled daily returns
    std::vector<double> acf_real, acf_generated;
    std::vector<double> acf_abs_real, acf_abs_generated;
    MomentScores moments;

    // plot data
    std::vector<double> day1_real, day1_generated;
    std::vector<std::pair<double, double>> logsig_real, logsig_generated;  // (level-1 lead, area)
};

/// Builds both comparison grids. When the real segments are k times longer
/// than the generated ones, k consecutive generated segments are chained
/// (signatures via Chen, returns by concatenation).
EvalReport eval_matrix(const SegmentSet& real, const GeneratedBundle& generated, const EvalOptions& opts);

void write_report_csv(std::ostream& out, const EvalReport& report);
void write_report_text(std::ostream& out, const EvalReport& report);
/// ECDF pairs, acf curves and log-signature scatter as CSV files under dir.
void write_plot_data(const std::filesystem::path& dir, const EvalReport& report);

}  // namespace sigmarket

#endif  // SIGMARKET_EVALUATION_HPP
