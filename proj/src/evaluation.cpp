#include "sigmarket/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <numeric>
#include <ostream>

#include "sigmarket/random.hpp"

namespace sigmarket {

namespace {

// <a, b> split by level, so rescaling only reweights the sum.
std::vector<double> level_inner(const TensorSeries& a, const TensorSeries& b) {
    std::vector<double> out(static_cast<std::size_t>(a.order()) + 1);
    for (int m = 0; m <= a.order(); ++m) {
        const auto x = a.level(m);
        const auto y = b.level(m);
        out[static_cast<std::size_t>(m)] = std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
    }
    return out;
}

double weighted(const std::vector<double>& per_level, double inv_scale) {
    double acc = 0.0, w = 1.0;
    for (double v : per_level) {
        acc += w * v;
        w *= inv_scale * inv_scale;
    }
    return acc;
}

struct Features {
    std::vector<TensorSeries> sigs;  // dilated
    std::vector<double> norms;
};

Features features(const std::vector<const TensorSeries*>& sigs, double inv_scale) {
    Features f;
    f.sigs.reserve(sigs.size());
    for (const auto* s : sigs) {
        f.sigs.push_back(dilate(*s, inv_scale));
        f.norms.push_back(std::sqrt(tensor_inner(f.sigs.back(), f.sigs.back())));
    }
    return f;
}

double kernel(const Features& f, std::size_t i, std::size_t j) {
    return tensor_inner(f.sigs[i], f.sigs[j]) / (f.norms[i] * f.norms[j]);
}

void check_same_shape(const std::vector<const TensorSeries*>& sigs, int stream_dim) {
    for (const auto* s : sigs) {
        if (s->dim() != 2 * stream_dim || s->order() != sigs.front()->order()) {
            throw std::invalid_argument("signature kernel: paths differ in dimension or truncation order");
        }
    }
}

std::vector<TensorSeries> lead_lag_sigs(const std::vector<PathSample>& paths, int order) {
    std::vector<TensorSeries> out(paths.size(), TensorSeries(1, 1));
    parallel_for(paths.size(), [&](std::size_t i) { out[i] = lead_lag_signature(paths[i], order); });
    return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> central_moments(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    return {m2 / n, m3 / n, m4 / n};
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t j) {
    std::vector<double> c;
    c.reserve(rows.size());
    for (const auto& r : rows) c.push_back(r[j]);
    return c;
}

std::vector<double> diffs(const PathSample& p) {
    std::vector<double> r(p.size() - 1);
    for (std::size_t i = 0; i + 1 < p.size(); ++i) r[i] = p.value(i + 1) - p.value(i);
    return r;
}

PathSample path_from_returns(const std::vector<double>& r) {
    std::vector<double> v(r.size() + 1, 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) v[i + 1] = v[i] + r[i];
    return PathSample::from_stream(std::move(v));
}

std::pair<double, double> scatter_point(const TensorSeries& sig) {
    const auto ls = lyndon_project(tensor_log(sig));
    return {ls.coords[1], ls.coords[2]};
}

}  // namespace

double sig_kernel(const TensorSeries& sa, const TensorSeries& sb, double scale) {
    if (!sa.same_shape(sb)) throw std::invalid_argument("sig_kernel: signatures differ in shape");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("sig_kernel: scale must be positive");
    const double inv = 1.0 / scale;
    const double ab = weighted(level_inner(sa, sb), inv);
    const double aa = weighted(level_inner(sa, sa), inv);
    const double bb = weighted(level_inner(sb, sb), inv);
    return ab / std::sqrt(aa * bb);
}

double sig_kernel(const PathSample& a, const PathSample& b, int order, double scale) {
    if (a.dim() != b.dim()) throw std::invalid_argument("sig_kernel: paths differ in dimension");
    return sig_kernel(lead_lag_signature(a, order), lead_lag_signature(b, order), scale);
}

double pooled_scale(const std::vector<const TensorSeries*>& sigs, int stream_dim) {
    if (sigs.empty()) return 1.0;
    double total = 0.0;
    for (const auto* s : sigs) {
        for (int c = 0; c < stream_dim; ++c) total += std::abs(lead_lag_quadratic_variation(*s, stream_dim, c));
    }
    const double mean = total / static_cast<double>(sigs.size());
    return mean > 0.0 ? std::sqrt(mean) : 1.0;
}

std::vector<std::vector<double>> gram_matrix(const std::vector<PathSample>& paths, const KernelOptions& opts) {
    if (paths.empty()) return {};
    const auto sigs = lead_lag_sigs(paths, opts.order);
    std::vector<const TensorSeries*> ptrs;
    for (const auto& s : sigs) ptrs.push_back(&s);
    check_same_shape(ptrs, paths.front().dim());
    const auto f = features(ptrs, opts.amplitude / pooled_scale(ptrs, paths.front().dim()));
    std::vector<std::vector<double>> g(paths.size(), std::vector<double>(paths.size()));
    parallel_for(paths.size(), [&](std::size_t i) {
        for (std::size_t j = 0; j < paths.size(); ++j) g[i][j] = kernel(f, i, j);
    });
    return g;
}

double mmd_statistic(const std::vector<TensorSeries>& xs, const std::vector<TensorSeries>& ys, int stream_dim,
                     double amplitude) {
    const std::size_t n = xs.size();
    if (ys.size() != n) throw std::invalid_argument("mmd_statistic: samples must have equal size");
    if (n < 2) throw std::invalid_argument("mmd_statistic: need at least 2 paths per sample");
    if (!(amplitude > 0.0)) throw std::invalid_argument("mmd_statistic: amplitude must be positive");
    std::vector<const TensorSeries*> all;
    for (const auto& s : xs) all.push_back(&s);
    for (const auto& s : ys) all.push_back(&s);
    check_same_shape(all, stream_dim);
    const auto f = features(all, amplitude / pooled_scale(all, stream_dim));

    // Row sums per block, reduced in index order for determinism.
    std::vector<double> xx(n), xy(n), yy(n);
    parallel_for(n, [&](std::size_t i) {
        double a = 0.0, b = 0.0, c = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                a += kernel(f, i, j);
                c += kernel(f, n + i, n + j);
            }
            b += kernel(f, i, n + j);
        }
        xx[i] = a;
        xy[i] = b;
        yy[i] = c;
    });
    const double nn = static_cast<double>(n);
    const double sxx = std::accumulate(xx.begin(), xx.end(), 0.0);
    const double sxy = std::accumulate(xy.begin(), xy.end(), 0.0);
    const double syy = std::accumulate(yy.begin(), yy.end(), 0.0);
    return sxx / (nn * (nn - 1.0)) - 2.0 * sxy / (nn * nn) + syy / (nn * (nn - 1.0));
}

double mmd_statistic(const std::vector<PathSample>& xs, const std::vector<PathSample>& ys, const KernelOptions& opts) {
    if (xs.empty() || ys.empty()) throw std::invalid_argument("mmd_statistic: need at least 2 paths per sample");
    return mmd_statistic(lead_lag_sigs(xs, opts.order), lead_lag_sigs(ys, opts.order), xs.front().dim(), opts.amplitude);
}

double mmd_threshold(double alpha, std::size_t n) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("mmd_test: alpha must lie in (0, 1)");
    if (n == 0) throw std::invalid_argument("mmd_test: n must be positive");
    return 4.0 * std::sqrt(-std::log(alpha) / static_cast<double>(n));
}

MmdResult mmd_test(const std::vector<TensorSeries>& xs, const std::vector<TensorSeries>& ys, int stream_dim,
                   double alpha, double amplitude) {
    MmdResult r;
    r.alpha = alpha;
    r.n = xs.size();
    r.threshold = mmd_threshold(alpha, std::max<std::size_t>(r.n, 1));
    r.statistic = mmd_statistic(xs, ys, stream_dim, amplitude);
    r.pass = r.statistic < r.threshold;
    return r;
}

MmdResult mmd_test(const std::vector<PathSample>& xs, const std::vector<PathSample>& ys, double alpha,
                   const KernelOptions& opts) {
    mmd_threshold(alpha, 1);
    if (xs.empty() || ys.empty()) throw std::invalid_argument("mmd_test: need at least 2 paths per sample");
    return mmd_test(lead_lag_sigs(xs, opts.order), lead_lag_sigs(ys, opts.order), xs.front().dim(), alpha,
                    opts.amplitude);
}

double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.3) {
        // Jacobi-transformed CDF; the alternating series is useless this close to 0.
        const double pi2 = std::numbers::pi * std::numbers::pi;
        double cdf = 0.0;
        for (int k = 1; k <= 100; ++k) {
            const double odd = 2.0 * k - 1.0;
            cdf += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
        }
        cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ecdf_sup_distance(const std::vector<double>& a_in, const std::vector<double>& b_in) {
    if (a_in.empty() || b_in.empty()) throw std::invalid_argument("ks: empty sample");
    std::vector<double> a = a_in, b = b_in;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    KsResult r;
    r.statistic = ecdf_sup_distance(a, b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    r.p_value = r.statistic == 0.0 ? 1.0 : kolmogorov_survival(std::sqrt(na * nb / (na + nb)) * r.statistic);
    return r;
}

std::vector<double> acf(const std::vector<double>& x, int max_lag, bool* degenerate) {
    if (max_lag < 1) throw std::invalid_argument("acf: max_lag must be >= 1");
    if (x.size() <= static_cast<std::size_t>(max_lag) + 1) {
        throw std::invalid_argument("acf: series of length " + std::to_string(x.size()) + " is too short for lag " +
                                    std::to_string(max_lag));
    }
    const bool flat = std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
    if (degenerate) *degenerate = flat;
    std::vector<double> out(static_cast<std::size_t>(max_lag), 0.0);
    if (flat) return out;
    for (int lag = 1; lag <= max_lag; ++lag) {
        const auto l = static_cast<std::size_t>(lag);
        std::vector<double> head(x.begin(), x.end() - static_cast<std::ptrdiff_t>(l));
        std::vector<double> tail(x.begin() + static_cast<std::ptrdiff_t>(l), x.end());
        out[l - 1] = pearson(head, tail);
    }
    return out;
}

std::vector<double> acf_abs(const std::vector<double>& x, int max_lag, bool* degenerate) {
    std::vector<double> a(x.size());
    std::transform(x.begin(), x.end(), a.begin(), [](double v) { return std::abs(v); });
    return acf(a, max_lag, degenerate);
}

std::vector<double> pooled_acf(const std::vector<std::vector<double>>& rows, int max_lag, bool absolute) {
    if (max_lag < 1) throw std::invalid_argument("pooled_acf: max_lag must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(max_lag), 0.0);
    for (int lag = 1; lag <= max_lag; ++lag) {
        std::vector<double> head, tail;
        for (const auto& r : rows) {
            for (std::size_t t = 0; t + static_cast<std::size_t>(lag) < r.size(); ++t) {
                const double a = r[t], b = r[t + static_cast<std::size_t>(lag)];
                head.push_back(absolute ? std::abs(a) : a);
                tail.push_back(absolute ? std::abs(b) : b);
            }
        }
        if (head.size() < 2) throw std::invalid_argument("pooled_acf: rows too short for lag " + std::to_string(lag));
        out[static_cast<std::size_t>(lag) - 1] = pearson(head, tail);
    }
    return out;
}

double skewness(const std::vector<double>& x) {
    if (x.size() < 4) throw std::invalid_argument("skewness: need at least 4 observations");
    const auto m = central_moments(x);
    return m[0] > 0.0 ? m[1] / std::pow(m[0], 1.5) : 0.0;
}

double kurtosis(const std::vector<double>& x) {
    if (x.size() < 4) throw std::invalid_argument("kurtosis: need at least 4 observations");
    const auto m = central_moments(x);
    return m[0] > 0.0 ? m[2] / (m[0] * m[0]) : 0.0;
}

MomentScores moment_scores(const std::vector<std::vector<double>>& real, const std::vector<std::vector<double>>& generated) {
    if (real.empty() || generated.empty()) throw std::invalid_argument("moment_scores: empty sample");
    const std::size_t nx = real.front().size();
    if (nx == 0) throw std::invalid_argument("moment_scores: rows have no coordinates");
    for (const auto* set : {&real, &generated}) {
        for (const auto& r : *set) {
            if (r.size() != nx) throw std::invalid_argument("moment_scores: coordinate counts differ");
        }
    }
    MomentScores s;
    for (std::size_t j = 0; j < nx; ++j) {
        const auto a = column(real, j), b = column(generated, j);
        s.skew += std::abs(skewness(a) - skewness(b));
        s.kurt += std::abs(kurtosis(a) - kurtosis(b));
    }
    s.skew /= static_cast<double>(nx);
    s.kurt /= static_cast<double>(nx);
    return s;
}

std::string to_string(Representation r) { return r == Representation::Returns ? "returns" : "logsig"; }

EvalReport eval_matrix(const SegmentSet& real, const GeneratedBundle& gen, const EvalOptions& opts) {
    if (real.size() < 2) throw std::invalid_argument("eval_matrix: need at least 2 real segments");
    if (gen.segment_length < 1) throw std::invalid_argument("eval_matrix: generated segment_length must be >= 1");
    if (real.segment_length % gen.segment_length != 0) {
        throw std::invalid_argument("eval_matrix: real segment length " + std::to_string(real.segment_length) +
                                    " is not a multiple of generated length " + std::to_string(gen.segment_length));
    }
    const std::size_t k = static_cast<std::size_t>(real.segment_length / gen.segment_length);
    const std::size_t gl = static_cast<std::size_t>(gen.segment_length);

    EvalReport rep;
    rep.representation = to_string(gen.representation);
    rep.concat_factor = k;

    // Generated rows of daily returns and signatures, one per generated segment.
    std::vector<std::vector<double>> gen_rows;
    std::vector<TensorSeries> gen_sigs;
    if (gen.representation == Representation::Returns) {
        for (const auto& r : gen.returns) {
            if (r.size() != gl) throw std::invalid_argument("eval_matrix: generated return row has wrong length");
        }
        gen_rows = gen.returns;
    } else {
        for (const auto& ls : gen.logsigs) {
            if (ls.dim != 2 || ls.order != opts.order) {
                throw std::invalid_argument("eval_matrix: generated log-signatures must be order-" +
                                            std::to_string(opts.order) + " lead-lag of a 1-d stream");
            }
            gen_sigs.push_back(signature_from_log(ls));
        }
        std::vector<PathSample> paths = gen.paths;
        rep.inversion_failures = gen.inversion_failures;
        if (paths.empty() && !gen.logsigs.empty()) {
            std::vector<std::optional<InversionResult>> inv(gen.logsigs.size());
            parallel_for(inv.size(), [&](std::size_t i) {
                InversionConfig c = opts.inversion;
                c.path_length = gen.segment_length + 1;
                c.seed = inversion_seed(opts.inversion.seed, i);
                inv[i] = invert_logsig(gen.logsigs[i], opts.start_price, c);
            });
            for (auto& r : inv) {
                rep.inversion_failures += !r->converged;
                std::vector<double> lp;
                for (double p : r->path.values()) lp.push_back(std::log(p));
                paths.push_back(PathSample::from_stream(std::move(lp)));
            }
        }
        if (paths.size() != gen.logsigs.size()) throw std::invalid_argument("eval_matrix: inverted paths do not align with log-signatures");
        const double frac = gen.logsigs.empty() ? 0.0 : static_cast<double>(rep.inversion_failures) / static_cast<double>(gen.logsigs.size());
        if (frac > opts.max_failure_fraction) {
            throw InversionFailure("eval_matrix: " + std::to_string(rep.inversion_failures) + " of " +
                                   std::to_string(gen.logsigs.size()) + " inversions unconverged (limit " +
                                   std::to_string(opts.max_failure_fraction) + ")");
        }
        for (const auto& p : paths) {
            if (p.size() != gl + 1) throw std::invalid_argument("eval_matrix: inverted path has wrong length");
            gen_rows.push_back(diffs(p));
        }
    }

    // Chain k consecutive generated segments.
    const std::size_t groups = gen_rows.size() / k;
    std::vector<std::vector<double>> gen_long(groups);
    std::vector<TensorSeries> gen_long_sigs;
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t j = 0; j < k; ++j) {
            const auto& r = gen_rows[g * k + j];
            gen_long[g].insert(gen_long[g].end(), r.begin(), r.end());
        }
        if (gen.representation == Representation::LogSignature) {
            TensorSeries s = gen_sigs[g * k];
            for (std::size_t j = 1; j < k; ++j) s = sig_concat(s, gen_sigs[g * k + j]);
            gen_long_sigs.push_back(std::move(s));
        } else {
            gen_long_sigs.push_back(lead_lag_signature(path_from_returns(gen_long[g]), opts.order));
        }
    }

    std::vector<std::vector<double>> real_rows;
    for (std::size_t i = 0; i < real.size(); ++i) real_rows.push_back(real.returns(i));
    const auto real_sigs = lead_lag_sigs(real.segments, opts.order);

    rep.n_real = real.size();
    rep.n_generated = groups;
    const std::size_t n = std::min(real_sigs.size(), gen_long_sigs.size());
    if (n < 2) throw std::invalid_argument("eval_matrix: need at least 2 generated segments after chaining");
    rep.mmd = mmd_test(std::vector<TensorSeries>(real_sigs.begin(), real_sigs.begin() + static_cast<std::ptrdiff_t>(n)),
                       std::vector<TensorSeries>(gen_long_sigs.begin(), gen_long_sigs.begin() + static_cast<std::ptrdiff_t>(n)),
                       1, opts.alpha, opts.amplitude);

    const std::size_t len = static_cast<std::size_t>(real.segment_length);
    for (std::size_t d = 0; d < len; ++d) rep.ks_daily.push_back(ks_two_sample(column(real_rows, d), column(gen_long, d)));
    auto totals = [](const std::vector<std::vector<double>>& rows) {
        std::vector<double> t;
        for (const auto& r : rows) t.push_back(std::accumulate(r.begin(), r.end(), 0.0));
        return t;
    };
    rep.ks_total = ks_two_sample(totals(real_rows), totals(gen_long));
    std::vector<double> pooled_real, pooled_gen;
    for (const auto& r : real_rows) pooled_real.insert(pooled_real.end(), r.begin(), r.end());
    for (const auto& r : gen_long) pooled_gen.insert(pooled_gen.end(), r.begin(), r.end());
    rep.ecdf_distance = ecdf_sup_distance(pooled_real, pooled_gen);

    const int lag = std::max(1, std::min(opts.max_lag, real.segment_length - 2));
    rep.acf_real = pooled_acf(real_rows, lag, false);
    rep.acf_generated = pooled_acf(gen_long, lag, false);
    rep.acf_abs_real = pooled_acf(real_rows, lag, true);
    rep.acf_abs_generated = pooled_acf(gen_long, lag, true);
    if (real_rows.size() >= 4 && gen_long.size() >= 4) rep.moments = moment_scores(real_rows, gen_long);

    rep.day1_real = column(real_rows, 0);
    rep.day1_generated = column(gen_long, 0);
    for (const auto& s : real_sigs) rep.logsig_real.push_back(scatter_point(s));
    for (const auto& s : gen_long_sigs) rep.logsig_generated.push_back(scatter_point(s));
    return rep;
}

void write_report_csv(std::ostream& out, const EvalReport& r) {
    const auto old = out.precision(12);
    out << "metric,value,threshold,verdict\n";
    out << "mmd_statistic," << r.mmd.statistic << "," << r.mmd.threshold << "," << (r.mmd.pass ? "pass" : "fail") << "\n";
    out << "mmd_alpha," << r.mmd.alpha << ",,\n";
    out << "mmd_n," << r.mmd.n << ",,\n";
    for (std::size_t d = 0; d < r.ks_daily.size(); ++d) {
        out << "ks_d" << d + 1 << "_statistic," << r.ks_daily[d].statistic << ",,\n";
        out << "ks_d" << d + 1 << "_pvalue," << r.ks_daily[d].p_value << "," << r.mmd.alpha << ","
            << (r.ks_daily[d].p_value >= r.mmd.alpha ? "pass" : "fail") << "\n";
    }
    out << "ks_total_statistic," << r.ks_total.statistic << ",,\n";
    out << "ks_total_pvalue," << r.ks_total.p_value << "," << r.mmd.alpha << ","
        << (r.ks_total.p_value >= r.mmd.alpha ? "pass" : "fail") << "\n";
    out << "ecdf_sup_distance," << r.ecdf_distance << ",,\n";
    for (std::size_t l = 0; l < r.acf_real.size(); ++l) {
        out << "acf_real_lag" << l + 1 << "," << r.acf_real[l] << ",,\n";
        out << "acf_generated_lag" << l + 1 << "," << r.acf_generated[l] << ",,\n";
        out << "acf_abs_real_lag" << l + 1 << "," << r.acf_abs_real[l] << ",,\n";
        out << "acf_abs_generated_lag" << l + 1 << "," << r.acf_abs_generated[l] << ",,\n";
    }
    out << "skew_score," << r.moments.skew << ",,\n";
    out << "kurt_score," << r.moments.kurt << ",,\n";
    out << "inversion_failures," << r.inversion_failures << ",,\n";
    out.precision(old);
}

void write_report_text(std::ostream& out, const EvalReport& r) {
    out << "representation: " << r.representation << " (generated segments chained x" << r.concat_factor << ")\n";
    out << "samples: " << r.n_real << " real, " << r.n_generated << " generated\n";
    out << "signature MMD: T = " << r.mmd.statistic << ", c_alpha = " << r.mmd.threshold << " (alpha " << r.mmd.alpha
        << ", n " << r.mmd.n << ") -> " << (r.mmd.pass ? "PASS" : "FAIL") << "\n";
    out << "  verdict rule: T < c_alpha, with T the statistic itself (not squared)\n";
    out << "KS per day:";
    for (std::size_t d = 0; d < r.ks_daily.size(); ++d) out << " d" << d + 1 << " p=" << r.ks_daily[d].p_value;
    out << "\nKS total return: D = " << r.ks_total.statistic << ", p = " << r.ks_total.p_value << "\n";
    out << "ECDF sup distance (daily returns): " << r.ecdf_distance << "\n";
    out << "skew score: " << r.moments.skew << ", kurtosis score: " << r.moments.kurt << "\n";
    if (!r.acf_abs_real.empty()) {
        out << "acf |r| lag 1: real " << r.acf_abs_real[0] << ", generated " << r.acf_abs_generated[0] << "\n";
    }
    if (r.inversion_failures) out << "unconverged inversions: " << r.inversion_failures << "\n";
}

void write_plot_data(const std::filesystem::path& dir, const EvalReport& r) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
        f.precision(12);
        return f;
    };
    auto ecdf = [](std::ostream& out, const char* label, std::vector<double> v) {
        std::sort(v.begin(), v.end());
        for (std::size_t i = 0; i < v.size(); ++i) out << label << "," << v[i] << "," << (i + 1.0) / v.size() << "\n";
    };
    {
        auto f = open("ecdf_day1.csv");
        f << "sample,value,ecdf\n";
        ecdf(f, "real", r.day1_real);
        ecdf(f, "generated", r.day1_generated);
    }
    {
        auto f = open("acf.csv");
        f << "lag,acf_real,acf_generated,acf_abs_real,acf_abs_generated\n";
        for (std::size_t l = 0; l < r.acf_real.size(); ++l) {
            f << l + 1 << "," << r.acf_real[l] << "," << r.acf_generated[l] << "," << r.acf_abs_real[l] << ","
              << r.acf_abs_generated[l] << "\n";
        }
    }
    {
        auto f = open("logsig_scatter.csv");
        f << "sample,level1_lead,area\n";
        for (const auto& [x, y] : r.logsig_real) f << "real," << x << "," << y << "\n";
        for (const auto& [x, y] : r.logsig_generated) f << "generated," << x << "," << y << "\n";
    }
}

}  // namespace sigmarket
