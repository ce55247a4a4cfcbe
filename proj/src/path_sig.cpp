#include "sigmarket/path_sig.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sigmarket {

namespace {

constexpr double kGroupLikeTolerance = 1e-9;

// S <- S (x) exp(delta), in place. Level m of the product only reads levels < m
// of S, so sweeping from the top level down needs no scratch copy of S.
void append_linear_segment(TensorSeries& sig, std::span<const double> delta) {
    const int d = sig.dim();
    const int n = sig.order();
    // powers[k] = delta^{(x)k} / k!
    std::vector<std::vector<double>> powers(static_cast<std::size_t>(n) + 1);
    powers[0] = {1.0};
    for (int k = 1; k <= n; ++k) {
        const auto& prev = powers[static_cast<std::size_t>(k) - 1];
        auto& cur = powers[static_cast<std::size_t>(k)];
        cur.resize(prev.size() * static_cast<std::size_t>(d));
        for (std::size_t a = 0; a < prev.size(); ++a) {
            for (int b = 0; b < d; ++b) {
                cur[a * static_cast<std::size_t>(d) + static_cast<std::size_t>(b)] =
                    prev[a] * delta[static_cast<std::size_t>(b)] / k;
            }
        }
    }
    for (int m = n; m >= 1; --m) {
        auto dst = sig.level(m);
        for (int k = 1; k <= m; ++k) {
            auto lhs = sig.level(m - k);
            const auto& rhs = powers[static_cast<std::size_t>(k)];
            const std::size_t nr = rhs.size();
            for (std::size_t ia = 0; ia < lhs.size(); ++ia) {
                const double av = lhs[ia];
                if (av == 0.0) continue;
                double* out = dst.data() + ia * nr;
                for (std::size_t ib = 0; ib < nr; ++ib) out[ib] += av * rhs[ib];
            }
        }
    }
}

}  // namespace

PathSample::PathSample(std::vector<double> times, std::vector<double> values, int dim)
    : times_(std::move(times)), values_(std::move(values)), dim_(dim) {
    if (dim_ < 1) throw std::invalid_argument("PathSample: dim must be >= 1");
    if (times_.size() < 2) throw std::invalid_argument("PathSample: need at least 2 points");
    if (values_.size() != times_.size() * static_cast<std::size_t>(dim_)) {
        throw std::invalid_argument("PathSample: values size does not match times * dim");
    }
    for (std::size_t i = 1; i < times_.size(); ++i) {
        if (!(times_[i] > times_[i - 1])) throw std::invalid_argument("PathSample: times must be strictly increasing");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw std::invalid_argument("PathSample: non-finite value");
    }
}

PathSample PathSample::from_stream(std::vector<double> values) {
    std::vector<double> times(values.size());
    for (std::size_t i = 0; i < times.size(); ++i) times[i] = static_cast<double>(i);
    return PathSample(std::move(times), std::move(values), 1);
}

PathSample PathSample::with_unit_time() const {
    std::vector<double> t(times_.size());
    const double t0 = times_.front();
    const double span = times_.back() - t0;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (times_[i] - t0) / span;
    t.back() = 1.0;
    return PathSample(std::move(t), values_, dim_);
}

PathSample lead_lag(const PathSample& stream) {
    const std::size_t n = stream.size();
    const int d = stream.dim();
    std::vector<double> times;
    std::vector<double> values;
    times.reserve(2 * n - 1);
    values.reserve((2 * n - 1) * 2 * static_cast<std::size_t>(d));
    auto push = [&](double t, std::span<const double> lag, std::span<const double> lead) {
        times.push_back(t);
        values.insert(values.end(), lag.begin(), lag.end());
        values.insert(values.end(), lead.begin(), lead.end());
    };
    const auto& ts = stream.times();
    for (std::size_t k = 0; k + 1 < n; ++k) {
        push(ts[k], stream.point(k), stream.point(k));
        push(0.5 * (ts[k] + ts[k + 1]), stream.point(k), stream.point(k + 1));
    }
    push(ts[n - 1], stream.point(n - 1), stream.point(n - 1));
    return PathSample(std::move(times), std::move(values), 2 * d);
}

TensorSeries signature(const PathSample& path, int order) {
    const int d = path.dim();
    TensorSeries sig = TensorSeries::one(d, order);
    std::vector<double> delta(static_cast<std::size_t>(d));
    for (std::size_t i = 1; i < path.size(); ++i) {
        auto a = path.point(i - 1);
        auto b = path.point(i);
        for (int c = 0; c < d; ++c) delta[static_cast<std::size_t>(c)] = b[static_cast<std::size_t>(c)] - a[static_cast<std::size_t>(c)];
        append_linear_segment(sig, delta);
    }
    return sig;
}

TensorSeries lead_lag_signature(const PathSample& stream, int order) {
    const int d = stream.dim();
    TensorSeries sig = TensorSeries::one(2 * d, order);
    std::vector<double> delta(2 * static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 1; i < stream.size(); ++i) {
        auto a = stream.point(i - 1);
        auto b = stream.point(i);
        std::fill(delta.begin(), delta.end(), 0.0);
        for (int c = 0; c < d; ++c) delta[static_cast<std::size_t>(d + c)] = b[static_cast<std::size_t>(c)] - a[static_cast<std::size_t>(c)];
        append_linear_segment(sig, delta);  // lead moves
        std::fill(delta.begin(), delta.end(), 0.0);
        for (int c = 0; c < d; ++c) delta[static_cast<std::size_t>(c)] = b[static_cast<std::size_t>(c)] - a[static_cast<std::size_t>(c)];
        append_linear_segment(sig, delta);  // lag catches up
    }
    return sig;
}

LogSigVector lyndon_project(const TensorSeries& lie) {
    const auto& basis = lyndon_basis(lie.dim(), lie.order());
    return LogSigVector{lie.dim(), lie.order(), basis.project(lie)};
}

TensorSeries lyndon_expand(const LogSigVector& v) {
    return lyndon_basis(v.dim, v.order).expand(v.coords);
}

LogSigVector log_signature(const PathSample& path, int order) {
    return lyndon_project(tensor_log(signature(path, order)));
}

LogSigVector lead_lag_log_signature(const PathSample& stream, int order) {
    return lyndon_project(tensor_log(lead_lag_signature(stream, order)));
}

TensorSeries signature_from_log(const LogSigVector& v) { return tensor_exp(lyndon_expand(v)); }

TensorSeries sig_concat(const TensorSeries& a, const TensorSeries& b) {
    if (std::abs(a.scalar() - 1.0) > kGroupLikeTolerance || std::abs(b.scalar() - 1.0) > kGroupLikeTolerance) {
        throw std::invalid_argument("sig_concat: inputs must be group-like (scalar part 1)");
    }
    return tensor_mul(a, b);
}

double lead_lag_quadratic_variation(const TensorSeries& sig, int stream_dim, int channel) {
    if (sig.dim() != 2 * stream_dim || sig.order() < 2) {
        throw std::invalid_argument("lead_lag_quadratic_variation: expected a lead-lag signature of order >= 2");
    }
    const auto lvl = sig.level(2);
    const std::size_t n = static_cast<std::size_t>(sig.dim());
    const std::size_t lag = static_cast<std::size_t>(channel);
    const std::size_t lead = static_cast<std::size_t>(stream_dim + channel);
    return lvl[lead * n + lag] - lvl[lag * n + lead];
}

}  // namespace sigmarket
