// Piecewise-linear paths and their signatures.

#ifndef SIGMARKET_PATH_SIG_HPP
#define SIGMARKET_PATH_SIG_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "sigmarket/lyndon.hpp"
#include "sigmarket/tensor_algebra.hpp"

namespace sigmarket {

/// A piecewise-linear path: strictly increasing times and d-dimensional
/// vertices stored row-major (point i occupies values[i*dim .. i*dim+dim)).
class PathSample {
public:
    PathSample(std::vector<double> times, std::vector<double> values, int dim);

    /// One-dimensional stream sampled at times 0, 1, ..., n-1.
    static PathSample from_stream(std::vector<double> values);

    int dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return times_.size(); }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& values() const noexcept { return values_; }

    std::span<const double> point(std::size_t i) const {
        return {values_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    double value(std::size_t i, int channel = 0) const {
        return values_[i * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(channel)];
    }

    /// Copy with times mapped affinely onto [0, 1].
    PathSample with_unit_time() const;

private:
    std::vector<double> times_;
    std::vector<double> values_;
    int dim_;
};

/// Flat log-signature coordinates in the Lyndon basis.
struct LogSigVector {
    int dim = 0;
    int order = 0;
    std::vector<double> coords;
};

/// Lead-lag transform of a d-dimensional stream into a 2d-dimensional path with
/// 2n-1 vertices (lag channels first, then lead channels). Requires n >= 2.
PathSample lead_lag(const PathSample& stream);

/// Truncated signature of a piecewise-linear path.
TensorSeries signature(const PathSample& path, int order);

/// Signature of the lead-lag transform of a stream, computed without
/// materialising the transformed path.
TensorSeries lead_lag_signature(const PathSample& stream, int order);

LogSigVector lyndon_project(const TensorSeries& lie);
TensorSeries lyndon_expand(const LogSigVector& v);

LogSigVector log_signature(const PathSample& path, int order);
LogSigVector lead_lag_log_signature(const PathSample& stream, int order);

/// Group-like element exp(expand(v)).
TensorSeries signature_from_log(const LogSigVector& v);

/// Signature of the concatenation of two paths (Chen). Both inputs must be
/// group-like.
TensorSeries sig_concat(const TensorSeries& a, const TensorSeries& b);

/// sum_k (dX^{(channel)}_k)^2 read off a lead-lag signature of a stream with
/// stream_dim channels: S^{(lead, lag)} - S^{(lag, lead)}.
double lead_lag_quadratic_variation(const TensorSeries& sig, int stream_dim, int channel = 0);

}  // namespace sigmarket

#endif  // SIGMARKET_PATH_SIG_HPP
