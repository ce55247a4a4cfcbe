#include "sigmarket/tensor_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sigmarket {

namespace {

constexpr double kScalarTolerance = 1e-9;

void require_same_shape(const TensorSeries& a, const TensorSeries& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch (dim " + std::to_string(a.dim()) +
                                    "/" + std::to_string(b.dim()) + ", order " + std::to_string(a.order()) +
                                    "/" + std::to_string(b.order()) + ")");
    }
}

// out += a_i (x) b_j, written into the level i+j block of out.
void accumulate_outer(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    const std::size_t nb = b.size();
    for (std::size_t ia = 0; ia < a.size(); ++ia) {
        const double av = a[ia];
        if (av == 0.0) continue;
        double* dst = out.data() + ia * nb;
        for (std::size_t ib = 0; ib < nb; ++ib) dst[ib] += av * b[ib];
    }
}

}  // namespace

TensorSeries::TensorSeries(int dim, int order) : dim_(dim), order_(order) {
    if (dim < 1) throw std::invalid_argument("TensorSeries: dim must be >= 1");
    if (order < 1) throw std::invalid_argument("TensorSeries: order must be >= 1");
    if (order > kMaxTruncationOrder) {
        throw std::invalid_argument("TensorSeries: order " + std::to_string(order) + " exceeds cap " +
                                    std::to_string(kMaxTruncationOrder));
    }
    level_offset_.resize(static_cast<std::size_t>(order) + 2);
    level_offset_[0] = 0;
    std::size_t size = 1;
    for (int m = 0; m <= order; ++m) {
        level_offset_[m + 1] = level_offset_[m] + size;
        size *= static_cast<std::size_t>(dim);
    }
    coeffs_.assign(level_offset_.back(), 0.0);
}

TensorSeries TensorSeries::one(int dim, int order) {
    TensorSeries t(dim, order);
    t.coeffs_[0] = 1.0;
    return t;
}

std::span<const double> TensorSeries::level(int m) const {
    if (m < 0 || m > order_) throw std::out_of_range("TensorSeries::level");
    return {coeffs_.data() + level_offset_[m], level_offset_[m + 1] - level_offset_[m]};
}

std::span<double> TensorSeries::level(int m) {
    if (m < 0 || m > order_) throw std::out_of_range("TensorSeries::level");
    return {coeffs_.data() + level_offset_[m], level_offset_[m + 1] - level_offset_[m]};
}

TensorSeries& TensorSeries::operator+=(const TensorSeries& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
    return *this;
}

TensorSeries& TensorSeries::operator-=(const TensorSeries& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
    return *this;
}

TensorSeries& TensorSeries::operator*=(double factor) noexcept {
    for (double& c : coeffs_) c *= factor;
    return *this;
}

TensorSeries operator+(TensorSeries a, const TensorSeries& b) { return a += b; }
TensorSeries operator-(TensorSeries a, const TensorSeries& b) { return a -= b; }
TensorSeries operator*(TensorSeries a, double factor) { return a *= factor; }

TensorSeries tensor_mul(const TensorSeries& a, const TensorSeries& b) {
    require_same_shape(a, b, "tensor_mul");
    TensorSeries out(a.dim(), a.order());
    for (int m = 0; m <= a.order(); ++m) {
        auto dst = out.level(m);
        for (int i = 0; i <= m; ++i) accumulate_outer(a.level(i), b.level(m - i), dst);
    }
    return out;
}

TensorSeries tensor_exp(const TensorSeries& x) {
    if (std::abs(x.scalar()) > kScalarTolerance) {
        throw std::invalid_argument("tensor_exp: scalar part must be zero");
    }
    TensorSeries lie = x;
    lie.scalar() = 0.0;
    // Horner: exp(x) = 1 + x(1 + x/2(1 + x/3(...)))
    TensorSeries result = TensorSeries::one(x.dim(), x.order());
    for (int k = x.order(); k >= 1; --k) {
        result = tensor_mul(lie, result);
        result *= 1.0 / k;
        result.scalar() += 1.0;
    }
    return result;
}

TensorSeries tensor_log(const TensorSeries& s) {
    if (std::abs(s.scalar() - 1.0) > kScalarTolerance) {
        throw std::invalid_argument("tensor_log: scalar part must be one");
    }
    TensorSeries y = s;
    y.scalar() = 0.0;
    // Horner: log(1+y) = y(1 - y(1/2 - y(1/3 - ...)))
    const int n = s.order();
    TensorSeries acc = TensorSeries::zero(s.dim(), n);
    acc.scalar() = (n % 2 == 1 ? 1.0 : -1.0) / n;
    for (int k = n - 1; k >= 1; --k) {
        acc = tensor_mul(y, acc);
        acc.scalar() += (k % 2 == 1 ? 1.0 : -1.0) / k;
    }
    return tensor_mul(y, acc);
}

double tensor_inner(const TensorSeries& a, const TensorSeries& b) {
    require_same_shape(a, b, "tensor_inner");
    auto ca = a.coefficients();
    auto cb = b.coefficients();
    double sum = 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) sum += ca[i] * cb[i];
    return sum;
}

double max_abs_diff(const TensorSeries& a, const TensorSeries& b) {
    require_same_shape(a, b, "max_abs_diff");
    auto ca = a.coefficients();
    auto cb = b.coefficients();
    double worst = 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) worst = std::max(worst, std::abs(ca[i] - cb[i]));
    return worst;
}

TensorSeries dilate(const TensorSeries& x, double factor) {
    TensorSeries out = x;
    double f = 1.0;
    for (int m = 1; m <= x.order(); ++m) {
        f *= factor;
        for (double& c : out.level(m)) c *= f;
    }
    return out;
}

}  // namespace sigmarket
