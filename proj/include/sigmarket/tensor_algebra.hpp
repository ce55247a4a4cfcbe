// Truncated tensor algebra T^{(N)}(R^d).
//
// An element is stored densely, level by level: level m holds d^m coefficients
// indexed by words (i_1 ... i_m) in row-major order, so the word w = (i_1..i_m)
// sits at offset sum_k i_k * d^(m-k).

#ifndef SIGMARKET_TENSOR_ALGEBRA_HPP
#define SIGMARKET_TENSOR_ALGEBRA_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace sigmarket {

inline constexpr int kMaxTruncationOrder = 10;

class TensorSeries {
public:
    /// Zero element. Throws std::invalid_argument for dim < 1, order < 1 or
    /// order > kMaxTruncationOrder.
    TensorSeries(int dim, int order);

    static TensorSeries one(int dim, int order);
    static TensorSeries zero(int dim, int order) { return TensorSeries(dim, order); }

    int dim() const noexcept { return dim_; }
    int order() const noexcept { return order_; }

    double scalar() const noexcept { return coeffs_[0]; }
    double& scalar() noexcept { return coeffs_[0]; }

    std::span<const double> level(int m) const;
    std::span<double> level(int m);

    /// All coefficients, level 0 first.
    std::span<const double> coefficients() const noexcept { return coeffs_; }
    std::span<double> coefficients() noexcept { return coeffs_; }

    std::size_t level_size(int m) const { return level_offset_[m + 1] - level_offset_[m]; }

    bool same_shape(const TensorSeries& other) const noexcept {
        return dim_ == other.dim_ && order_ == other.order_;
    }

    TensorSeries& operator+=(const TensorSeries& other);
    TensorSeries& operator-=(const TensorSeries& other);
    TensorSeries& operator*=(double factor) noexcept;

private:
    int dim_;
    int order_;
    std::vector<std::size_t> level_offset_;  // order + 2 entries
    std::vector<double> coeffs_;
};

TensorSeries operator+(TensorSeries a, const TensorSeries& b);
TensorSeries operator-(TensorSeries a, const TensorSeries& b);
TensorSeries operator*(TensorSeries a, double factor);

/// Truncated tensor product. Throws std::invalid_argument on shape mismatch.
TensorSeries tensor_mul(const TensorSeries& a, const TensorSeries& b);

/// Exponential of a Lie-type element (scalar part must be zero).
TensorSeries tensor_exp(const TensorSeries& x);

/// Logarithm of a group-like element (scalar part must be one).
TensorSeries tensor_log(const TensorSeries& s);

/// Graded Euclidean inner product sum_m <a_m, b_m>.
double tensor_inner(const TensorSeries& a, const TensorSeries& b);

/// Largest absolute coefficient difference; shapes must agree.
double max_abs_diff(const TensorSeries& a, const TensorSeries& b);

/// Multiplies level m by factor^m (the dilation delta_factor).
TensorSeries dilate(const TensorSeries& x, double factor);

}  // namespace sigmarket

#endif  // SIGMARKET_TENSOR_ALGEBRA_HPP
