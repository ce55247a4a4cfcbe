// Lyndon words and the Lyndon basis of the free Lie algebra.

#ifndef SIGMARKET_LYNDON_HPP
#define SIGMARKET_LYNDON_HPP

#include <cstddef>
#include <vector>

#include "sigmarket/tensor_algebra.hpp"

namespace sigmarket {

using Word = std::vector<int>;

/// Lyndon words over {0..dim-1} of length 1..order, ordered by length and then
/// lexicographically (Duval's algorithm).
std::vector<Word> lyndon_words(int dim, int order);

/// Number of Lyndon words of length <= order (Witt's formula summed over lengths).
std::size_t witt_dimension(int dim, int order);

/// Flat offset of a word inside its tensor level.
std::size_t word_index(const Word& word, int dim);

/// Basis of the truncated free Lie algebra given by the standard bracketing of
/// Lyndon words. Instances are immutable and shared through lyndon_basis().
class LyndonBasis {
public:
    LyndonBasis(int dim, int order);

    int dim() const noexcept { return dim_; }
    int order() const noexcept { return order_; }
    std::size_t size() const noexcept { return words_.size(); }

    const std::vector<Word>& words() const noexcept { return words_; }

    /// Tensor expansion of the bracket P_w for basis element i, restricted to level |w|.
    const std::vector<double>& expansion(std::size_t i) const { return expansions_[i]; }

    /// Sum_i coords[i] P_{w_i} as a tensor series with zero scalar part.
    TensorSeries expand(const std::vector<double>& coords) const;

    /// Inverse of expand on Lie elements. Throws std::domain_error when the
    /// reconstruction residual shows the input is not a Lie element.
    std::vector<double> project(const TensorSeries& lie) const;

private:
    int dim_;
    int order_;
    std::vector<Word> words_;
    std::vector<std::vector<double>> expansions_;
    // Per level: indices into words_, in increasing lexicographic order.
    std::vector<std::vector<std::size_t>> by_level_;
};

/// Cached, thread-safe accessor.
const LyndonBasis& lyndon_basis(int dim, int order);

}  // namespace sigmarket

#endif  // SIGMARKET_LYNDON_HPP
