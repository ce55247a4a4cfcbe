#include "sigmarket/lyndon.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace sigmarket {

namespace {

bool is_lyndon(const Word& w) {
    // Strictly smaller than every proper rotation.
    const std::size_t n = w.size();
    for (std::size_t r = 1; r < n; ++r) {
        for (std::size_t k = 0; k < n; ++k) {
            const int a = w[k];
            const int b = w[(k + r) % n];
            if (a < b) break;
            if (a > b) return false;
            if (k + 1 == n) return false;  // periodic
        }
    }
    return true;
}

std::size_t ipow(std::size_t base, int exp) {
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

int mobius(int n) {
    int result = 1;
    for (int p = 2; p * p <= n; ++p) {
        if (n % p == 0) {
            n /= p;
            if (n % p == 0) return 0;
            result = -result;
        }
    }
    if (n > 1) result = -result;
    return result;
}

}  // namespace

std::vector<Word> lyndon_words(int dim, int order) {
    if (dim < 1 || order < 1) throw std::invalid_argument("lyndon_words: dim and order must be >= 1");
    std::vector<Word> out;
    Word w{-1};
    while (!w.empty()) {
        ++w.back();
        out.push_back(w);
        const std::size_t m = w.size();
        while (w.size() < static_cast<std::size_t>(order)) w.push_back(w[w.size() - m]);
        while (!w.empty() && w.back() == dim - 1) w.pop_back();
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Word& a, const Word& b) { return a.size() < b.size(); });
    return out;
}

std::size_t witt_dimension(int dim, int order) {
    std::size_t total = 0;
    for (int n = 1; n <= order; ++n) {
        long long sum = 0;
        for (int k = 1; k <= n; ++k) {
            if (n % k == 0) sum += mobius(k) * static_cast<long long>(ipow(dim, n / k));
        }
        total += static_cast<std::size_t>(sum / n);
    }
    return total;
}

std::size_t word_index(const Word& word, int dim) {
    std::size_t idx = 0;
    for (int letter : word) idx = idx * static_cast<std::size_t>(dim) + static_cast<std::size_t>(letter);
    return idx;
}

LyndonBasis::LyndonBasis(int dim, int order) : dim_(dim), order_(order), words_(lyndon_words(dim, order)) {
    if (order > kMaxTruncationOrder) throw std::invalid_argument("LyndonBasis: order exceeds cap");
    std::map<Word, std::size_t> position;
    for (std::size_t i = 0; i < words_.size(); ++i) position.emplace(words_[i], i);

    expansions_.resize(words_.size());
    by_level_.resize(static_cast<std::size_t>(order) + 1);
    for (std::size_t i = 0; i < words_.size(); ++i) {
        const Word& w = words_[i];
        by_level_[w.size()].push_back(i);
        if (w.size() == 1) {
            expansions_[i].assign(static_cast<std::size_t>(dim), 0.0);
            expansions_[i][static_cast<std::size_t>(w[0])] = 1.0;
            continue;
        }
        // Standard factorisation w = uv, v the longest proper Lyndon suffix.
        std::size_t split = 1;
        for (; split < w.size(); ++split) {
            if (is_lyndon(Word(w.begin() + static_cast<std::ptrdiff_t>(split), w.end()))) break;
        }
        const Word u(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(split));
        const Word v(w.begin() + static_cast<std::ptrdiff_t>(split), w.end());
        const auto& pu = expansions_[position.at(u)];
        const auto& pv = expansions_[position.at(v)];
        auto& pw = expansions_[i];
        pw.assign(ipow(static_cast<std::size_t>(dim), static_cast<int>(w.size())), 0.0);
        const std::size_t nu = pu.size();
        const std::size_t nv = pv.size();
        for (std::size_t a = 0; a < nu; ++a) {
            if (pu[a] == 0.0) continue;
            for (std::size_t b = 0; b < nv; ++b) {
                if (pv[b] == 0.0) continue;
                pw[a * nv + b] += pu[a] * pv[b];
                pw[b * nu + a] -= pu[a] * pv[b];
            }
        }
    }
}

TensorSeries LyndonBasis::expand(const std::vector<double>& coords) const {
    if (coords.size() != words_.size()) {
        throw std::invalid_argument("LyndonBasis::expand: expected " + std::to_string(words_.size()) +
                                    " coordinates, got " + std::to_string(coords.size()));
    }
    TensorSeries out(dim_, order_);
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (coords[i] == 0.0) continue;
        auto lvl = out.level(static_cast<int>(words_[i].size()));
        const auto& e = expansions_[i];
        for (std::size_t k = 0; k < e.size(); ++k) lvl[k] += coords[i] * e[k];
    }
    return out;
}

std::vector<double> LyndonBasis::project(const TensorSeries& lie) const {
    if (lie.dim() != dim_ || lie.order() != order_) throw std::invalid_argument("LyndonBasis::project: shape mismatch");
    std::vector<double> coords(words_.size(), 0.0);
    // P_u has coefficient 1 on u and is supported on words >= u, so the map
    // from coordinates to Lyndon-word coefficients is unit lower triangular.
    for (int m = 1; m <= order_; ++m) {
        auto lvl = lie.level(m);
        for (std::size_t wi : by_level_[static_cast<std::size_t>(m)]) {
            const std::size_t idx = word_index(words_[wi], dim_);
            double c = lvl[idx];
            for (std::size_t ui : by_level_[static_cast<std::size_t>(m)]) {
                if (ui == wi) break;
                c -= coords[ui] * expansions_[ui][idx];
            }
            coords[wi] = c;
        }
    }
    const TensorSeries back = expand(coords);
    double scale = 1.0;
    for (double v : lie.coefficients()) scale = std::max(scale, std::abs(v));
    const double residual = std::max(std::abs(lie.scalar()), max_abs_diff(back, [&] {
                                         TensorSeries t = lie;
                                         t.scalar() = 0.0;
                                         return t;
                                     }()));
    if (residual > 1e-8 * scale) {
        throw std::domain_error("LyndonBasis::project: input is not a Lie element (residual " +
                                std::to_string(residual) + ")");
    }
    return coords;
}

const LyndonBasis& lyndon_basis(int dim, int order) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::unique_ptr<LyndonBasis>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{dim, order}];
    if (!slot) slot = std::make_unique<LyndonBasis>(dim, order);
    return *slot;
}

}  // namespace sigmarket
