// Seed derivation and small parallel helpers.
//
// Every random stream is keyed by (root seed, label, index) so results do not
// depend on evaluation order or thread count.

#ifndef SIGMARKET_RANDOM_HPP
#define SIGMARKET_RANDOM_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string_view>

namespace sigmarket {

using Rng = std::mt19937_64;

/// FNV-1a over the bytes of text.
std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Child seed for a labelled stage ("train", "generate", ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

/// Independent generator for item `index` of a labelled stream.
Rng make_rng(std::uint64_t seed, std::uint64_t index = 0, std::string_view label = {});

/// Worker count: SIGMARKET_THREADS when set (>= 1), else hardware concurrency.
unsigned thread_count();

/// Runs body(i) for i in [0, n). Chunks are statically assigned, so any
/// per-index result written into preallocated storage is deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sigmarket

#endif  // SIGMARKET_RANDOM_HPP
