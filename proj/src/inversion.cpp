#include "sigmarket/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sigmarket/random.hpp"

namespace sigmarket {

namespace {

// Genes are integer pip counts per increment.
using Genome = std::vector<long long>;

struct Problem {
    const LogSigVector& target;
    double start;
    const InversionConfig& cfg;
    long long total_pips;  // level-1 constraint on the sum of genes
};

std::vector<double> prices_of(const Problem& pb, const Genome& g) {
    std::vector<double> p(g.size() + 1);
    p[0] = pb.start;
    long long acc = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        acc += g[i];
        p[i + 1] = pb.start + static_cast<double>(acc) * pb.cfg.pip_size;
    }
    return p;
}

double evaluate(const Problem& pb, const Genome& g) {
    auto p = prices_of(pb, g);
    if (pb.cfg.log_prices) {
        for (double& v : p) {
            if (!(v > 0.0)) return std::numeric_limits<double>::infinity();
            v = std::log(v);
        }
    }
    return fitness(PathSample::from_stream(std::move(p)), pb.target);
}

// Shift pips so the genes sum to the level-1 target, spreading the residual
// as evenly as possible.
void repair(Genome& g, long long total) {
    const long long sum = std::accumulate(g.begin(), g.end(), 0LL);
    long long residual = total - sum;
    if (residual == 0) return;
    const long long n = static_cast<long long>(g.size());
    const long long each = residual / n;
    for (auto& v : g) v += each;
    residual -= each * n;
    const long long step = residual > 0 ? 1 : -1;
    for (std::size_t i = 0; residual != 0; ++i, residual -= step) g[i % g.size()] += step;
}

long long snap(double price_units, double pip) { return std::llround(price_units / pip); }

}  // namespace

void InversionConfig::validate() const {
    if (population_size < 2) throw std::invalid_argument("inversion: population_size must be >= 2");
    if (generations < 0) throw std::invalid_argument("inversion: generations must be >= 0");
    if (!(elite_fraction > 0.0 && elite_fraction < 1.0)) throw std::invalid_argument("inversion: elite_fraction must lie in (0, 1)");
    if (!(pip_size > 0.0)) throw std::invalid_argument("inversion: pip_size must be > 0");
    if (!(tolerance > 0.0)) throw std::invalid_argument("inversion: tolerance must be > 0");
    if (path_length < 2) throw std::invalid_argument("inversion: path_length must be >= 2");
    if (!(anneal > 0.0 && anneal <= 1.0)) throw std::invalid_argument("inversion: anneal must lie in (0, 1]");
}

std::uint64_t inversion_seed(std::uint64_t root, std::size_t index) {
    return derive_seed(root, "invert-" + std::to_string(index));
}

double fitness(const PathSample& candidate, const LogSigVector& target) {
    if (candidate.dim() * 2 != target.dim) throw std::invalid_argument("fitness: candidate dimension does not match target");
    const auto ls = lead_lag_log_signature(candidate, target.order);
    if (ls.coords.size() != target.coords.size()) throw std::invalid_argument("fitness: target has wrong coordinate count");
    double sq = 0.0;
    for (std::size_t i = 0; i < ls.coords.size(); ++i) {
        const double d = ls.coords[i] - target.coords[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

InversionResult invert_logsig(const LogSigVector& target, double start_value, const InversionConfig& cfg) {
    cfg.validate();
    if (target.dim != 2) throw std::invalid_argument("invert_logsig: target must be the lead-lag log-signature of a 1-d stream");
    if (target.order < 2) throw std::invalid_argument("invert_logsig: target order must be >= 2");
    if (target.coords.size() != witt_dimension(2, target.order)) {
        throw std::invalid_argument("invert_logsig: target has " + std::to_string(target.coords.size()) +
                                    " coordinates, expected " + std::to_string(witt_dimension(2, target.order)));
    }
    for (double c : target.coords) {
        if (!std::isfinite(c)) throw std::invalid_argument("invert_logsig: non-finite target coordinate");
    }
    if (!std::isfinite(start_value) || (cfg.log_prices && !(start_value > 0.0))) {
        throw std::invalid_argument("invert_logsig: start price must be positive and finite");
    }

    // Lyndon order for dim 2: (0) lag, (1) lead, (0,1) area = -QV/2.
    const double level1 = target.coords[1];
    const double qv = std::max(0.0, -2.0 * target.coords[2]);
    const std::size_t n_genes = static_cast<std::size_t>(cfg.path_length - 1);
    const double end_price = cfg.log_prices ? start_value * std::exp(level1) : start_value + level1;
    const Problem pb{target, start_value, cfg, snap(end_price - start_value, cfg.pip_size)};

    double scale = cfg.mutation_scale;
    if (scale <= 0.0) {
        const double s = std::sqrt(qv / static_cast<double>(n_genes));
        scale = cfg.log_prices ? s * start_value : s;
    }
    scale = std::max(scale, cfg.pip_size);

    Rng rng = make_rng(cfg.seed, 0, "inversion");
    std::normal_distribution<double> n01;
    const std::size_t pop = static_cast<std::size_t>(cfg.population_size);
    std::vector<Genome> population(pop, Genome(n_genes));
    // First candidate: the straight line to the level-1 endpoint.
    repair(population[0], pb.total_pips);
    for (std::size_t i = 1; i < pop; ++i) {
        for (auto& g : population[i]) g = snap(scale * n01(rng), cfg.pip_size);
        repair(population[i], pb.total_pips);
    }

    std::vector<double> score(pop);
    auto score_all = [&](std::size_t from) {
        parallel_for(pop - from, [&](std::size_t i) { score[from + i] = evaluate(pb, population[from + i]); });
    };
    score_all(0);

    const std::size_t n_elite = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.elite_fraction * pop)));
    std::vector<std::size_t> order(pop);
    auto sort_by_score = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    };
    sort_by_score();

    InversionResult result{PathSample::from_stream(prices_of(pb, population[order[0]])), score[order[0]], false, 0, {}};
    Genome best = population[order[0]];
    double best_score = score[order[0]];

    std::uniform_int_distribution<std::size_t> pick(0, pop - 1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto tournament = [&]() -> const Genome& {
        std::size_t winner = pick(rng);
        for (int t = 1; t < 3; ++t) {
            const std::size_t c = pick(rng);
            if (score[c] < score[winner]) winner = c;
        }
        return population[winner];
    };
    const double mutation_rate = std::max(0.2, 1.0 / static_cast<double>(n_genes));

    double sigma = scale;
    for (int gen = 0; gen < cfg.generations; ++gen) {
        if (cfg.early_stop && best_score < cfg.tolerance) break;
        std::vector<Genome> next;
        next.reserve(pop);
        for (std::size_t e = 0; e < n_elite; ++e) next.push_back(population[order[e]]);
        while (next.size() < pop) {
            const Genome& a = tournament();
            const Genome& b = tournament();
            Genome child(n_genes);
            for (std::size_t i = 0; i < n_genes; ++i) child[i] = u01(rng) < 0.5 ? a[i] : b[i];
            bool mutated = false;
            for (auto& g : child) {
                if (u01(rng) < mutation_rate) {
                    g += snap(sigma * n01(rng), cfg.pip_size);
                    mutated = true;
                }
            }
            if (!mutated) child[pick(rng) % n_genes] += snap(sigma * n01(rng), cfg.pip_size);
            repair(child, pb.total_pips);
            next.push_back(std::move(child));
        }
        population = std::move(next);
        // Elites keep their scores; only offspring are re-evaluated.
        std::vector<double> elite_scores(n_elite);
        for (std::size_t e = 0; e < n_elite; ++e) elite_scores[e] = score[order[e]];
        for (std::size_t e = 0; e < n_elite; ++e) score[e] = elite_scores[e];
        score_all(n_elite);
        sort_by_score();
        if (score[order[0]] < best_score) {
            best_score = score[order[0]];
            best = population[order[0]];
        }
        result.best_history.push_back(best_score);
        ++result.generations_run;
        // Annealed, but never below one pip so local moves stay possible.
        sigma = std::max(sigma * cfg.anneal, cfg.pip_size);
    }

    result.path = PathSample::from_stream(prices_of(pb, best));
    result.distance = best_score;
    result.converged = best_score <= cfg.tolerance;
    return result;
}

}  // namespace sigmarket
