#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "sevo/sparse.hpp"

namespace sevo {

/// Knobs for the sparse-connectivity lifecycle.
///   epsilon      — sparsity control: connection probability between layers of
///                  widths a and b is min(epsilon*(a+b)/(a*b), 1)
///   zeta         — rewiring rate: fraction pruned (and regrown) per evolution
///   regrow_sigma — std of the Gaussian used for regrown weights
struct TopologyParams {
    double epsilon = 10.0;
    double zeta = 0.3;
    double regrow_sigma = 0.01;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct EvolutionReport {
    index_t removed = 0;
    index_t added = 0;
    index_t nnz_before = 0;
    index_t nnz_after = 0;
    double elapsed = 0.0; // seconds, wall clock around the evolution call
};

/// Two independent generator streams, one for candidate positions and one for
/// regrown values. Both evolution implementations consume them in the same
/// order, so their outputs are bit-identical on identical inputs.
struct EvolveRng {
    std::mt19937_64 pos;
    std::mt19937_64 val;
};

EvolveRng make_evolve_rng(std::uint64_t seed);

/// Erdős–Rényi bipartite initialization of an (n_out x n_in) weight matrix:
/// every position present independently with P = min(eps*(n_in+n_out)/(n_in*n_out), 1),
/// present weights i.i.d. Gaussian(0, weight_sigma^2) with exact zeros resampled.
/// Deterministic given params.rng_seed.
CsrMatrix er_init(index_t n_in, index_t n_out, const TopologyParams& params, real weight_sigma);

/// Connection-probability helper (the value before any weight is drawn).
double er_probability(index_t n_in, index_t n_out, double epsilon);

/// Indices of the floor(zeta * #negatives) negative values closest to zero
/// plus the floor(zeta * #positives) positive values closest to zero.
/// Ties broken toward the lower linear index. Result sorted ascending.
std::vector<std::size_t> prune_selection(std::span<const real> vals, double zeta);

/// Prune-regrow cycle, loop-based scheme: the matrix is expanded to per-row
/// ordered entry lists, pruned entries are erased one by one, and replacement
/// connections are drawn one candidate at a time, testing occupancy against
/// the live structure. nnz is preserved exactly; surviving values are
/// untouched bits; regrown positions are disjoint from survivors.
/// When pruned_out is given it receives the pruned entry indices (positions
/// into w.vals), which callers use to realign per-connection optimizer state.
std::pair<CsrMatrix, EvolutionReport> evolve_v1(const CsrMatrix& w, const TopologyParams& params,
                                                EvolveRng& rng,
                                                std::vector<std::size_t>* pruned_out);
std::pair<CsrMatrix, EvolutionReport> evolve_v1(const CsrMatrix& w, const TopologyParams& params,
                                                EvolveRng& rng);

/// Prune-regrow cycle, fast scheme: one vectorized pass partitions the value
/// array against the prune set, then replacement candidates are generated in
/// batches with duplicate/collision rejection against a hash of occupied
/// positions. Same contract and same output as evolve_v1.
std::pair<CsrMatrix, EvolutionReport> evolve_v2(const CsrMatrix& w, const TopologyParams& params,
                                                EvolveRng& rng,
                                                std::vector<std::size_t>* pruned_out);
std::pair<CsrMatrix, EvolutionReport> evolve_v2(const CsrMatrix& w, const TopologyParams& params,
                                                EvolveRng& rng);

// Seed-from-params conveniences.
std::pair<CsrMatrix, EvolutionReport> evolve_v1(const CsrMatrix& w, const TopologyParams& params);
std::pair<CsrMatrix, EvolutionReport> evolve_v2(const CsrMatrix& w, const TopologyParams& params);

/// Expected total connection count of an architecture under er_init:
/// sum over adjacent layer pairs of round(min(P,1) * n_l * n_{l-1}).
index_t expected_nnz(std::span<const index_t> layer_widths, double epsilon);

/// Fully-connected counterpart: sum of n_l * n_{l-1}.
index_t dense_connection_count(std::span<const index_t> layer_widths);

namespace detail {
/// Shared by both evolve implementations: when survivors occupy more than
/// half the matrix, rejection sampling may thrash, so free cells are
/// enumerated outright and a partial Fisher-Yates pass picks `count` of them.
/// Returns (row, col) pairs in acceptance order.
std::vector<std::pair<index_t, index_t>> sample_free_cells_dense(
    const std::vector<std::uint64_t>& occupied_sorted, index_t n_rows, index_t n_cols,
    index_t count, std::mt19937_64& pos_rng);
} // namespace detail

} // namespace sevo
