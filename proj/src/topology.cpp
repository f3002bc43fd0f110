#include "sevo/topology.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <list>
#include <stdexcept>

namespace sevo {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

real nonzero_normal(std::mt19937_64& rng, std::normal_distribution<real>& dist) {
    real v;
    do {
        v = dist(rng);
    } while (v == real(0));
    return v;
}

std::uint64_t cell_key(index_t row, index_t col, index_t n_cols) {
    return static_cast<std::uint64_t>(row) * static_cast<std::uint64_t>(n_cols) +
           static_cast<std::uint64_t>(col);
}

// Selection without the canonical-order sort, for the evolution hot path.
// Layout: pruned negatives first, then pruned positives; order within each
// block is whatever nth_element left behind.
std::vector<std::size_t> prune_selection_unordered(std::span<const real> vals, double zeta) {
    if (!(zeta >= 0.0 && zeta < 1.0))
        throw std::invalid_argument("prune_selection: zeta must be in [0, 1)");

    using Entry = std::pair<real, std::uint64_t>;
    std::vector<Entry> neg, pos;
    neg.reserve(vals.size() / 2);
    pos.reserve(vals.size() / 2);
    for (std::size_t k = 0; k < vals.size(); ++k) {
        if (vals[k] < 0) neg.push_back({vals[k], k});
        else if (vals[k] > 0) pos.push_back({vals[k], k});
    }
    const auto k_neg = static_cast<std::size_t>(zeta * static_cast<double>(neg.size()));
    const auto k_pos = static_cast<std::size_t>(zeta * static_cast<double>(pos.size()));

    // Negatives closest to zero are the largest values; positives closest to
    // zero are the smallest. Equal values resolve toward the lower index.
    if (k_neg < neg.size()) {
        std::nth_element(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(k_neg), neg.end(),
                         [](const Entry& a, const Entry& b) {
                             if (a.first != b.first) return a.first > b.first;
                             return a.second < b.second;
                         });
    }
    if (k_pos < pos.size()) {
        std::nth_element(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(k_pos), pos.end(),
                         [](const Entry& a, const Entry& b) {
                             if (a.first != b.first) return a.first < b.first;
                             return a.second < b.second;
                         });
    }

    std::vector<std::size_t> out;
    out.reserve(k_neg + k_pos);
    for (std::size_t k = 0; k < k_neg; ++k) out.push_back(static_cast<std::size_t>(neg[k].second));
    for (std::size_t k = 0; k < k_pos; ++k) out.push_back(static_cast<std::size_t>(pos[k].second));
    return out;
}

// Per-sign prune thresholds plus how many boundary-valued entries still fall
// inside the quota. Lets a per-entry comparison loop reproduce the selection
// exactly, ties included.
struct PruneThresholds {
    bool have_neg = false, have_pos = false;
    real neg_thr = 0, pos_thr = 0;
    index_t neg_budget = 0, pos_budget = 0;

    static PruneThresholds from_selection(std::span<const real> vals,
                                          std::span<const std::size_t> selection) {
        PruneThresholds t;
        for (auto k : selection) {
            const real v = vals[k];
            if (v < 0) {
                if (!t.have_neg || v < t.neg_thr) {
                    t.neg_thr = v;
                    t.neg_budget = 1;
                    t.have_neg = true;
                } else if (v == t.neg_thr) {
                    ++t.neg_budget;
                }
            } else {
                if (!t.have_pos || v > t.pos_thr) {
                    t.pos_thr = v;
                    t.pos_budget = 1;
                    t.have_pos = true;
                } else if (v == t.pos_thr) {
                    ++t.pos_budget;
                }
            }
        }
        return t;
    }

    bool prune(real v) {
        if (v < 0 && have_neg) {
            if (v > neg_thr) return true;
            if (v == neg_thr && neg_budget > 0) {
                --neg_budget;
                return true;
            }
        } else if (v > 0 && have_pos) {
            if (v < pos_thr) return true;
            if (v == pos_thr && pos_budget > 0) {
                --pos_budget;
                return true;
            }
        }
        return false;
    }
};

// Regrow by rejection needs headroom; past half full the free cells are
// enumerated instead so a single pass terminates regardless of density.
bool use_dense_fallback(index_t survivors, index_t n_rows, index_t n_cols) {
    const double total = static_cast<double>(n_rows) * static_cast<double>(n_cols);
    return static_cast<double>(survivors) > 0.5 * total;
}

EvolutionReport make_report(index_t removed, index_t nnz_before, index_t nnz_after,
                            clock_type::time_point t0) {
    EvolutionReport rep;
    rep.removed = removed;
    rep.added = removed;
    rep.nnz_before = nnz_before;
    rep.nnz_after = nnz_after;
    rep.elapsed = seconds_since(t0);
    return rep;
}

void finish_selection(std::vector<std::size_t>&& selection, std::vector<std::size_t>* out) {
    if (!out) return;
    std::sort(selection.begin(), selection.end());
    *out = std::move(selection);
}

} // namespace

void TopologyParams::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("TopologyParams: epsilon must be > 0");
    if (!(zeta >= 0.0 && zeta < 1.0))
        throw std::invalid_argument("TopologyParams: zeta must be in [0, 1)");
    if (!(regrow_sigma > 0.0))
        throw std::invalid_argument("TopologyParams: regrow_sigma must be > 0");
}

EvolveRng make_evolve_rng(std::uint64_t seed) {
    EvolveRng rng;
    std::seed_seq pos_seq{seed, std::uint64_t(0x706f73)};
    std::seed_seq val_seq{seed, std::uint64_t(0x76616c)};
    rng.pos.seed(pos_seq);
    rng.val.seed(val_seq);
    return rng;
}

double er_probability(index_t n_in, index_t n_out, double epsilon) {
    const double dense = static_cast<double>(n_in) * static_cast<double>(n_out);
    return std::min(epsilon * static_cast<double>(n_in + n_out) / dense, 1.0);
}

CsrMatrix er_init(index_t n_in, index_t n_out, const TopologyParams& params, real weight_sigma) {
    params.validate();
    if (n_in < 1 || n_out < 1) throw std::invalid_argument("er_init: layer widths must be >= 1");
    if (!(weight_sigma > 0)) throw std::invalid_argument("er_init: weight_sigma must be > 0");

    const double p = er_probability(n_in, n_out, params.epsilon);
    const std::uint64_t total =
        static_cast<std::uint64_t>(n_in) * static_cast<std::uint64_t>(n_out);

    std::mt19937_64 rng(params.rng_seed);
    std::normal_distribution<real> noise(0, weight_sigma);

    CsrMatrix m;
    m.n_rows = n_out;
    m.n_cols = n_in;
    m.row_ptr.assign(static_cast<std::size_t>(n_out) + 1, 0);

    if (p >= 1.0) {
        m.col_idx.reserve(total);
        m.vals.reserve(total);
        for (index_t i = 0; i < n_out; ++i) {
            for (index_t j = 0; j < n_in; ++j) {
                m.col_idx.push_back(j);
                m.vals.push_back(nonzero_normal(rng, noise));
            }
            m.row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<index_t>(m.col_idx.size());
        }
        return m;
    }

    // Skip-sampling of the Bernoulli(p) process over the flattened position
    // space: geometric jumps between hits keep the cost O(nnz) instead of
    // O(n_in * n_out), which is what makes million-neuron layers feasible.
    const auto expect = static_cast<std::size_t>(p * static_cast<double>(total) * 1.05) + 16;
    m.col_idx.reserve(expect);
    m.vals.reserve(expect);

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double log1mp = std::log1p(-p);
    std::vector<index_t> row_counts(static_cast<std::size_t>(n_out), 0);
    std::uint64_t pos = 0;
    while (pos < total) {
        const double u = u01(rng);
        const double skip = std::floor(std::log1p(-u) / log1mp);
        if (skip >= static_cast<double>(total - pos)) break;
        pos += static_cast<std::uint64_t>(skip);
        const index_t row = static_cast<index_t>(pos / static_cast<std::uint64_t>(n_in));
        const index_t col = static_cast<index_t>(pos % static_cast<std::uint64_t>(n_in));
        m.col_idx.push_back(col);
        m.vals.push_back(nonzero_normal(rng, noise));
        ++row_counts[static_cast<std::size_t>(row)];
        ++pos;
    }
    for (index_t i = 0; i < n_out; ++i) {
        m.row_ptr[static_cast<std::size_t>(i) + 1] =
            m.row_ptr[static_cast<std::size_t>(i)] + row_counts[static_cast<std::size_t>(i)];
    }
    return m;
}

std::vector<std::size_t> prune_selection(std::span<const real> vals, double zeta) {
    auto out = prune_selection_unordered(vals, zeta);
    std::sort(out.begin(), out.end());
    return out;
}

namespace detail {

std::vector<std::pair<index_t, index_t>> sample_free_cells_dense(
    const std::vector<std::uint64_t>& occupied_sorted, index_t n_rows, index_t n_cols,
    index_t count, std::mt19937_64& pos_rng) {
    const std::uint64_t total =
        static_cast<std::uint64_t>(n_rows) * static_cast<std::uint64_t>(n_cols);
    std::vector<std::uint64_t> free_cells;
    free_cells.reserve(static_cast<std::size_t>(total - occupied_sorted.size()));
    std::size_t oi = 0;
    for (std::uint64_t key = 0; key < total; ++key) {
        if (oi < occupied_sorted.size() && occupied_sorted[oi] == key) {
            ++oi;
        } else {
            free_cells.push_back(key);
        }
    }
    if (static_cast<std::uint64_t>(count) > free_cells.size())
        throw std::logic_error("sample_free_cells_dense: not enough free cells");

    std::vector<std::pair<index_t, index_t>> out;
    out.reserve(static_cast<std::size_t>(count));
    for (index_t t = 0; t < count; ++t) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(t),
                                                        free_cells.size() - 1);
        std::swap(free_cells[static_cast<std::size_t>(t)], free_cells[pick(pos_rng)]);
        const std::uint64_t key = free_cells[static_cast<std::size_t>(t)];
        out.emplace_back(static_cast<index_t>(key / static_cast<std::uint64_t>(n_cols)),
                         static_cast<index_t>(key % static_cast<std::uint64_t>(n_cols)));
    }
    return out;
}

} // namespace detail

// Implementation I. The matrix is expanded into the linked-list sparse
// format (sorted row lists); every edit is an individual walk-and-splice,
// and replacement connections are tested one candidate at a time against
// the live structure.
std::pair<CsrMatrix, EvolutionReport> evolve_v1(const CsrMatrix& w, const TopologyParams& params,
                                                EvolveRng& rng,
                                                std::vector<std::size_t>* pruned_out) {
    const auto t0 = clock_type::now();
    params.validate();
    const index_t nnz0 = w.nnz();

    auto selection = prune_selection_unordered(w.vals, params.zeta);
    const auto removed = static_cast<index_t>(selection.size());
    PruneThresholds thresholds = PruneThresholds::from_selection(w.vals, selection);

    using Row = std::list<std::pair<index_t, real>>;
    std::vector<Row> rows(static_cast<std::size_t>(w.n_rows));
    for (index_t i = 0; i < w.n_rows; ++i) {
        Row& row = rows[static_cast<std::size_t>(i)];
        for (index_t k = w.row_ptr[static_cast<std::size_t>(i)];
             k < w.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
            row.emplace_back(w.col_idx[static_cast<std::size_t>(k)],
                             w.vals[static_cast<std::size_t>(k)]);
    }

    // Removal of small weights: compare each extracted value against the
    // thresholds, zeroing hits through an indexed row access.
    for (index_t i = 0; i < w.n_rows; ++i) {
        for (index_t k = w.row_ptr[static_cast<std::size_t>(i)];
             k < w.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
            if (!thresholds.prune(w.vals[static_cast<std::size_t>(k)])) continue;
            const index_t c = w.col_idx[static_cast<std::size_t>(k)];
            Row& row = rows[static_cast<std::size_t>(i)];
            for (auto it = row.begin(); it != row.end(); ++it) {
                if (it->first == c) {
                    row.erase(it);
                    break;
                }
            }
        }
    }

    const index_t survivors = nnz0 - removed;
    std::normal_distribution<real> noise(0, static_cast<real>(params.regrow_sigma));

    // Addition of random weights, one candidate at a time.
    if (removed > 0) {
        if (use_dense_fallback(survivors, w.n_rows, w.n_cols)) {
            std::vector<std::uint64_t> occupied;
            occupied.reserve(static_cast<std::size_t>(survivors));
            for (index_t i = 0; i < w.n_rows; ++i)
                for (const auto& e : rows[static_cast<std::size_t>(i)])
                    occupied.push_back(cell_key(i, e.first, w.n_cols));
            const auto cells =
                detail::sample_free_cells_dense(occupied, w.n_rows, w.n_cols, removed, rng.pos);
            for (const auto& [r, c] : cells) {
                Row& row = rows[static_cast<std::size_t>(r)];
                auto it = row.begin();
                while (it != row.end() && it->first < c) ++it;
                row.insert(it, {c, nonzero_normal(rng.val, noise)});
            }
        } else {
            std::uniform_int_distribution<index_t> row_dist(0, w.n_rows - 1);
            std::uniform_int_distribution<index_t> col_dist(0, w.n_cols - 1);
            index_t added = 0;
            while (added < removed) {
                const index_t r = row_dist(rng.pos);
                const index_t c = col_dist(rng.pos);
                Row& row = rows[static_cast<std::size_t>(r)];
                auto it = row.begin();
                while (it != row.end() && it->first < c) ++it;
                if (it != row.end() && it->first == c) continue; // occupied, redraw
                row.insert(it, {c, nonzero_normal(rng.val, noise)});
                ++added;
            }
        }
    }

    CsrMatrix out;
    out.n_rows = w.n_rows;
    out.n_cols = w.n_cols;
    out.row_ptr.assign(static_cast<std::size_t>(w.n_rows) + 1, 0);
    out.col_idx.reserve(static_cast<std::size_t>(nnz0));
    out.vals.reserve(static_cast<std::size_t>(nnz0));
    for (index_t i = 0; i < w.n_rows; ++i) {
        for (const auto& [col, val] : rows[static_cast<std::size_t>(i)]) {
            out.col_idx.push_back(col);
            out.vals.push_back(val);
        }
        out.row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<index_t>(out.col_idx.size());
    }

    finish_selection(std::move(selection), pruned_out);
    return {std::move(out), make_report(removed, nnz0, nnz0, t0)};
}

// Implementation II (fast weights evolution). One bulk pass drops the pruned
// entries from flat arrays; replacement candidates are drawn in batches,
// bucketed by row, deduplicated, and collision-checked against the survivor
// arrays, so the work stays in array passes rather than per-element
// structure edits.
std::pair<CsrMatrix, EvolutionReport> evolve_v2(const CsrMatrix& w, const TopologyParams& params,
                                                EvolveRng& rng,
                                                std::vector<std::size_t>* pruned_out) {
    const auto t0 = clock_type::now();
    params.validate();
    const index_t nnz0 = w.nnz();

    auto selection = prune_selection_unordered(w.vals, params.zeta);
    const auto removed = static_cast<index_t>(selection.size());
    const index_t survivors = nnz0 - removed;

    // Vectorized removal: flag pruned entry indices, compact columns/values.
    std::vector<std::uint8_t> removed_flag(static_cast<std::size_t>(nnz0), 0);
    for (auto k : selection) removed_flag[k] = 1;

    std::vector<index_t> kept_row_ptr(static_cast<std::size_t>(w.n_rows) + 1, 0);
    std::vector<index_t> kept_cols;
    std::vector<real> kept_vals;
    kept_cols.reserve(static_cast<std::size_t>(survivors));
    kept_vals.reserve(static_cast<std::size_t>(survivors));
    for (index_t i = 0; i < w.n_rows; ++i) {
        const index_t lo = w.row_ptr[static_cast<std::size_t>(i)];
        const index_t hi = w.row_ptr[static_cast<std::size_t>(i) + 1];
        for (index_t k = lo; k < hi; ++k) {
            if (removed_flag[static_cast<std::size_t>(k)]) continue;
            kept_cols.push_back(w.col_idx[static_cast<std::size_t>(k)]);
            kept_vals.push_back(w.vals[static_cast<std::size_t>(k)]);
        }
        kept_row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<index_t>(kept_cols.size());
    }

    // Regrowth. Each batch ends up sorted by (row, col) with values bound in
    // acceptance (draw) order, matching what the incremental scheme consumes.
    std::vector<std::uint64_t> new_keys;
    std::vector<real> new_vals;
    if (removed > 0) {
        std::normal_distribution<real> noise(0, static_cast<real>(params.regrow_sigma));
        if (use_dense_fallback(survivors, w.n_rows, w.n_cols)) {
            std::vector<std::uint64_t> occupied;
            occupied.reserve(static_cast<std::size_t>(survivors));
            for (index_t i = 0; i < w.n_rows; ++i)
                for (index_t a = kept_row_ptr[static_cast<std::size_t>(i)];
                     a < kept_row_ptr[static_cast<std::size_t>(i) + 1]; ++a)
                    occupied.push_back(
                        cell_key(i, kept_cols[static_cast<std::size_t>(a)], w.n_cols));
            const auto cells = detail::sample_free_cells_dense(occupied, w.n_rows, w.n_cols,
                                                               removed, rng.pos);
            std::vector<std::pair<std::uint64_t, real>> accepted;
            accepted.reserve(cells.size());
            for (const auto& [r, c] : cells)
                accepted.push_back({cell_key(r, c, w.n_cols), nonzero_normal(rng.val, noise)});
            std::sort(accepted.begin(), accepted.end());
            new_keys.reserve(accepted.size());
            new_vals.reserve(accepted.size());
            for (const auto& [key, val] : accepted) {
                new_keys.push_back(key);
                new_vals.push_back(val);
            }
        } else {
            std::uniform_int_distribution<index_t> row_dist(0, w.n_rows - 1);
            std::uniform_int_distribution<index_t> col_dist(0, w.n_cols - 1);

            // Batch blocks, each sorted by key; merged pairwise at the end.
            std::vector<std::pair<std::vector<std::uint64_t>, std::vector<real>>> blocks;
            std::vector<std::uint64_t> accepted_sorted;
            accepted_sorted.reserve(static_cast<std::size_t>(removed));

            std::vector<index_t> cand_rows, cand_cols, bucket_ptr, bucket_pos;
            std::vector<std::pair<index_t, index_t>> by_row; // (col, draw idx) in row buckets
            std::vector<std::uint8_t> accept_flag;
            std::vector<real> draw_vals;
            std::vector<std::pair<std::uint64_t, index_t>> batch_accepted;

            index_t remaining = removed;
            while (remaining > 0) {
                const index_t b_n = remaining;
                cand_rows.resize(static_cast<std::size_t>(b_n));
                cand_cols.resize(static_cast<std::size_t>(b_n));
                for (index_t t = 0; t < b_n; ++t) {
                    cand_rows[static_cast<std::size_t>(t)] = row_dist(rng.pos);
                    cand_cols[static_cast<std::size_t>(t)] = col_dist(rng.pos);
                }

                // Counting-sort the batch into row buckets, then order each
                // bucket by (col, draw idx) so duplicates sit adjacent with
                // the earliest draw first.
                bucket_ptr.assign(static_cast<std::size_t>(w.n_rows) + 1, 0);
                for (index_t t = 0; t < b_n; ++t)
                    ++bucket_ptr[static_cast<std::size_t>(
                                     cand_rows[static_cast<std::size_t>(t)]) +
                                 1];
                for (std::size_t i = 1; i < bucket_ptr.size(); ++i)
                    bucket_ptr[i] += bucket_ptr[i - 1];
                by_row.resize(static_cast<std::size_t>(b_n));
                bucket_pos.assign(bucket_ptr.begin(), bucket_ptr.end() - 1);
                for (index_t t = 0; t < b_n; ++t) {
                    const auto r =
                        static_cast<std::size_t>(cand_rows[static_cast<std::size_t>(t)]);
                    by_row[static_cast<std::size_t>(bucket_pos[r]++)] = {
                        cand_cols[static_cast<std::size_t>(t)], t};
                }

                accept_flag.assign(static_cast<std::size_t>(b_n), 0);
                batch_accepted.clear();
                for (index_t i = 0; i < w.n_rows; ++i) {
                    const index_t lo = bucket_ptr[static_cast<std::size_t>(i)];
                    const index_t hi = bucket_ptr[static_cast<std::size_t>(i) + 1];
                    if (lo == hi) continue;
                    std::sort(by_row.begin() + lo, by_row.begin() + hi);
                    index_t a = kept_row_ptr[static_cast<std::size_t>(i)];
                    const index_t a_hi = kept_row_ptr[static_cast<std::size_t>(i) + 1];
                    for (index_t b = lo; b < hi; ++b) {
                        const auto [c, t] = by_row[static_cast<std::size_t>(b)];
                        if (b > lo && by_row[static_cast<std::size_t>(b) - 1].first == c)
                            continue; // in-batch duplicate
                        while (a < a_hi && kept_cols[static_cast<std::size_t>(a)] < c) ++a;
                        if (a < a_hi && kept_cols[static_cast<std::size_t>(a)] == c)
                            continue; // collides with a survivor
                        const std::uint64_t key = cell_key(i, c, w.n_cols);
                        if (std::binary_search(accepted_sorted.begin(), accepted_sorted.end(),
                                               key))
                            continue; // collides with an earlier batch
                        accept_flag[static_cast<std::size_t>(t)] = 1;
                        batch_accepted.push_back({key, t});
                    }
                }

                // Values are consumed in draw order over accepted candidates.
                draw_vals.assign(static_cast<std::size_t>(b_n), real(0));
                for (index_t t = 0; t < b_n; ++t)
                    if (accept_flag[static_cast<std::size_t>(t)])
                        draw_vals[static_cast<std::size_t>(t)] = nonzero_normal(rng.val, noise);

                std::vector<std::uint64_t> block_keys;
                std::vector<real> block_vals;
                block_keys.reserve(batch_accepted.size());
                block_vals.reserve(batch_accepted.size());
                for (const auto& [key, t] : batch_accepted) {
                    block_keys.push_back(key); // already ascending (row-major buckets)
                    block_vals.push_back(draw_vals[static_cast<std::size_t>(t)]);
                }
                const std::size_t old_n = accepted_sorted.size();
                accepted_sorted.insert(accepted_sorted.end(), block_keys.begin(),
                                       block_keys.end());
                std::inplace_merge(accepted_sorted.begin(),
                                   accepted_sorted.begin() +
                                       static_cast<std::ptrdiff_t>(old_n),
                                   accepted_sorted.end());
                remaining -= static_cast<index_t>(batch_accepted.size());
                blocks.push_back({std::move(block_keys), std::move(block_vals)});
            }

            // Merge the per-batch blocks (the first holds nearly everything).
            new_keys = std::move(blocks[0].first);
            new_vals = std::move(blocks[0].second);
            for (std::size_t b = 1; b < blocks.size(); ++b) {
                const auto& bk = blocks[b].first;
                const auto& bv = blocks[b].second;
                std::vector<std::uint64_t> mk(new_keys.size() + bk.size());
                std::vector<real> mv(mk.size());
                std::size_t x = 0, y = 0, o = 0;
                while (x < new_keys.size() || y < bk.size()) {
                    if (y == bk.size() || (x < new_keys.size() && new_keys[x] < bk[y])) {
                        mk[o] = new_keys[x];
                        mv[o] = new_vals[x];
                        ++x;
                    } else {
                        mk[o] = bk[y];
                        mv[o] = bv[y];
                        ++y;
                    }
                    ++o;
                }
                new_keys.swap(mk);
                new_vals.swap(mv);
            }
        }
    }

    // Merge survivors and regrown entries into the output CSR, row by row.
    CsrMatrix out;
    out.n_rows = w.n_rows;
    out.n_cols = w.n_cols;
    out.row_ptr.assign(static_cast<std::size_t>(w.n_rows) + 1, 0);
    out.col_idx.resize(static_cast<std::size_t>(nnz0));
    out.vals.resize(static_cast<std::size_t>(nnz0));

    std::size_t nk = 0, o = 0;
    for (index_t i = 0; i < w.n_rows; ++i) {
        const std::uint64_t row_end =
            static_cast<std::uint64_t>(i + 1) * static_cast<std::uint64_t>(w.n_cols);
        index_t a = kept_row_ptr[static_cast<std::size_t>(i)];
        const index_t a_hi = kept_row_ptr[static_cast<std::size_t>(i) + 1];
        while (a < a_hi || (nk < new_keys.size() && new_keys[nk] < row_end)) {
            bool take_kept;
            if (a == a_hi) take_kept = false;
            else if (nk == new_keys.size() || new_keys[nk] >= row_end) take_kept = true;
            else
                take_kept = cell_key(i, kept_cols[static_cast<std::size_t>(a)], w.n_cols) <
                            new_keys[nk];
            if (take_kept) {
                out.col_idx[o] = kept_cols[static_cast<std::size_t>(a)];
                out.vals[o] = kept_vals[static_cast<std::size_t>(a)];
                ++a;
            } else {
                out.col_idx[o] =
                    static_cast<index_t>(new_keys[nk] % static_cast<std::uint64_t>(w.n_cols));
                out.vals[o] = new_vals[nk];
                ++nk;
            }
            ++o;
        }
        out.row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<index_t>(o);
    }

    finish_selection(std::move(selection), pruned_out);
    return {std::move(out), make_report(removed, nnz0, nnz0, t0)};
}

std::pair<CsrMatrix, EvolutionReport> evolve_v1(const CsrMatrix& w, const TopologyParams& params,
                                                EvolveRng& rng) {
    return evolve_v1(w, params, rng, nullptr);
}

std::pair<CsrMatrix, EvolutionReport> evolve_v2(const CsrMatrix& w, const TopologyParams& params,
                                                EvolveRng& rng) {
    return evolve_v2(w, params, rng, nullptr);
}

std::pair<CsrMatrix, EvolutionReport> evolve_v1(const CsrMatrix& w, const TopologyParams& params) {
    auto rng = make_evolve_rng(params.rng_seed);
    return evolve_v1(w, params, rng, nullptr);
}

std::pair<CsrMatrix, EvolutionReport> evolve_v2(const CsrMatrix& w, const TopologyParams& params) {
    auto rng = make_evolve_rng(params.rng_seed);
    return evolve_v2(w, params, rng, nullptr);
}

index_t expected_nnz(std::span<const index_t> layer_widths, double epsilon) {
    if (layer_widths.size() < 2)
        throw std::invalid_argument("expected_nnz: need at least 2 layer widths");
    index_t total = 0;
    for (std::size_t l = 1; l < layer_widths.size(); ++l) {
        const index_t a = layer_widths[l - 1];
        const index_t b = layer_widths[l];
        const double p = er_probability(a, b, epsilon);
        if (p >= 1.0) total += a * b;
        else total += static_cast<index_t>(std::llround(epsilon * static_cast<double>(a + b)));
    }
    return total;
}

index_t dense_connection_count(std::span<const index_t> layer_widths) {
    if (layer_widths.size() < 2)
        throw std::invalid_argument("dense_connection_count: need at least 2 layer widths");
    index_t total = 0;
    for (std::size_t l = 1; l < layer_widths.size(); ++l)
        total += layer_widths[l - 1] * layer_widths[l];
    return total;
}

} // namespace sevo
