#include "otfs/detector.hpp"

#include "otfs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace otfs {

namespace {

std::size_t negate_offset(std::size_t d, GridShape shape) {
    const std::size_t n = shape.n_doppler;
    const std::size_t m = shape.m_delay;
    const std::size_t dk = shape.doppler_of(d);
    const std::size_t dl = shape.delay_of(d);
    return shape.index((n - dk) % n, (m - dl) % m);
}

std::size_t add_offset(std::size_t u, std::size_t d, GridShape shape) {
    const std::size_t n = shape.n_doppler;
    const std::size_t m = shape.m_delay;
    return shape.index((shape.doppler_of(u) + shape.doppler_of(d)) % n,
                       (shape.delay_of(u) + shape.delay_of(d)) % m);
}

const Neighbor* find_col(std::span<const Neighbor> row, std::size_t col) {
    const auto it = std::lower_bound(row.begin(), row.end(), col,
                                     [](const Neighbor& n, std::size_t c) { return n.col < c; });
    return (it != row.end() && it->col == col) ? &*it : nullptr;
}

}  // namespace

Complex GramMatrix::at(std::size_t u, std::size_t v) const {
    const Neighbor* n = find_col(row(u), v);
    return n ? n->value : Complex{};
}

std::vector<double> GramMatrix::diagonal() const {
    std::vector<double> d(dim);
    for (std::size_t u = 0; u < dim; ++u) d[u] = at(u, u).real();
    return d;
}

GramMatrix compute_gram(const EffectiveChannel& h) {
    const std::size_t d = h.dim();
    const ColumnView columns(h);

    GramMatrix q;
    q.dim = d;
    q.row_ptr.assign(d + 1, 0);
    CVec scratch(d);
    std::vector<char> touched(d, 0);
    std::vector<std::size_t> touched_cols;
    for (std::size_t u = 0; u < d; ++u) {
        touched_cols.clear();
        for (std::size_t j = columns.col_ptr[u]; j < columns.col_ptr[u + 1]; ++j) {
            const std::size_t w = columns.rows[j];
            const Complex hwu = std::conj(columns.values[j]);
            const auto cols = h.row_cols(w);
            const auto vals = h.row_values(w);
            for (std::size_t i = 0; i < cols.size(); ++i) {
                if (!touched[cols[i]]) {
                    touched[cols[i]] = 1;
                    touched_cols.push_back(cols[i]);
                }
                scratch[cols[i]] += hwu * vals[i];
            }
        }
        std::sort(touched_cols.begin(), touched_cols.end());
        for (const std::size_t v : touched_cols) {
            if (scratch[v] != Complex{}) q.entries.push_back({v, scratch[v]});
            scratch[v] = {};
            touched[v] = 0;
        }
        q.row_ptr[u + 1] = q.entries.size();
    }

    // Mirror the upper triangle so Q is Hermitian bit-for-bit.
    for (std::size_t u = 0; u < d; ++u) {
        for (std::size_t j = q.row_ptr[u]; j < q.row_ptr[u + 1]; ++j) {
            Neighbor& e = q.entries[j];
            if (e.col == u) {
                e.value = Complex(e.value.real(), 0.0);
            } else if (e.col < u) {
                if (const Neighbor* upper = find_col(q.row(e.col), u)) e.value = std::conj(upper->value);
            }
        }
    }
    return q;
}

CirculantGram compute_circulant_gram(const EffectiveChannel& h) {
    if (!h.circulant()) throw std::invalid_argument("compute_circulant_gram: channel is not circulant");
    const GridShape shape = h.shape();
    const auto& hw = *h.spreading();

    // Q[0, v] = sum over rows w with H[w, 0] = h_w[w] != 0 of conj(H[w, 0]) H[w, v].
    CVec row0(shape.size());
    for (std::size_t w = 0; w < shape.size(); ++w) {
        const Complex hw0 = hw.taps[w];
        if (hw0 == Complex{}) continue;
        const auto cols = h.row_cols(w);
        const auto vals = h.row_values(w);
        for (std::size_t i = 0; i < cols.size(); ++i) row0[cols[i]] += std::conj(hw0) * vals[i];
    }
    for (std::size_t d = 0; d < shape.size(); ++d) {
        const std::size_t nd = negate_offset(d, shape);
        if (d == nd) {
            row0[d] = Complex(row0[d].real(), 0.0);
        } else if (d < nd) {
            row0[nd] = std::conj(row0[d]);
        }
    }

    CirculantGram q;
    q.shape = shape;
    q.diag = row0[0].real();
    for (std::size_t d = 1; d < shape.size(); ++d) {
        if (row0[d] != Complex{}) q.off_diagonal.push_back({d, row0[d]});
    }
    return q;
}

SymbolVector matched_filter(std::span<const Complex> y, const EffectiveChannel& h) {
    if (y.size() != h.dim()) throw input_size_error("matched_filter: dimension mismatch");
    SymbolVector r(h.dim());
    for (std::size_t w = 0; w < h.dim(); ++w) {
        const Complex cy = std::conj(y[w]);
        const auto cols = h.row_cols(w);
        const auto vals = h.row_values(w);
        for (std::size_t i = 0; i < cols.size(); ++i) r[cols[i]] += cy * vals[i];
    }
    return r;
}

std::vector<Neighbor> select_strongest(std::span<const Neighbor> row, std::size_t n_i) {
    std::vector<Neighbor> ranked(row.begin(), row.end());
    std::sort(ranked.begin(), ranked.end(), [](const Neighbor& a, const Neighbor& b) {
        const double ma = std::abs(a.value);
        const double mb = std::abs(b.value);
        if (ma != mb) return ma > mb;
        return a.col < b.col;
    });
    if (ranked.size() > n_i) ranked.resize(n_i);
    std::sort(ranked.begin(), ranked.end(), [](const Neighbor& a, const Neighbor& b) { return a.col < b.col; });
    return ranked;
}

std::optional<Complex> PrunedGram::coupling(std::size_t u, std::size_t v) const {
    const Neighbor* n = find_col(row(u), v);
    if (!n) return std::nullopt;
    return n->value;
}

PrunedGram prune(const GramMatrix& q, SymbolVector r, std::size_t n_i) {
    if (n_i < 1) throw config_error("prune: N_i must be >= 1");
    if (r.size() != q.dim) throw input_size_error("prune: r does not match Q");

    std::vector<std::vector<Neighbor>> selected(q.dim);
    std::vector<Neighbor> off;
    for (std::size_t u = 0; u < q.dim; ++u) {
        off.clear();
        for (const auto& e : q.row(u)) {
            if (e.col != u && e.value != Complex{}) off.push_back(e);
        }
        selected[u] = select_strongest(off, n_i);
    }

    PrunedGram g;
    g.diag = q.diagonal();
    g.r = std::move(r);
    g.row_ptr.assign(q.dim + 1, 0);
    for (std::size_t u = 0; u < q.dim; ++u) {
        for (const auto& e : selected[u]) {
            if (find_col(selected[e.col], u)) g.neighbors.push_back(e);
        }
        g.row_ptr[u + 1] = g.neighbors.size();
    }
    return g;
}

PrunedGram prune(const CirculantGram& q, SymbolVector r, std::size_t n_i) {
    if (n_i < 1) throw config_error("prune: N_i must be >= 1");
    const GridShape shape = q.shape;
    if (r.size() != shape.size()) throw input_size_error("prune: r does not match Q");

    // One group per conjugate offset pair {d, -d}, keyed by its smaller index.
    struct Group {
        double magnitude;
        std::size_t key;
        std::size_t count;
    };
    std::vector<Group> groups;
    for (const auto& e : q.off_diagonal) {
        const std::size_t nd = negate_offset(e.col, shape);
        if (e.col > nd) continue;
        groups.push_back({std::abs(e.value), e.col, e.col == nd ? 1u : 2u});
    }
    std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
        return a.key < b.key;
    });

    std::vector<Neighbor> pattern;
    std::size_t kept = 0;
    for (const auto& grp : groups) {
        if (kept + grp.count > n_i) break;
        kept += grp.count;
        for (const std::size_t d : {grp.key, negate_offset(grp.key, shape)}) {
            if (!pattern.empty() && pattern.back().col == d) continue;
            const auto it = std::lower_bound(q.off_diagonal.begin(), q.off_diagonal.end(), d,
                                             [](const Neighbor& n, std::size_t c) { return n.col < c; });
            pattern.push_back(*it);
        }
    }

    PrunedGram g;
    g.diag.assign(shape.size(), q.diag);
    g.r = std::move(r);
    g.row_ptr.assign(shape.size() + 1, 0);
    g.neighbors.reserve(shape.size() * pattern.size());
    std::vector<Neighbor> row;
    for (std::size_t u = 0; u < shape.size(); ++u) {
        row.clear();
        for (const auto& p : pattern) row.push_back({add_offset(u, p.col, shape), p.value});
        std::sort(row.begin(), row.end(), [](const Neighbor& a, const Neighbor& b) { return a.col < b.col; });
        g.neighbors.insert(g.neighbors.end(), row.begin(), row.end());
        g.row_ptr[u + 1] = g.neighbors.size();
    }
    return g;
}

PrunedGram build_pruned_gram(const EffectiveChannel& h, std::span<const Complex> y, std::size_t n_i) {
    SymbolVector r = matched_filter(y, h);
    if (h.circulant()) return prune(compute_circulant_gram(h), std::move(r), n_i);
    return prune(compute_gram(h), std::move(r), n_i);
}

}  // namespace otfs
