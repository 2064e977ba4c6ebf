#include "otfs/baseline.hpp"

#include "otfs/detail/fft2.hpp"
#include "otfs/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace otfs {

namespace {

constexpr double kRegularizationFloor = 1e-12;

void check_dims(std::span<const Complex> y, const EffectiveChannel& h, const char* what) {
    if (y.size() != h.dim()) throw input_size_error(std::string(what) + ": y does not match H");
}

double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double top = std::max(a, b);
    return top + std::log1p(std::exp(-std::abs(a - b)));
}

// Odometer over A^NM in lexicographic order (x_0 most significant), keeping
// the residual y - Hx current. visit(indices, ||residual||^2) per hypothesis.
template <class Visit>
void enumerate_hypotheses(std::span<const Complex> y, const EffectiveChannel& h, const Constellation& c,
                          Visit&& visit) {
    const std::size_t d = h.dim();
    const std::size_t na = c.size();
    const ColumnView columns(h);
    std::vector<std::size_t> idx(d, 0);
    SymbolVector x(d, c.point(0));
    SymbolVector hx = h.multiply(x);
    CVec residual(d);
    for (std::size_t w = 0; w < d; ++w) residual[w] = y[w] - hx[w];

    auto shift_symbol = [&](std::size_t u, std::size_t from, std::size_t to) {
        const Complex delta = c.point(to) - c.point(from);
        for (std::size_t j = columns.col_ptr[u]; j < columns.col_ptr[u + 1]; ++j) {
            residual[columns.rows[j]] -= columns.values[j] * delta;
        }
    };

    while (true) {
        double metric = 0.0;
        for (const auto& r : residual) metric += std::norm(r);
        visit(std::span<const std::size_t>(idx), metric);

        std::size_t pos = d;
        while (pos > 0) {
            --pos;
            if (idx[pos] + 1 < na) {
                shift_symbol(pos, idx[pos], idx[pos] + 1);
                ++idx[pos];
                break;
            }
            shift_symbol(pos, idx[pos], 0);
            idx[pos] = 0;
            if (pos == 0) return;
        }
        if (d == 0) return;
    }
}

}  // namespace

std::uint64_t hypothesis_count(std::size_t alphabet, std::size_t dim, const OracleLimits& limits) {
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < dim; ++i) {
        if (count > limits.max_hypotheses / alphabet) {
            throw refusal_error("brute force: " + std::to_string(alphabet) + "^" + std::to_string(dim) +
                                " hypotheses exceed the cap of " + std::to_string(limits.max_hypotheses));
        }
        count *= alphabet;
    }
    if (count > limits.max_hypotheses) {
        throw refusal_error("brute force: hypothesis count exceeds the cap");
    }
    return count;
}

std::vector<std::size_t> map_bruteforce(std::span<const Complex> y, const EffectiveChannel& h,
                                        const Constellation& c, const OracleLimits& limits) {
    check_dims(y, h, "map_bruteforce");
    hypothesis_count(c.size(), h.dim(), limits);
    std::vector<std::size_t> best;
    double best_metric = std::numeric_limits<double>::infinity();
    enumerate_hypotheses(y, h, c, [&](std::span<const std::size_t> idx, double metric) {
        if (metric < best_metric) {
            best_metric = metric;
            best.assign(idx.begin(), idx.end());
        }
    });
    return best;
}

std::vector<double> marginals_bruteforce(std::span<const Complex> y, const EffectiveChannel& h,
                                         double noise_variance, const Constellation& c,
                                         const OracleLimits& limits) {
    check_dims(y, h, "marginals_bruteforce");
    if (!(noise_variance >= 0.0)) throw config_error("marginals_bruteforce: noise variance must be >= 0");
    const std::size_t d = h.dim();
    const std::size_t na = c.size();
    std::vector<double> out(d * na, 0.0);
    if (noise_variance == 0.0) {
        const auto map = map_bruteforce(y, h, c, limits);
        for (std::size_t u = 0; u < d; ++u) out[u * na + map[u]] = 1.0;
        return out;
    }
    hypothesis_count(na, d, limits);
    std::vector<double> acc(d * na, -std::numeric_limits<double>::infinity());
    enumerate_hypotheses(y, h, c, [&](std::span<const std::size_t> idx, double metric) {
        const double logp = -metric / noise_variance;
        for (std::size_t u = 0; u < d; ++u) {
            double& slot = acc[u * na + idx[u]];
            slot = log_add(slot, logp);
        }
    });
    for (std::size_t u = 0; u < d; ++u) {
        double norm = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < na; ++a) norm = log_add(norm, acc[u * na + a]);
        for (std::size_t a = 0; a < na; ++a) out[u * na + a] = std::exp(acc[u * na + a] - norm);
    }
    return out;
}

std::vector<double> canonical_spa(std::span<const Complex> y, const EffectiveChannel& h, double noise_variance,
                                  const Constellation& c, int iterations) {
    check_dims(y, h, "canonical_spa");
    if (!(noise_variance > 0.0)) throw refusal_error("canonical_spa: needs a noise variance > 0");
    if (iterations < 1) throw config_error("canonical_spa: iterations must be >= 1");
    const std::size_t d = h.dim();
    const std::size_t na = c.size();

    // Edge j of factor w links row w to column row_cols(w)[j]; ids follow CSR order.
    std::vector<std::size_t> edge_ptr(d + 1, 0);
    for (std::size_t w = 0; w < d; ++w) {
        const std::size_t deg = h.row_nnz(w);
        std::uint64_t terms = 1;
        for (std::size_t j = 1; j < deg; ++j) {
            terms *= na;
            if (terms > kCanonicalSpaMaxTerms) {
                throw refusal_error("canonical_spa: factor " + std::to_string(w) + " has degree " +
                                    std::to_string(deg) + ", above the enumeration limit");
            }
        }
        edge_ptr[w + 1] = edge_ptr[w] + deg;
    }
    const std::size_t num_edges = edge_ptr[d];
    std::vector<std::vector<std::size_t>> var_edges(d);
    for (std::size_t w = 0; w < d; ++w) {
        const auto cols = h.row_cols(w);
        for (std::size_t j = 0; j < cols.size(); ++j) var_edges[cols[j]].push_back(edge_ptr[w] + j);
    }

    // Normalized log-probabilities: logsumexp of each message is 0.
    const double uniform = -std::log(static_cast<double>(na));
    std::vector<double> to_var(num_edges * na, uniform);
    std::vector<double> to_factor(num_edges * na, uniform);
    std::vector<double> beliefs(d * na, uniform);

    auto normalize = [na](double* v) {
        double norm = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < na; ++a) norm = log_add(norm, v[a]);
        for (std::size_t a = 0; a < na; ++a) v[a] -= norm;
    };

    std::vector<std::size_t> config;
    std::vector<double> acc;
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t w = 0; w < d; ++w) {
            const auto cols = h.row_cols(w);
            const auto vals = h.row_values(w);
            const std::size_t deg = cols.size();
            if (deg == 0) continue;
            config.assign(deg, 0);
            acc.assign(deg * na, -std::numeric_limits<double>::infinity());
            while (true) {
                Complex hx{};
                double incoming = 0.0;
                for (std::size_t j = 0; j < deg; ++j) {
                    hx += vals[j] * c.point(config[j]);
                    incoming += to_factor[(edge_ptr[w] + j) * na + config[j]];
                }
                const double log_f = -std::norm(y[w] - hx) / noise_variance;
                for (std::size_t j = 0; j < deg; ++j) {
                    // Exclude the target's own incoming message.
                    const double term = log_f + incoming - to_factor[(edge_ptr[w] + j) * na + config[j]];
                    double& slot = acc[j * na + config[j]];
                    slot = log_add(slot, term);
                }
                std::size_t pos = deg;
                bool done = true;
                while (pos > 0) {
                    --pos;
                    if (++config[pos] < na) {
                        done = false;
                        break;
                    }
                    config[pos] = 0;
                }
                if (done) break;
            }
            for (std::size_t j = 0; j < deg; ++j) {
                double* msg = to_var.data() + (edge_ptr[w] + j) * na;
                std::copy_n(acc.begin() + static_cast<std::ptrdiff_t>(j * na), na, msg);
                normalize(msg);
            }
        }
        for (std::size_t u = 0; u < d; ++u) {
            double* belief = beliefs.data() + u * na;
            std::fill(belief, belief + na, 0.0);
            for (const std::size_t e : var_edges[u]) {
                for (std::size_t a = 0; a < na; ++a) belief[a] += to_var[e * na + a];
            }
            for (const std::size_t e : var_edges[u]) {
                double* msg = to_factor.data() + e * na;
                for (std::size_t a = 0; a < na; ++a) msg[a] = belief[a] - to_var[e * na + a];
                normalize(msg);
            }
            normalize(belief);
        }
    }
    std::vector<double> out(d * na);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(beliefs[i]);
    return out;
}

SymbolVector lmmse_estimate(std::span<const Complex> y, const EffectiveChannel& h, double noise_variance) {
    check_dims(y, h, "lmmse");
    if (!(noise_variance >= 0.0)) throw config_error("lmmse: noise variance must be >= 0");
    const double s = std::max(noise_variance, kRegularizationFloor);
    const std::size_t d = h.dim();

    if (h.circulant()) {
        // Two-level circulant H is diagonalized by the 2D DFT.
        const auto& hw = *h.spreading();
        const auto [n, m] = h.shape();
        const CVec eig = detail::dft2(hw.taps, n, m, detail::Sign::negative, detail::Sign::negative);
        CVec spec = detail::dft2(CVec(y.begin(), y.end()), n, m, detail::Sign::negative, detail::Sign::negative);
        for (std::size_t i = 0; i < d; ++i) spec[i] *= std::conj(eig[i]) / (std::norm(eig[i]) + s);
        CVec x = detail::dft2(spec, n, m, detail::Sign::positive, detail::Sign::positive);
        const double scale = 1.0 / static_cast<double>(d);
        for (auto& v : x) v *= scale;
        return x;
    }

    Eigen::MatrixXcd dense = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < d; ++r) {
        const auto cols = h.row_cols(r);
        const auto vals = h.row_values(r);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            dense(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols[j])) = vals[j];
        }
    }
    Eigen::VectorXcd yv(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) yv(static_cast<Eigen::Index>(i)) = y[i];
    Eigen::MatrixXcd a = dense.adjoint() * dense;
    a.diagonal().array() += s;
    const Eigen::VectorXcd x = a.ldlt().solve(dense.adjoint() * yv);
    return SymbolVector(x.data(), x.data() + x.size());
}

std::vector<std::size_t> lmmse(std::span<const Complex> y, const EffectiveChannel& h, double noise_variance,
                               const Constellation& c) {
    const SymbolVector est = lmmse_estimate(y, h, noise_variance);
    std::vector<std::size_t> out(est.size());
    for (std::size_t i = 0; i < est.size(); ++i) out[i] = c.nearest(est[i]);
    return out;
}

std::vector<std::size_t> argmax_rows(std::span<const double> table, std::size_t alphabet) {
    std::vector<std::size_t> out(table.size() / alphabet);
    for (std::size_t u = 0; u < out.size(); ++u) {
        const auto row = table.subspan(u * alphabet, alphabet);
        out[u] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

}  // namespace otfs
