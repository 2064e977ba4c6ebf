#include "otfs/detector.hpp"

#include "otfs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace otfs {

void DetectorConfig::validate() const {
    if (n_i < 1) throw config_error("detector: N_i must be >= 1");
    if (!(damping >= 0.0 && damping < 1.0)) throw config_error("detector: damping must lie in [0, 1)");
    if (max_iterations < 1) throw config_error("detector: K_max must be >= 1");
    if (!(potential_scale > 0.0) || !std::isfinite(potential_scale)) {
        throw config_error("detector: potential scale must be positive");
    }
}

double node_potential(const PrunedGram& g, std::size_t u, Complex a) {
    return 2.0 * (g.r[u] * a).real() - g.diag[u] * std::norm(a);
}

double edge_potential(Complex q, Complex a, Complex b) {
    return -2.0 * (std::conj(a) * q * b).real();
}

double edge_potential(const PrunedGram& g, std::size_t u, std::size_t v, Complex a, Complex b) {
    const auto q = g.coupling(u, v);
    if (!q) {
        throw std::logic_error("edge_potential: " + std::to_string(v) + " is not a neighbor of " +
                               std::to_string(u));
    }
    return edge_potential(*q, a, b);
}

void normalize_max_zero(std::span<double> v) {
    if (v.empty()) return;
    const double top = *std::max_element(v.begin(), v.end());
    for (auto& x : v) x -= top;
}

LcSpaDetector::LcSpaDetector(PrunedGram gram, const Constellation& c, DetectorConfig cfg,
                             std::optional<double> noise_variance)
    : gram_(std::move(gram)), points_(c.points().begin(), c.points().end()), cfg_(cfg) {
    cfg_.validate();
    if (gram_.r.size() != gram_.dim() || gram_.row_ptr.size() != gram_.dim() + 1) {
        throw input_size_error("detector: inconsistent pruned Gram dimensions");
    }
    if (points_.size() > 16) throw config_error("detector: alphabets above 16 points are not supported");
    scale_ = cfg_.potential_scale;
    if (cfg_.kernel == MessageKernel::log_sum_exp) {
        if (!noise_variance || !(*noise_variance > 0.0)) {
            throw config_error("detector: the log-sum-exp kernel needs a noise variance > 0");
        }
        scale_ /= *noise_variance;
    }

    const std::size_t d = gram_.dim();
    const std::size_t na = points_.size();
    std::vector<std::size_t> degree(d, 0);
    for (std::size_t u = 0; u < d; ++u) {
        for (const auto& nb : gram_.row(u)) {
            if (nb.col == u) throw std::logic_error("detector: pruned Gram row holds its diagonal");
            const auto back = gram_.coupling(nb.col, u);
            if (!back) throw std::logic_error("detector: pruned support is not symmetric");
            if (nb.col > u) edges_.push_back({u, nb.col, nb.value});
        }
    }
    for (const auto& e : edges_) {
        ++degree[e.lo];
        ++degree[e.hi];
    }
    adj_ptr_.assign(d + 1, 0);
    for (std::size_t u = 0; u < d; ++u) adj_ptr_[u + 1] = adj_ptr_[u] + degree[u];
    adjacency_.resize(adj_ptr_[d]);
    std::vector<std::size_t> fill(adj_ptr_.begin(), adj_ptr_.end() - 1);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        adjacency_[fill[edges_[e].lo]++] = {e, Side::lo};
        adjacency_[fill[edges_[e].hi]++] = {e, Side::hi};
    }

    potentials_.resize(d * na);
    for (std::size_t u = 0; u < d; ++u) {
        for (std::size_t a = 0; a < na; ++a) potentials_[u * na + a] = scale_ * node_potential(gram_, u, points_[a]);
    }
    to_variable_.resize(2 * edges_.size() * na);
    to_factor_.resize(2 * edges_.size() * na);
    marginals_.resize(d * na);
    reset();
}

std::span<const double> LcSpaDetector::factor_message(std::size_t e, Side toward) const {
    return {to_variable_.data() + slot(e, toward), points_.size()};
}

std::span<const double> LcSpaDetector::variable_message(std::size_t e, Side from) const {
    return {to_factor_.data() + slot(e, from), points_.size()};
}

std::span<const double> LcSpaDetector::node_potentials(std::size_t u) const {
    return {potentials_.data() + u * points_.size(), points_.size()};
}

std::span<const double> LcSpaDetector::log_marginal(std::size_t u) const {
    return {marginals_.data() + u * points_.size(), points_.size()};
}

void LcSpaDetector::set_factor_message(std::size_t e, Side toward, std::span<const double> values) {
    if (values.size() != points_.size()) throw input_size_error("message length must equal |A|");
    std::copy(values.begin(), values.end(), to_variable_.begin() + static_cast<std::ptrdiff_t>(slot(e, toward)));
}

void LcSpaDetector::set_variable_message(std::size_t e, Side from, std::span<const double> values) {
    if (values.size() != points_.size()) throw input_size_error("message length must equal |A|");
    std::copy(values.begin(), values.end(), to_factor_.begin() + static_cast<std::ptrdiff_t>(slot(e, from)));
}

void LcSpaDetector::reset() {
    std::fill(to_variable_.begin(), to_variable_.end(), 0.0);
    std::fill(to_factor_.begin(), to_factor_.end(), 0.0);
    const std::size_t na = points_.size();
    for (std::size_t u = 0; u < gram_.dim(); ++u) {
        std::span<double> m(marginals_.data() + u * na, na);
        std::copy_n(potentials_.begin() + static_cast<std::ptrdiff_t>(u * na), na, m.begin());
        normalize_max_zero(m);
    }
}

void LcSpaDetector::update_factor_message(std::size_t e, Side toward) {
    const std::size_t na = points_.size();
    const FactorEdge& fe = edges_[e];
    const Side from = toward == Side::lo ? Side::hi : Side::lo;
    // Coupling seen from the target: Q~[target, source].
    const Complex q = toward == Side::lo ? fe.q : std::conj(fe.q);
    const double* incoming = to_factor_.data() + slot(e, from);
    double* stored = to_variable_.data() + slot(e, toward);

    // Candidate terms t(a, b) = scale * e(a, b) + m(b); kept tiny for |A| <= 16.
    double terms[16];
    Complex qb[16];
    for (std::size_t b = 0; b < na; ++b) qb[b] = q * points_[b];

    double raw[16];
    for (std::size_t a = 0; a < na; ++a) {
        const Complex ca = std::conj(points_[a]);
        for (std::size_t b = 0; b < na; ++b) {
            terms[b] = -2.0 * scale_ * (ca * qb[b]).real() + incoming[b];
            ++kernel_evaluations_;
        }
        const double top = *std::max_element(terms, terms + na);
        if (cfg_.kernel == MessageKernel::max_log) {
            raw[a] = top;
        } else {
            double s = 0.0;
            for (std::size_t b = 0; b < na; ++b) s += std::exp(terms[b] - top);
            raw[a] = top + std::log(s);
        }
    }
    const double lambda = cfg_.damping;
    for (std::size_t a = 0; a < na; ++a) stored[a] = lambda * raw[a] + (1.0 - lambda) * stored[a];
    normalize_max_zero({stored, na});
}

void LcSpaDetector::node_total(std::size_t u, std::span<double> out) const {
    const std::size_t na = points_.size();
    std::copy_n(potentials_.begin() + static_cast<std::ptrdiff_t>(u * na), na, out.begin());
    for (std::size_t j = adj_ptr_[u]; j < adj_ptr_[u + 1]; ++j) {
        const auto [e, side] = adjacency_[j];
        const double* msg = to_variable_.data() + slot(e, side);
        for (std::size_t a = 0; a < na; ++a) out[a] += msg[a];
    }
}

void LcSpaDetector::update_variable_message(std::size_t e, Side from) {
    const std::size_t na = points_.size();
    double total[16];
    node_total(endpoint(e, from), {total, na});
    const double* own = to_variable_.data() + slot(e, from);
    double* out = to_factor_.data() + slot(e, from);
    for (std::size_t a = 0; a < na; ++a) out[a] = total[a] - own[a];
    normalize_max_zero({out, na});
}

void LcSpaDetector::update_factor_to_variable() {
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        update_factor_message(e, Side::lo);
        update_factor_message(e, Side::hi);
    }
}

void LcSpaDetector::update_variable_to_factor() {
    const std::size_t na = points_.size();
    for (std::size_t u = 0; u < gram_.dim(); ++u) {
        std::span<double> total(marginals_.data() + u * na, na);
        node_total(u, total);
        for (std::size_t j = adj_ptr_[u]; j < adj_ptr_[u + 1]; ++j) {
            const auto [e, side] = adjacency_[j];
            const double* own = to_variable_.data() + slot(e, side);
            double* out = to_factor_.data() + slot(e, side);
            for (std::size_t a = 0; a < na; ++a) out[a] = total[a] - own[a];
            normalize_max_zero({out, na});
        }
        normalize_max_zero(total);
    }
}

std::vector<std::size_t> LcSpaDetector::decisions() const {
    const std::size_t na = points_.size();
    std::vector<std::size_t> out(gram_.dim());
    for (std::size_t u = 0; u < gram_.dim(); ++u) {
        const double* m = marginals_.data() + u * na;
        out[u] = static_cast<std::size_t>(std::max_element(m, m + na) - m);
    }
    return out;
}

DetectionResult LcSpaDetector::snapshot(int iterations, bool converged, std::uint64_t per_iteration) const {
    DetectionResult res;
    res.hard_indices = decisions();
    res.hard_symbols.resize(res.hard_indices.size());
    for (std::size_t u = 0; u < res.hard_indices.size(); ++u) res.hard_symbols[u] = points_[res.hard_indices[u]];
    res.log_marginals = marginals_;
    res.alphabet = points_.size();
    res.iterations_run = iterations;
    res.converged = converged;
    res.kernel_evaluations_per_iteration = per_iteration;
    return res;
}

DetectionResult LcSpaDetector::run(const IterationObserver& observer) {
    reset();
    std::vector<std::size_t> previous;
    bool stable = false;
    std::uint64_t per_iteration = 0;
    int iteration = 0;
    while (iteration < cfg_.max_iterations) {
        ++iteration;
        const std::uint64_t before = kernel_evaluations_;
        update_factor_to_variable();
        per_iteration = kernel_evaluations_ - before;
        update_variable_to_factor();
        auto current = decisions();
        if (observer) observer(iteration, current);
        stable = !previous.empty() && current == previous;
        previous = std::move(current);
        if (cfg_.early_stop && stable) break;
    }
    return snapshot(iteration, stable, per_iteration);
}

DetectionResult detect(std::span<const Complex> y, const EffectiveChannel& h, const Constellation& c,
                       const DetectorConfig& cfg, std::optional<double> noise_variance,
                       const IterationObserver& observer) {
    cfg.validate();
    if (y.size() != h.dim()) throw input_size_error("detect: y does not match H");
    const std::size_t n_i = std::min(cfg.n_i, h.dim() > 1 ? h.dim() - 1 : std::size_t{1});
    LcSpaDetector det(build_pruned_gram(h, y, n_i), c, cfg, noise_variance);
    return det.run(observer);
}

}  // namespace otfs
