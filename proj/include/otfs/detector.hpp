#pragma once

#include "otfs/channel.hpp"
#include "otfs/constellation.hpp"
#include "otfs/types.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace otfs {

/// One stored entry of a sparse row: column index and value.
struct Neighbor {
    std::size_t col = 0;
    Complex value;
};

/// Q = H^H H in compressed-row form. Exactly Hermitian; the diagonal is real.
struct GramMatrix {
    std::size_t dim = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<Neighbor> entries;

    std::span<const Neighbor> row(std::size_t u) const {
        return {entries.data() + row_ptr[u], row_ptr[u + 1] - row_ptr[u]};
    }
    Complex at(std::size_t u, std::size_t v) const;
    std::vector<double> diagonal() const;
};

/// Sparse H^H H, visiting only the rows of H that overlap each column.
GramMatrix compute_gram(const EffectiveChannel& h);

/**
 * Gram matrix of a two-level circulant channel, stored as its first row.
 *
 * Q[u, u (+) d] = off_diagonal[d] for every u, where (+) is addition on the
 * N x M torus and d is an offset index dk * M + dl.
 */
struct CirculantGram {
    GridShape shape;
    double diag = 0.0;
    std::vector<Neighbor> off_diagonal;  // col holds the offset index, ascending
};

/// Throws std::invalid_argument if h is not circulant.
CirculantGram compute_circulant_gram(const EffectiveChannel& h);

/// r_u = sum_w conj(y_w) H[w, u], i.e. r = y^H H.
SymbolVector matched_filter(std::span<const Complex> y, const EffectiveChannel& h);

/// The n_i entries of largest |value|; ties go to the smaller column. Result sorted by column.
std::vector<Neighbor> select_strongest(std::span<const Neighbor> row, std::size_t n_i);

/// Use every nonzero coupling.
inline constexpr std::size_t kFullSupport = std::numeric_limits<std::size_t>::max();

/// Diagonal of Q, symmetric pruned couplings Q~ and matched-filter vector r.
struct PrunedGram {
    std::vector<double> diag;
    std::vector<std::size_t> row_ptr;
    std::vector<Neighbor> neighbors;  // row u: value = Q~[u, col], ascending col
    SymbolVector r;

    std::size_t dim() const { return diag.size(); }
    std::span<const Neighbor> row(std::size_t u) const {
        return {neighbors.data() + row_ptr[u], row_ptr[u + 1] - row_ptr[u]};
    }
    std::size_t directed_edges() const { return neighbors.size(); }
    /// Q~[u, v], or nullopt if v is not a neighbor of u.
    std::optional<Complex> coupling(std::size_t u, std::size_t v) const;
};

/// Per-row select_strongest, then keep only mutually selected pairs.
PrunedGram prune(const GramMatrix& q, SymbolVector r, std::size_t n_i);

/// Shared top-n_i offset pattern from the first row. Conjugate offsets d and -d
/// are kept or dropped together, so a row can end up with n_i - 1 neighbors.
PrunedGram prune(const CirculantGram& q, SymbolVector r, std::size_t n_i);

/// compute_gram / compute_circulant_gram + matched_filter + prune; fast path when h is circulant.
PrunedGram build_pruned_gram(const EffectiveChannel& h, std::span<const Complex> y, std::size_t n_i);

enum class MessageKernel { max_log, log_sum_exp };

struct DetectorConfig {
    std::size_t n_i = 40;
    /// Weight of the freshly computed message (lambda in [0, 1)).
    double damping = 0.5;
    int max_iterations = 20;
    MessageKernel kernel = MessageKernel::max_log;
    /// Stop once hard decisions repeat on two consecutive iterations.
    bool early_stop = false;
    /// Positive factor applied to every node and edge potential.
    double potential_scale = 1.0;

    void validate() const;
};

/// n_u(a) = 2 Re{r_u a} - Q_uu |a|^2.
double node_potential(const PrunedGram& g, std::size_t u, Complex a);
/// e(a, b) = -2 Re{conj(a) q b} for coupling q = Q~[u, v].
double edge_potential(Complex q, Complex a, Complex b);
/// Throws std::logic_error if v is not a neighbor of u.
double edge_potential(const PrunedGram& g, std::size_t u, std::size_t v, Complex a, Complex b);

struct DetectionResult {
    std::vector<std::size_t> hard_indices;
    SymbolVector hard_symbols;
    /// u * |A| + a; each row normalized so its maximum is 0.
    std::vector<double> log_marginals;
    std::size_t alphabet = 0;
    int iterations_run = 0;
    bool converged = false;
    std::uint64_t kernel_evaluations_per_iteration = 0;

    std::span<const double> marginal(std::size_t u) const {
        return {log_marginals.data() + u * alphabet, alphabet};
    }
};

using IterationObserver = std::function<void(int iteration, std::span<const std::size_t> decisions)>;

/// Pairwise factor between lo < hi with q = Q~[lo, hi].
struct FactorEdge {
    std::size_t lo = 0;
    std::size_t hi = 0;
    Complex q;
};

/// Endpoint of a factor edge.
enum class Side : std::size_t { lo = 0, hi = 1 };

/**
 * Damped max-log (or log-sum-exp) sum-product detector on the pairwise
 * factor graph of Q~.
 *
 * Every unordered neighbor pair {u, v} is one factor node. The store keeps,
 * per factor and endpoint, the factor-to-variable message and the
 * variable-to-factor message, all log-domain vectors of length |A| shifted
 * so their maximum is 0. Updates follow a flooding schedule: every
 * factor-to-variable message reads only variable messages from the previous
 * half-iteration, so the result does not depend on visiting order.
 */
class LcSpaDetector {
public:
    /// noise_variance is required (and > 0) only for the log-sum-exp kernel.
    LcSpaDetector(PrunedGram gram, const Constellation& c, DetectorConfig cfg,
                  std::optional<double> noise_variance = std::nullopt);

    const PrunedGram& gram() const { return gram_; }
    const DetectorConfig& config() const { return cfg_; }
    std::size_t alphabet() const { return points_.size(); }
    std::size_t num_edges() const { return edges_.size(); }
    const FactorEdge& edge(std::size_t e) const { return edges_[e]; }
    std::size_t endpoint(std::size_t e, Side s) const { return s == Side::lo ? edges_[e].lo : edges_[e].hi; }

    std::span<const double> factor_message(std::size_t e, Side toward) const;
    std::span<const double> variable_message(std::size_t e, Side from) const;
    std::span<const double> node_potentials(std::size_t u) const;
    std::span<const double> log_marginal(std::size_t u) const;

    // Direct message access for tests and instrumentation.
    void set_factor_message(std::size_t e, Side toward, std::span<const double> values);
    void set_variable_message(std::size_t e, Side from, std::span<const double> values);

    /// All messages to 0; marginals to the normalized node potentials.
    void reset();
    /// Damped update of the message from factor e toward one endpoint.
    void update_factor_message(std::size_t e, Side toward);
    /// Message from one endpoint of e into e: node potential plus all other incoming messages.
    void update_variable_message(std::size_t e, Side from);

    void update_factor_to_variable();
    /// Variable-to-factor messages and marginals in one pass.
    void update_variable_to_factor();

    std::vector<std::size_t> decisions() const;
    DetectionResult run(const IterationObserver& observer = {});

    /// Cumulative count of pairwise-potential evaluations.
    std::uint64_t kernel_evaluations() const { return kernel_evaluations_; }

private:
    std::size_t slot(std::size_t e, Side s) const { return (2 * e + static_cast<std::size_t>(s)) * points_.size(); }
    void node_total(std::size_t u, std::span<double> out) const;
    DetectionResult snapshot(int iterations, bool converged, std::uint64_t per_iteration) const;

    PrunedGram gram_;
    CVec points_;
    DetectorConfig cfg_;
    double scale_ = 1.0;

    std::vector<FactorEdge> edges_;
    std::vector<std::size_t> adj_ptr_;
    std::vector<std::pair<std::size_t, Side>> adjacency_;

    std::vector<double> potentials_;
    std::vector<double> to_variable_;
    std::vector<double> to_factor_;
    std::vector<double> marginals_;
    std::uint64_t kernel_evaluations_ = 0;
};

/// Shift a log-domain vector so its maximum entry is exactly 0.
void normalize_max_zero(std::span<double> v);

/// Algorithm entry point: Q~ and r, zero-initialized messages, flooding iterations, argmax.
DetectionResult detect(std::span<const Complex> y, const EffectiveChannel& h, const Constellation& c,
                       const DetectorConfig& cfg, std::optional<double> noise_variance = std::nullopt,
                       const IterationObserver& observer = {});

}  // namespace otfs
