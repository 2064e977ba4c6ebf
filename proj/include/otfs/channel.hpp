#pragma once

#include "otfs/constellation.hpp"
#include "otfs/rng.hpp"
#include "otfs/types.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace otfs {

/// One propagation path: complex gain, integer delay tap, real Doppler tap.
struct Path {
    Complex gain;
    int delay_tap = 0;
    double doppler_tap = 0.0;
};

struct PathSet {
    std::vector<Path> paths;

    bool integer_doppler() const;
};

/// Random channel draw parameters (delay taps in [0, l_max], Doppler in [-k_max, k_max]).
struct ChannelProfile {
    int num_paths = 4;
    int l_max = 10;
    double k_max = 8.0;
    bool fractional = true;
};

struct NoiseSpec {
    double variance = 0.0;
};

/// Throws config_error unless 1 <= P, 0 <= l_max < M and 0 <= k_max < N/2.
void validate_profile(const ChannelProfile& profile, GridShape shape);
/// Throws config_error if a path violates the grid bounds.
void validate_paths(const PathSet& ps, GridShape shape);

/// Delay taps uniform on {0..l_max}; Doppler uniform on [-k_max, k_max]
/// (integers only unless fractional); gains CN(0, 1/P).
PathSet sample_paths(Rng& rng, const ChannelProfile& profile, GridShape shape);

/// Periodic Dirichlet kernel D_N(x) = (1/N) sum_{n<N} exp(j2pi n x / N).
Complex dirichlet(double x, std::size_t n);

/// Number of Doppler bins kept on each side of round(kappa); nullopt keeps all.
using SpreadWindow = std::optional<int>;

/// h_w[k, l] = sum over paths with delay l of h_i D_N(k - kappa_i), stored k * M + l.
struct SpreadingFunction {
    GridShape shape;
    CVec taps;

    const Complex& at(std::size_t k, std::size_t l) const { return taps[shape.index(k, l)]; }
};

SpreadingFunction build_spreading_function(const PathSet& ps, GridShape shape,
                                           SpreadWindow window = std::nullopt);

/**
 * Sparse NM x NM matrix H of y = Hx + w in compressed-row form.
 *
 * Channels built from a path set are two-level circulant,
 * H[(k,l),(k',l')] = h_w[(k-k') mod N, (l-l') mod M], and keep their
 * spreading function. Column indices are ascending within each row.
 */
class EffectiveChannel {
public:
    static EffectiveChannel from_paths(const PathSet& ps, GridShape shape,
                                       SpreadWindow window = std::nullopt);
    static EffectiveChannel from_spreading(SpreadingFunction hw);
    /// Arbitrary H given row-major as NM x NM; exact zeros are not stored.
    static EffectiveChannel from_dense(GridShape shape, std::span<const Complex> row_major);

    GridShape shape() const { return shape_; }
    std::size_t dim() const { return shape_.size(); }
    std::size_t nnz() const { return values_.size(); }

    std::span<const std::size_t> row_cols(std::size_t row) const;
    std::span<const Complex> row_values(std::size_t row) const;
    std::size_t row_nnz(std::size_t row) const { return row_ptr_[row + 1] - row_ptr_[row]; }
    Complex at(std::size_t row, std::size_t col) const;

    /// Present iff the matrix is two-level circulant.
    const std::optional<SpreadingFunction>& spreading() const { return spreading_; }
    bool circulant() const { return spreading_.has_value(); }

    SymbolVector multiply(std::span<const Complex> x) const;
    /// H^H y.
    SymbolVector multiply_adjoint(std::span<const Complex> y) const;

private:
    GridShape shape_;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> cols_;
    CVec values_;
    std::optional<SpreadingFunction> spreading_;
};

/// Compressed-column view of an EffectiveChannel (built on demand).
struct ColumnView {
    std::vector<std::size_t> col_ptr;
    std::vector<std::size_t> rows;
    CVec values;

    explicit ColumnView(const EffectiveChannel& h);
};

/// y = Hx + w with w i.i.d. CN(0, noise.variance).
SymbolVector apply_channel(const EffectiveChannel& h, std::span<const Complex> x, NoiseSpec noise,
                           Rng& rng);

/// Es * 10^(-snr_db / 10), Es the constellation's average energy.
NoiseSpec snr_to_noise_variance(double snr_db, const Constellation& c);

/// One path per line: re(h), im(h), delay_tap, doppler_tap. Lines starting with '#' are ignored.
void write_path_set(std::ostream& out, const PathSet& ps);
PathSet read_path_set(std::istream& in);

}  // namespace otfs
