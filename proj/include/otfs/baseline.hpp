#pragma once

#include "otfs/channel.hpp"
#include "otfs/constellation.hpp"
#include "otfs/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace otfs {

/// Enumeration budget for the exhaustive oracles.
struct OracleLimits {
    std::uint64_t max_hypotheses = std::uint64_t{1} << 20;
};

/// |A|^NM if it fits the budget; throws refusal_error otherwise.
std::uint64_t hypothesis_count(std::size_t alphabet, std::size_t dim, const OracleLimits& limits);

/// argmin_x ||y - Hx||^2 over all of A^NM. Ties go to the lexicographically
/// smallest index vector (x_0 most significant). Returns constellation indices.
std::vector<std::size_t> map_bruteforce(std::span<const Complex> y, const EffectiveChannel& h,
                                        const Constellation& c, const OracleLimits& limits = {});

/// Per-symbol posteriors P(x_u = a | y) under a uniform prior, row-major u * |A| + a.
/// With noise_variance == 0 each row is the indicator of the MAP symbol.
std::vector<double> marginals_bruteforce(std::span<const Complex> y, const EffectiveChannel& h,
                                         double noise_variance, const Constellation& c,
                                         const OracleLimits& limits = {});

/// Limit on |A|^(d-1) terms per factor-to-variable sum.
inline constexpr std::uint64_t kCanonicalSpaMaxTerms = 4096;

/**
 * Loopy sum-product on the per-observation factor graph: one factor per
 * row of H, connected to that row's nonzero columns. Returns beliefs
 * (normalized products of all incoming messages), u * |A| + a.
 */
std::vector<double> canonical_spa(std::span<const Complex> y, const EffectiveChannel& h, double noise_variance,
                                  const Constellation& c, int iterations);

/// (H^H H + s I)^-1 H^H y with s = max(noise_variance, 1e-12).
SymbolVector lmmse_estimate(std::span<const Complex> y, const EffectiveChannel& h, double noise_variance);
/// lmmse_estimate sliced to the nearest constellation points (indices).
std::vector<std::size_t> lmmse(std::span<const Complex> y, const EffectiveChannel& h, double noise_variance,
                               const Constellation& c);

/// Row-wise argmax of u * |A| + a probability/log tables; ties go to the lowest index.
std::vector<std::size_t> argmax_rows(std::span<const double> table, std::size_t alphabet);

}  // namespace otfs
