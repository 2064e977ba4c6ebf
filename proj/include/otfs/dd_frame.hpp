#pragma once

#include "otfs/constellation.hpp"
#include "otfs/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace otfs {

using Bits = std::vector<std::uint8_t>;

/// N x M delay-Doppler symbol grid; symbols[k * M + l] holds x[k, l].
struct DDFrame {
    GridShape shape;
    CVec symbols;

    DDFrame() = default;
    explicit DDFrame(GridShape s) : shape(s), symbols(s.size()) {}
    DDFrame(GridShape s, CVec values);

    Complex& at(std::size_t k, std::size_t l) { return symbols[shape.index(k, l)]; }
    const Complex& at(std::size_t k, std::size_t l) const { return symbols[shape.index(k, l)]; }
};

/// N x M time-frequency grid; values[n * M + m] holds X[n, m].
struct TFGrid {
    GridShape shape;
    CVec values;

    TFGrid() = default;
    explicit TFGrid(GridShape s) : shape(s), values(s.size()) {}
    TFGrid(GridShape s, CVec v);

    Complex& at(std::size_t n, std::size_t m) { return values[shape.index(n, m)]; }
    const Complex& at(std::size_t n, std::size_t m) const { return values[shape.index(n, m)]; }
};

/// Groups of bits_per_symbol bits (first bit most significant) to points.
DDFrame map_bits(std::span<const std::uint8_t> bits, const Constellation& c, GridShape shape);

/// Inverse of map_bits. Throws domain_error if an entry is not a constellation point.
Bits demap_symbols(const DDFrame& frame, const Constellation& c);

/// Bits carried by a sequence of constellation indices.
Bits indices_to_bits(std::span<const std::size_t> indices, const Constellation& c);

/// X[n,m] = 1/sqrt(NM) sum_k sum_l x[k,l] exp(j2pi(nk/N - ml/M)).
TFGrid isfft(const DDFrame& frame);
/// Exact inverse of isfft.
DDFrame sfft(const TFGrid& grid);

SymbolVector vectorize(const DDFrame& frame);
DDFrame devectorize(std::span<const Complex> v, GridShape shape);

}  // namespace otfs
