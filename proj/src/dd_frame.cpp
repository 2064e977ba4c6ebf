#include "otfs/dd_frame.hpp"

#include "otfs/detail/fft2.hpp"
#include "otfs/errors.hpp"

#include <cmath>
#include <string>

namespace otfs {

namespace {

void check_shape(GridShape shape, std::size_t length, const char* what) {
    if (shape.n_doppler == 0 || shape.m_delay == 0) {
        throw input_size_error(std::string(what) + ": grid dimensions must be positive");
    }
    if (length != shape.size()) {
        throw input_size_error(std::string(what) + ": expected " + std::to_string(shape.size()) +
                               " entries, got " + std::to_string(length));
    }
}

}  // namespace

DDFrame::DDFrame(GridShape s, CVec values) : shape(s), symbols(std::move(values)) {
    check_shape(shape, symbols.size(), "DDFrame");
}

TFGrid::TFGrid(GridShape s, CVec v) : shape(s), values(std::move(v)) {
    check_shape(shape, values.size(), "TFGrid");
}

DDFrame map_bits(std::span<const std::uint8_t> bits, const Constellation& c, GridShape shape) {
    const auto bps = static_cast<std::size_t>(c.bits_per_symbol());
    if (bits.size() != shape.size() * bps) {
        throw input_size_error("map_bits: expected " + std::to_string(shape.size() * bps) +
                               " bits, got " + std::to_string(bits.size()));
    }
    DDFrame frame(shape);
    for (std::size_t u = 0; u < shape.size(); ++u) {
        unsigned label = 0;
        for (std::size_t b = 0; b < bps; ++b) {
            label = (label << 1) | (bits[u * bps + b] & 1u);
        }
        frame.symbols[u] = c.point(c.index_of_label(label));
    }
    return frame;
}

Bits indices_to_bits(std::span<const std::size_t> indices, const Constellation& c) {
    const auto bps = static_cast<std::size_t>(c.bits_per_symbol());
    Bits bits(indices.size() * bps);
    for (std::size_t u = 0; u < indices.size(); ++u) {
        const unsigned label = c.label(indices[u]);
        for (std::size_t b = 0; b < bps; ++b) {
            bits[u * bps + b] = static_cast<std::uint8_t>((label >> (bps - 1 - b)) & 1u);
        }
    }
    return bits;
}

Bits demap_symbols(const DDFrame& frame, const Constellation& c) {
    std::vector<std::size_t> indices(frame.symbols.size());
    for (std::size_t u = 0; u < frame.symbols.size(); ++u) {
        const auto idx = c.find(frame.symbols[u]);
        if (!idx) {
            throw domain_error("demap_symbols: entry " + std::to_string(u) + " is not a " + c.name() +
                               " point");
        }
        indices[u] = *idx;
    }
    return indices_to_bits(indices, c);
}

TFGrid isfft(const DDFrame& frame) {
    check_shape(frame.shape, frame.symbols.size(), "isfft");
    const auto [n, m] = frame.shape;
    CVec out = detail::dft2(frame.symbols, n, m, detail::Sign::positive, detail::Sign::negative);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n * m));
    for (auto& v : out) v *= scale;
    return TFGrid(frame.shape, std::move(out));
}

DDFrame sfft(const TFGrid& grid) {
    check_shape(grid.shape, grid.values.size(), "sfft");
    const auto [n, m] = grid.shape;
    CVec out = detail::dft2(grid.values, n, m, detail::Sign::negative, detail::Sign::positive);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n * m));
    for (auto& v : out) v *= scale;
    return DDFrame(grid.shape, std::move(out));
}

SymbolVector vectorize(const DDFrame& frame) {
    check_shape(frame.shape, frame.symbols.size(), "vectorize");
    return frame.symbols;
}

DDFrame devectorize(std::span<const Complex> v, GridShape shape) {
    check_shape(shape, v.size(), "devectorize");
    return DDFrame(shape, CVec(v.begin(), v.end()));
}

}  // namespace otfs
