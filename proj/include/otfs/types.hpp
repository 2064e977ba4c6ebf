#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace otfs {

using Complex = std::complex<double>;
using CVec = std::vector<Complex>;

/// Complex samples indexed by u = k * M + l (Doppler-major).
using SymbolVector = CVec;

/// Delay-Doppler grid dimensions: N Doppler bins by M delay bins.
struct GridShape {
    std::size_t n_doppler = 0;
    std::size_t m_delay = 0;

    std::size_t size() const { return n_doppler * m_delay; }
    std::size_t index(std::size_t k, std::size_t l) const { return k * m_delay + l; }
    std::size_t doppler_of(std::size_t u) const { return u / m_delay; }
    std::size_t delay_of(std::size_t u) const { return u % m_delay; }

    friend bool operator==(const GridShape&, const GridShape&) = default;
};

}  // namespace otfs
