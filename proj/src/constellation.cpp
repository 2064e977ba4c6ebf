#include "otfs/constellation.hpp"

#include "otfs/errors.hpp"

#include <cmath>
#include <limits>

namespace otfs {

Constellation::Constellation(std::string name, int bits_per_symbol, CVec points)
    : name_(std::move(name)), bits_per_symbol_(bits_per_symbol), points_(std::move(points)) {}

Constellation Constellation::qpsk() {
    const double s = 1.0 / std::sqrt(2.0);
    // label order 00, 01, 10, 11
    return Constellation("qpsk", 2, {{s, s}, {-s, s}, {s, -s}, {-s, -s}});
}

Constellation Constellation::bpsk() {
    return Constellation("bpsk", 1, {{1.0, 0.0}, {-1.0, 0.0}});
}

Constellation Constellation::qam16() {
    // Gray per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
    static constexpr double level[4] = {-3.0, -1.0, 3.0, 1.0};
    const double s = 1.0 / std::sqrt(10.0);
    CVec pts(16);
    for (unsigned label = 0; label < 16; ++label) {
        pts[label] = Complex(level[label >> 2] * s, level[label & 3u] * s);
    }
    return Constellation("16qam", 4, std::move(pts));
}

Constellation Constellation::by_name(std::string_view name) {
    if (name == "qpsk") return qpsk();
    if (name == "bpsk") return bpsk();
    if (name == "16qam" || name == "qam16") return qam16();
    throw config_error("unknown modulation '" + std::string(name) + "'");
}

double Constellation::average_energy() const {
    double e = 0.0;
    for (const auto& p : points_) e += std::norm(p);
    return e / static_cast<double>(points_.size());
}

std::optional<std::size_t> Constellation::find(Complex z, double tol) const {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (std::abs(points_[i] - z) <= tol) return i;
    }
    return std::nullopt;
}

std::size_t Constellation::nearest(Complex z) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const double d = std::norm(points_[i] - z);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

}  // namespace otfs
