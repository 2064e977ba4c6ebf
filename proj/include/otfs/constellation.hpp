#pragma once

#include "otfs/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace otfs {

/**
 * Unit-energy symbol alphabet with a fixed bit labeling.
 *
 * Points are stored in label order: point i carries the bit pattern i,
 * most significant bit first. "Constellation index" everywhere in this
 * library refers to that position.
 */
class Constellation {
public:
    /// Gray QPSK: 00 -> (1+j)/sqrt2, 01 -> (-1+j)/sqrt2, 11 -> (-1-j)/sqrt2, 10 -> (1-j)/sqrt2.
    static Constellation qpsk();
    static Constellation bpsk();
    /// Gray 16-QAM, two bits per axis (I from the high pair, Q from the low pair).
    static Constellation qam16();
    /// "bpsk", "qpsk" or "16qam".
    static Constellation by_name(std::string_view name);

    const std::string& name() const { return name_; }
    std::span<const Complex> points() const { return points_; }
    const Complex& point(std::size_t index) const { return points_[index]; }
    std::size_t size() const { return points_.size(); }
    int bits_per_symbol() const { return bits_per_symbol_; }

    /// Bit pattern carried by a point (MSB is the first transmitted bit).
    unsigned label(std::size_t index) const { return static_cast<unsigned>(index); }
    std::size_t index_of_label(unsigned bits) const { return bits; }

    /// Mean |a|^2 over the alphabet.
    double average_energy() const;

    /// Index of the point equal to z (within tol), if any.
    std::optional<std::size_t> find(Complex z, double tol = 1e-9) const;
    /// Index of the closest point; ties resolve to the lowest index.
    std::size_t nearest(Complex z) const;

private:
    Constellation(std::string name, int bits_per_symbol, CVec points);

    std::string name_;
    int bits_per_symbol_ = 0;
    CVec points_;
};

}  // namespace otfs
