#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"

#include "otfs/dd_frame.hpp"
#include "otfs/errors.hpp"

#include <cmath>
#include <random>

using namespace otfs;

namespace {

const double s = 1.0 / std::sqrt(2.0);

double max_abs_diff(const CVec& a, const CVec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double norm2(const CVec& v) {
    double acc = 0.0;
    for (const auto& z : v) acc += std::norm(z);
    return acc;
}

}  // namespace

TEST_CASE("constellations have unit energy and distinct points") {
    for (const auto& c : {Constellation::bpsk(), Constellation::qpsk(), Constellation::qam16()}) {
        CHECK(std::abs(c.average_energy() - 1.0) < 1e-12);
        CHECK(c.size() == (std::size_t{1} << c.bits_per_symbol()));
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = i + 1; j < c.size(); ++j) CHECK(std::abs(c.point(i) - c.point(j)) > 1e-6);
    }
}

TEST_CASE("qpsk gray table") {
    const auto c = Constellation::qpsk();
    const std::vector<std::pair<Bits, Complex>> table = {
        {{0, 0}, {s, s}}, {{0, 1}, {-s, s}}, {{1, 1}, {-s, -s}}, {{1, 0}, {s, -s}}};
    for (const auto& [bits, point] : table) {
        const auto f = map_bits(bits, c, {1, 1});
        CHECK(std::abs(f.symbols[0] - point) < 1e-15);
    }
    // Neighbours on the circle differ in exactly one bit.
    for (std::size_t i = 0; i < 4; ++i) {
        const auto a = c.point(i);
        for (std::size_t j = 0; j < 4; ++j) {
            if (std::abs(std::abs(a - c.point(j)) - std::sqrt(2.0)) < 1e-12) {
                CHECK(__builtin_popcount(c.label(i) ^ c.label(j)) == 1);
            }
        }
    }
}

TEST_CASE("all-zero bits give a constant frame and demap back") {
    const auto c = Constellation::qpsk();
    const GridShape sh{4, 8};
    const Bits zeros(sh.size() * 2, 0);
    const auto f = map_bits(zeros, c, sh);
    for (const auto& z : f.symbols) CHECK(z == Complex(s, s));
    CHECK(demap_symbols(f, c) == zeros);
}

TEST_CASE("map/demap round trip on random bits") {
    std::mt19937_64 rng(7);
    for (const auto& c : {Constellation::bpsk(), Constellation::qpsk(), Constellation::qam16()}) {
        const GridShape sh{4, 8};
        for (int t = 0; t < 1000; ++t) {
            Bits b(sh.size() * static_cast<std::size_t>(c.bits_per_symbol()));
            for (auto& x : b) x = static_cast<std::uint8_t>(rng() & 1U);
            REQUIRE(demap_symbols(map_bits(b, c, sh), c) == b);
        }
    }
}

TEST_CASE("map_bits rejects a wrong length; demap rejects non-points") {
    const auto c = Constellation::qpsk();
    CHECK_THROWS_AS(map_bits(Bits(7, 0), c, {2, 2}), input_size_error);
    DDFrame f({2, 2});
    for (auto& z : f.symbols) z = {s, s};
    f.symbols[3] = 0.0;
    CHECK_THROWS_AS(demap_symbols(f, c), domain_error);
}

TEST_CASE("indices_to_bits matches map order") {
    const auto c = Constellation::qpsk();
    const std::vector<std::size_t> idx{0, 1, 3, 2};
    CHECK(indices_to_bits(idx, c) == Bits{0, 0, 0, 1, 1, 1, 1, 0});
}

TEST_CASE("isfft of an impulse is flat") {
    for (const GridShape sh : {GridShape{2, 2}, GridShape{4, 8}, GridShape{16, 32}}) {
        DDFrame f(sh);
        f.at(0, 0) = 1.0;
        const auto tf = isfft(f);
        const double level = 1.0 / std::sqrt(static_cast<double>(sh.size()));
        for (const auto& z : tf.values) CHECK(std::abs(z - level) < 1e-12);

        TFGrid flat(sh);
        for (auto& z : flat.values) z = level;
        const auto back = sfft(flat);
        CHECK(std::abs(back.at(0, 0) - 1.0) < 1e-12);
        for (std::size_t u = 1; u < sh.size(); ++u) CHECK(std::abs(back.symbols[u]) < 1e-12);
    }
}

TEST_CASE("isfft equals the direct double sum") {
    std::mt19937_64 rng(11);
    for (const GridShape sh : {GridShape{2, 2}, GridShape{4, 8}, GridShape{3, 5}, GridShape{8, 16}}) {
        const CVec x = oracle::random_complex(rng, sh.size());
        const auto fast = isfft(DDFrame(sh, x)).values;
        CHECK(max_abs_diff(fast, oracle::isfft_direct(x, sh)) < 1e-10);
    }
}

TEST_CASE("transforms are inverse, unitary and linear") {
    std::mt19937_64 rng(12);
    for (const GridShape sh : {GridShape{2, 2}, GridShape{4, 8}, GridShape{16, 32}, GridShape{64, 128}}) {
        const CVec x = oracle::random_complex(rng, sh.size());
        const auto tf = isfft(DDFrame(sh, x));
        CHECK(std::abs(norm2(tf.values) - norm2(x)) < 1e-10 * norm2(x));
        CHECK(max_abs_diff(sfft(tf).symbols, x) < 1e-10);

        const CVec y = oracle::random_complex(rng, sh.size());
        const Complex a{0.3, -1.2}, b{-2.0, 0.5};
        CVec mix(sh.size());
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
        const auto lhs = sfft(TFGrid(sh, mix)).symbols;
        const auto sx = sfft(TFGrid(sh, x)).symbols;
        const auto sy = sfft(TFGrid(sh, y)).symbols;
        CVec rhs(sh.size());
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = a * sx[i] + b * sy[i];
        CHECK(max_abs_diff(lhs, rhs) < 1e-10);
    }
}

TEST_CASE("vector index is Doppler-major") {
    const GridShape sh{64, 128};
    CHECK(sh.index(0, 0) == 0);
    CHECK(sh.index(1, 0) == 128);
    CHECK(sh.index(63, 127) == sh.size() - 1);

    for (const GridShape g : {GridShape{2, 2}, GridShape{4, 8}, GridShape{16, 32}}) {
        DDFrame f(g);
        for (std::size_t k = 0; k < g.n_doppler; ++k)
            for (std::size_t l = 0; l < g.m_delay; ++l) f.at(k, l) = Complex(double(k), double(l));
        const auto v = vectorize(f);
        for (std::size_t u = 0; u < v.size(); ++u) {
            CHECK(v[u].real() == double(u / g.m_delay));
            CHECK(v[u].imag() == double(u % g.m_delay));
        }
        CHECK(devectorize(v, g).symbols == f.symbols);
    }
    CHECK_THROWS_AS(devectorize(CVec(5), {2, 2}), input_size_error);
}
