#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"

#include "otfs/channel.hpp"
#include "otfs/dd_frame.hpp"
#include "otfs/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace otfs;

namespace {

PathSet one_path(Complex g, int l, double kappa) { return PathSet{{Path{g, l, kappa}}}; }

double max_abs_diff(const CVec& a, const CVec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("sample_paths respects bounds and mode") {
    Rng rng(3);
    const GridShape sh{64, 128};
    for (int t = 0; t < 200; ++t) {
        const auto ps = sample_paths(rng, {4, 10, 8.0, true}, sh);
        REQUIRE(ps.paths.size() == 4);
        for (const auto& p : ps.paths) {
            CHECK(p.delay_tap >= 0);
            CHECK(p.delay_tap <= 10);
            CHECK(std::abs(p.doppler_tap) <= 8.0);
        }
        const auto pi = sample_paths(rng, {4, 10, 8.0, false}, sh);
        CHECK(pi.integer_doppler());
    }
    const auto degenerate = sample_paths(rng, {1, 0, 0.0, true}, sh);
    REQUIRE(degenerate.paths.size() == 1);
    CHECK(degenerate.paths[0].delay_tap == 0);
    CHECK(degenerate.paths[0].doppler_tap == 0.0);
}

TEST_CASE("sample_paths covers every integer delay and Doppler value") {
    Rng rng(4);
    std::set<int> delays, dopplers;
    for (int t = 0; t < 500; ++t) {
        for (const auto& p : sample_paths(rng, {4, 3, 2.0, false}, {16, 32}).paths) {
            delays.insert(p.delay_tap);
            dopplers.insert(static_cast<int>(p.doppler_tap));
        }
    }
    CHECK(delays == std::set<int>{0, 1, 2, 3});
    CHECK(dopplers == std::set<int>{-2, -1, 0, 1, 2});
}

TEST_CASE("path gains have total power one on average") {
    Rng rng(5);
    double acc = 0.0;
    const int draws = 10000;
    for (int t = 0; t < draws; ++t) {
        for (const auto& p : sample_paths(rng, {4, 10, 8.0, true}, {64, 128}).paths) acc += std::norm(p.gain);
    }
    CHECK(std::abs(acc / draws - 1.0) < 0.03);
}

TEST_CASE("invalid profiles are config errors") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_paths(rng, {0, 3, 2.0, true}, {16, 32}), config_error);
    CHECK_THROWS_AS(sample_paths(rng, {4, 32, 2.0, true}, {16, 32}), config_error);
    CHECK_THROWS_AS(sample_paths(rng, {4, 3, 8.0, true}, {16, 32}), config_error);
    CHECK_THROWS_AS(sample_paths(rng, {4, -1, 2.0, true}, {16, 32}), config_error);
}

TEST_CASE("dirichlet kernel matches the direct sum") {
    for (std::size_t n : {2u, 7u, 16u, 64u}) {
        for (double x : {0.0, 0.5, -0.5, 1.0, 2.3, -3.75, 5.0, 15.5, 64.0}) {
            CHECK(std::abs(dirichlet(x, n) - oracle::dirichlet_sum(x, n)) < 1e-12);
        }
    }
    CHECK(dirichlet(0.0, 16) == Complex(1.0, 0.0));
    CHECK(dirichlet(3.0, 16) == Complex(0.0, 0.0));
    CHECK(dirichlet(16.0, 16) == Complex(1.0, 0.0));
}

TEST_CASE("spreading function of simple paths") {
    const GridShape sh{8, 16};
    const auto impulse = build_spreading_function(one_path(1.0, 0, 0.0), sh);
    for (std::size_t u = 0; u < sh.size(); ++u) CHECK(impulse.taps[u] == (u == 0 ? Complex(1.0) : Complex(0.0)));

    const auto shifted = build_spreading_function(one_path(1.0, 3, 2.0), sh);
    for (std::size_t u = 0; u < sh.size(); ++u)
        CHECK(shifted.taps[u] == (u == sh.index(2, 3) ? Complex(1.0) : Complex(0.0)));

    const auto frac = build_spreading_function(one_path(1.0, 0, 0.5), sh);
    const double n = static_cast<double>(sh.n_doppler);
    for (std::size_t k = 0; k < sh.n_doppler; ++k) {
        const double x = static_cast<double>(k) - 0.5;
        const double mag = std::abs(std::sin(std::numbers::pi * x) / (n * std::sin(std::numbers::pi * x / n)));
        CHECK(std::abs(std::abs(frac.at(k, 0)) - mag) < 1e-12);
        CHECK(std::abs(frac.at(k, 0) - oracle::dirichlet_sum(x, sh.n_doppler)) < 1e-12);
        for (std::size_t l = 1; l < sh.m_delay; ++l) CHECK(frac.at(k, l) == Complex(0.0));
    }
    // Negative Doppler wraps circularly.
    const auto neg = build_spreading_function(one_path(Complex(0, 2), 1, -1.0), sh);
    CHECK(neg.at(7, 1) == Complex(0, 2));
}

TEST_CASE("spread window keeps 2w+1 bins around the rounded Doppler") {
    const GridShape sh{16, 8};
    const auto full = build_spreading_function(one_path(1.0, 2, 3.4), sh);
    const auto cut = build_spreading_function(one_path(1.0, 2, 3.4), sh, 2);
    for (std::size_t k = 0; k < sh.n_doppler; ++k) {
        const bool kept = k >= 1 && k <= 5;
        CHECK(cut.at(k, 2) == (kept ? full.at(k, 2) : Complex(0.0)));
    }
    // The kept bins are the largest-magnitude ones.
    double smallest_kept = 1e9, largest_dropped = 0.0;
    for (std::size_t k = 0; k < sh.n_doppler; ++k) {
        const double m = std::abs(full.at(k, 2));
        if (k >= 1 && k <= 5) smallest_kept = std::min(smallest_kept, m);
        else largest_dropped = std::max(largest_dropped, m);
    }
    CHECK(smallest_kept > largest_dropped);
    CHECK(EffectiveChannel::from_paths(one_path(1.0, 2, 3.4), sh, 2).row_nnz(0) == 5);
}

TEST_CASE("single unit path at the origin gives the identity") {
    const auto h = EffectiveChannel::from_paths(one_path(1.0, 0, 0.0), {4, 8});
    for (std::size_t r = 0; r < h.dim(); ++r) {
        REQUIRE(h.row_nnz(r) == 1);
        CHECK(h.row_cols(r)[0] == r);
        CHECK(h.row_values(r)[0] == Complex(1.0));
    }
}

TEST_CASE("integer single path is a permutation") {
    const GridShape sh{8, 16};
    const auto h = EffectiveChannel::from_paths(one_path(1.0, 5, -3.0), sh);
    std::vector<int> col_hits(h.dim(), 0);
    for (std::size_t r = 0; r < h.dim(); ++r) {
        REQUIRE(h.row_nnz(r) == 1);
        CHECK(h.row_values(r)[0] == Complex(1.0));
        ++col_hits[h.row_cols(r)[0]];
    }
    for (int c : col_hits) CHECK(c == 1);
}

TEST_CASE("integer Doppler with distinct taps gives P nonzeros per row and column") {
    const GridShape sh{16, 32};
    const PathSet ps{{Path{{0.5, 0.1}, 0, 0.0}, Path{{-0.3, 0.4}, 1, 2.0}, Path{{0.2, -0.6}, 3, -2.0},
                      Path{{0.7, 0.7}, 3, 1.0}}};
    const auto h = EffectiveChannel::from_paths(ps, sh);
    const ColumnView cols(h);
    for (std::size_t r = 0; r < h.dim(); ++r) {
        CHECK(h.row_nnz(r) == 4);
        CHECK(cols.col_ptr[r + 1] - cols.col_ptr[r] == 4);
    }
}

TEST_CASE("row nonzero counts are constant and H is two-level circulant") {
    Rng rng(9);
    const GridShape sh{8, 16};
    for (bool frac : {false, true}) {
        const auto ps = sample_paths(rng, {4, 3, 2.0, frac}, sh);
        const auto h = EffectiveChannel::from_paths(ps, sh);
        CHECK(h.circulant());
        for (std::size_t r = 1; r < h.dim(); ++r) CHECK(h.row_nnz(r) == h.row_nnz(0));

        std::uniform_int_distribution<std::size_t> pick(0, h.dim() - 1);
        std::uniform_int_distribution<std::size_t> pk(0, sh.n_doppler - 1), pl(0, sh.m_delay - 1);
        for (int t = 0; t < 100; ++t) {
            const std::size_t u = pick(rng), v = pick(rng);
            const std::size_t dk = pk(rng), dl = pl(rng);
            const std::size_t u2 = sh.index((sh.doppler_of(u) + dk) % sh.n_doppler, (sh.delay_of(u) + dl) % sh.m_delay);
            const std::size_t v2 = sh.index((sh.doppler_of(v) + dk) % sh.n_doppler, (sh.delay_of(v) + dl) % sh.m_delay);
            CHECK(h.at(u, v) == h.at(u2, v2));
        }
    }
}

TEST_CASE("H x matches the quadruple-loop oracle") {
    Rng rng(21);
    std::mt19937_64 xr(22);
    for (const GridShape sh : {GridShape{2, 2}, GridShape{4, 8}, GridShape{8, 16}}) {
        for (bool frac : {false, true}) {
            const int lmax = static_cast<int>(sh.m_delay) - 1 < 3 ? static_cast<int>(sh.m_delay) - 1 : 3;
            const double half = static_cast<double>(sh.n_doppler) / 2.0 - 0.5;
            const double kmax = frac ? half : std::floor(half);
            const auto ps = sample_paths(rng, {4, lmax, kmax, frac}, sh);
            const auto dense = oracle::dense_channel(ps, sh);
            const auto h = EffectiveChannel::from_paths(ps, sh);
            const CVec x = oracle::random_complex(xr, sh.size());
            CHECK(max_abs_diff(h.multiply(x), oracle::apply_dense(dense, x)) < 1e-10);

            // Adjoint product against the dense conjugate transpose.
            CVec hty(sh.size());
            for (std::size_t c = 0; c < sh.size(); ++c)
                for (std::size_t r = 0; r < sh.size(); ++r) hty[c] += std::conj(dense[r][c]) * x[r];
            CHECK(max_abs_diff(h.multiply_adjoint(x), hty) < 1e-10);
        }
    }
}

TEST_CASE("from_dense and from_spreading agree with from_paths") {
    Rng rng(31);
    const GridShape sh{4, 8};
    const auto ps = sample_paths(rng, {3, 3, 1.5, true}, sh);
    const auto a = EffectiveChannel::from_paths(ps, sh);
    const auto b = EffectiveChannel::from_spreading(build_spreading_function(ps, sh));
    const auto dense = oracle::to_dense(a);
    CVec flat;
    for (const auto& row : dense) flat.insert(flat.end(), row.begin(), row.end());
    const auto c = EffectiveChannel::from_dense(sh, flat);
    CHECK_FALSE(c.circulant());
    for (std::size_t r = 0; r < sh.size(); ++r)
        for (std::size_t col = 0; col < sh.size(); ++col) {
            CHECK(a.at(r, col) == b.at(r, col));
            CHECK(a.at(r, col) == c.at(r, col));
        }
    CHECK_THROWS_AS(EffectiveChannel::from_dense(sh, CVec(3)), input_size_error);
}

TEST_CASE("apply_channel without noise is the plain product") {
    Rng rng(41);
    std::mt19937_64 xr(42);
    const GridShape sh{4, 8};
    const auto eye = EffectiveChannel::from_paths(one_path(1.0, 0, 0.0), sh);
    const CVec x = oracle::random_complex(xr, sh.size());
    CHECK(apply_channel(eye, x, {0.0}, rng) == x);

    const auto h = EffectiveChannel::from_paths(sample_paths(rng, {4, 3, 1.5, true}, sh), sh);
    CHECK(max_abs_diff(apply_channel(h, x, {0.0}, rng), h.multiply(x)) < 1e-12);
    CHECK_THROWS_AS(apply_channel(h, CVec(3), {0.0}, rng), input_size_error);
}

TEST_CASE("apply_channel noise has the requested variance") {
    Rng rng(51);
    const GridShape sh{16, 32};
    const auto h = EffectiveChannel::from_paths(one_path(1.0, 0, 0.0), sh);
    const CVec x(sh.size(), Complex(0.0));
    double acc = 0.0, re2 = 0.0;
    std::size_t count = 0;
    while (count < 100000) {
        for (const auto& w : apply_channel(h, x, {0.1}, rng)) {
            acc += std::norm(w);
            re2 += w.real() * w.real();
            ++count;
        }
    }
    CHECK(std::abs(acc / double(count) - 0.1) < 0.003);
    // Circular symmetry: half the power on each axis.
    CHECK(std::abs(re2 / double(count) - 0.05) < 0.0015);
}

TEST_CASE("snr to noise variance") {
    const auto c = Constellation::qpsk();
    CHECK(std::abs(snr_to_noise_variance(0.0, c).variance - 1.0) < 1e-15);
    CHECK(std::abs(snr_to_noise_variance(10.0, c).variance - 0.1) < 1e-15);
    CHECK(std::abs(snr_to_noise_variance(15.0, c).variance - 0.0316227766) < 1e-10);
}

TEST_CASE("path set text round trip") {
    const PathSet ps{{Path{{0.125, -0.5}, 3, 1.75}, Path{{-1.0, 0.0}, 0, -2.0}}};
    std::stringstream buf;
    write_path_set(buf, ps);
    std::stringstream with_comment("# fixture\n" + buf.str());
    const auto back = read_path_set(with_comment);
    REQUIRE(back.paths.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.paths[i].gain == ps.paths[i].gain);
        CHECK(back.paths[i].delay_tap == ps.paths[i].delay_tap);
        CHECK(back.paths[i].doppler_tap == ps.paths[i].doppler_tap);
    }
    std::stringstream bad("1.0, 2.0, x, 0\n");
    CHECK_THROWS(read_path_set(bad));
}
