#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"

#include "otfs/baseline.hpp"
#include "otfs/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace otfs;

namespace {

PathSet one_path(Complex g, int l, double kappa) { return PathSet{{Path{g, l, kappa}}}; }

EffectiveChannel random_dense(std::mt19937_64& rng, GridShape sh) {
    return EffectiveChannel::from_dense(sh, oracle::random_complex(rng, sh.size() * sh.size(), std::sqrt(0.5)));
}

}  // namespace

TEST_CASE("hypothesis cap") {
    CHECK(hypothesis_count(4, 4, {}) == 256);
    CHECK(hypothesis_count(4, 10, {}) == (std::uint64_t{1} << 20));
    CHECK_THROWS_AS(hypothesis_count(4, 11, {}), refusal_error);
    CHECK_THROWS_AS(hypothesis_count(4, 64, {}), refusal_error);
    const auto c = Constellation::qpsk();
    const auto h = EffectiveChannel::from_paths(one_path(1.0, 0, 0.0), {8, 8});
    const CVec y(64, 1.0);
    CHECK_THROWS_AS(map_bruteforce(y, h, c), refusal_error);
    CHECK_THROWS_AS(marginals_bruteforce(y, h, 1.0, c), refusal_error);
}

TEST_CASE("map on the identity channel returns the transmitted symbols") {
    const auto c = Constellation::qpsk();
    std::mt19937_64 rng(1);
    const auto h = EffectiveChannel::from_paths(one_path(1.0, 0, 0.0), {2, 2});
    std::vector<std::size_t> idx;
    const CVec x = oracle::random_symbols(rng, c, 4, &idx);
    CHECK(map_bruteforce(x, h, c) == idx);
}

TEST_CASE("map agrees with an independent reversed-order enumeration") {
    const auto c = Constellation::qpsk();
    std::mt19937_64 rng(2);
    for (int t = 0; t < 30; ++t) {
        const auto h = random_dense(rng, {2, 2});
        const CVec y = apply_channel(h, oracle::random_symbols(rng, c, 4), {0.5}, rng);
        const auto map = map_bruteforce(y, h, c);
        CHECK(map == oracle::map_reverse(oracle::to_dense(h), y, c));

        // Joint positive rescaling of (y, H) does not move the minimizer.
        CVec y3(y);
        for (auto& z : y3) z *= 3.5;
        CVec dense;
        for (const auto& row : oracle::to_dense(h)) dense.insert(dense.end(), row.begin(), row.end());
        for (auto& z : dense) z *= 3.5;
        CHECK(map_bruteforce(y3, EffectiveChannel::from_dense({2, 2}, dense), c) == map);
    }
}

TEST_CASE("map ties resolve to the lexicographically smallest index vector") {
    // H = 0 makes every hypothesis equally good.
    const auto c = Constellation::qpsk();
    const auto h = EffectiveChannel::from_dense({1, 2}, CVec(4));
    CHECK(map_bruteforce(CVec(2), h, c) == std::vector<std::size_t>{0, 0});
}

TEST_CASE("brute-force marginals: identity factorizes, rows sum to one") {
    const auto c = Constellation::qpsk();
    std::mt19937_64 rng(3);
    const auto h = EffectiveChannel::from_paths(one_path(1.0, 0, 0.0), {2, 2});
    const CVec y = oracle::random_complex(rng, 4);
    const double s2 = 0.7;
    const auto p = marginals_bruteforce(y, h, s2, c);
    for (std::size_t u = 0; u < 4; ++u) {
        double z = 0.0;
        for (std::size_t a = 0; a < 4; ++a) z += std::exp(-std::norm(y[u] - c.point(a)) / s2);
        double sum = 0.0;
        for (std::size_t a = 0; a < 4; ++a) {
            CHECK(std::abs(p[u * 4 + a] - std::exp(-std::norm(y[u] - c.point(a)) / s2) / z) < 1e-12);
            sum += p[u * 4 + a];
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("brute-force marginals equal the independent posterior oracle") {
    const auto c = Constellation::qpsk();
    std::mt19937_64 rng(4);
    for (int t = 0; t < 5; ++t) {
        const auto h = random_dense(rng, {2, 2});
        const CVec y = oracle::random_complex(rng, 4);
        const auto p = marginals_bruteforce(y, h, 0.3, c);
        const auto q = oracle::posteriors(oracle::to_dense(h), y, 0.3, c);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
    }
}

TEST_CASE("zero noise marginals are the MAP indicator") {
    const auto c = Constellation::qpsk();
    std::mt19937_64 rng(5);
    const auto h = random_dense(rng, {1, 4});
    const CVec y = oracle::random_complex(rng, 4);
    const auto p = marginals_bruteforce(y, h, 0.0, c);
    const auto map = map_bruteforce(y, h, c);
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t a = 0; a < 4; ++a) CHECK(p[u * 4 + a] == (a == map[u] ? 1.0 : 0.0));
}

TEST_CASE("marginal argmax equals MAP on single-path channels") {
    const auto c = Constellation::qpsk();
    Rng rng(6);
    std::mt19937_64 xr(7);
    for (int t = 0; t < 20; ++t) {
        const GridShape sh{2, 4};
        const auto h = EffectiveChannel::from_paths(sample_paths(rng, {1, 3, 0.5, true}, sh), sh);
        const CVec y = apply_channel(h, oracle::random_symbols(xr, c, sh.size()), {0.2}, rng);
        CHECK(argmax_rows(marginals_bruteforce(y, h, 0.2, c), 4) == map_bruteforce(y, h, c));
    }
}

TEST_CASE("canonical SPA on the identity is the per-symbol likelihood") {
    const auto c = Constellation::qpsk();
    std::mt19937_64 rng(8);
    const auto h = EffectiveChannel::from_paths(one_path(1.0, 0, 0.0), {2, 4});
    const CVec y = oracle::random_complex(rng, 8);
    const double s2 = 0.4;
    const auto b = canonical_spa(y, h, s2, c, 1);
    for (std::size_t u = 0; u < 8; ++u) {
        double z = 0.0;
        for (std::size_t a = 0; a < 4; ++a) z += std::exp(-std::norm(y[u] - c.point(a)) / s2);
        for (std::size_t a = 0; a < 4; ++a)
            CHECK(std::abs(b[u * 4 + a] - std::exp(-std::norm(y[u] - c.point(a)) / s2) / z) < 1e-12);
    }
}

TEST_CASE("canonical SPA matches brute force on single-path channels") {
    const auto c = Constellation::qpsk();
    Rng rng(9);
    std::mt19937_64 xr(10);
    for (int t = 0; t < 10; ++t) {
        const GridShape sh{2, 2};
        const auto h = EffectiveChannel::from_paths(sample_paths(rng, {1, 1, 0.0, false}, sh), sh);
        const CVec y = apply_channel(h, oracle::random_symbols(xr, c, 4), {0.3}, rng);
        const auto b = canonical_spa(y, h, 0.3, c, 5);
        const auto p = marginals_bruteforce(y, h, 0.3, c);
        for (std::size_t i = 0; i < b.size(); ++i) CHECK(std::abs(b[i] - p[i]) < 1e-9);
    }
}

TEST_CASE("canonical SPA beliefs are distributions at every iteration") {
    const auto c = Constellation::qpsk();
    Rng rng(11);
    std::mt19937_64 xr(12);
    const GridShape sh{2, 4};
    const auto h = EffectiveChannel::from_paths(sample_paths(rng, {2, 3, 0.0, false}, sh), sh);
    const CVec y = apply_channel(h, oracle::random_symbols(xr, c, sh.size()), {0.1}, rng);
    for (int k = 1; k <= 10; ++k) {
        const auto b = canonical_spa(y, h, 0.1, c, k);
        for (std::size_t u = 0; u < sh.size(); ++u) {
            double sum = 0.0;
            for (std::size_t a = 0; a < 4; ++a) {
                CHECK(b[u * 4 + a] >= 0.0);
                sum += b[u * 4 + a];
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("canonical SPA decisions match MAP on two-path channels at 20 dB") {
    const auto c = Constellation::qpsk();
    const GridShape sh{2, 2};
    const double s2 = snr_to_noise_variance(20.0, c).variance;
    int agree = 0;
    for (int t = 0; t < 100; ++t) {
        Rng rng(500 + t);
        const auto h = EffectiveChannel::from_paths(sample_paths(rng, {2, 1, 0.0, false}, sh), sh);
        std::mt19937_64 xr(900 + t);
        const CVec y = apply_channel(h, oracle::random_symbols(xr, c, 4), {s2}, rng);
        agree += argmax_rows(canonical_spa(y, h, s2, c, 20), 4) == map_bruteforce(y, h, c);
    }
    CHECK(agree >= 95);
}

TEST_CASE("canonical SPA refusals") {
    const auto c = Constellation::qpsk();
    std::mt19937_64 rng(13);
    const auto h = EffectiveChannel::from_paths(one_path(1.0, 0, 0.0), {2, 2});
    CHECK_THROWS_AS(canonical_spa(CVec(4), h, 0.0, c, 3), refusal_error);
    // Seven nonzeros per row: 4^6 = 4096 terms is allowed, eight would need 4^7.
    const auto wide = EffectiveChannel::from_dense({2, 4}, oracle::random_complex(rng, 64));
    CHECK_THROWS_AS(canonical_spa(CVec(8), wide, 1.0, c, 1), refusal_error);
}

TEST_CASE("lmmse estimate equals a dense solve") {
    std::mt19937_64 rng(14);
    for (bool circulant : {false, true}) {
        for (int t = 0; t < 5; ++t) {
            const GridShape sh{2, 4};
            Rng prng(rng());
            const auto h = circulant ? EffectiveChannel::from_paths(sample_paths(prng, {3, 3, 0.5, true}, sh), sh)
                                     : random_dense(rng, sh);
            const CVec y = oracle::random_complex(rng, 8);
            const double s2 = 0.2;
            const auto dense = oracle::to_dense(h);
            Eigen::MatrixXcd hm(8, 8);
            Eigen::VectorXcd yv(8);
            for (int r = 0; r < 8; ++r) {
                yv(r) = y[std::size_t(r)];
                for (int col = 0; col < 8; ++col) hm(r, col) = dense[std::size_t(r)][std::size_t(col)];
            }
            const Eigen::MatrixXcd a = hm.adjoint() * hm + s2 * Eigen::MatrixXcd::Identity(8, 8);
            const Eigen::VectorXcd ref = a.fullPivLu().solve(hm.adjoint() * yv);
            const auto est = lmmse_estimate(y, h, s2);
            for (int i = 0; i < 8; ++i) CHECK(std::abs(est[std::size_t(i)] - ref(i)) < 1e-8);
        }
    }
}

TEST_CASE("lmmse recovers symbols through identity and permutation channels") {
    const auto c = Constellation::qpsk();
    std::mt19937_64 rng(15);
    for (const auto& ps : {one_path(1.0, 0, 0.0), one_path(1.0, 2, 1.0)}) {
        const auto h = EffectiveChannel::from_paths(ps, {4, 8});
        std::vector<std::size_t> idx;
        const CVec x = oracle::random_symbols(rng, c, 32, &idx);
        CHECK(lmmse(h.multiply(x), h, 0.0, c) == idx);
        CHECK(lmmse(h.multiply(x), h, 0.01, c) == idx);
    }
    // Rank-deficient H at zero noise still returns finite values.
    const auto zero = EffectiveChannel::from_dense({1, 2}, CVec(4));
    for (const auto& z : lmmse_estimate(CVec(2, 1.0), zero, 0.0)) CHECK(std::isfinite(z.real()));
}

TEST_CASE("argmax_rows ties go to the lowest index") {
    const std::vector<double> t{0.1, 0.5, 0.5, 0.2, 3.0, 1.0, 2.0, 3.0};
    CHECK(argmax_rows(t, 4) == std::vector<std::size_t>{1, 0});
}
