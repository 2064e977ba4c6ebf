#include "otfs/channel.hpp"

#include "otfs/detail/number_format.hpp"
#include "otfs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

namespace otfs {

namespace {

std::size_t wrap(long long value, std::size_t period) {
    const auto p = static_cast<long long>(period);
    return static_cast<std::size_t>(((value % p) + p) % p);
}

}  // namespace

bool PathSet::integer_doppler() const {
    return std::all_of(paths.begin(), paths.end(),
                       [](const Path& p) { return p.doppler_tap == std::round(p.doppler_tap); });
}

void validate_profile(const ChannelProfile& profile, GridShape shape) {
    if (profile.num_paths < 1) throw config_error("channel: need at least one path");
    if (profile.l_max < 0 || static_cast<std::size_t>(profile.l_max) >= shape.m_delay) {
        throw config_error("channel: l_max must satisfy 0 <= l_max < M (l_max=" +
                           std::to_string(profile.l_max) + ", M=" + std::to_string(shape.m_delay) + ")");
    }
    if (!(profile.k_max >= 0.0) || !(profile.k_max < static_cast<double>(shape.n_doppler) / 2.0)) {
        throw config_error("channel: k_max must satisfy 0 <= k_max < N/2 (k_max=" +
                           detail::format_double(profile.k_max) +
                           ", N=" + std::to_string(shape.n_doppler) + ")");
    }
    if (!profile.fractional && profile.k_max != std::floor(profile.k_max)) {
        throw config_error("channel: integer Doppler mode needs an integer k_max");
    }
}

void validate_paths(const PathSet& ps, GridShape shape) {
    if (ps.paths.empty()) throw config_error("channel: path set is empty");
    for (const auto& p : ps.paths) {
        if (p.delay_tap < 0 || static_cast<std::size_t>(p.delay_tap) >= shape.m_delay) {
            throw config_error("channel: delay tap " + std::to_string(p.delay_tap) + " outside [0, M)");
        }
        if (!std::isfinite(p.doppler_tap) ||
            !(std::abs(p.doppler_tap) < static_cast<double>(shape.n_doppler) / 2.0)) {
            throw config_error("channel: Doppler tap " + detail::format_double(p.doppler_tap) +
                               " outside (-N/2, N/2)");
        }
        if (!std::isfinite(p.gain.real()) || !std::isfinite(p.gain.imag())) {
            throw config_error("channel: non-finite path gain");
        }
    }
}

PathSet sample_paths(Rng& rng, const ChannelProfile& profile, GridShape shape) {
    validate_profile(profile, shape);
    const double sigma = std::sqrt(1.0 / (2.0 * profile.num_paths));
    std::normal_distribution<double> gauss(0.0, sigma);
    std::uniform_int_distribution<int> delay(0, profile.l_max);
    const auto k_int = static_cast<int>(profile.k_max);
    std::uniform_int_distribution<int> doppler_int(-k_int, k_int);
    std::uniform_real_distribution<double> doppler_real(-profile.k_max, profile.k_max);

    PathSet ps;
    ps.paths.reserve(static_cast<std::size_t>(profile.num_paths));
    for (int i = 0; i < profile.num_paths; ++i) {
        Path p;
        p.delay_tap = delay(rng);
        p.doppler_tap = profile.fractional ? doppler_real(rng) : doppler_int(rng);
        const double re = gauss(rng);
        const double im = gauss(rng);
        p.gain = Complex(re, im);
        ps.paths.push_back(p);
    }
    return ps;
}

Complex dirichlet(double x, std::size_t n) {
    const auto nn = static_cast<double>(n);
    if (x == std::round(x)) {
        return wrap(static_cast<long long>(std::llround(x)), n) == 0 ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
    }
    const double pi = std::numbers::pi;
    const double magnitude = std::sin(pi * x) / (nn * std::sin(pi * x / nn));
    return std::polar(1.0, pi * x * (nn - 1.0) / nn) * magnitude;
}

SpreadingFunction build_spreading_function(const PathSet& ps, GridShape shape, SpreadWindow window) {
    validate_paths(ps, shape);
    if (window && *window < 0) throw config_error("channel: spread window must be >= 0");
    SpreadingFunction hw{shape, CVec(shape.size())};
    const std::size_t n = shape.n_doppler;
    for (const auto& p : ps.paths) {
        const auto l = static_cast<std::size_t>(p.delay_tap);
        const bool full = !window || static_cast<std::size_t>(2 * *window + 1) >= n;
        if (full) {
            for (std::size_t k = 0; k < n; ++k) {
                hw.taps[shape.index(k, l)] += p.gain * dirichlet(static_cast<double>(k) - p.doppler_tap, n);
            }
        } else {
            const auto centre = std::llround(p.doppler_tap);
            for (long long j = -*window; j <= *window; ++j) {
                const std::size_t k = wrap(centre + j, n);
                hw.taps[shape.index(k, l)] += p.gain * dirichlet(static_cast<double>(k) - p.doppler_tap, n);
            }
        }
    }
    return hw;
}

EffectiveChannel EffectiveChannel::from_paths(const PathSet& ps, GridShape shape, SpreadWindow window) {
    return from_spreading(build_spreading_function(ps, shape, window));
}

EffectiveChannel EffectiveChannel::from_spreading(SpreadingFunction hw) {
    const GridShape shape = hw.shape;
    const std::size_t n = shape.n_doppler;
    const std::size_t m = shape.m_delay;
    if (shape.size() == 0 || hw.taps.size() != shape.size()) {
        throw input_size_error("spreading function does not match its grid shape");
    }

    struct Tap {
        std::size_t dk, dl;
        Complex value;
    };
    std::vector<Tap> support;
    for (std::size_t dk = 0; dk < n; ++dk) {
        for (std::size_t dl = 0; dl < m; ++dl) {
            const Complex v = hw.at(dk, dl);
            if (v != Complex(0.0, 0.0)) support.push_back({dk, dl, v});
        }
    }

    EffectiveChannel h;
    h.shape_ = shape;
    h.row_ptr_.resize(shape.size() + 1);
    h.cols_.reserve(shape.size() * support.size());
    h.values_.reserve(shape.size() * support.size());
    std::vector<std::pair<std::size_t, Complex>> row;
    row.reserve(support.size());
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < m; ++l) {
            row.clear();
            for (const auto& t : support) {
                const std::size_t col = shape.index((k + n - t.dk) % n, (l + m - t.dl) % m);
                row.emplace_back(col, t.value);
            }
            std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            for (const auto& [c, v] : row) {
                h.cols_.push_back(c);
                h.values_.push_back(v);
            }
            h.row_ptr_[shape.index(k, l) + 1] = h.cols_.size();
        }
    }
    h.spreading_ = std::move(hw);
    return h;
}

EffectiveChannel EffectiveChannel::from_dense(GridShape shape, std::span<const Complex> row_major) {
    const std::size_t d = shape.size();
    if (d == 0 || row_major.size() != d * d) {
        throw input_size_error("from_dense: expected " + std::to_string(d * d) + " entries");
    }
    EffectiveChannel h;
    h.shape_ = shape;
    h.row_ptr_.resize(d + 1);
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            const Complex v = row_major[r * d + c];
            if (v != Complex(0.0, 0.0)) {
                h.cols_.push_back(c);
                h.values_.push_back(v);
            }
        }
        h.row_ptr_[r + 1] = h.cols_.size();
    }
    return h;
}

std::span<const std::size_t> EffectiveChannel::row_cols(std::size_t row) const {
    return {cols_.data() + row_ptr_[row], row_nnz(row)};
}

std::span<const Complex> EffectiveChannel::row_values(std::size_t row) const {
    return {values_.data() + row_ptr_[row], row_nnz(row)};
}

Complex EffectiveChannel::at(std::size_t row, std::size_t col) const {
    const auto cols = row_cols(row);
    const auto it = std::lower_bound(cols.begin(), cols.end(), col);
    if (it == cols.end() || *it != col) return {};
    return row_values(row)[static_cast<std::size_t>(it - cols.begin())];
}

SymbolVector EffectiveChannel::multiply(std::span<const Complex> x) const {
    if (x.size() != dim()) throw input_size_error("H*x: dimension mismatch");
    SymbolVector y(dim());
    for (std::size_t r = 0; r < dim(); ++r) {
        Complex acc{};
        const auto cols = row_cols(r);
        const auto vals = row_values(r);
        for (std::size_t j = 0; j < cols.size(); ++j) acc += vals[j] * x[cols[j]];
        y[r] = acc;
    }
    return y;
}

SymbolVector EffectiveChannel::multiply_adjoint(std::span<const Complex> y) const {
    if (y.size() != dim()) throw input_size_error("H^H*y: dimension mismatch");
    SymbolVector out(dim());
    for (std::size_t r = 0; r < dim(); ++r) {
        const auto cols = row_cols(r);
        const auto vals = row_values(r);
        for (std::size_t j = 0; j < cols.size(); ++j) out[cols[j]] += std::conj(vals[j]) * y[r];
    }
    return out;
}

ColumnView::ColumnView(const EffectiveChannel& h) : col_ptr(h.dim() + 1, 0) {
    const std::size_t d = h.dim();
    for (std::size_t r = 0; r < d; ++r) {
        for (const auto c : h.row_cols(r)) ++col_ptr[c + 1];
    }
    for (std::size_t c = 0; c < d; ++c) col_ptr[c + 1] += col_ptr[c];
    rows.resize(h.nnz());
    values.resize(h.nnz());
    std::vector<std::size_t> fill(col_ptr.begin(), col_ptr.end() - 1);
    for (std::size_t r = 0; r < d; ++r) {
        const auto cols = h.row_cols(r);
        const auto vals = h.row_values(r);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const std::size_t pos = fill[cols[j]]++;
            rows[pos] = r;
            values[pos] = vals[j];
        }
    }
}

SymbolVector apply_channel(const EffectiveChannel& h, std::span<const Complex> x, NoiseSpec noise,
                           Rng& rng) {
    if (!(noise.variance >= 0.0)) throw config_error("noise variance must be >= 0");
    SymbolVector y = h.multiply(x);
    if (noise.variance > 0.0) {
        std::normal_distribution<double> gauss(0.0, std::sqrt(noise.variance / 2.0));
        for (auto& v : y) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            v += Complex(re, im);
        }
    }
    return y;
}

NoiseSpec snr_to_noise_variance(double snr_db, const Constellation& c) {
    return NoiseSpec{c.average_energy() * std::pow(10.0, -snr_db / 10.0)};
}

void write_path_set(std::ostream& out, const PathSet& ps) {
    out << "# re(h), im(h), delay_tap, doppler_tap\n";
    for (const auto& p : ps.paths) {
        out << detail::format_double(p.gain.real()) << ", " << detail::format_double(p.gain.imag()) << ", "
            << p.delay_tap << ", " << detail::format_double(p.doppler_tap) << '\n';
    }
}

PathSet read_path_set(std::istream& in) {
    PathSet ps;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = detail::trim(line);
        if (body.empty() || body.front() == '#') continue;
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = body.find(',', start);
            fields.push_back(body.substr(start, comma == std::string_view::npos ? body.npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 4) {
            throw config_error("path file line " + std::to_string(line_no) + ": expected 4 fields");
        }
        try {
            Path p;
            p.gain = Complex(detail::parse_double(fields[0]), detail::parse_double(fields[1]));
            p.delay_tap = static_cast<int>(detail::parse_int(fields[2]));
            p.doppler_tap = detail::parse_double(fields[3]);
            ps.paths.push_back(p);
        } catch (const std::invalid_argument& e) {
            throw config_error("path file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return ps;
}

}  // namespace otfs
