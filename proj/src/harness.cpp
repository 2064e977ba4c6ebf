#include "otfs/harness.hpp"

#include "otfs/baseline.hpp"
#include "otfs/detail/number_format.hpp"
#include "otfs/errors.hpp"
#include "otfs/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

namespace otfs {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct FrameTally {
    std::vector<std::uint64_t> errors;
    std::vector<double> seconds;
};

using FrameFn = std::function<FrameTally(std::uint64_t frame)>;
using DoneFn = std::function<bool(const std::vector<std::uint64_t>& cumulative_errors)>;

// Evaluates frames 0, 1, 2, ... (in parallel batches) and returns the prefix
// that ends at the first frame where done() holds or max_frames is reached.
// Frames past the stopping point are discarded, so the prefix does not depend
// on the worker count.
std::vector<FrameTally> collect_frames(unsigned workers, std::uint64_t max_frames, std::size_t slots,
                                       const FrameFn& fn, const DoneFn& done) {
    std::vector<FrameTally> kept;
    std::vector<std::uint64_t> cumulative(slots, 0);
    const std::uint64_t batch = std::max<std::uint64_t>(1, workers) * 4;
    std::uint64_t next = 0;
    while (next < max_frames) {
        const std::uint64_t count = std::min(batch, max_frames - next);
        std::vector<FrameTally> results(count);
        if (workers <= 1) {
            for (std::uint64_t i = 0; i < count; ++i) results[i] = fn(next + i);
        } else {
            std::atomic<std::uint64_t> cursor{0};
            std::exception_ptr failure;
            std::mutex failure_mutex;
            std::vector<std::thread> pool;
            const unsigned n_threads = static_cast<unsigned>(std::min<std::uint64_t>(workers, count));
            for (unsigned t = 0; t < n_threads; ++t) {
                pool.emplace_back([&] {
                    while (true) {
                        const std::uint64_t i = cursor.fetch_add(1);
                        if (i >= count) return;
                        try {
                            results[i] = fn(next + i);
                        } catch (...) {
                            std::lock_guard lock(failure_mutex);
                            if (!failure) failure = std::current_exception();
                            cursor = count;
                            return;
                        }
                    }
                });
            }
            for (auto& th : pool) th.join();
            if (failure) std::rethrow_exception(failure);
        }
        for (auto& r : results) {
            for (std::size_t s = 0; s < slots; ++s) cumulative[s] += r.errors[s];
            kept.push_back(std::move(r));
            if (done(cumulative)) return kept;
        }
        next += count;
    }
    return kept;
}

// Prefix naming the detector and the point that failed.
std::string context(const SimConfig& cfg, double snr_db, std::uint64_t frame) {
    return std::string(to_string(cfg.detector_kind)) + " at " + detail::format_double(snr_db) + " dB, frame " +
           std::to_string(frame) + ": ";
}

std::size_t effective_n_i(std::size_t requested, std::size_t dim, std::vector<std::string>* warnings) {
    const std::size_t cap = dim > 1 ? dim - 1 : 1;
    if (requested <= cap) return requested;
    if (requested != kFullSupport && warnings) {
        warnings->push_back("N_i=" + std::to_string(requested) + " exceeds NM-1; clamped to " + std::to_string(cap));
    }
    return cap;
}

ResultRow make_row(const SimConfig& cfg, double snr_db, std::string detector, std::size_t n_i, int iters,
                   const std::vector<FrameTally>& frames, std::size_t slot, const Constellation& c) {
    ResultRow row;
    row.snr_db = snr_db;
    row.detector = std::move(detector);
    row.n_i = n_i;
    row.iters = iters;
    row.frames = frames.size();
    row.bits = row.frames * cfg.shape().size() * static_cast<std::uint64_t>(c.bits_per_symbol());
    double seconds = 0.0;
    for (const auto& f : frames) {
        row.bit_errors += f.errors[slot];
        seconds += f.seconds[slot];
    }
    row.ber = row.bits == 0 ? 0.0 : static_cast<double>(row.bit_errors) / static_cast<double>(row.bits);
    row.seconds = cfg.record_timing ? seconds : 0.0;
    return row;
}

}  // namespace

std::string_view to_string(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::lc_spa: return "lc-spa";
        case DetectorKind::canonical_spa: return "canonical-spa";
        case DetectorKind::lmmse: return "lmmse";
        case DetectorKind::map_bruteforce: return "map-bruteforce";
    }
    return "unknown";
}

DetectorKind detector_kind_from_string(std::string_view name) {
    if (name == "lc-spa") return DetectorKind::lc_spa;
    if (name == "canonical-spa") return DetectorKind::canonical_spa;
    if (name == "lmmse") return DetectorKind::lmmse;
    if (name == "map-bruteforce") return DetectorKind::map_bruteforce;
    throw config_error("unknown detector kind '" + std::string(name) +
                       "' (expected lc-spa, canonical-spa, lmmse or map-bruteforce)");
}

void SimConfig::validate() const {
    if (n_doppler < 2 || m_delay < 2) throw config_error("config: N and M must both be >= 2");
    if (snr_grid_db.empty()) throw config_error("config: snr_grid_db is empty");
    for (const double s : snr_grid_db) {
        if (!std::isfinite(s)) throw config_error("config: non-finite SNR in grid");
    }
    if (stop.max_frames == 0 || stop.min_bit_errors == 0) throw config_error("config: stop rule must be positive");
    if (!(carrier_hz > 0.0) || !(subcarrier_hz > 0.0)) throw config_error("config: frequencies must be positive");
    if (n_i_list.empty()) throw config_error("config: n_i_list is empty");
    for (const auto n : n_i_list) {
        if (n < 1) throw config_error("config: N_i values must be >= 1");
    }
    Constellation::by_name(modulation);
    detector.validate();
    if (fixed_paths) {
        validate_paths(*fixed_paths, shape());
    } else {
        validate_profile(profile(), shape());
    }
    if (spread_window && *spread_window < 0) throw config_error("config: spread_window must be >= 0");
}

SimConfig preset(std::string_view name) {
    SimConfig cfg;
    cfg.modulation = "qpsk";
    cfg.num_paths = 4;
    cfg.fractional = true;
    cfg.carrier_hz = 4e9;
    cfg.subcarrier_hz = 15e3;
    cfg.detector.damping = 0.5;
    cfg.detector.n_i = 40;
    cfg.detector.max_iterations = 20;
    if (name == "paper") {
        cfg.n_doppler = 64;
        cfg.m_delay = 128;
        cfg.l_max = 10;
        cfg.k_max = 8.0;
        cfg.snr_grid_db = {6.0, 9.0, 12.0, 15.0, 18.0};
        cfg.n_i_list = {30, 40, 60};
    } else if (name == "desk") {
        cfg.n_doppler = 16;
        cfg.m_delay = 32;
        cfg.l_max = 3;
        cfg.k_max = 2.0;
        cfg.snr_grid_db = {6.0, 9.0, 12.0, 15.0, 18.0};
        cfg.n_i_list = {8, 40, kFullSupport};
    } else {
        throw config_error("unknown preset '" + std::string(name) + "' (expected paper or desk)");
    }
    return cfg;
}

namespace {

std::size_t n_i_from_json(const nlohmann::json& v) {
    if (v.is_string()) {
        if (v.get<std::string>() == "full") return kFullSupport;
        throw config_error("config: N_i must be a positive integer or \"full\"");
    }
    if (!v.is_number_integer() || v.get<long long>() < 1) {
        throw config_error("config: N_i must be a positive integer or \"full\"");
    }
    return v.get<std::size_t>();
}

nlohmann::json n_i_to_json(std::size_t n) {
    if (n == kFullSupport) return "full";
    return n;
}

PathSet paths_from_json(const nlohmann::json& arr) {
    PathSet ps;
    for (const auto& p : arr) {
        if (!p.is_array() || p.size() != 4) throw config_error("config: fixed_paths entries are [re, im, l, k]");
        ps.paths.push_back({Complex(p[0].get<double>(), p[1].get<double>()), p[2].get<int>(), p[3].get<double>()});
    }
    return ps;
}

void apply_detector_json(DetectorConfig& d, const nlohmann::json& j) {
    for (const auto& [key, v] : j.items()) {
        if (key == "n_i") d.n_i = n_i_from_json(v);
        else if (key == "damping") d.damping = v.get<double>();
        else if (key == "max_iterations") d.max_iterations = v.get<int>();
        else if (key == "kernel") {
            const auto k = v.get<std::string>();
            if (k == "max-log") d.kernel = MessageKernel::max_log;
            else if (k == "log-sum-exp") d.kernel = MessageKernel::log_sum_exp;
            else throw config_error("config: detector.kernel must be max-log or log-sum-exp");
        } else if (key == "early_stop") d.early_stop = v.get<bool>();
        else throw config_error("config: unknown detector key '" + key + "'");
    }
}

}  // namespace

void apply_json(SimConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw config_error("config: top level must be an object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "n_doppler") cfg.n_doppler = v.get<std::size_t>();
            else if (key == "m_delay") cfg.m_delay = v.get<std::size_t>();
            else if (key == "modulation") cfg.modulation = v.get<std::string>();
            else if (key == "num_paths" || key == "P") cfg.num_paths = v.get<int>();
            else if (key == "l_max") cfg.l_max = v.get<int>();
            else if (key == "k_max") cfg.k_max = v.get<double>();
            else if (key == "fractional") cfg.fractional = v.get<bool>();
            else if (key == "spread_window") {
                if (v.is_null() || v == "full") cfg.spread_window.reset();
                else cfg.spread_window = v.get<int>();
            } else if (key == "carrier_hz") cfg.carrier_hz = v.get<double>();
            else if (key == "subcarrier_hz") cfg.subcarrier_hz = v.get<double>();
            else if (key == "snr_grid_db") cfg.snr_grid_db = v.get<std::vector<double>>();
            else if (key == "detector") apply_detector_json(cfg.detector, v);
            else if (key == "detector_kind") cfg.detector_kind = detector_kind_from_string(v.get<std::string>());
            else if (key == "stop") {
                for (const auto& [sk, sv] : v.items()) {
                    if (sk == "min_bit_errors") cfg.stop.min_bit_errors = sv.get<std::uint64_t>();
                    else if (sk == "max_frames") cfg.stop.max_frames = sv.get<std::uint64_t>();
                    else throw config_error("config: unknown stop key '" + sk + "'");
                }
            } else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
            else if (key == "workers") cfg.workers = v.get<unsigned>();
            else if (key == "n_i_list") {
                cfg.n_i_list.clear();
                for (const auto& n : v) cfg.n_i_list.push_back(n_i_from_json(n));
            } else if (key == "fixed_paths") {
                if (v.is_null()) cfg.fixed_paths.reset();
                else cfg.fixed_paths = paths_from_json(v);
            } else if (key == "record_timing") cfg.record_timing = v.get<bool>();
            else if (key == "paths_file") {
                throw config_error("config: paths_file is only valid in a config file");
            } else {
                throw config_error("config: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
}

nlohmann::json to_json(const SimConfig& cfg) {
    nlohmann::json j;
    j["n_doppler"] = cfg.n_doppler;
    j["m_delay"] = cfg.m_delay;
    j["modulation"] = cfg.modulation;
    j["num_paths"] = cfg.num_paths;
    j["l_max"] = cfg.l_max;
    j["k_max"] = cfg.k_max;
    j["fractional"] = cfg.fractional;
    j["spread_window"] = cfg.spread_window ? nlohmann::json(*cfg.spread_window) : nlohmann::json(nullptr);
    j["carrier_hz"] = cfg.carrier_hz;
    j["subcarrier_hz"] = cfg.subcarrier_hz;
    j["snr_grid_db"] = cfg.snr_grid_db;
    j["detector"] = {
        {"n_i", n_i_to_json(cfg.detector.n_i)},
        {"damping", cfg.detector.damping},
        {"max_iterations", cfg.detector.max_iterations},
        {"kernel", cfg.detector.kernel == MessageKernel::max_log ? "max-log" : "log-sum-exp"},
        {"early_stop", cfg.detector.early_stop},
    };
    j["detector_kind"] = std::string(to_string(cfg.detector_kind));
    j["stop"] = {{"min_bit_errors", cfg.stop.min_bit_errors}, {"max_frames", cfg.stop.max_frames}};
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    auto list = nlohmann::json::array();
    for (const auto n : cfg.n_i_list) list.push_back(n_i_to_json(n));
    j["n_i_list"] = list;
    if (cfg.fixed_paths) {
        auto arr = nlohmann::json::array();
        for (const auto& p : cfg.fixed_paths->paths) {
            arr.push_back({p.gain.real(), p.gain.imag(), p.delay_tap, p.doppler_tap});
        }
        j["fixed_paths"] = arr;
    } else {
        j["fixed_paths"] = nullptr;
    }
    j["record_timing"] = cfg.record_timing;
    return j;
}

SimConfig load_config(const std::filesystem::path& path, SimConfig base) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config: " + path.string() + ": " + e.what());
    }
    if (j.is_object() && j.contains("paths_file")) {
        const auto file = path.parent_path() / j["paths_file"].get<std::string>();
        std::ifstream pin(file);
        if (!pin) throw config_error("config: cannot open paths file " + file.string());
        base.fixed_paths = read_path_set(pin);
        j.erase("paths_file");
    }
    apply_json(base, j);
    return base;
}

std::uint64_t count_bit_errors(std::span<const std::uint8_t> bits, std::span<const std::size_t> detected,
                               const Constellation& c) {
    const auto bps = static_cast<std::size_t>(c.bits_per_symbol());
    if (bits.size() != detected.size() * bps) throw input_size_error("count_bit_errors: length mismatch");
    std::uint64_t errors = 0;
    for (std::size_t u = 0; u < detected.size(); ++u) {
        const unsigned label = c.label(detected[u]);
        for (std::size_t b = 0; b < bps; ++b) {
            const unsigned bit = (label >> (bps - 1 - b)) & 1u;
            errors += bit != bits[u * bps + b];
        }
    }
    return errors;
}

FrameRealization draw_frame(const SimConfig& cfg, const Constellation& c, std::uint64_t frame) {
    const GridShape shape = cfg.shape();
    FrameRealization f;
    f.index = frame;
    if (cfg.fixed_paths) {
        f.paths = *cfg.fixed_paths;
    } else {
        Rng path_rng = make_stream(cfg.seed, frame, StreamRole::paths);
        f.paths = sample_paths(path_rng, cfg.profile(), shape);
    }
    f.channel = EffectiveChannel::from_paths(f.paths, shape, cfg.spread_window);

    Rng bit_rng = make_stream(cfg.seed, frame, StreamRole::bits);
    std::bernoulli_distribution coin(0.5);
    f.bits.resize(shape.size() * static_cast<std::size_t>(c.bits_per_symbol()));
    for (auto& b : f.bits) b = coin(bit_rng) ? 1 : 0;
    f.x = vectorize(map_bits(f.bits, c, shape));
    return f;
}

SymbolVector receive(const SimConfig& cfg, const FrameRealization& f, NoiseSpec noise) {
    Rng noise_rng = make_stream(cfg.seed, f.index, StreamRole::noise);
    return apply_channel(f.channel, f.x, noise, noise_rng);
}

std::vector<std::size_t> run_detector(const SimConfig& cfg, const Constellation& c, const EffectiveChannel& h,
                                      std::span<const Complex> y, double noise_variance) {
    switch (cfg.detector_kind) {
        case DetectorKind::lc_spa: {
            std::optional<double> nv;
            if (cfg.detector.kernel == MessageKernel::log_sum_exp) nv = noise_variance;
            return detect(y, h, c, cfg.detector, nv).hard_indices;
        }
        case DetectorKind::canonical_spa:
            return argmax_rows(canonical_spa(y, h, noise_variance, c, cfg.detector.max_iterations), c.size());
        case DetectorKind::lmmse: return lmmse(y, h, noise_variance, c);
        case DetectorKind::map_bruteforce: return map_bruteforce(y, h, c);
    }
    throw config_error("unknown detector kind");
}

ResultTable run_ber_sweep(const SimConfig& cfg) {
    cfg.validate();
    const Constellation c = Constellation::by_name(cfg.modulation);
    ResultTable table;
    const bool iterative = cfg.detector_kind == DetectorKind::lc_spa || cfg.detector_kind == DetectorKind::canonical_spa;
    const std::size_t n_i = cfg.detector_kind == DetectorKind::lc_spa
                                ? effective_n_i(cfg.detector.n_i, cfg.shape().size(), &table.warnings)
                                : 0;
    SimConfig run_cfg = cfg;
    if (n_i != 0) run_cfg.detector.n_i = n_i;

    for (const double snr_db : cfg.snr_grid_db) {
        const NoiseSpec noise = snr_to_noise_variance(snr_db, c);
        auto frame_fn = [&](std::uint64_t frame) {
            const auto start = Clock::now();
            const FrameRealization f = draw_frame(run_cfg, c, frame);
            const SymbolVector y = receive(run_cfg, f, noise);
            std::vector<std::size_t> detected;
            try {
                detected = run_detector(run_cfg, c, f.channel, y, noise.variance);
            } catch (const refusal_error& e) {
                throw refusal_error(context(cfg, snr_db, frame) + e.what());
            } catch (const config_error& e) {
                throw config_error(context(cfg, snr_db, frame) + e.what());
            } catch (const std::exception& e) {
                throw std::runtime_error(context(cfg, snr_db, frame) + e.what());
            }
            return FrameTally{{count_bit_errors(f.bits, detected, c)}, {elapsed(start)}};
        };
        const auto frames = collect_frames(cfg.workers, cfg.stop.max_frames, 1, frame_fn,
                                           [&](const std::vector<std::uint64_t>& errs) {
                                               return errs[0] >= cfg.stop.min_bit_errors;
                                           });
        table.rows.push_back(make_row(cfg, snr_db, std::string(to_string(cfg.detector_kind)), n_i,
                                      iterative ? cfg.detector.max_iterations : 0, frames, 0, c));
    }
    return table;
}

ResultTable run_iteration_profile(const SimConfig& cfg, double snr_db, std::size_t n_i) {
    cfg.validate();
    if (cfg.detector_kind != DetectorKind::lc_spa) {
        throw config_error("iteration profile needs detector_kind lc-spa");
    }
    const Constellation c = Constellation::by_name(cfg.modulation);
    ResultTable table;
    const std::size_t eff = effective_n_i(n_i, cfg.shape().size(), &table.warnings);
    DetectorConfig det = cfg.detector;
    det.n_i = eff;
    det.early_stop = false;
    det.validate();
    const auto k_max = static_cast<std::size_t>(det.max_iterations);
    const NoiseSpec noise = snr_to_noise_variance(snr_db, c);

    auto frame_fn = [&](std::uint64_t frame) {
        const auto start = Clock::now();
        const FrameRealization f = draw_frame(cfg, c, frame);
        const SymbolVector y = receive(cfg, f, noise);
        FrameTally tally{std::vector<std::uint64_t>(k_max, 0), std::vector<double>(k_max, 0.0)};
        std::optional<double> nv;
        if (det.kernel == MessageKernel::log_sum_exp) nv = noise.variance;
        detect(y, f.channel, c, det, nv, [&](int iteration, std::span<const std::size_t> decisions) {
            tally.errors[static_cast<std::size_t>(iteration - 1)] = count_bit_errors(f.bits, decisions, c);
        });
        std::fill(tally.seconds.begin(), tally.seconds.end(), elapsed(start));
        return tally;
    };
    const auto frames = collect_frames(cfg.workers, cfg.stop.max_frames, k_max, frame_fn,
                                       [&](const std::vector<std::uint64_t>& errs) {
                                           return errs.back() >= cfg.stop.min_bit_errors;
                                       });
    for (std::size_t k = 0; k < k_max; ++k) {
        table.rows.push_back(make_row(cfg, snr_db, "lc-spa", eff, static_cast<int>(k + 1), frames, k, c));
    }
    return table;
}

ResultTable run_pruning_profile(const SimConfig& cfg, const std::vector<std::size_t>& n_i_list) {
    cfg.validate();
    if (cfg.detector_kind != DetectorKind::lc_spa) {
        throw config_error("pruning profile needs detector_kind lc-spa");
    }
    if (n_i_list.empty()) throw config_error("pruning profile: empty N_i list");
    const Constellation c = Constellation::by_name(cfg.modulation);
    ResultTable table;
    std::vector<std::size_t> effective;
    for (const auto n : n_i_list) effective.push_back(effective_n_i(n, cfg.shape().size(), &table.warnings));
    const std::size_t slots = effective.size();

    for (const double snr_db : cfg.snr_grid_db) {
        const NoiseSpec noise = snr_to_noise_variance(snr_db, c);
        std::optional<double> nv;
        if (cfg.detector.kernel == MessageKernel::log_sum_exp) nv = noise.variance;
        auto frame_fn = [&](std::uint64_t frame) {
            const FrameRealization f = draw_frame(cfg, c, frame);
            const SymbolVector y = receive(cfg, f, noise);
            const SymbolVector r = matched_filter(y, f.channel);
            std::optional<CirculantGram> cq;
            std::optional<GramMatrix> gq;
            if (f.channel.circulant()) cq = compute_circulant_gram(f.channel);
            else gq = compute_gram(f.channel);
            FrameTally tally{std::vector<std::uint64_t>(slots, 0), std::vector<double>(slots, 0.0)};
            for (std::size_t s = 0; s < slots; ++s) {
                const auto start = Clock::now();
                DetectorConfig det = cfg.detector;
                det.n_i = effective[s];
                PrunedGram g = cq ? prune(*cq, r, det.n_i) : prune(*gq, r, det.n_i);
                LcSpaDetector detector(std::move(g), c, det, nv);
                const auto res = detector.run();
                tally.errors[s] = count_bit_errors(f.bits, res.hard_indices, c);
                tally.seconds[s] = elapsed(start);
            }
            return tally;
        };
        const auto frames = collect_frames(cfg.workers, cfg.stop.max_frames, slots, frame_fn,
                                           [&](const std::vector<std::uint64_t>& errs) {
                                               return std::all_of(errs.begin(), errs.end(), [&](std::uint64_t e) {
                                                   return e >= cfg.stop.min_bit_errors;
                                               });
                                           });
        for (std::size_t s = 0; s < slots; ++s) {
            table.rows.push_back(
                make_row(cfg, snr_db, "lc-spa", effective[s], cfg.detector.max_iterations, frames, s, c));
        }
    }
    return table;
}

}  // namespace otfs
