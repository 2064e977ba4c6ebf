#pragma once

#include "otfs/channel.hpp"
#include "otfs/dd_frame.hpp"
#include "otfs/detector.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace otfs {

enum class DetectorKind { lc_spa, canonical_spa, lmmse, map_bruteforce };

std::string_view to_string(DetectorKind kind);
DetectorKind detector_kind_from_string(std::string_view name);

/// Per-SNR-point stopping: at least min_bit_errors errors or max_frames frames, whichever first.
struct StopRule {
    std::uint64_t min_bit_errors = 200;
    std::uint64_t max_frames = 2000;
};

struct SimConfig {
    std::size_t n_doppler = 16;
    std::size_t m_delay = 32;
    std::string modulation = "qpsk";
    int num_paths = 4;
    int l_max = 3;
    double k_max = 2.0;
    bool fractional = true;
    SpreadWindow spread_window;
    double carrier_hz = 4e9;
    double subcarrier_hz = 15e3;
    std::vector<double> snr_grid_db{10.0, 12.0, 14.0, 16.0, 18.0};
    DetectorConfig detector;
    DetectorKind detector_kind = DetectorKind::lc_spa;
    StopRule stop;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    /// N_i values swept by the pruning profile.
    std::vector<std::size_t> n_i_list{8, 16, kFullSupport};
    /// Fixed channel used for every frame instead of random draws.
    std::optional<PathSet> fixed_paths;
    /// When false every seconds column is 0 so repeated runs are byte-identical.
    bool record_timing = true;

    GridShape shape() const { return {n_doppler, m_delay}; }
    ChannelProfile profile() const { return {num_paths, l_max, k_max, fractional}; }
    /// Symbol period T = 1/df and the physical spans of one delay / Doppler bin.
    double symbol_period() const { return 1.0 / subcarrier_hz; }
    double delay_resolution_s() const { return 1.0 / (static_cast<double>(m_delay) * subcarrier_hz); }
    double doppler_resolution_hz() const { return subcarrier_hz / static_cast<double>(n_doppler); }

    /// Throws config_error on any range violation.
    void validate() const;
};

/// "paper": N=64, M=128 full scale; "desk": N=16, M=32 with the same ratios.
SimConfig preset(std::string_view name);

/// Overwrite fields present in j (keys mirror the SimConfig field names).
void apply_json(SimConfig& cfg, const nlohmann::json& j);
nlohmann::json to_json(const SimConfig& cfg);
SimConfig load_config(const std::filesystem::path& path, SimConfig base);

struct ResultRow {
    double snr_db = 0.0;
    std::string detector;
    std::size_t n_i = 0;
    int iters = 0;
    std::uint64_t frames = 0;
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;
    double ber = 0.0;
    double seconds = 0.0;

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct ResultTable {
    std::vector<ResultRow> rows;
    std::vector<std::string> warnings;
};

/// Bit errors between transmitted bits and detected constellation indices.
std::uint64_t count_bit_errors(std::span<const std::uint8_t> bits, std::span<const std::size_t> detected,
                               const Constellation& c);

/// Everything random about one frame, drawn from (seed, frame index).
struct FrameRealization {
    std::uint64_t index = 0;
    PathSet paths;
    EffectiveChannel channel;
    Bits bits;
    SymbolVector x;
};

FrameRealization draw_frame(const SimConfig& cfg, const Constellation& c, std::uint64_t frame);
/// y = Hx + w for this frame's noise stream; the standard-normal draws are shared across SNRs.
SymbolVector receive(const SimConfig& cfg, const FrameRealization& f, NoiseSpec noise);

/// Detected constellation indices for one received frame.
std::vector<std::size_t> run_detector(const SimConfig& cfg, const Constellation& c, const EffectiveChannel& h,
                                      std::span<const Complex> y, double noise_variance);

ResultTable run_ber_sweep(const SimConfig& cfg);
/// BER after each iteration 1..K_max, read from the same detection runs.
ResultTable run_iteration_profile(const SimConfig& cfg, double snr_db, std::size_t n_i);
/// Every SNR in the grid x every N_i in n_i_list, with paired frames across N_i.
ResultTable run_pruning_profile(const SimConfig& cfg, const std::vector<std::size_t>& n_i_list);

inline constexpr std::string_view kResultHeader = "snr_db,detector,n_i,iters,frames,bits,bit_errors,ber,seconds";

struct WrittenRun {
    std::string run_id;
    std::filesystem::path table;
    std::filesystem::path metadata;
};

/// Writes <dir>/<run_id>.csv and <dir>/<run_id>.json; never overwrites existing runs.
WrittenRun write_results(const ResultTable& table, const SimConfig& cfg, const std::filesystem::path& dir,
                         std::string_view command = "sweep");
std::string format_results_csv(const ResultTable& table);
ResultTable parse_results_csv(std::string_view text);
ResultTable read_results(const std::filesystem::path& path);

}  // namespace otfs
