#include "otfs/harness.hpp"

#include "otfs/detail/number_format.hpp"
#include "otfs/errors.hpp"

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>
#include <system_error>

namespace otfs {

namespace {

constexpr std::string_view kVersion = "0.1.0";

std::string utc_stamp(const char* fmt) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, fmt, &tm);
    return buf;
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FileHandle = std::unique_ptr<std::FILE, FileCloser>;

// "wx" fails if the file exists, which is what keeps concurrent runs apart.
FileHandle create_exclusive(const std::filesystem::path& path) {
    return FileHandle(std::fopen(path.c_str(), "wx"));
}

void write_all(std::FILE* f, const std::string& text, const std::filesystem::path& path) {
    if (std::fwrite(text.data(), 1, text.size(), f) != text.size() || std::fflush(f) != 0) {
        throw std::runtime_error("write_results: failed writing " + path.string());
    }
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

}  // namespace

std::string format_results_csv(const ResultTable& table) {
    std::string out(kResultHeader);
    out += '\n';
    for (const auto& r : table.rows) {
        out += detail::format_double(r.snr_db);
        out += ',' + r.detector;
        out += ',' + std::to_string(r.n_i);
        out += ',' + std::to_string(r.iters);
        out += ',' + std::to_string(r.frames);
        out += ',' + std::to_string(r.bits);
        out += ',' + std::to_string(r.bit_errors);
        out += ',' + detail::format_double(r.ber);
        out += ',' + detail::format_double(r.seconds);
        out += '\n';
    }
    return out;
}

ResultTable parse_results_csv(std::string_view text) {
    ResultTable table;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = detail::trim(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line_no == 1) {
            if (line != kResultHeader) throw std::runtime_error("results: unexpected header '" + std::string(line) + "'");
            continue;
        }
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 9) {
            throw std::runtime_error("results line " + std::to_string(line_no) + ": expected 9 fields");
        }
        try {
            ResultRow r;
            r.snr_db = detail::parse_double(f[0]);
            r.detector = std::string(f[1]);
            r.n_i = static_cast<std::size_t>(detail::parse_int(f[2]));
            r.iters = static_cast<int>(detail::parse_int(f[3]));
            r.frames = static_cast<std::uint64_t>(detail::parse_int(f[4]));
            r.bits = static_cast<std::uint64_t>(detail::parse_int(f[5]));
            r.bit_errors = static_cast<std::uint64_t>(detail::parse_int(f[6]));
            r.ber = detail::parse_double(f[7]);
            r.seconds = detail::parse_double(f[8]);
            table.rows.push_back(std::move(r));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("results line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (line_no == 0) throw std::runtime_error("results: missing header");
    return table;
}

ResultTable read_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_results: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_results_csv(buf.str());
}

WrittenRun write_results(const ResultTable& table, const SimConfig& cfg, const std::filesystem::path& dir,
                         std::string_view command) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("write_results: cannot create " + dir.string() + ": " + ec.message());

    const std::string base = "run-" + utc_stamp("%Y%m%dT%H%M%SZ") + "-s" + std::to_string(cfg.seed);
    WrittenRun run;
    FileHandle meta;
    for (int attempt = 1; attempt < 100000; ++attempt) {
        run.run_id = base + "-" + std::to_string(attempt);
        run.metadata = dir / (run.run_id + ".json");
        meta = create_exclusive(run.metadata);
        if (meta) break;
        if (errno != EEXIST) {
            throw std::runtime_error("write_results: cannot create " + run.metadata.string() + ": " +
                                     std::generic_category().message(errno));
        }
    }
    if (!meta) throw std::runtime_error("write_results: no free run id in " + dir.string());
    run.table = dir / (run.run_id + ".csv");
    FileHandle csv = create_exclusive(run.table);
    if (!csv) throw std::runtime_error("write_results: cannot create " + run.table.string());
    write_all(csv.get(), format_results_csv(table), run.table);

    const double max_doppler_hz = cfg.k_max * cfg.doppler_resolution_hz();
    nlohmann::json j;
    j["run_id"] = run.run_id;
    j["command"] = std::string(command);
    j["created_utc"] = utc_stamp("%Y-%m-%dT%H:%M:%SZ");
    j["version"] = std::string(kVersion);
    j["seed"] = cfg.seed;
    j["snr_definition"] = "Es/N0 with unit average symbol energy: noise variance = 10^(-snr_db/10) per complex sample";
    j["table"] = run.table.filename().string();
    j["physical"] = {
        {"symbol_period_s", cfg.symbol_period()},
        {"delay_resolution_s", cfg.delay_resolution_s()},
        {"doppler_resolution_hz", cfg.doppler_resolution_hz()},
        {"max_delay_s", cfg.l_max * cfg.delay_resolution_s()},
        {"max_doppler_hz", max_doppler_hz},
        {"max_speed_kmh", max_doppler_hz * 299792458.0 / cfg.carrier_hz * 3.6},
    };
    j["config"] = to_json(cfg);
    j["warnings"] = table.warnings;
    write_all(meta.get(), j.dump(2) + "\n", run.metadata);
    return run;
}

}  // namespace otfs
