// otfs_sim: Monte-Carlo BER experiments for the delay-Doppler SPA detector.
//
//   otfs_sim sweep  --preset desk --detector lc-spa --out results/
//   otfs_sim iters  --preset desk --snr 15 --n-i 40
//   otfs_sim prune  --preset paper --n-i-list 30,40,60

#include "otfs/errors.hpp"
#include "otfs/harness.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Options {
    std::string config_path;
    std::string preset = "desk";
    std::optional<std::uint64_t> seed;
    std::string out = "results";
    std::optional<std::string> detector;
    std::optional<unsigned> workers;
    std::vector<double> snr;
    std::optional<std::string> n_i;
    std::vector<std::string> n_i_list;
    std::optional<int> iterations;
    std::optional<std::uint64_t> max_frames;
    std::optional<std::uint64_t> min_errors;
    bool no_timing = false;
};

std::size_t parse_n_i(const std::string& text) {
    if (text == "full") return otfs::kFullSupport;
    std::size_t pos = 0;
    const auto value = std::stoull(text, &pos);
    if (pos != text.size() || value < 1) throw otfs::config_error("N_i must be a positive integer or 'full'");
    return static_cast<std::size_t>(value);
}

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "JSON config; keys mirror SimConfig field names");
    cmd->add_option("--preset", o.preset, "Base preset applied before --config")
        ->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--out", o.out, "Output directory for the result table and run metadata");
    cmd->add_option("--detector", o.detector, "lc-spa | canonical-spa | lmmse | map-bruteforce");
    cmd->add_option("--workers", o.workers, "Worker threads (results do not depend on this)");
    cmd->add_option("--snr", o.snr, "SNR grid in dB (Es/N0)")->delimiter(',');
    cmd->add_option("--n-i", o.n_i, "Strongest couplings kept per row, or 'full'");
    cmd->add_option("--iterations", o.iterations, "Iteration budget per frame");
    cmd->add_option("--max-frames", o.max_frames, "Stop rule: frame cap per point");
    cmd->add_option("--min-errors", o.min_errors, "Stop rule: bit errors per point");
    cmd->add_flag("--no-timing", o.no_timing, "Write 0 in the seconds column (byte-reproducible tables)");
}

otfs::SimConfig build_config(const Options& o) {
    otfs::SimConfig cfg = otfs::preset(o.preset);
    if (!o.config_path.empty()) cfg = otfs::load_config(o.config_path, cfg);
    if (o.seed) cfg.seed = *o.seed;
    if (o.detector) cfg.detector_kind = otfs::detector_kind_from_string(*o.detector);
    if (o.workers) cfg.workers = *o.workers;
    if (!o.snr.empty()) cfg.snr_grid_db = o.snr;
    if (o.n_i) cfg.detector.n_i = parse_n_i(*o.n_i);
    if (!o.n_i_list.empty()) {
        cfg.n_i_list.clear();
        for (const auto& s : o.n_i_list) cfg.n_i_list.push_back(parse_n_i(s));
    }
    if (o.iterations) cfg.detector.max_iterations = *o.iterations;
    if (o.max_frames) cfg.stop.max_frames = *o.max_frames;
    if (o.min_errors) cfg.stop.min_bit_errors = *o.min_errors;
    if (o.no_timing) cfg.record_timing = false;
    cfg.validate();
    return cfg;
}

void report(const otfs::ResultTable& table, const otfs::WrittenRun& run) {
    std::cout << otfs::format_results_csv(table);
    for (const auto& w : table.warnings) std::cerr << "warning: " << w << '\n';
    std::cerr << "wrote " << run.table.string() << " and " << run.metadata.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delay-Doppler OTFS link simulation with a low-complexity log-domain SPA detector"};
    app.require_subcommand(1);

    Options sweep_opts, iters_opts, prune_opts;
    auto* sweep = app.add_subcommand("sweep", "BER versus SNR for one detector");
    add_common(sweep, sweep_opts);
    auto* iters = app.add_subcommand("iters", "BER after each iteration (one row per iteration per SNR)");
    add_common(iters, iters_opts);
    auto* prune = app.add_subcommand("prune", "BER for several N_i on paired frames");
    add_common(prune, prune_opts);
    prune->add_option("--n-i-list", prune_opts.n_i_list, "N_i values, e.g. 8,40,full")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) {
            const auto cfg = build_config(sweep_opts);
            const auto table = otfs::run_ber_sweep(cfg);
            report(table, otfs::write_results(table, cfg, sweep_opts.out, "sweep"));
        } else if (iters->parsed()) {
            const auto cfg = build_config(iters_opts);
            otfs::ResultTable all;
            for (const double snr : cfg.snr_grid_db) {
                auto t = otfs::run_iteration_profile(cfg, snr, cfg.detector.n_i);
                all.rows.insert(all.rows.end(), t.rows.begin(), t.rows.end());
                all.warnings.insert(all.warnings.end(), t.warnings.begin(), t.warnings.end());
            }
            report(all, otfs::write_results(all, cfg, iters_opts.out, "iters"));
        } else if (prune->parsed()) {
            const auto cfg = build_config(prune_opts);
            const auto table = otfs::run_pruning_profile(cfg, cfg.n_i_list);
            report(table, otfs::write_results(table, cfg, prune_opts.out, "prune"));
        }
    } catch (const otfs::config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
