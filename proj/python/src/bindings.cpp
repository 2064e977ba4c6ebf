#include "otfs/baseline.hpp"
#include "otfs/channel.hpp"
#include "otfs/constellation.hpp"
#include "otfs/dd_frame.hpp"
#include "otfs/detector.hpp"
#include "otfs/errors.hpp"
#include "otfs/harness.hpp"

#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace otfs;

namespace {

using CArray = py::array_t<Complex, py::array::c_style | py::array::forcecast>;

CVec to_cvec(const CArray& a) { return CVec(a.data(), a.data() + a.size()); }

CArray to_array(const CVec& v) {
    CArray out(py::ssize_t(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

CArray to_grid(const CVec& v, GridShape s) {
    CArray out({py::ssize_t(s.n_doppler), py::ssize_t(s.m_delay)});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

GridShape grid_shape(const CArray& a) {
    if (a.ndim() != 2) throw input_size_error("expected a 2-D (doppler, delay) array");
    return {std::size_t(a.shape(0)), std::size_t(a.shape(1))};
}

// Paths cross the boundary as (gain, delay_tap, doppler_tap) tuples.
using PathTuple = std::tuple<Complex, int, double>;

PathSet to_path_set(const std::vector<PathTuple>& paths) {
    PathSet ps;
    for (const auto& [g, l, k] : paths) ps.paths.push_back({g, l, k});
    return ps;
}

std::vector<PathTuple> from_path_set(const PathSet& ps) {
    std::vector<PathTuple> out;
    for (const auto& p : ps.paths) out.emplace_back(p.gain, p.delay_tap, p.doppler_tap);
    return out;
}

nlohmann::json to_nlohmann(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

SimConfig make_config(const std::string& preset_name, const py::object& overrides) {
    auto cfg = preset(preset_name);
    if (!overrides.is_none()) apply_json(cfg, to_nlohmann(overrides));
    cfg.validate();
    return cfg;
}

py::list rows(const ResultTable& t) {
    py::list out;
    for (const auto& r : t.rows) {
        py::dict d;
        d["snr_db"] = r.snr_db;
        d["detector"] = r.detector;
        d["n_i"] = r.n_i;
        d["iters"] = r.iters;
        d["frames"] = r.frames;
        d["bits"] = r.bits;
        d["bit_errors"] = r.bit_errors;
        d["ber"] = r.ber;
        d["seconds"] = r.seconds;
        out.append(d);
    }
    return out;
}

template <class F>
ResultTable without_gil(F run) {
    py::gil_scoped_release release;
    return run();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "OTFS delay-Doppler simulation and sum-product detection";

    py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<input_size_error>(m, "InputSizeError", PyExc_ValueError);
    py::register_exception<domain_error>(m, "DomainError", PyExc_ValueError);
    py::register_exception<refusal_error>(m, "RefusalError", PyExc_RuntimeError);

    m.attr("FULL_SUPPORT") = kFullSupport;

    py::class_<Constellation>(m, "Constellation")
        .def_static("qpsk", &Constellation::qpsk)
        .def_static("bpsk", &Constellation::bpsk)
        .def_static("qam16", &Constellation::qam16)
        .def_static("by_name", &Constellation::by_name)
        .def_property_readonly("name", &Constellation::name)
        .def_property_readonly("bits_per_symbol", &Constellation::bits_per_symbol)
        .def_property_readonly("points", [](const Constellation& c) {
            return to_array(CVec(c.points().begin(), c.points().end()));
        })
        .def("__len__", &Constellation::size)
        .def("__repr__", [](const Constellation& c) { return "<Constellation " + c.name() + ">"; });

    m.def(
        "map_bits",
        [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> bits, const Constellation& c,
           std::size_t n_doppler, std::size_t m_delay) {
            const GridShape s{n_doppler, m_delay};
            return to_grid(map_bits({bits.data(), std::size_t(bits.size())}, c, s).symbols, s);
        },
        py::arg("bits"), py::arg("constellation"), py::arg("n_doppler"), py::arg("m_delay"));
    m.def(
        "demap",
        [](const CArray& grid, const Constellation& c) {
            const auto b = demap_symbols(DDFrame(grid_shape(grid), to_cvec(grid)), c);
            py::array_t<std::uint8_t> out(py::ssize_t(b.size()));
            std::copy(b.begin(), b.end(), out.mutable_data());
            return out;
        },
        py::arg("grid"), py::arg("constellation"));
    m.def(
        "isfft",
        [](const CArray& dd) {
            const auto s = grid_shape(dd);
            return to_grid(isfft(DDFrame(s, to_cvec(dd))).values, s);
        },
        "Delay-Doppler grid (N, M) to time-frequency grid (N, M).");
    m.def(
        "sfft",
        [](const CArray& tf) {
            const auto s = grid_shape(tf);
            return to_grid(sfft(TFGrid(s, to_cvec(tf))).symbols, s);
        },
        "Time-frequency grid (N, M) to delay-Doppler grid (N, M).");

    m.def(
        "sample_paths",
        [](std::uint64_t seed, int num_paths, int l_max, double k_max, bool fractional, std::size_t n_doppler,
           std::size_t m_delay) {
            Rng rng(seed);
            return from_path_set(sample_paths(rng, {num_paths, l_max, k_max, fractional}, {n_doppler, m_delay}));
        },
        py::arg("seed"), py::arg("num_paths"), py::arg("l_max"), py::arg("k_max"), py::arg("fractional"),
        py::arg("n_doppler"), py::arg("m_delay"));

    py::class_<EffectiveChannel>(m, "Channel")
        .def_static(
            "from_paths",
            [](const std::vector<PathTuple>& paths, std::size_t n_doppler, std::size_t m_delay,
               std::optional<int> window) {
                return EffectiveChannel::from_paths(to_path_set(paths), {n_doppler, m_delay}, window);
            },
            py::arg("paths"), py::arg("n_doppler"), py::arg("m_delay"), py::arg("spread_window") = py::none())
        .def_static(
            "from_dense",
            [](const CArray& h, std::size_t n_doppler, std::size_t m_delay) {
                return EffectiveChannel::from_dense({n_doppler, m_delay}, {h.data(), std::size_t(h.size())});
            },
            py::arg("matrix"), py::arg("n_doppler"), py::arg("m_delay"))
        .def_property_readonly("dim", &EffectiveChannel::dim)
        .def_property_readonly("nnz", &EffectiveChannel::nnz)
        .def_property_readonly("circulant", &EffectiveChannel::circulant)
        .def("row_nnz", &EffectiveChannel::row_nnz)
        .def("multiply", [](const EffectiveChannel& h, const CArray& x) { return to_array(h.multiply(to_cvec(x))); })
        .def("multiply_adjoint",
             [](const EffectiveChannel& h, const CArray& y) { return to_array(h.multiply_adjoint(to_cvec(y))); })
        .def("to_dense", [](const EffectiveChannel& h) {
            const auto d = py::ssize_t(h.dim());
            CArray out({d, d});
            auto* p = out.mutable_data();
            std::fill(p, p + d * d, Complex{});
            for (std::size_t r = 0; r < h.dim(); ++r) {
                const auto cols = h.row_cols(r);
                const auto vals = h.row_values(r);
                for (std::size_t i = 0; i < cols.size(); ++i) p[r * h.dim() + cols[i]] = vals[i];
            }
            return out;
        });

    m.def(
        "apply_channel",
        [](const EffectiveChannel& h, const CArray& x, double noise_variance, std::uint64_t seed) {
            Rng rng(seed);
            return to_array(apply_channel(h, to_cvec(x), {noise_variance}, rng));
        },
        py::arg("channel"), py::arg("x"), py::arg("noise_variance"), py::arg("seed") = 0);
    m.def(
        "snr_to_noise_variance",
        [](double snr_db, const Constellation& c) { return snr_to_noise_variance(snr_db, c).variance; },
        py::arg("snr_db"), py::arg("constellation"));

    py::enum_<MessageKernel>(m, "MessageKernel")
        .value("max_log", MessageKernel::max_log)
        .value("log_sum_exp", MessageKernel::log_sum_exp);

    py::class_<DetectorConfig>(m, "DetectorConfig")
        .def(py::init([](std::size_t n_i, double damping, int max_iterations, MessageKernel kernel, bool early_stop,
                         double potential_scale) {
                 DetectorConfig c{n_i, damping, max_iterations, kernel, early_stop, potential_scale};
                 c.validate();
                 return c;
             }),
             py::arg("n_i") = 40, py::arg("damping") = 0.5, py::arg("max_iterations") = 20,
             py::arg("kernel") = MessageKernel::max_log, py::arg("early_stop") = false,
             py::arg("potential_scale") = 1.0)
        .def_readwrite("n_i", &DetectorConfig::n_i)
        .def_readwrite("damping", &DetectorConfig::damping)
        .def_readwrite("max_iterations", &DetectorConfig::max_iterations)
        .def_readwrite("kernel", &DetectorConfig::kernel)
        .def_readwrite("early_stop", &DetectorConfig::early_stop)
        .def_readwrite("potential_scale", &DetectorConfig::potential_scale);

    m.def(
        "detect",
        [](const CArray& y, const EffectiveChannel& h, const Constellation& c, const DetectorConfig& cfg,
           std::optional<double> noise_variance) {
            const auto r = detect(to_cvec(y), h, c, cfg, noise_variance);
            py::dict d;
            d["indices"] = r.hard_indices;
            d["symbols"] = to_array(r.hard_symbols);
            py::array_t<double> lm({py::ssize_t(h.dim()), py::ssize_t(r.alphabet)});
            std::copy(r.log_marginals.begin(), r.log_marginals.end(), lm.mutable_data());
            d["log_marginals"] = lm;
            d["iterations"] = r.iterations_run;
            d["converged"] = r.converged;
            d["kernel_evaluations_per_iteration"] = r.kernel_evaluations_per_iteration;
            return d;
        },
        py::arg("y"), py::arg("channel"), py::arg("constellation"), py::arg("config") = DetectorConfig{},
        py::arg("noise_variance") = py::none());

    m.def(
        "lmmse",
        [](const CArray& y, const EffectiveChannel& h, double nv, const Constellation& c) {
            return lmmse(to_cvec(y), h, nv, c);
        },
        py::arg("y"), py::arg("channel"), py::arg("noise_variance"), py::arg("constellation"));
    m.def(
        "map_bruteforce",
        [](const CArray& y, const EffectiveChannel& h, const Constellation& c) {
            return map_bruteforce(to_cvec(y), h, c);
        },
        py::arg("y"), py::arg("channel"), py::arg("constellation"));
    m.def(
        "marginals_bruteforce",
        [](const CArray& y, const EffectiveChannel& h, double nv, const Constellation& c) {
            const auto p = marginals_bruteforce(to_cvec(y), h, nv, c);
            py::array_t<double> out({py::ssize_t(h.dim()), py::ssize_t(c.size())});
            std::copy(p.begin(), p.end(), out.mutable_data());
            return out;
        },
        py::arg("y"), py::arg("channel"), py::arg("noise_variance"), py::arg("constellation"));

    m.def(
        "preset", [](const std::string& name) { return to_python(to_json(preset(name))); }, py::arg("name"));
    m.def(
        "run_ber_sweep",
        [](const std::string& p, const py::object& overrides) {
            const auto cfg = make_config(p, overrides);
            return rows(without_gil([&] { return run_ber_sweep(cfg); }));
        },
        py::arg("preset") = "desk", py::arg("overrides") = py::none());
    m.def(
        "run_iteration_profile",
        [](const std::string& p, const py::object& overrides, double snr_db, std::size_t n_i) {
            const auto cfg = make_config(p, overrides);
            return rows(without_gil([&] { return run_iteration_profile(cfg, snr_db, n_i); }));
        },
        py::arg("preset") = "desk", py::arg("overrides") = py::none(), py::arg("snr_db") = 15.0,
        py::arg("n_i") = 40);
    m.def(
        "run_pruning_profile",
        [](const std::string& p, const py::object& overrides, const std::vector<std::size_t>& n_i_list) {
            const auto cfg = make_config(p, overrides);
            return rows(without_gil([&] { return run_pruning_profile(cfg, n_i_list); }));
        },
        py::arg("preset") = "desk", py::arg("overrides") = py::none(),
        py::arg("n_i_list") = std::vector<std::size_t>{8, 16, kFullSupport});
}
