// Python bindings: numpy-centric access to the main operations — materials,
// scenes, ray tracing, CIR assembly, paired datasets, corrector training and
// prediction, NMSE evaluation, and single-point BER simulation.
#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "ctwin/harness/experiment.hpp"
#include "ctwin/nn/checkpoint.hpp"
#include "ctwin/ofdm/ofdm.hpp"
#include "ctwin/rt/fresnel.hpp"
#include "ctwin/rt/material.hpp"
#include "ctwin/rt/scene.hpp"
#include "ctwin/rt/trace.hpp"
#include "ctwin/twin/corrector.hpp"
#include "ctwin/twin/dataset.hpp"

namespace py = pybind11;
using namespace ctwin;

namespace {

using carray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

// Note: the array_t(ssize_t) constructor is avoided throughout; with this
// pybind11/numpy pairing it yields a stride-0 array. Passing an explicit
// shape plus a data pointer allocates a proper C-contiguous copy.
py::array_t<std::complex<double>> to_array(const std::vector<cplx> &v) {
    return py::array_t<std::complex<double>>({static_cast<py::ssize_t>(v.size())}, v.data());
}

std::vector<cplx> to_vector(const carray &a) {
    if (a.ndim() != 1)
        throw dimension_error("expected a 1-d complex array");
    const auto *ptr = a.data();
    return std::vector<cplx>(ptr, ptr + a.shape(0));
}

// [S, A, P] complex array -> per-position multi-antenna CIRs.
std::vector<ofdm::Cir> cirs_from_array(const carray &a) {
    if (a.ndim() != 3)
        throw dimension_error("expected a [positions, antennas, taps] complex array");
    const py::ssize_t s = a.shape(0), n_ant = a.shape(1), p = a.shape(2);
    std::vector<ofdm::Cir> out(static_cast<std::size_t>(s));
    const auto view = a.unchecked<3>();
    for (py::ssize_t i = 0; i < s; ++i) {
        out[i].taps.resize(static_cast<std::size_t>(n_ant));
        for (py::ssize_t t = 0; t < n_ant; ++t) {
            out[i].taps[t].resize(static_cast<std::size_t>(p));
            for (py::ssize_t k = 0; k < p; ++k)
                out[i].taps[t][static_cast<std::size_t>(k)] = view(i, t, k);
        }
    }
    return out;
}

struct PyScene {
    rt::Scene scene;
};

struct PyPaths {
    rt::PathList paths;
};

struct PyDataset {
    twin::Dataset ds;
};

struct PyModel {
    nn::ModelParams params;
    nn::TrainProvenance provenance;
    std::vector<twin::EpochStats> log;
    std::size_t best_epoch = 0;
    bool aborted = false;
};

py::array_t<std::complex<double>> pairs_matrix(const twin::Dataset &ds, bool truth_side) {
    const py::ssize_t r = static_cast<py::ssize_t>(ds.pairs.size());
    const py::ssize_t p = static_cast<py::ssize_t>(ds.meta.taps);
    py::array_t<std::complex<double>> out({r, p});
    auto view = out.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < r; ++i) {
        const std::vector<cplx> &src = truth_side ? ds.pairs[static_cast<std::size_t>(i)].h_real
                                                  : ds.pairs[static_cast<std::size_t>(i)].h_rt;
        for (py::ssize_t k = 0; k < p; ++k)
            view(i, k) = src[static_cast<std::size_t>(k)];
    }
    return out;
}

twin::ModelKind kind_from_name(const std::string &name) {
    if (name == "encoder_decoder" || name == "encdec")
        return twin::ModelKind::encoder_decoder;
    if (name == "mlp")
        return twin::ModelKind::mlp;
    throw dimension_error("unknown model kind \"" + name + "\" (expected encoder_decoder or mlp)");
}

ofdm::Modulation modulation_from_name(const std::string &name) {
    if (name == "bpsk")
        return ofdm::Modulation::bpsk();
    if (name == "qpsk")
        return ofdm::Modulation::qpsk();
    if (name.rfind("qam", 0) == 0)
        return ofdm::Modulation::mqam(static_cast<unsigned>(std::stoul(name.substr(3))));
    throw dimension_error("unknown modulation \"" + name + "\" (expected bpsk, qpsk, or qam<M>)");
}

precode::PrecoderMode mode_from_name(const std::string &name) {
    if (name == "mrt")
        return precode::PrecoderMode::mrt;
    if (name == "mmse")
        return precode::PrecoderMode::mmse;
    throw dimension_error("unknown precoder mode \"" + name + "\" (expected mrt or mmse)");
}

precode::Normalization norm_from_name(const std::string &name) {
    if (name == "raw")
        return precode::Normalization::raw;
    if (name == "unit_power")
        return precode::Normalization::unit_power;
    throw dimension_error("unknown normalization \"" + name + "\" (expected raw or unit_power)");
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "MISO-OFDM digital-twin precoding simulation toolkit";

    py::register_exception<dimension_error>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<numeric_error>(m, "NumericError", PyExc_RuntimeError);
    py::register_exception<state_error>(m, "StateError", PyExc_RuntimeError);

    // --- small numeric oracles ----------------------------------------------
    m.def("q_function", &ofdm::q_function, py::arg("x"),
          "Gaussian tail probability Q(x); Q(sqrt(snr)) is the QPSK BER over a flat unit channel.");
    m.def(
        "nmse_db",
        [](const carray &ref, const carray &hat) { return twin::nmse_db(to_vector(ref), to_vector(hat)); },
        py::arg("ref"), py::arg("hat"),
        "10*log10(||ref - hat||^2 / ||ref||^2), clamped below at -100 dB.");
    m.def(
        "fresnel_integrals",
        [](double x) {
            double c = 0.0, s = 0.0;
            rt::fresnel_integrals(x, c, s);
            return py::make_tuple(c, s);
        },
        py::arg("x"), "Fresnel cosine and sine integrals (C(x), S(x)).");
    m.def(
        "knife_edge_diffraction",
        [](double nu) { return rt::knife_edge_diffraction(nu); }, py::arg("nu"),
        "Complex knife-edge diffraction coefficient for Fresnel parameter nu.");
    m.def(
        "qpsk_constellation", [] { return to_array(ofdm::constellation(ofdm::Modulation::qpsk())); },
        "Gray-labeled unit-energy QPSK constellation in label order.");

    // --- bit mapping and the OFDM waveform ----------------------------------
    m.def(
        "map_bits",
        [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> &bits,
           const std::string &modulation) {
            const auto *ptr = bits.data();
            return to_array(ofdm::map_bits(std::vector<std::uint8_t>(ptr, ptr + bits.size()),
                                           modulation_from_name(modulation)));
        },
        py::arg("bits"), py::arg("modulation") = "qpsk", "Gray-map a bit array to unit-energy symbols.");
    m.def(
        "demap_symbols",
        [](const carray &symbols, const std::string &modulation) {
            const std::vector<std::uint8_t> bits =
                ofdm::demap_symbols(to_vector(symbols), modulation_from_name(modulation));
            return py::array_t<std::uint8_t>({static_cast<py::ssize_t>(bits.size())}, bits.data());
        },
        py::arg("symbols"), py::arg("modulation") = "qpsk", "Hard-decision demap to bits.");
    m.def(
        "ofdm_modulate",
        [](const carray &symbols, std::size_t subcarriers, std::size_t cp) {
            ofdm::OfdmConfig cfg;
            cfg.subcarrier_count = subcarriers;
            cfg.cp_length = cp;
            return to_array(ofdm::ofdm_modulate(to_vector(symbols), cfg));
        },
        py::arg("symbols"), py::arg("subcarriers") = 128, py::arg("cp") = 16,
        "Unitary IFFT + cyclic prefix per frame of `subcarriers` symbols.");
    m.def(
        "ofdm_demodulate",
        [](const carray &frames, std::size_t subcarriers, std::size_t cp) {
            ofdm::OfdmConfig cfg;
            cfg.subcarrier_count = subcarriers;
            cfg.cp_length = cp;
            return to_array(ofdm::ofdm_demodulate(to_vector(frames), cfg));
        },
        py::arg("frames"), py::arg("subcarriers") = 128, py::arg("cp") = 16,
        "Strip the cyclic prefix and apply the unitary FFT per frame.");

    // --- materials and scenes -----------------------------------------------
    py::class_<rt::MaterialRegistry>(m, "MaterialRegistry", "Named ITU-style material table.");
    m.def("load_materials", &rt::load_materials, py::arg("path"),
          "Load the materials registry (name, permittivity model, scattering) from a text table.");

    py::class_<PyScene>(m, "Scene", "2.5D scene: walls and roofs over an infinite ground plane.")
        .def_property(
            "tx",
            [](const PyScene &s) { return py::make_tuple(s.scene.tx.x, s.scene.tx.y, s.scene.tx.z); },
            [](PyScene &s, py::sequence v) {
                s.scene.tx = {v[0].cast<double>(), v[1].cast<double>(), v[2].cast<double>()};
            })
        .def_property(
            "rx",
            [](const PyScene &s) { return py::make_tuple(s.scene.rx.x, s.scene.rx.y, s.scene.rx.z); },
            [](PyScene &s, py::sequence v) {
                s.scene.rx = {v[0].cast<double>(), v[1].cast<double>(), v[2].cast<double>()};
            })
        .def_property_readonly("carrier_hz", [](const PyScene &s) { return s.scene.carrier_hz; })
        .def_property_readonly("wall_count", [](const PyScene &s) { return s.scene.walls.size(); })
        .def_property_readonly("roof_count", [](const PyScene &s) { return s.scene.roofs.size(); })
        .def(
            "material_choice",
            [](const PyScene &s, const std::string &choice) {
                rt::MaterialChoice mc;
                if (choice == "MC1" || choice == "mc1")
                    mc = rt::MaterialChoice::mc1;
                else if (choice == "MC2" || choice == "mc2")
                    mc = rt::MaterialChoice::mc2;
                else if (choice == "MC3" || choice == "mc3")
                    mc = rt::MaterialChoice::mc3;
                else
                    throw dimension_error("unknown material choice \"" + choice + "\"");
                return PyScene{rt::material_choice(s.scene, mc)};
            },
            py::arg("choice"), "Scene copy with the MC1/MC2/MC3 material scheme applied.")
        .def(
            "perturb",
            [](const PyScene &s, rt::MaterialRegistry &registry, std::size_t clutter, double material_jitter,
               double geometry_jitter, std::uint64_t seed) {
                rt::PerturbationConfig cfg;
                cfg.clutter_count = clutter;
                cfg.material_jitter = material_jitter;
                cfg.geometry_jitter = geometry_jitter;
                cfg.seed = seed;
                return PyScene{rt::perturb_scene(s.scene, cfg, registry)};
            },
            py::arg("registry"), py::arg("clutter") = 0, py::arg("material_jitter") = 0.0,
            py::arg("geometry_jitter") = 0.0, py::arg("seed") = 0,
            "Synthetic ground-truth scene: jittered geometry/materials plus clutter boxes. "
            "Jittered materials are added to `registry`.");
    m.def(
        "load_scene",
        [](const std::string &path, const rt::MaterialRegistry &registry) {
            return PyScene{rt::load_scene(path, registry)};
        },
        py::arg("path"), py::arg("registry"), "Load and validate a scene file.");

    // --- ray tracing ---------------------------------------------------------
    py::class_<PyPaths>(m, "PathList", "Traced propagation paths, sorted by (delay, trace).")
        .def_property_readonly("count", [](const PyPaths &p) { return p.paths.paths.size(); })
        .def_property_readonly("delays",
                               [](const PyPaths &p) {
                                   std::vector<double> delays;
                                   for (const rt::Path &path : p.paths.paths)
                                       delays.push_back(path.delay_s);
                                   return py::array_t<double>({static_cast<py::ssize_t>(delays.size())},
                                                              delays.data());
                               })
        .def_property_readonly("amplitudes",
                               [](const PyPaths &p) {
                                   std::vector<cplx> amps;
                                   for (const rt::Path &path : p.paths.paths)
                                       amps.push_back(path.amplitude);
                                   return to_array(amps);
                               })
        .def_property_readonly("traces",
                               [](const PyPaths &p) {
                                   std::vector<std::string> out;
                                   for (const rt::Path &path : p.paths.paths) {
                                       if (path.is_los()) {
                                           out.emplace_back("los");
                                           continue;
                                       }
                                       std::string s;
                                       for (std::size_t i = 0; i < path.trace.size(); ++i) {
                                           if (i)
                                               s += '>';
                                           s += rt::interaction_kind_name(path.trace[i].kind);
                                           s += ':';
                                           s += path.trace[i].surface_id;
                                       }
                                       out.push_back(std::move(s));
                                   }
                                   return out;
                               })
        .def(
            "to_cir",
            [](const PyPaths &p, std::size_t antennas, double spacing, double sample_rate, std::size_t taps,
               std::optional<double> reference_delay) {
                rt::ArrayConfig array;
                array.antenna_count = antennas;
                array.spacing_wavelengths = spacing;
                const rt::CirResult result = rt::paths_to_cir(p.paths, array, sample_rate, taps, reference_delay);
                const py::ssize_t a = static_cast<py::ssize_t>(result.cir.antenna_count());
                const py::ssize_t n = static_cast<py::ssize_t>(taps);
                py::array_t<std::complex<double>> cir({a, n});
                auto view = cir.mutable_unchecked<2>();
                for (py::ssize_t i = 0; i < a; ++i)
                    for (py::ssize_t k = 0; k < n; ++k)
                        view(i, k) = result.cir.taps[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
                return py::make_tuple(cir, result.dropped_energy_fraction);
            },
            py::arg("antennas") = 4, py::arg("spacing") = 0.5, py::arg("sample_rate") = 30.72e6,
            py::arg("taps") = 16, py::arg("reference_delay") = std::nullopt,
            "Bin the paths into an [antennas, taps] CIR; returns (cir, dropped_energy_fraction).");
    m.def(
        "trace",
        [](const PyScene &scene, const rt::MaterialRegistry &registry, std::size_t ray_count,
           int max_reflections, std::uint64_t seed, bool diffraction, bool scattering, double radius,
           bool auto_radius) {
            rt::TraceConfig cfg;
            cfg.ray_count = ray_count;
            cfg.max_reflections = max_reflections;
            cfg.seed = seed;
            cfg.enable_diffraction = diffraction;
            cfg.enable_scattering = scattering;
            cfg.reception_radius = radius;
            cfg.auto_radius = auto_radius;
            py::gil_scoped_release release;
            return PyPaths{rt::trace(scene.scene, cfg, registry)};
        },
        py::arg("scene"), py::arg("registry"), py::arg("ray_count") = 10000, py::arg("max_reflections") = 3,
        py::arg("seed") = 0, py::arg("diffraction") = true, py::arg("scattering") = true,
        py::arg("radius") = 1.0, py::arg("auto_radius") = true,
        "Shoot-and-bounce trace of the scene toward scene.rx.");

    // --- paired datasets -----------------------------------------------------
    py::class_<PyDataset>(m, "Dataset", "Paired twin/truth CIR realizations.")
        .def_property_readonly("h_rt", [](const PyDataset &d) { return pairs_matrix(d.ds, false); })
        .def_property_readonly("h_real", [](const PyDataset &d) { return pairs_matrix(d.ds, true); })
        .def_property_readonly("meta",
                               [](const PyDataset &d) {
                                   py::dict meta;
                                   meta["samples"] = d.ds.meta.samples;
                                   meta["antennas"] = d.ds.meta.antennas;
                                   meta["taps"] = d.ds.meta.taps;
                                   meta["realizations"] = d.ds.meta.realizations;
                                   meta["features"] = d.ds.meta.features;
                                   meta["sample_rate"] = d.ds.meta.sample_rate;
                                   meta["scale_factor"] = d.ds.meta.scale_factor;
                                   meta["split"] = d.ds.meta.split;
                                   meta["seed"] = d.ds.meta.seed;
                                   return meta;
                               })
        .def("scale", [](PyDataset &d) { return twin::scale_dataset(d.ds); },
             "Normalize to max |component| 1; returns this pass's factor.")
        .def(
            "split_indices",
            [](const PyDataset &d) {
                const twin::SplitIndices s = twin::split_indices(d.ds.meta);
                return py::make_tuple(py::cast(s.train), py::cast(s.test));
            },
            "Deterministic (train, test) realization indices.")
        .def("save", [](const PyDataset &d, const std::string &path) { twin::save_dataset(path, d.ds); },
             py::arg("path"))
        .def_static(
            "from_arrays",
            [](const carray &h_rt, const carray &h_real, std::size_t antennas, double split,
               std::uint64_t seed) {
                if (h_rt.ndim() != 2 || h_real.ndim() != 2 || h_rt.shape(0) != h_real.shape(0) ||
                    h_rt.shape(1) != h_real.shape(1))
                    throw dimension_error("from_arrays: h_rt and h_real must be equal-shape [R, P] arrays");
                PyDataset d;
                const py::ssize_t r = h_rt.shape(0), p = h_rt.shape(1);
                if (antennas == 0 || static_cast<std::size_t>(r) % antennas != 0)
                    throw dimension_error("from_arrays: antennas must divide the realization count");
                d.ds.meta.samples = static_cast<std::uint64_t>(r) / antennas;
                d.ds.meta.antennas = antennas;
                d.ds.meta.taps = static_cast<std::uint64_t>(p);
                d.ds.meta.realizations = static_cast<std::uint64_t>(r);
                d.ds.meta.split = split;
                d.ds.meta.seed = seed;
                const auto vt = h_rt.unchecked<2>();
                const auto vr = h_real.unchecked<2>();
                for (py::ssize_t i = 0; i < r; ++i) {
                    twin::CirPair pair;
                    pair.h_rt.resize(static_cast<std::size_t>(p));
                    pair.h_real.resize(static_cast<std::size_t>(p));
                    for (py::ssize_t k = 0; k < p; ++k) {
                        pair.h_rt[static_cast<std::size_t>(k)] = vt(i, k);
                        pair.h_real[static_cast<std::size_t>(k)] = vr(i, k);
                    }
                    d.ds.pairs.push_back(std::move(pair));
                }
                d.ds.validate();
                return d;
            },
            py::arg("h_rt"), py::arg("h_real"), py::arg("antennas") = 1, py::arg("split") = 0.7,
            py::arg("seed") = 0, "Build a dataset from [R, P] twin and truth arrays.");
    m.def(
        "load_dataset", [](const std::string &path) { return PyDataset{twin::load_dataset(path)}; },
        py::arg("path"));
    m.def(
        "build_dataset",
        [](const PyScene &twin_scene, const PyScene &truth_scene,
           const py::array_t<double, py::array::c_style | py::array::forcecast> &positions,
           const rt::MaterialRegistry &registry, std::size_t rays, std::size_t truth_rays, int max_reflections,
           std::size_t taps, std::size_t antennas, double spacing, double sample_rate, std::uint64_t seed,
           double split, double radius, bool auto_radius) {
            if (positions.ndim() != 2 || positions.shape(1) != 3)
                throw dimension_error("build_dataset: positions must be an [S, 3] array");
            std::vector<rt::Vec3> rx;
            const auto view = positions.unchecked<2>();
            for (py::ssize_t i = 0; i < positions.shape(0); ++i)
                rx.push_back({view(i, 0), view(i, 1), view(i, 2)});
            twin::BuildConfig cfg;
            cfg.twin_trace.ray_count = rays;
            cfg.twin_trace.max_reflections = max_reflections;
            cfg.twin_trace.reception_radius = radius;
            cfg.twin_trace.auto_radius = auto_radius;
            cfg.twin_trace.seed = seed;
            cfg.truth_trace = cfg.twin_trace;
            cfg.truth_trace.ray_count = truth_rays ? truth_rays : rays;
            cfg.array.antenna_count = antennas;
            cfg.array.spacing_wavelengths = spacing;
            cfg.sample_rate = sample_rate;
            cfg.taps = taps;
            cfg.seed = seed;
            py::gil_scoped_release release;
            PyDataset d{twin::build_dataset(twin_scene.scene, truth_scene.scene, rx, cfg, registry)};
            d.ds.meta.split = split;
            return d;
        },
        py::arg("twin_scene"), py::arg("truth_scene"), py::arg("positions"), py::arg("registry"),
        py::arg("rays") = 10000, py::arg("truth_rays") = 0, py::arg("max_reflections") = 3,
        py::arg("taps") = 16, py::arg("antennas") = 4, py::arg("spacing") = 0.5,
        py::arg("sample_rate") = 30.72e6, py::arg("seed") = 0, py::arg("split") = 0.7,
        py::arg("radius") = 1.0, py::arg("auto_radius") = true,
        "Trace both scenes over an [S, 3] receiver grid into a paired dataset.");

    // --- corrector -----------------------------------------------------------
    py::class_<PyModel>(m, "Model", "Corrector parameters with training provenance.")
        .def_property_readonly("best_epoch", [](const PyModel &mo) { return mo.best_epoch; })
        .def_property_readonly("aborted", [](const PyModel &mo) { return mo.aborted; })
        .def_property_readonly("log",
                               [](const PyModel &mo) {
                                   py::array_t<double> out(
                                       {static_cast<py::ssize_t>(mo.log.size()), static_cast<py::ssize_t>(2)});
                                   auto view = out.mutable_unchecked<2>();
                                   for (py::ssize_t e = 0; e < out.shape(0); ++e) {
                                       view(e, 0) = mo.log[static_cast<std::size_t>(e)].train_mse;
                                       view(e, 1) = mo.log[static_cast<std::size_t>(e)].val_mse;
                                   }
                                   return out;
                               })
        .def("save",
             [](const PyModel &mo, const std::string &path) { nn::save_checkpoint(path, mo.params, mo.provenance); },
             py::arg("path"))
        .def(
            "predict",
            [](const PyModel &mo, const carray &h_rt, double scale_factor) {
                if (h_rt.ndim() == 1)
                    return py::object(to_array(twin::predict(mo.params, to_vector(h_rt), scale_factor)));
                if (h_rt.ndim() != 2)
                    throw dimension_error("predict: expected a [P] or [N, P] complex array");
                const py::ssize_t n = h_rt.shape(0), p = h_rt.shape(1);
                py::array_t<std::complex<double>> out({n, p});
                auto dst = out.mutable_unchecked<2>();
                const auto src = h_rt.unchecked<2>();
                for (py::ssize_t i = 0; i < n; ++i) {
                    std::vector<cplx> row(static_cast<std::size_t>(p));
                    for (py::ssize_t k = 0; k < p; ++k)
                        row[static_cast<std::size_t>(k)] = src(i, k);
                    const std::vector<cplx> pred = twin::predict(mo.params, row, scale_factor);
                    for (py::ssize_t k = 0; k < p; ++k)
                        dst(i, k) = pred[static_cast<std::size_t>(k)];
                }
                return py::object(out);
            },
            py::arg("h_rt"), py::arg("scale_factor") = 1.0,
            "Corrected CIR(s); the factor maps scaled units back to physical ones.");
    m.def(
        "load_checkpoint",
        [](const std::string &path) {
            PyModel mo;
            mo.params = nn::load_checkpoint(path, &mo.provenance);
            return mo;
        },
        py::arg("path"));
    m.def(
        "train_corrector",
        [](const PyDataset &dataset, const std::string &kind, std::size_t epochs, std::size_t batch_size,
           double learning_rate, std::size_t patience, double validation_fraction, std::uint64_t seed,
           std::size_t batches_per_epoch) {
            twin::CorrectorConfig cfg;
            cfg.epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.learning_rate = learning_rate;
            cfg.patience = patience;
            cfg.validation_fraction = validation_fraction;
            cfg.seed = seed;
            cfg.batches_per_epoch = batches_per_epoch;
            const twin::ModelKind mk = kind_from_name(kind);
            py::gil_scoped_release release;
            const twin::TrainResult result = twin::train_corrector(dataset.ds, cfg, mk);
            PyModel mo;
            mo.params = result.params;
            mo.provenance = result.provenance;
            mo.log = result.log;
            mo.best_epoch = result.best_epoch;
            mo.aborted = result.aborted;
            return mo;
        },
        py::arg("dataset"), py::arg("kind") = "encoder_decoder", py::arg("epochs") = 200,
        py::arg("batch_size") = 256, py::arg("learning_rate") = 8.0e-4, py::arg("patience") = 20,
        py::arg("validation_fraction") = 0.1, py::arg("seed") = 0, py::arg("batches_per_epoch") = 0,
        "Train a corrector on a scaled dataset; returns the best-validation model.");
    m.def(
        "evaluate_cases",
        [](const PyDataset &dataset, const PyModel &model) {
            const twin::CaseReport rep = twin::evaluate_cases(dataset.ds, model.params);
            py::dict out;
            out["case1_db"] = rep.case1_db;
            out["case2_db"] = rep.case2_db;
            out["case1_ratio_db"] = rep.case1_ratio_db;
            out["case2_ratio_db"] = rep.case2_ratio_db;
            out["count"] = rep.count;
            return out;
        },
        py::arg("dataset"), py::arg("model"),
        "Case 1 (twin vs truth) and Case 2 (corrected vs truth) NMSE over the test split.");
    m.def(
        "run_nmse_report",
        [](const std::string &dataset_path, const std::string &checkpoint_path, const std::string &csv_out) {
            const harness::NmseReport rep = harness::run_nmse_report(dataset_path, checkpoint_path, csv_out);
            py::dict out;
            out["case1_db"] = rep.cases.case1_db;
            out["case2_db"] = rep.cases.case2_db;
            out["count"] = rep.cases.count;
            out["table"] = rep.table;
            return out;
        },
        py::arg("dataset_path"), py::arg("checkpoint_path"), py::arg("csv_out") = std::string(),
        "File-level NMSE report with the split-leakage guard.");

    // --- link-level Monte-Carlo ---------------------------------------------
    m.def(
        "simulate_ber",
        [](const carray &estimate, const carray &truth, double snr_db, const std::string &mode,
           const std::string &normalization, std::size_t trials, std::size_t frames, std::uint64_t seed,
           bool noise, std::size_t subcarriers, std::size_t cp) {
            const std::vector<ofdm::Cir> est = cirs_from_array(estimate);
            const std::vector<ofdm::Cir> tru = cirs_from_array(truth);
            ofdm::OfdmConfig cfg;
            cfg.subcarrier_count = subcarriers;
            cfg.cp_length = cp;
            const precode::PrecoderMode pm = mode_from_name(mode);
            const precode::Normalization nm = norm_from_name(normalization);
            py::gil_scoped_release release;
            const harness::BerPoint point =
                harness::simulate_point(est, tru, pm, nm, snr_db, noise, trials, frames, cfg, seed);
            py::gil_scoped_acquire acquire;
            py::dict out;
            out["ber"] = point.ber;
            out["bits"] = point.bits;
            out["std_err"] = point.std_err;
            return out;
        },
        py::arg("estimate"), py::arg("truth"), py::arg("snr_db"), py::arg("mode") = "mmse",
        py::arg("normalization") = "raw", py::arg("trials") = 25, py::arg("frames") = 16,
        py::arg("seed") = 1, py::arg("noise") = true, py::arg("subcarriers") = 128, py::arg("cp") = 16,
        "One QPSK/OFDM Monte-Carlo BER point: precode with `estimate`, propagate through `truth` "
        "([S, A, P] complex arrays), equalize with the true effective channel.");
    m.def(
        "channel_normalization",
        [](const carray &truth) { return harness::channel_normalization(cirs_from_array(truth)); },
        py::arg("truth"),
        "Factor that brings the mean per-antenna tap energy of an [S, A, P] set to 1.");
}
