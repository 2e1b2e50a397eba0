// ctwin: command-line front end for the simulation toolkit.
//
// Subcommands: scene trace, dataset build, dataset scale, train, eval nmse,
// eval ber, plot, defaults. `eval ber` reads a JSON experiment config (the
// exact key set `ctwin defaults --json` prints) with flag overrides on top.
// The materials registry resolves from --materials, then the CTWIN_MATERIALS
// environment variable, then data/itu_materials.txt.
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ctwin/harness/experiment.hpp"
#include "ctwin/io_util.hpp"
#include "ctwin/nn/checkpoint.hpp"
#include "ctwin/rt/scene.hpp"
#include "ctwin/rt/trace.hpp"
#include "ctwin/twin/corrector.hpp"
#include "ctwin/twin/dataset.hpp"

using nlohmann::json;
using namespace ctwin;

namespace {

std::string materials_path(const std::string &flag) {
    if (!flag.empty())
        return flag;
    if (const char *env = std::getenv("CTWIN_MATERIALS"); env && *env)
        return env;
    return "data/itu_materials.txt";
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

rt::MaterialChoice parse_material_choice(const std::string &name) {
    if (name == "MC1" || name == "mc1")
        return rt::MaterialChoice::mc1;
    if (name == "MC2" || name == "mc2")
        return rt::MaterialChoice::mc2;
    if (name == "MC3" || name == "mc3")
        return rt::MaterialChoice::mc3;
    throw dimension_error("unknown material choice \"" + name + "\" (expected MC1, MC2 or MC3)");
}

harness::Scenario parse_scenario(const std::string &name) {
    if (name == "ray_count_study")
        return harness::Scenario::ray_count_study;
    if (name == "material_study")
        return harness::Scenario::material_study;
    if (name == "corrector_study")
        return harness::Scenario::corrector_study;
    throw dimension_error("unknown scenario \"" + name +
                          "\" (expected ray_count_study, material_study or corrector_study)");
}

ofdm::Modulation parse_modulation(const std::string &name) {
    if (name == "qpsk")
        return ofdm::Modulation::qpsk();
    if (name == "bpsk")
        return ofdm::Modulation::bpsk();
    if (name.size() > 3 && name.substr(name.size() - 3) == "qam")
        return ofdm::Modulation::mqam(static_cast<unsigned>(std::stoul(name.substr(0, name.size() - 3))));
    throw dimension_error("unknown modulation \"" + name + "\" (expected qpsk, bpsk or <M>qam)");
}

twin::ModelKind parse_model_kind(const std::string &name) {
    if (name == "encdec" || name == "encoder_decoder")
        return twin::ModelKind::encoder_decoder;
    if (name == "mlp")
        return twin::ModelKind::mlp;
    throw dimension_error("unknown model kind \"" + name + "\" (expected encdec or mlp)");
}

// "x0:x1:nx,y0:y1:ny,z" -> deterministic row-major receiver grid.
std::vector<rt::Vec3> parse_grid(const std::string &spec) {
    const auto split = [](const std::string &s, char sep) {
        std::vector<std::string> out;
        std::size_t start = 0;
        for (;;) {
            const std::size_t pos = s.find(sep, start);
            if (pos == std::string::npos) {
                out.push_back(s.substr(start));
                return out;
            }
            out.push_back(s.substr(start, pos - start));
            start = pos + 1;
        }
    };
    const std::vector<std::string> parts = split(spec, ',');
    if (parts.size() != 3)
        throw dimension_error("grid spec \"" + spec + "\": expected \"x0:x1:nx,y0:y1:ny,z\"");
    const std::vector<std::string> xs = split(parts[0], ':');
    const std::vector<std::string> ys = split(parts[1], ':');
    if (xs.size() != 3 || ys.size() != 3)
        throw dimension_error("grid spec \"" + spec + "\": axis format is start:stop:count");
    const double x0 = std::stod(xs[0]), x1 = std::stod(xs[1]);
    const double y0 = std::stod(ys[0]), y1 = std::stod(ys[1]);
    const std::size_t nx = std::stoul(xs[2]), ny = std::stoul(ys[2]);
    const double z = std::stod(parts[2]);
    if (nx < 1 || ny < 1)
        throw dimension_error("grid spec: counts must be at least 1");
    std::vector<rt::Vec3> out;
    out.reserve(nx * ny);
    for (std::size_t iy = 0; iy < ny; ++iy)
        for (std::size_t ix = 0; ix < nx; ++ix)
            out.push_back({nx == 1 ? x0 : x0 + (x1 - x0) * static_cast<double>(ix) / static_cast<double>(nx - 1),
                           ny == 1 ? y0 : y0 + (y1 - y0) * static_cast<double>(iy) / static_cast<double>(ny - 1),
                           z});
    return out;
}

// --- experiment config <-> JSON --------------------------------------------

json experiment_to_json(const harness::ExperimentConfig &cfg) {
    json j;
    j["scenario"] = harness::to_string(cfg.scenario);
    j["snr_grid_db"] = cfg.snr_grid_db;
    j["trials"] = cfg.trials;
    j["frames_per_trial"] = cfg.frames_per_trial;
    std::vector<std::string> precoders;
    for (const precode::PrecoderMode mode : cfg.precoders)
        precoders.push_back(mode == precode::PrecoderMode::mrt ? "mrt" : "mmse");
    j["precoders"] = precoders;
    j["normalization"] = cfg.normalization == precode::Normalization::raw ? "raw" : "unit_power";
    j["fidelity_tiers"] = cfg.fidelity_tiers;
    j["desk_tiers"] = cfg.desk_tiers;
    j["material_choice"] = cfg.material_choice;
    j["base_seed"] = cfg.base_seed;
    j["noise_enabled"] = cfg.noise_enabled;
    j["output_csv"] = cfg.output_csv;
    j["output_svg"] = cfg.output_svg;
    j["ofdm"] = {{"subcarriers", cfg.ofdm.subcarrier_count},
                 {"cp", cfg.ofdm.cp_length},
                 {"sample_rate", cfg.ofdm.sample_rate},
                 {"modulation", cfg.ofdm.modulation.kind == ofdm::Modulation::Kind::bpsk
                                    ? "bpsk"
                                    : (cfg.ofdm.modulation.order == 4
                                           ? "qpsk"
                                           : std::to_string(cfg.ofdm.modulation.order) + "qam")}};
    j["antenna_count"] = cfg.antenna_count;
    j["learning_rate"] = cfg.learning_rate;
    j["split"] = cfg.split;
    json variants = json::array();
    for (const harness::VariantSource &v : cfg.variants) {
        json jv;
        jv["label"] = v.label;
        jv["dataset"] = v.dataset_path;
        if (!v.checkpoint_path.empty())
            jv["checkpoint"] = v.checkpoint_path;
        if (v.use_truth)
            jv["use_truth"] = true;
        variants.push_back(jv);
    }
    j["variants"] = variants;
    return j;
}

harness::ExperimentConfig experiment_from_json(const json &j) {
    harness::ExperimentConfig cfg =
        harness::scenario_defaults(parse_scenario(j.value("scenario", std::string("ray_count_study"))));
    if (j.contains("snr_grid_db"))
        cfg.snr_grid_db = j.at("snr_grid_db").get<std::vector<double>>();
    cfg.trials = j.value("trials", cfg.trials);
    cfg.frames_per_trial = j.value("frames_per_trial", cfg.frames_per_trial);
    if (j.contains("precoders")) {
        cfg.precoders.clear();
        for (const auto &name : j.at("precoders")) {
            const std::string s = name.get<std::string>();
            if (s == "mrt")
                cfg.precoders.push_back(precode::PrecoderMode::mrt);
            else if (s == "mmse")
                cfg.precoders.push_back(precode::PrecoderMode::mmse);
            else
                throw dimension_error("config: unknown precoder \"" + s + "\"");
        }
    }
    if (j.contains("normalization")) {
        const std::string s = j.at("normalization").get<std::string>();
        if (s == "raw")
            cfg.normalization = precode::Normalization::raw;
        else if (s == "unit_power")
            cfg.normalization = precode::Normalization::unit_power;
        else
            throw dimension_error("config: unknown normalization \"" + s + "\"");
    }
    if (j.contains("fidelity_tiers"))
        cfg.fidelity_tiers = j.at("fidelity_tiers").get<std::vector<std::size_t>>();
    if (j.contains("desk_tiers"))
        cfg.desk_tiers = j.at("desk_tiers").get<std::vector<std::size_t>>();
    cfg.material_choice = j.value("material_choice", cfg.material_choice);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    cfg.noise_enabled = j.value("noise_enabled", cfg.noise_enabled);
    cfg.output_csv = j.value("output_csv", cfg.output_csv);
    cfg.output_svg = j.value("output_svg", cfg.output_svg);
    if (j.contains("ofdm")) {
        const json &jo = j.at("ofdm");
        cfg.ofdm.subcarrier_count = jo.value("subcarriers", cfg.ofdm.subcarrier_count);
        cfg.ofdm.cp_length = jo.value("cp", cfg.ofdm.cp_length);
        cfg.ofdm.sample_rate = jo.value("sample_rate", cfg.ofdm.sample_rate);
        if (jo.contains("modulation"))
            cfg.ofdm.modulation = parse_modulation(jo.at("modulation").get<std::string>());
    }
    cfg.antenna_count = j.value("antenna_count", cfg.antenna_count);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.split = j.value("split", cfg.split);
    if (j.contains("variants")) {
        cfg.variants.clear();
        for (const auto &jv : j.at("variants")) {
            harness::VariantSource v;
            v.label = jv.at("label").get<std::string>();
            v.dataset_path = jv.at("dataset").get<std::string>();
            v.checkpoint_path = jv.value("checkpoint", std::string());
            v.use_truth = jv.value("use_truth", false);
            cfg.variants.push_back(std::move(v));
        }
    }
    cfg.validate();
    return cfg;
}

json load_json(const std::string &path) {
    std::ifstream is(path);
    if (!is)
        throw numeric_error("cannot open config file: " + path);
    json j;
    try {
        is >> j;
    } catch (const std::exception &e) {
        throw numeric_error("config file " + path + ": " + e.what());
    }
    return j;
}

// --- subcommand bodies ------------------------------------------------------

int cmd_scene_trace(const std::string &scene_path, const std::string &materials, rt::TraceConfig trace_cfg,
                    std::optional<std::vector<double>> rx_override, const std::string &csv_out) {
    const rt::MaterialRegistry registry = rt::load_materials(materials_path(materials));
    rt::Scene scene = rt::load_scene(scene_path, registry);
    if (rx_override) {
        if (rx_override->size() != 3)
            throw dimension_error("--rx expects exactly three coordinates");
        scene.rx = {(*rx_override)[0], (*rx_override)[1], (*rx_override)[2]};
    }
    const rt::PathList paths = rt::trace(scene, trace_cfg, registry);

    std::printf("%zu path(s), %zu rays, radius %.3f m\n", paths.paths.size(), trace_cfg.ray_count,
                trace_cfg.effective_radius());
    std::printf("%12s %12s %10s %9s %9s  %s\n", "delay_ns", "|amp|", "phase_deg", "az_deg", "el_deg", "trace");
    for (const rt::Path &p : paths.paths) {
        std::string trace_str = "los";
        if (!p.is_los()) {
            trace_str.clear();
            for (std::size_t i = 0; i < p.trace.size(); ++i) {
                if (i)
                    trace_str += '>';
                trace_str += rt::interaction_kind_name(p.trace[i].kind);
                trace_str += ':';
                trace_str += p.trace[i].surface_id;
            }
        }
        std::printf("%12.3f %12.4e %10.2f %9.2f %9.2f  %s\n", p.delay_s * 1e9, std::abs(p.amplitude),
                    std::arg(p.amplitude) * 180.0 / kPi, p.departure_azimuth * 180.0 / kPi,
                    p.departure_elevation * 180.0 / kPi, trace_str.c_str());
    }
    if (!csv_out.empty()) {
        io::AtomicFileWriter writer(csv_out);
        writer.stream() << "# ctwin-paths v1\ndelay_s,amp_re,amp_im,azimuth_rad,elevation_rad,trace\n";
        for (const rt::Path &p : paths.paths) {
            std::string trace_str = "los";
            if (!p.is_los()) {
                trace_str.clear();
                for (std::size_t i = 0; i < p.trace.size(); ++i) {
                    if (i)
                        trace_str += '>';
                    trace_str += rt::interaction_kind_name(p.trace[i].kind);
                    trace_str += ':';
                    trace_str += p.trace[i].surface_id;
                }
            }
            writer.stream() << g17(p.delay_s) << ',' << g17(p.amplitude.real()) << ',' << g17(p.amplitude.imag())
                            << ',' << g17(p.departure_azimuth) << ',' << g17(p.departure_elevation) << ','
                            << trace_str << '\n';
        }
        writer.commit();
        std::printf("wrote %s\n", csv_out.c_str());
    }
    return 0;
}

int cmd_dataset_build(const std::string &scene_path, const std::string &truth_scene_path, bool perturb,
                      const rt::PerturbationConfig &perturb_cfg, const std::string &twin_mc,
                      const std::string &truth_mc, const std::string &grid_spec, twin::BuildConfig build_cfg,
                      double split, const std::string &materials, const std::string &out_path, bool scale) {
    rt::MaterialRegistry registry = rt::load_materials(materials_path(materials));
    const rt::Scene base = rt::load_scene(scene_path, registry);

    rt::Scene twin_scene = base;
    if (!twin_mc.empty())
        twin_scene = rt::material_choice(base, parse_material_choice(twin_mc));

    rt::Scene truth_scene = base;
    if (!truth_scene_path.empty())
        truth_scene = rt::load_scene(truth_scene_path, registry);
    else if (perturb)
        truth_scene = rt::perturb_scene(base, perturb_cfg, registry);
    if (!truth_mc.empty())
        truth_scene = rt::material_choice(truth_scene, parse_material_choice(truth_mc));

    const std::vector<rt::Vec3> positions = parse_grid(grid_spec);
    twin::Dataset ds = twin::build_dataset(twin_scene, truth_scene, positions, build_cfg, registry);
    ds.meta.split = split;
    double factor = 1.0;
    if (scale)
        factor = twin::scale_dataset(ds);
    twin::save_dataset(out_path, ds);
    std::printf("dataset: %llu positions x %llu antennas x %llu taps (%llu realizations)%s -> %s\n",
                static_cast<unsigned long long>(ds.meta.samples), static_cast<unsigned long long>(ds.meta.antennas),
                static_cast<unsigned long long>(ds.meta.taps),
                static_cast<unsigned long long>(ds.meta.realizations),
                scale ? (", scaled by " + g17(factor)).c_str() : "", out_path.c_str());
    return 0;
}

int cmd_dataset_scale(const std::string &path, const std::string &out_path) {
    twin::Dataset ds = twin::load_dataset(path);
    const double factor = twin::scale_dataset(ds);
    const std::string target = out_path.empty() ? path : out_path;
    twin::save_dataset(target, ds);
    std::printf("scaled %s by %s (cumulative %s) -> %s\n", path.c_str(), g17(factor).c_str(),
                g17(ds.meta.scale_factor).c_str(), target.c_str());
    return 0;
}

int cmd_train(const std::string &dataset_path, const std::string &out_path, const std::string &model_name,
              const twin::CorrectorConfig &cfg, const std::string &log_path) {
    const twin::Dataset ds = twin::load_dataset(dataset_path);
    const twin::ModelKind kind = parse_model_kind(model_name);
    const twin::TrainResult result = twin::train_corrector(ds, cfg, kind);
    if (result.aborted)
        std::fprintf(stderr, "warning: training aborted on non-finite loss; saving the last finite parameters\n");
    nn::save_checkpoint(out_path, result.params, result.provenance);
    if (!result.log.empty() && result.best_epoch >= 1)
        std::printf("%s: %zu epoch(s), final train mse %.3e, best validation mse %.3e at epoch %zu -> %s\n",
                    twin::model_kind_name(kind), result.log.size(), result.log.back().train_mse,
                    result.log[result.best_epoch - 1].val_mse, result.best_epoch, out_path.c_str());
    if (!log_path.empty()) {
        io::AtomicFileWriter writer(log_path);
        writer.stream() << "# ctwin-train v1\nepoch,train_mse,val_mse\n";
        for (std::size_t e = 0; e < result.log.size(); ++e)
            writer.stream() << e << ',' << g17(result.log[e].train_mse) << ',' << g17(result.log[e].val_mse)
                            << '\n';
        writer.commit();
    }
    return 0;
}

int cmd_eval_ber(const std::string &config_path, CLI::App *cmd, harness::ExperimentConfig cfg) {
    const harness::SweepOutcome outcome = harness::run_ber_sweep(cfg);
    std::printf("%zu point(s): %zu computed, %zu reused\n", outcome.rows.size(), outcome.computed,
                outcome.skipped);
    std::printf("%-18s %-16s %8s %12s %10s %12s\n", "scenario", "variant", "snr_db", "ber", "bits", "stderr");
    for (const harness::ResultRow &row : outcome.rows)
        std::printf("%-18s %-16s %8.2f %12.4e %10llu %12.4e\n", row.scenario.c_str(), row.variant.c_str(),
                    row.snr_db, row.ber, static_cast<unsigned long long>(row.bits), row.std_err);
    (void)config_path;
    (void)cmd;
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"ctwin: MISO-OFDM digital-twin precoding simulation toolkit"};
    app.require_subcommand(1);
    std::string materials;
    app.add_option("--materials", materials,
                   "materials registry path (default: $CTWIN_MATERIALS, then data/itu_materials.txt)");

    // --- scene trace ---
    auto *scene_cmd = app.add_subcommand("scene", "scene operations");
    scene_cmd->require_subcommand(1);
    auto *trace_cmd = scene_cmd->add_subcommand("trace", "trace a scene and list the propagation paths");
    std::string trace_scene, trace_csv;
    rt::TraceConfig trace_cfg;
    std::vector<double> trace_rx;
    bool no_diffraction = false, no_scattering = false, fixed_radius = false;
    trace_cmd->add_option("--scene", trace_scene, "scene file")->required();
    trace_cmd->add_option("--rays", trace_cfg.ray_count, "ray count (fidelity knob)");
    trace_cmd->add_option("--max-reflections", trace_cfg.max_reflections, "specular bounce limit");
    trace_cmd->add_option("--seed", trace_cfg.seed, "ray-direction seed");
    trace_cmd->add_option("--radius", trace_cfg.reception_radius, "reception radius at the 1e4-ray tier");
    trace_cmd->add_flag("--fixed-radius", fixed_radius, "disable the sqrt(1/ray_count) radius scaling");
    trace_cmd->add_flag("--no-diffraction", no_diffraction, "disable knife-edge diffraction");
    trace_cmd->add_flag("--no-scattering", no_scattering, "disable diffuse scattering");
    trace_cmd->add_option("--rx", trace_rx, "override receiver position (three coordinates)")->expected(3);
    trace_cmd->add_option("--csv", trace_csv, "also write the path list as CSV");

    // --- dataset build / scale ---
    auto *dataset_cmd = app.add_subcommand("dataset", "paired-CIR dataset operations");
    dataset_cmd->require_subcommand(1);
    auto *build_cmd = dataset_cmd->add_subcommand("build", "trace twin and truth scenes into a paired dataset");
    std::string build_scene, build_truth_scene, build_twin_mc, build_truth_mc, build_grid, build_out;
    bool build_perturb = false, build_scale = false;
    rt::PerturbationConfig perturb_cfg;
    twin::BuildConfig build_cfg;
    double build_split = 0.7;
    std::size_t truth_rays = 0;
    build_cmd->add_option("--scene", build_scene, "twin scene file")->required();
    build_cmd->add_option("--truth-scene", build_truth_scene, "explicit truth scene file");
    build_cmd->add_flag("--perturb", build_perturb, "derive the truth scene by perturbing the twin scene");
    build_cmd->add_option("--clutter", perturb_cfg.clutter_count, "perturbation: clutter box count");
    build_cmd->add_option("--material-jitter", perturb_cfg.material_jitter,
                          "perturbation: relative material parameter jitter");
    build_cmd->add_option("--geometry-jitter", perturb_cfg.geometry_jitter,
                          "perturbation: wall/roof position jitter (meters)");
    build_cmd->add_option("--perturb-seed", perturb_cfg.seed, "perturbation seed");
    build_cmd->add_option("--material-choice", build_twin_mc, "apply MC1/MC2/MC3 to the twin scene");
    build_cmd->add_option("--truth-material-choice", build_truth_mc, "apply MC1/MC2/MC3 to the truth scene");
    build_cmd->add_option("--grid", build_grid, "receiver grid \"x0:x1:nx,y0:y1:ny,z\"")->required();
    build_cmd->add_option("--rays", build_cfg.twin_trace.ray_count, "twin-side ray count");
    build_cmd->add_option("--truth-rays", truth_rays, "truth-side ray count (default: same as --rays)");
    build_cmd->add_option("--max-reflections", build_cfg.twin_trace.max_reflections, "bounce limit (both sides)");
    build_cmd->add_option("--radius", build_cfg.twin_trace.reception_radius, "reception radius (both sides)");
    bool build_fixed_radius = false, build_no_diffraction = false, build_no_scattering = false;
    build_cmd->add_flag("--fixed-radius", build_fixed_radius, "disable radius scaling (both sides)");
    build_cmd->add_flag("--no-diffraction", build_no_diffraction, "disable knife-edge diffraction (both sides)");
    build_cmd->add_flag("--no-scattering", build_no_scattering, "disable diffuse scattering (both sides)");
    build_cmd->add_option("--taps", build_cfg.taps, "CIR tap count (eta)");
    build_cmd->add_option("--antennas", build_cfg.array.antenna_count, "transmit array size");
    build_cmd->add_option("--spacing", build_cfg.array.spacing_wavelengths, "array spacing in wavelengths");
    build_cmd->add_option("--sample-rate", build_cfg.sample_rate, "tap grid sample rate");
    build_cmd->add_option("--seed", build_cfg.seed, "trace + split seed");
    build_cmd->add_option("--split", build_split, "train fraction stored in the dataset");
    build_cmd->add_flag("--scale", build_scale, "scale the dataset after building");
    build_cmd->add_option("--out", build_out, "output dataset path")->required();

    auto *scale_cmd = dataset_cmd->add_subcommand("scale", "normalize a dataset to max |component| 1");
    std::string scale_in, scale_out;
    scale_cmd->add_option("--dataset", scale_in, "dataset path")->required();
    scale_cmd->add_option("--out", scale_out, "output path (default: rewrite in place)");

    // --- train ---
    auto *train_cmd = app.add_subcommand("train", "train a corrector on a scaled dataset");
    std::string train_dataset, train_out, train_model = "encdec", train_log;
    twin::CorrectorConfig train_cfg;
    train_cmd->add_option("--dataset", train_dataset, "scaled paired dataset")->required();
    train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
    train_cmd->add_option("--model", train_model, "encdec or mlp (default encdec)");
    train_cmd->add_option("--epochs", train_cfg.epochs, "epoch budget");
    train_cmd->add_option("--batch", train_cfg.batch_size, "batch size");
    train_cmd->add_option("--batches-per-epoch", train_cfg.batches_per_epoch, "0 = full pass");
    train_cmd->add_option("--lr", train_cfg.learning_rate, "step size");
    train_cmd->add_option("--patience", train_cfg.patience, "early-stop patience (0 disables)");
    train_cmd->add_option("--val-fraction", train_cfg.validation_fraction, "validation carve-out fraction");
    train_cmd->add_option("--seed", train_cfg.seed, "training seed");
    train_cmd->add_option("--log", train_log, "write the per-epoch loss log as CSV");

    // --- eval nmse / eval ber ---
    auto *eval_cmd = app.add_subcommand("eval", "evaluation reports");
    eval_cmd->require_subcommand(1);
    auto *nmse_cmd = eval_cmd->add_subcommand("nmse", "two-case NMSE report over the held-out split");
    std::string nmse_dataset, nmse_checkpoint, nmse_csv;
    nmse_cmd->add_option("--dataset", nmse_dataset, "paired dataset")->required();
    nmse_cmd->add_option("--checkpoint", nmse_checkpoint, "trained corrector checkpoint")->required();
    nmse_cmd->add_option("--csv", nmse_csv, "also write the report as CSV");

    auto *ber_cmd = eval_cmd->add_subcommand("ber", "Monte-Carlo BER sweep from a JSON experiment config");
    std::string ber_config;
    std::vector<double> ber_snr;
    std::size_t ber_trials = 0, ber_frames = 0;
    std::uint64_t ber_seed = 0;
    std::string ber_csv, ber_svg;
    ber_cmd->add_option("--config", ber_config, "JSON experiment config (see `ctwin defaults --json`)")
        ->required();
    ber_cmd->add_option("--snr", ber_snr, "override the SNR grid (dB)")->delimiter(',');
    ber_cmd->add_option("--trials", ber_trials, "override trials per point");
    ber_cmd->add_option("--frames", ber_frames, "override frames per trial");
    ber_cmd->add_option("--base-seed", ber_seed, "override the base seed");
    ber_cmd->add_option("--csv", ber_csv, "override the results CSV path");
    ber_cmd->add_option("--svg", ber_svg, "override the plot path");

    // --- plot ---
    auto *plot_cmd = app.add_subcommand("plot", "render a results CSV as an SVG line chart");
    std::string plot_csv, plot_svg;
    plot_cmd->add_option("--csv", plot_csv, "results CSV")->required();
    plot_cmd->add_option("--svg", plot_svg, "output SVG path")->required();

    // --- defaults ---
    auto *defaults_cmd = app.add_subcommand("defaults", "print the study defaults");
    std::string defaults_scenario = "ray_count_study";
    bool defaults_json = false;
    defaults_cmd->add_option("--scenario", defaults_scenario, "study shape");
    defaults_cmd->add_flag("--json", defaults_json, "print as a JSON config template");

    CLI11_PARSE(app, argc, argv);

    try {
        if (trace_cmd->parsed()) {
            trace_cfg.enable_diffraction = !no_diffraction;
            trace_cfg.enable_scattering = !no_scattering;
            trace_cfg.auto_radius = !fixed_radius;
            return cmd_scene_trace(trace_scene, materials, trace_cfg,
                                   trace_rx.empty() ? std::nullopt : std::make_optional(trace_rx), trace_csv);
        }
        if (build_cmd->parsed()) {
            build_cfg.twin_trace.auto_radius = !build_fixed_radius;
            build_cfg.twin_trace.enable_diffraction = !build_no_diffraction;
            build_cfg.twin_trace.enable_scattering = !build_no_scattering;
            build_cfg.twin_trace.seed = build_cfg.seed;
            build_cfg.truth_trace = build_cfg.twin_trace;
            if (truth_rays)
                build_cfg.truth_trace.ray_count = truth_rays;
            return cmd_dataset_build(build_scene, build_truth_scene, build_perturb, perturb_cfg, build_twin_mc,
                                     build_truth_mc, build_grid, build_cfg, build_split, materials, build_out,
                                     build_scale);
        }
        if (scale_cmd->parsed())
            return cmd_dataset_scale(scale_in, scale_out);
        if (train_cmd->parsed())
            return cmd_train(train_dataset, train_out, train_model, train_cfg, train_log);
        if (nmse_cmd->parsed()) {
            const harness::NmseReport report = harness::run_nmse_report(nmse_dataset, nmse_checkpoint, nmse_csv);
            std::fputs(report.table.c_str(), stdout);
            return 0;
        }
        if (ber_cmd->parsed()) {
            harness::ExperimentConfig cfg = experiment_from_json(load_json(ber_config));
            if (!ber_snr.empty())
                cfg.snr_grid_db = ber_snr;
            if (ber_cmd->count("--trials"))
                cfg.trials = ber_trials;
            if (ber_cmd->count("--frames"))
                cfg.frames_per_trial = ber_frames;
            if (ber_cmd->count("--base-seed"))
                cfg.base_seed = ber_seed;
            if (ber_cmd->count("--csv"))
                cfg.output_csv = ber_csv;
            if (ber_cmd->count("--svg"))
                cfg.output_svg = ber_svg;
            cfg.validate();
            return cmd_eval_ber(ber_config, ber_cmd, cfg);
        }
        if (plot_cmd->parsed()) {
            harness::emit_plot(plot_csv, plot_svg);
            std::printf("wrote %s\n", plot_svg.c_str());
            return 0;
        }
        if (defaults_cmd->parsed()) {
            const harness::ExperimentConfig cfg = harness::scenario_defaults(parse_scenario(defaults_scenario));
            if (defaults_json) {
                std::cout << experiment_to_json(cfg).dump(2) << '\n';
            } else {
                std::printf("scenario             %s\n", harness::to_string(cfg.scenario).c_str());
                std::printf("subcarriers          %zu\n", cfg.ofdm.subcarrier_count);
                std::printf("cyclic prefix        %zu samples\n", cfg.ofdm.cp_length);
                std::printf("sample rate          %.6g Hz\n", cfg.ofdm.sample_rate);
                std::printf("modulation           %s\n",
                            cfg.ofdm.modulation == ofdm::Modulation::qpsk() ? "qpsk" : "other");
                std::printf("transmit antennas    %zu\n", cfg.antenna_count);
                std::printf("equalizer            zero-forcing\n");
                std::printf("corrector step size  %g\n", cfg.learning_rate);
                std::printf("train fraction       %g\n", cfg.split);
                std::printf("precoders           ");
                for (const precode::PrecoderMode mode : cfg.precoders)
                    std::printf(" %s", mode == precode::PrecoderMode::mrt ? "mrt" : "mmse");
                std::printf("\nfidelity tiers      ");
                for (const std::size_t t : cfg.fidelity_tiers)
                    std::printf(" %zu", t);
                std::printf("\ndesk-scale tiers    ");
                for (const std::size_t t : cfg.desk_tiers)
                    std::printf(" %zu", t);
                std::printf("\nsnr grid (dB)       ");
                for (const double s : cfg.snr_grid_db)
                    std::printf(" %g", s);
                std::printf("\n");
            }
            return 0;
        }
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
