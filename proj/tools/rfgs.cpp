// SPDX-License-Identifier: Apache-2.0
//
// rfgs command-line tool: scene generation, spectrum rendering, RIS/FAS
// optimization, sweeps and SRN training/evaluation.
//
// Exit codes: 0 success, 2 usage or file errors, 3 schema/validation/format
// errors, 4 numeric or feasibility errors.

#include "rfgs/optimize.hpp"
#include "rfgs/scene.hpp"
#include "rfgs/splatting.hpp"
#include "rfgs/srn.hpp"
#include "rfgs/sweep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rfgs;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = "out";
    bool seed_given = false;
};

json read_json(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
}

AngularGrid parse_grid(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw ArgumentError("grid must look like 16x16, got '" + s + "'");
    int lat = 0, lon = 0;
    try {
        lat = std::stoi(s.substr(0, x));
        lon = std::stoi(s.substr(x + 1));
    } catch (const std::exception&) {
        throw ArgumentError("grid must look like 16x16, got '" + s + "'");
    }
    return AngularGrid(lat, lon);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Records what ran. Only this file carries timestamps and wall time.
void write_manifest(const Globals& g, const std::string& command, const json& config, const std::vector<std::string>& outputs,
                    double wall_s) {
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json m;
    m["command"] = command;
    m["config"] = config;
    m["config_hash"] = hex64(fnv1a(config.dump()));
    m["seed"] = g.seed;
    m["threads"] = g.threads;
    m["versions"] = {{"rfgs", rfgs::version},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"cli11", CLI11_VERSION},
                     {"compiler", __VERSION__}};
    m["outputs"] = outputs;
    m["finished_utc"] = stamp;
    m["wall_time_s"] = wall_s;
    write_text(fs::path(g.out) / "manifest.json", m.dump(2) + "\n");
}

// ---- scene gen ----------------------------------------------------------------------

struct SceneGenOpts {
    std::string kind = "desk";
    std::string config;
    std::string name = "scene.json";
    std::optional<int> ris_n, fas_m, interferers, emitters, samples;
    std::optional<double> fas_range, min_spacing, power_dbm, ris_x;
    std::string grid = "16x16";
};

json cmd_scene_gen(const Globals& g, const SceneGenOpts& o, std::vector<std::string>& outputs) {
    const fs::path out(g.out);
    if (o.kind == "desk") {
        DeskSpec d;
        if (!o.config.empty()) d = desk_spec_from_json(read_json(o.config));
        d.seed = g.seed;
        if (o.ris_n) d.ris_elements = *o.ris_n;
        if (o.fas_m) d.fas_antennas = *o.fas_m;
        if (o.interferers) d.interferers = *o.interferers;
        if (o.fas_range) d.fas_width_wl = *o.fas_range;
        if (o.min_spacing) d.min_spacing_wl = *o.min_spacing;
        if (o.power_dbm) d.power_dbm = *o.power_dbm;
        if (o.ris_x) d.ris_x = *o.ris_x;
        save_scene((out / o.name).string(), make_desk_scene(d));
        outputs.push_back(o.name);
        return {{"kind", "desk"}, {"desk", desk_spec_to_json(d)}};
    }
    SyntheticSpec spec;
    spec.seed = g.seed;
    if (o.emitters) spec.emitter_count = *o.emitters;
    const SyntheticScene syn = generate_synthetic_scene(spec);
    save_scene((out / o.name).string(), syn.scene);
    outputs.push_back(o.name);
    outputs.push_back(fs::path(o.name).stem().string() + ".points.bin");
    json em = json::array();
    for (const auto& e : syn.emitters)
        em.push_back({{"position", {e.position.x(), e.position.y(), e.position.z()}}, {"gain", e.gain}, {"phase", e.phase}});
    write_text(out / "emitters.json", em.dump(2) + "\n");
    outputs.push_back("emitters.json");
    json cfg = {{"kind", "synthetic"}, {"emitters", spec.emitter_count}, {"points_per_emitter", spec.points_per_emitter}};
    if (o.samples && *o.samples > 0) {
        const AngularGrid grid = parse_grid(o.grid);
        EmitterDatasetSpec ds;
        ds.samples = *o.samples;
        ds.n_lat = grid.n_lat;
        ds.n_lon = grid.n_lon;
        ds.seed = g.seed;
        save_spectrum_dataset((out / "dataset").string(), make_emitter_dataset(syn, ds));
        outputs.push_back("dataset/");
        cfg["samples"] = ds.samples;
        cfg["grid"] = o.grid;
    }
    return cfg;
}

// ---- render ----------------------------------------------------------------------------

json cmd_render(const Globals& g, const std::string& scene_path, const std::string& grid_s, std::optional<int> user,
                std::vector<std::string>& outputs) {
    const Scene s = load_scene(scene_path);
    const AngularGrid grid = parse_grid(grid_s);
    std::size_t u = 0;
    if (user) {
        if (*user < 0 || static_cast<std::size_t>(*user) >= s.users.size()) throw ArgumentError("--user out of range");
        u = static_cast<std::size_t>(*user);
    } else {
        while (u < s.users.size() && !s.users[u].desired) ++u;
    }
    const AngularSpectrum sp = render_scene(s, grid, u, g.threads);
    const fs::path out(g.out);
    write_spectrum_csv((out / "spectrum.csv").string(), sp.power);
    write_spectrum_pgm((out / "spectrum.pgm").string(), (out / "spectrum.pgm.txt").string(), sp.power);
    outputs = {"spectrum.csv", "spectrum.pgm", "spectrum.pgm.txt"};
    return {{"scene", scene_path}, {"grid", grid_s}, {"user", u}};
}

// ---- optimize ----------------------------------------------------------------------

struct OptimizeOpts {
    std::string scene;
    std::string ris_mode = "greedy";
    std::string baseline = "fao";
    double tol = 1e-4;
    int max_outer = 50;
    bool no_screen = false;
};

json cmd_optimize(const Globals& g, const OptimizeOpts& o, std::vector<std::string>& outputs) {
    const Scene s = load_scene(o.scene);
    FaoConfig cfg;
    cfg.mode = o.ris_mode == "ga" ? RisMode::ga : RisMode::greedy;
    cfg.tol = o.tol;
    cfg.max_outer = o.max_outer;
    cfg.screen_start = !o.no_screen;
    cfg.ga.threads = g.threads;
    const Method method = parse_method(o.baseline);
    const MethodResult r = run_method(s, method, g.seed, cfg);
    const fs::path out(g.out);
    write_run_log((out / "run_log.csv").string(), r.state);
    save_scene((out / "final_scene.json").string(), r.scene);
    outputs = {"run_log.csv", "final_scene.json"};
    std::cout << "rate_bps_hz=" << format_double(r.final.rate) << std::endl;
    return {{"scene", o.scene},     {"method", method_name(method)}, {"ris_mode", o.ris_mode}, {"tol", o.tol},
            {"max_outer", o.max_outer}, {"screen_start", cfg.screen_start}};
}

// ---- sweep ---------------------------------------------------------------------------

struct SweepOpts {
    std::string spec;
    std::string variable;
    std::vector<double> values;
    std::optional<int> repetitions;
    std::vector<std::string> methods;
    std::string scene_config;
    std::string ris_mode;
    bool reoptimize = false;
};

json cmd_sweep(const Globals& g, const SweepOpts& o, std::vector<std::string>& outputs) {
    SweepSpec spec;
    bool have_variable = false;
    if (!o.spec.empty()) {
        spec = sweep_spec_from_json(read_json(o.spec));
        have_variable = true;
    }
    if (!o.variable.empty()) {
        spec.variable = parse_sweep_variable(o.variable);
        have_variable = true;
    }
    if (!have_variable) throw ArgumentError("sweep: give --spec or --variable");
    if (!o.values.empty()) spec.values = o.values;
    if (o.repetitions) spec.repetitions = *o.repetitions;
    if (!o.methods.empty()) {
        spec.methods.clear();
        for (const auto& m : o.methods) spec.methods.push_back(parse_method(m));
    }
    if (!o.scene_config.empty()) spec.scene = desk_spec_from_json(read_json(o.scene_config), spec.scene);
    if (!o.ris_mode.empty()) spec.ris_mode = o.ris_mode == "ga" ? RisMode::ga : RisMode::greedy;
    if (o.reoptimize) spec.fixed_configuration = false;
    if (g.seed_given || o.spec.empty()) spec.first_seed = g.seed;
    validate_sweep(spec);
    const SweepResult r = run_sweep(spec, g.threads);
    const fs::path out(g.out);
    write_sweep_table((out / "sweep.csv").string(), spec, r);
    write_sweep_cells((out / "sweep_cells.csv").string(), spec, r);
    outputs = {"sweep.csv", "sweep_cells.csv"};
    return sweep_spec_to_json(spec);
}

// ---- srn -----------------------------------------------------------------------------

struct SrnSettings {
    TrainConfig train;
    SrnArchitecture arch;
    int knn = 6;
};

SrnSettings srn_settings(const std::string& path) {
    SrnSettings s;
    if (path.empty()) return s;
    const json j = read_json(path);
    detail::reject_unknown(j,
                           {"epochs", "learning_rate", "decay", "decay_every", "batch_size", "eta", "ssim_window", "knn",
                            "hidden_layers", "width", "feature_dim", "position_scale"},
                           "srn config");
    auto num = [&](const char* k, double& v) {
        if (j.contains(k)) v = detail::number(j[k], k);
    };
    auto integer = [&](const char* k, int& v) {
        if (j.contains(k)) v = detail::integer(j[k], k);
    };
    integer("epochs", s.train.epochs);
    num("learning_rate", s.train.learning_rate);
    num("decay", s.train.decay);
    integer("decay_every", s.train.decay_every);
    integer("batch_size", s.train.batch_size);
    num("eta", s.train.eta);
    integer("ssim_window", s.train.ssim_window);
    integer("knn", s.knn);
    integer("hidden_layers", s.arch.hidden_layers);
    integer("width", s.arch.width);
    integer("feature_dim", s.arch.feature_dim);
    num("position_scale", s.arch.position_scale);
    if (s.knn < 1) throw ValidationError("srn config: knn must be >= 1");
    return s;
}

json srn_settings_json(const SrnSettings& s) {
    return {{"epochs", s.train.epochs},        {"learning_rate", s.train.learning_rate},
            {"decay", s.train.decay},          {"decay_every", s.train.decay_every},
            {"batch_size", s.train.batch_size}, {"eta", s.train.eta},
            {"ssim_window", s.train.ssim_window}, {"knn", s.knn},
            {"hidden_layers", s.arch.hidden_layers}, {"width", s.arch.width},
            {"feature_dim", s.arch.feature_dim}, {"position_scale", s.arch.position_scale}};
}

std::vector<GaussianPrimitive> srn_primitives(const Scene& s, int knn) {
    if (!s.point_cloud.empty()) return init_primitives_from_pointcloud(s.point_cloud, knn);
    if (!s.environment.empty()) return s.environment;
    throw ValidationError("scene has neither a point cloud nor primitives");
}

struct SrnOpts {
    std::string dataset, scene, config, checkpoint;
    std::optional<int> epochs;
};

json cmd_srn_train(const Globals& g, const SrnOpts& o, std::vector<std::string>& outputs) {
    SrnSettings st = srn_settings(o.config);
    if (o.epochs) st.train.epochs = *o.epochs;
    st.train.seed = g.seed;
    st.train.threads = g.threads;
    const SpectrumDataset ds = load_spectrum_dataset(o.dataset);
    const Scene s = load_scene(o.scene);
    const AngularGrid grid(ds.n_lat, ds.n_lon);
    const SrnProblem p = make_srn_problem(srn_primitives(s, st.knn), s.rx_pose, grid, g.threads);
    SrnModel m(st.arch);
    m.init_random(g.seed);
    const auto hist = train_srn(m, p, ds, st.train);
    const fs::path out(g.out);
    save_srn_checkpoint((out / "checkpoint.bin").string(), m, grid);
    write_loss_csv((out / "loss.csv").string(), hist);
    const json cfg = srn_settings_json(st);
    write_text(out / "srn_config.json", cfg.dump(2) + "\n");
    outputs = {"checkpoint.bin", "loss.csv", "srn_config.json"};
    return {{"dataset", o.dataset}, {"scene", o.scene}, {"srn", cfg}};
}

json cmd_srn_eval(const Globals& g, const SrnOpts& o, std::vector<std::string>& outputs) {
    const SrnSettings st = srn_settings(o.config);
    const SpectrumDataset ds = load_spectrum_dataset(o.dataset);
    const SrnCheckpoint ck = load_srn_checkpoint(o.checkpoint);
    if (ck.grid.n_lat != ds.n_lat || ck.grid.n_lon != ds.n_lon)
        throw ValidationError("grid mismatch: checkpoint " + std::to_string(ck.grid.n_lat) + "x" +
                              std::to_string(ck.grid.n_lon) + ", dataset " + std::to_string(ds.n_lat) + "x" +
                              std::to_string(ds.n_lon));
    const Scene s = load_scene(o.scene);
    const SrnProblem p = make_srn_problem(srn_primitives(s, st.knn), s.rx_pose, ck.grid, g.threads);
    std::ostringstream csv;
    csv << "sample,mse,ssim,psnr\n";
    double mean_ssim = 0.0;
    for (std::size_t i : ds.test) {
        const AngularSpectrum pred = render_srn(ck.model, p, ds.samples[i].tx_position);
        const SpectrumMetrics mt = spectrum_metrics(ds.samples[i].power, pred.power, st.train.ssim_window);
        csv << i << ',' << format_double(mt.mse) << ',' << format_double(mt.ssim) << ',' << format_double(mt.psnr) << '\n';
        mean_ssim += mt.ssim;
    }
    if (!ds.test.empty()) std::cout << "mean_ssim=" << format_double(mean_ssim / static_cast<double>(ds.test.size())) << std::endl;
    write_text(fs::path(g.out) / "eval.csv", csv.str());
    outputs = {"eval.csv"};
    return {{"dataset", o.dataset}, {"scene", o.scene}, {"checkpoint", o.checkpoint}, {"knn", st.knn}};
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ArgumentError*>(&e)) return 2;
    if (dynamic_cast<const SchemaError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
        dynamic_cast<const FormatError*>(&e))
        return 3;
    if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const FeasibilityError*>(&e)) return 4;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian radiation-field modelling and RIS/FAS optimization"};
    app.require_subcommand(1);
    Globals g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output directory")->capture_default_str();

    auto* scene = app.add_subcommand("scene", "Scene files")->require_subcommand(1)->fallthrough();
    SceneGenOpts sg;
    auto* gen = scene->add_subcommand("gen", "Generate a desk or synthetic scene")->fallthrough();
    gen->add_option("--kind", sg.kind)->check(CLI::IsMember({"desk", "synthetic"}))->capture_default_str();
    gen->add_option("--config", sg.config, "Desk scene JSON");
    gen->add_option("--name", sg.name)->capture_default_str();
    gen->add_option("--ris-n", sg.ris_n);
    gen->add_option("--fas-m", sg.fas_m);
    gen->add_option("--fas-range", sg.fas_range, "W in wavelengths");
    gen->add_option("--min-spacing", sg.min_spacing, "D in wavelengths");
    gen->add_option("--power-dbm", sg.power_dbm);
    gen->add_option("--interferers", sg.interferers);
    gen->add_option("--ris-x", sg.ris_x, "RIS x position (m)");
    gen->add_option("--emitters", sg.emitters, "Virtual emitters (synthetic)");
    gen->add_option("--samples", sg.samples, "Spectrum samples to write to <out>/dataset (synthetic)");
    gen->add_option("--grid", sg.grid, "Dataset grid, LATxLON")->capture_default_str();

    std::string render_scene_path, render_grid = "16x16";
    std::optional<int> render_user;
    auto* render = app.add_subcommand("render", "Render the angular power spectrum of a scene")->fallthrough();
    render->add_option("scene", render_scene_path)->required();
    render->add_option("--grid", render_grid, "LATxLON")->capture_default_str();
    render->add_option("--user", render_user, "User index (default: the desired user)");

    OptimizeOpts oo;
    auto* optimize = app.add_subcommand("optimize", "Run fao or a baseline on a scene")->fallthrough();
    optimize->add_option("scene", oo.scene)->required();
    optimize->add_option("--ris-mode", oo.ris_mode)->check(CLI::IsMember({"greedy", "ga"}))->capture_default_str();
    optimize->add_option("--baseline", oo.baseline)
        ->check(CLI::IsMember({"fao", "wo_ris", "random_ris", "fpa", "gd"}))
        ->capture_default_str();
    optimize->add_option("--tol", oo.tol)->capture_default_str();
    optimize->add_option("--max-outer", oo.max_outer)->capture_default_str();
    optimize->add_flag("--no-screen", oo.no_screen, "Start from the scene layout without screening");

    SweepOpts so;
    auto* sweep = app.add_subcommand("sweep", "Mean rate per (value, method) over paired seeds")->fallthrough();
    sweep->add_option("--spec", so.spec, "Sweep spec JSON");
    sweep->add_option("--variable", so.variable)
        ->check(CLI::IsMember({"power_dbm", "ris_n", "ris_x_m", "fas_range_over_lambda"}));
    sweep->add_option("--values", so.values)->delimiter(',');
    sweep->add_option("--repetitions", so.repetitions);
    sweep->add_option("--methods", so.methods)->delimiter(',');
    sweep->add_option("--scene-config", so.scene_config, "Desk template JSON");
    sweep->add_option("--ris-mode", so.ris_mode)->check(CLI::IsMember({"greedy", "ga"}));
    sweep->add_flag("--reoptimize", so.reoptimize, "Power sweep: re-optimise at every power");

    SrnOpts sto, seo;
    auto* srn = app.add_subcommand("srn", "Scenario representation network")->require_subcommand(1)->fallthrough();
    auto* train = srn->add_subcommand("train", "Train on a spectrum dataset")->fallthrough();
    train->add_option("--dataset", sto.dataset)->required();
    train->add_option("--scene", sto.scene)->required();
    train->add_option("--config", sto.config, "SRN config JSON");
    train->add_option("--epochs", sto.epochs);
    auto* eval = srn->add_subcommand("eval", "Evaluate a checkpoint on the test split")->fallthrough();
    eval->add_option("--dataset", seo.dataset)->required();
    eval->add_option("--scene", seo.scene)->required();
    eval->add_option("--checkpoint", seo.checkpoint)->required();
    eval->add_option("--config", seo.config, "SRN config JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    g.seed_given = seed_opt->count() > 0;

    const auto t0 = std::chrono::steady_clock::now();
    try {
        fs::create_directories(g.out);
        std::vector<std::string> outputs;
        std::string command;
        json cfg;
        if (*gen) {
            command = "scene gen";
            cfg = cmd_scene_gen(g, sg, outputs);
        } else if (*render) {
            command = "render";
            cfg = cmd_render(g, render_scene_path, render_grid, render_user, outputs);
        } else if (*optimize) {
            command = "optimize";
            cfg = cmd_optimize(g, oo, outputs);
        } else if (*sweep) {
            command = "sweep";
            cfg = cmd_sweep(g, so, outputs);
        } else if (*train) {
            command = "srn train";
            cfg = cmd_srn_train(g, sto, outputs);
        } else if (*eval) {
            command = "srn eval";
            cfg = cmd_srn_eval(g, seo, outputs);
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_manifest(g, command, cfg, outputs, wall);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "rfgs: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "rfgs: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 0;
}
