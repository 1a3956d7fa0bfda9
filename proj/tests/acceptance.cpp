// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: `acceptance --criterion N` runs one criterion (1-10),
// without arguments all of them. One PASS/FAIL line per criterion; the exit
// status is nonzero when any selected criterion fails.

#include "oracles.hpp"
#include "rfgs/optimize.hpp"
#include "rfgs/splatting.hpp"
#include "rfgs/srn.hpp"
#include "rfgs/sweep.hpp"
#include "scenes.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace rfgs;
using namespace rfgs::test;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [failed]");
    }
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scene desk(std::uint64_t seed) {
    DeskSpec d;
    d.seed = seed;
    return make_desk_scene(d);
}

// ---- 1: FAS gradient --------------------------------------------------------------

void gradient_correctness(Verdict& v) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(2024);
    const double worst = fas_gradient_error(rng, 100);
    const double t = seconds_since(t0);
    v.require(worst <= 1e-5, "max rel error " + fmt(worst) + " <= 1e-5 over 100 scenes");
    v.require(t <= 10.0, "runtime " + fmt(t, 3) + " s <= 10 s");
}

// ---- 2: SRN backward ----------------------------------------------------------------

void srn_backward(Verdict& v) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = srn_gradient_check(20);
    const double t = seconds_since(t0);
    v.require(r.worst <= 1e-4, "max rel error " + fmt(r.worst) + " <= 1e-4 over 20 instances (" +
                                   std::to_string(r.kinks) + " kink-side stencils)");
    v.require(t <= 30.0, "runtime " + fmt(t, 3) + " s <= 30 s");
}

// ---- 3: splat vs analytic footprint ---------------------------------------------------

void splat_equivalence(Verdict& v) {
    Rng rng(3);
    const double single = single_primitive_splat_error(rng, 50, AngularGrid(16, 16));
    v.require(single <= 1e-9, "single-primitive rel error " + fmt(single) + " <= 1e-9");
    double worst_add = 0.0;
    std::size_t occupancy = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto a = separated_additivity(seed, AngularGrid(16, 16));
        worst_add = std::max(worst_add, a.rel_error);
        occupancy = std::max(occupancy, a.max_bin_occupancy);
    }
    v.require(occupancy <= 1, "test primitives occupy disjoint bins");
    v.require(worst_add <= 1e-9, "separated additivity rel error " + fmt(worst_add) + " <= 1e-9");
}

// ---- 4: monotone convergence ----------------------------------------------------------

void monotone_convergence(Verdict& v) {
    int fao_bad = 0, fas_bad = 0, greedy_bad = 0, ga_bad = 0, unconverged = 0, max_iter = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Scene s = desk(seed);
        const FieldObjective f(s);
        const auto st = fao(s);
        std::vector<double> j;
        for (const auto& e : st.history) j.push_back(e.objective);
        fao_bad += !non_decreasing(j);
        unconverged += !(st.converged && st.iterations <= 50);
        max_iter = std::max(max_iter, st.iterations);
        const auto ph = phases_from_indices(s.ris.phase_indices, s.ris.levels);
        fas_bad += !non_decreasing(optimize_fas(f, s.fas.positions, ph).trace);
        greedy_bad += !non_decreasing(optimize_ris_greedy(f, s.fas.positions, s.ris.phase_indices).trace);
        GaConfig ga;
        ga.seed = seed;
        ga_bad += !non_decreasing(optimize_ris_ga(f, s.fas.positions, s.ris.phase_indices, ga).trace);
    }
    v.require(fao_bad == 0, "fao traces non-decreasing (" + std::to_string(20 - fao_bad) + "/20)");
    v.require(fas_bad == 0, "optimize_fas traces non-decreasing (" + std::to_string(20 - fas_bad) + "/20)");
    v.require(greedy_bad == 0, "greedy traces non-decreasing (" + std::to_string(20 - greedy_bad) + "/20)");
    v.require(ga_bad == 0, "GA best fitness non-decreasing (" + std::to_string(20 - ga_bad) + "/20)");
    v.require(unconverged == 0, "fao converged within 50 outer iterations (" + std::to_string(20 - unconverged) +
                                    "/20, max " + std::to_string(max_iter) + ")");
}

// ---- 5: coherent combining -----------------------------------------------------------

void coherent_combining(Verdict& v) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> lx, ly;
    for (int n : {4, 8, 16, 32, 64}) {
        const Scene s = colinear_scene(n);
        const FieldObjective f(s);
        GreedyConfig cfg;
        cfg.tol = 0.0;
        const auto r = optimize_ris_greedy(f, s.fas.positions, s.ris.phase_indices, cfg);
        const double expected_random = f.basis(s.fas.positions).ris[0].col(0).squaredNorm();
        lx.push_back(std::log(n));
        ly.push_back(std::log(r.final.phi / expected_random));
    }
    const double k = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / k, my = std::accumulate(ly.begin(), ly.end(), 0.0) / k;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    const double slope = sxy / sxx, r2 = sxy * sxy / (sxx * syy);
    v.require(slope > 0.8, "log-log slope " + fmt(slope) + " > 0.8");
    v.require(r2 > 0.9, "R^2 " + fmt(r2) + " > 0.9");
    const auto gd = run_method(colinear_scene(64), Method::gd, 1);
    const double ratio = gd.phi_quantized / gd.phi_continuous;
    const double closed_form = std::pow(4.0 / pi * std::sin(pi / 4.0), 2);
    v.require(std::abs(ratio - closed_form) <= 0.05,
              "2-bit power ratio " + fmt(ratio) + " vs " + fmt(closed_form) + " +- 0.05");
    const double t = seconds_since(t0);
    v.require(t <= 60.0, "runtime " + fmt(t, 3) + " s <= 60 s");
}

// ---- 6: method ordering -------------------------------------------------------------

void method_ordering(Verdict& v) {
    const std::vector<Method> ms = {Method::fao, Method::gd, Method::random_ris, Method::fpa, Method::wo_ris};
    std::vector<double> mean(ms.size(), 0.0);
    int gd_ge_rnd = 0, fao_ge_gd = 0, fao_ge_fpa = 0, fao_ge_wo = 0;
    const int seeds = 20;
    for (int seed = 1; seed <= seeds; ++seed) {
        const Scene s = desk(static_cast<std::uint64_t>(seed));
        std::vector<double> r;
        for (Method m : ms) r.push_back(run_method(s, m, static_cast<std::uint64_t>(seed)).final.rate);
        for (std::size_t k = 0; k < ms.size(); ++k) mean[k] += r[k] / seeds;
        fao_ge_gd += r[0] >= r[1];
        gd_ge_rnd += r[1] >= r[2];
        fao_ge_fpa += r[0] >= r[3];
        fao_ge_wo += r[0] >= r[4];
    }
    std::string means;
    for (std::size_t k = 0; k < ms.size(); ++k) means += std::string(k ? " " : "") + method_name(ms[k]) + "=" + fmt(mean[k]);
    v.require(mean[0] >= mean[1] && mean[1] >= mean[2], "mean fao >= gd >= random_ris (" + means + ")");
    v.require(mean[0] >= mean[3] && mean[0] >= mean[4], "mean fao >= fpa, fao >= wo_ris");
    const int need = (8 * seeds + 9) / 10;
    v.require(fao_ge_gd >= need, "fao >= gd on " + std::to_string(fao_ge_gd) + "/20 seeds");
    v.require(gd_ge_rnd >= need, "gd >= random_ris on " + std::to_string(gd_ge_rnd) + "/20 seeds");
    v.require(fao_ge_fpa >= need, "fao >= fpa on " + std::to_string(fao_ge_fpa) + "/20 seeds");
    v.require(fao_ge_wo >= need, "fao >= wo_ris on " + std::to_string(fao_ge_wo) + "/20 seeds");

    SweepSpec n_sweep;
    n_sweep.variable = SweepVariable::ris_n;
    n_sweep.values = {16, 32, 64, 128};
    n_sweep.methods = {Method::wo_ris};
    n_sweep.repetitions = seeds;
    const auto rows = run_sweep(n_sweep).rows;
    double lo = rows[0].mean_rate, hi = lo, avg = 0.0;
    for (const auto& r : rows) {
        lo = std::min(lo, r.mean_rate);
        hi = std::max(hi, r.mean_rate);
        avg += r.mean_rate / static_cast<double>(rows.size());
    }
    v.require(hi - lo < 0.05 * avg, "wo_ris spread over N in {16,32,64,128}: " + fmt((hi - lo) / avg) + " of mean < 5%");
}

// ---- 7: trends ----------------------------------------------------------------------------

void trends(Verdict& v) {
    SweepSpec p;
    p.variable = SweepVariable::power_dbm;
    p.values = {-10, -5, 0, 5, 10, 15, 20};
    p.methods = {Method::fao};
    p.repetitions = 20;
    const auto pr = run_sweep(p);
    int monotone = 0;
    for (int r = 0; r < p.repetitions; ++r) {
        std::vector<double> rates;
        for (const auto& c : pr.cells)
            if (c.seed == p.first_seed + static_cast<std::uint64_t>(r)) rates.push_back(c.result.rate);
        monotone += non_decreasing(rates);
    }
    v.require(monotone == p.repetitions,
              "rate(P) non-decreasing over P in [-10, 20] dBm on " + std::to_string(monotone) + "/20 seeds");

    SweepSpec w;
    w.variable = SweepVariable::fas_range_over_lambda;
    w.values = {0.5, 1, 2, 4};
    w.methods = {Method::fao};
    w.repetitions = 20;
    const auto wr = run_sweep(w);
    std::vector<double> means;
    std::string shown;
    for (const auto& row : wr.rows) {
        means.push_back(row.mean_rate);
        shown += (shown.empty() ? "" : " / ") + fmt(row.mean_rate);
    }
    v.require(non_decreasing(means), "fao mean rate non-decreasing in W/lambda over {0.5,1,2,4}: " + shown);
}

// ---- 8: SRN desk training -------------------------------------------------------------------

void srn_training(Verdict& v) {
    const auto t0 = std::chrono::steady_clock::now();
    const int datasets = 8;
    double mean = 0.0, worst = 1.0;
    for (std::uint64_t seed = 1; seed <= static_cast<std::uint64_t>(datasets); ++seed) {
        SyntheticSpec spec;
        spec.seed = seed;
        const auto syn = generate_synthetic_scene(spec);
        EmitterDatasetSpec es;
        es.samples = 32;
        es.seed = seed;
        const SpectrumDataset data = make_emitter_dataset(syn, es);
        const SrnProblem prob = make_srn_problem(init_primitives_from_pointcloud(syn.scene.point_cloud, 6),
                                                 syn.scene.rx_pose, AngularGrid(es.n_lat, es.n_lon));
        SrnModel m;
        m.init_random(seed);
        TrainConfig cfg;
        cfg.seed = seed;
        train_srn(m, prob, data, cfg);
        double s = 0.0;
        for (std::size_t i : data.test)
            s += spectrum_metrics(data.samples[i].power, render_srn(m, prob, data.samples[i].tx_position).power).ssim;
        s /= static_cast<double>(data.test.size());
        mean += s / datasets;
        worst = std::min(worst, s);
    }
    const double t = seconds_since(t0);
    v.require(mean >= 0.85, "held-out mean SSIM " + fmt(mean) + " >= 0.85 over " + std::to_string(datasets) +
                                " datasets of 32 samples (lowest dataset " + fmt(worst) + ")");
    v.require(t <= 300.0, "runtime " + fmt(t, 3) + " s <= 300 s");
}

// ---- 9: render performance -------------------------------------------------------------------

void performance(Verdict& v) {
    Rng rng(9);
    RadiationField f;
    for (int i = 0; i < 1024; ++i) {
        auto g = random_primitive(rng, 5.0, 0.1, 0.6);
        if (g.center.norm() < 0.5) g.center *= 1.0 / g.center.norm();
        f.primitives.push_back(g);
    }
    const AngularGrid grid(16, 16);
    auto best_time = [&](int threads, AngularSpectrum* out) {
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 7; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            AngularSpectrum s = splat(f, Pose{}, grid, threads);
            best = std::min(best, seconds_since(t0));
            if (out) *out = std::move(s);
        }
        return best;
    };
    AngularSpectrum one, eight;
    const double t1 = best_time(1, &one);
    const double t8 = best_time(8, &eight);
    v.require(t1 <= 0.050, "single-thread render " + fmt(1e3 * t1, 3) + " ms <= 50 ms");
    v.require(one.field == eight.field, "8-worker output bit-identical");
    v.require(t1 / t8 >= 3.0, "8-worker speedup " + fmt(t1 / t8, 3) + "x >= 3x (hardware threads: " +
                                  std::to_string(std::thread::hardware_concurrency()) + ")");
}

// ---- 10: CLI determinism ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void determinism(Verdict& v) {
    const fs::path root = temp_dir("acceptance_det");
    const std::vector<std::string> cmds = {
        "scene gen --kind synthetic --samples 10 --grid 8x8 --name syn.json",
        "scene gen --kind desk --ris-n 16 --fas-m 9",
        "render {d}/scene.json --grid 16x16",
        "optimize {d}/scene.json --ris-mode greedy",
        "optimize {d}/scene.json --ris-mode ga",
        "optimize {d}/scene.json --baseline gd",
        "optimize {d}/scene.json --baseline random_ris",
        "sweep --variable power_dbm --values=-10,0,10 --repetitions 2 --methods fao,fpa",
        "sweep --variable fas_range_over_lambda --values 0.5,1 --repetitions 2 --methods fao",
        "srn train --dataset {d}/dataset --scene {d}/syn.json --epochs 5",
        "srn eval --dataset {d}/dataset --scene {d}/syn.json --checkpoint {d}/checkpoint.bin",
    };
    bool all_ok = true;
    for (const std::string run : {"a", "b"}) {
        const fs::path d = root / run;
        fs::create_directories(d);
        for (std::size_t i = 0; i < cmds.size(); ++i) {
            std::string c = cmds[i];
            for (auto k = c.find("{d}"); k != std::string::npos; k = c.find("{d}")) c.replace(k, 3, d.string());
            const std::string line = std::string(RFGS_CLI_PATH) + " --seed 5 --threads 2 --out " + d.string() + " " + c +
                                     " >" + (root / "log.txt").string() + " 2>&1";
            if (std::system(line.c_str()) != 0) {
                all_ok = false;
                v.require(false, "command failed: " + c + ": " + slurp(root / "log.txt"));
            }
            // Keep the per-command stdout so printed rates are compared as well.
            fs::copy_file(root / "log.txt", d / ("stdout_" + std::to_string(i) + ".txt"), fs::copy_options::overwrite_existing);
        }
    }
    int csv = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        const fs::path twin = root / "b" / fs::relative(e.path(), root / "a");
        if (!fs::exists(twin) || slurp(e.path()) != slurp(twin)) {
            ++differing;
            v.detail << (v.detail.tellp() > 0 ? "; " : "") << "differs: " << fs::relative(e.path(), root / "a").string();
        }
        csv += e.path().extension() == ".csv";
    }
    v.require(all_ok, std::to_string(cmds.size()) + " seeded commands ran twice");
    v.require(differing == 0 && csv >= 8, std::to_string(csv) + " CSV files (and every other output) byte-identical");
    fs::remove_all(root);
}

struct Criterion {
    const char* name;
    std::function<void(Verdict&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    app.add_option("--criterion", only, "Criterion number (1-10); all when omitted")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all = {
        {"gradient correctness", gradient_correctness},
        {"SRN backward correctness", srn_backward},
        {"splat-analytic equivalence", splat_equivalence},
        {"monotone convergence", monotone_convergence},
        {"coherent-combining law", coherent_combining},
        {"ordering of methods", method_ordering},
        {"trend checks", trends},
        {"SRN desk training", srn_training},
        {"performance target", performance},
        {"determinism", determinism},
    };
    bool ok = true;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (only && static_cast<int>(i) + 1 != only) continue;
        Verdict v;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            all[i].run(v);
        } catch (const std::exception& e) {
            v.require(false, std::string("exception: ") + e.what());
        }
        std::cout << "criterion " << i + 1 << " [" << all[i].name << "]: " << (v.pass ? "PASS" : "FAIL") << " ("
                  << v.detail.str() << ") " << fmt(seconds_since(t0), 3) << " s" << std::endl;
        ok = ok && v.pass;
    }
    return ok ? 0 : 1;
}
