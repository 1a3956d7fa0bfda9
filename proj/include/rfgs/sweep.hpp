// SPDX-License-Identifier: Apache-2.0
//
// Parameter sweeps over desk scenes: one template, one overridden field per
// sweep point, seeds paired across values and methods.

#pragma once

#include "rfgs/optimize.hpp"
#include "rfgs/scene.hpp"
#include <json.hpp>

#include <fstream>
#include <set>

namespace rfgs {

enum class SweepVariable { power_dbm, ris_n, ris_x_m, fas_range_over_lambda };

inline SweepVariable parse_sweep_variable(const std::string& s) {
    if (s == "power_dbm") return SweepVariable::power_dbm;
    if (s == "ris_n") return SweepVariable::ris_n;
    if (s == "ris_x_m") return SweepVariable::ris_x_m;
    if (s == "fas_range_over_lambda") return SweepVariable::fas_range_over_lambda;
    throw ArgumentError("unknown sweep variable '" + s +
                        "' (expected power_dbm, ris_n, ris_x_m or fas_range_over_lambda)");
}

inline const char* sweep_variable_name(SweepVariable v) {
    switch (v) {
        case SweepVariable::power_dbm: return "power_dbm";
        case SweepVariable::ris_n: return "ris_n";
        case SweepVariable::ris_x_m: return "ris_x_m";
        case SweepVariable::fas_range_over_lambda: return "fas_range_over_lambda";
    }
    return "?";
}

struct SweepSpec {
    SweepVariable variable = SweepVariable::power_dbm;
    std::vector<double> values;
    int repetitions = 20;
    std::uint64_t first_seed = 1;  // seeds first_seed .. first_seed + repetitions - 1
    std::vector<Method> methods{Method::fao, Method::gd, Method::random_ris, Method::fpa, Method::wo_ris};
    DeskSpec scene;  // template
    RisMode ris_mode = RisMode::greedy;
    // power_dbm only: optimise once at the template power and evaluate the
    // optimised configuration at every swept power (false re-optimises per value).
    bool fixed_configuration = true;
};

inline void validate_sweep(const SweepSpec& s) {
    if (s.values.empty()) throw ValidationError("sweep: values must not be empty");
    if (s.repetitions < 1) throw ValidationError("sweep: repetitions must be >= 1");
    if (s.methods.empty()) throw ValidationError("sweep: at least one method is required");
    for (double v : s.values) {
        if (!std::isfinite(v)) throw ValidationError("sweep: non-finite value");
        if (s.variable == SweepVariable::ris_n && (v < 1.0 || v != std::floor(v)))
            throw ValidationError("sweep: ris_n values must be positive integers");
        if (s.variable == SweepVariable::fas_range_over_lambda && !(v > 0.0))
            throw ValidationError("sweep: fas_range_over_lambda values must be positive");
    }
}

/// Spacing (in wavelengths) shared by every point of a W sweep: no larger
/// than the template's and small enough that a uniform grid of M antennas at
/// 80% of its pitch fits the smallest swept region.
inline double shared_spacing_wl(const DeskSpec& tmpl, const std::vector<double>& widths_wl) {
    const double side = std::ceil(std::sqrt(static_cast<double>(tmpl.fas_antennas)));
    double d = tmpl.min_spacing_wl;
    for (double w : widths_wl) d = std::min(d, 0.8 * w / side);
    return d;
}

/// Desk parameters of one sweep point.
inline DeskSpec sweep_point(const SweepSpec& s, double value, std::uint64_t seed) {
    DeskSpec d = s.scene;
    d.seed = seed;
    switch (s.variable) {
        case SweepVariable::power_dbm:
            if (!s.fixed_configuration) d.power_dbm = value;
            break;
        case SweepVariable::ris_n: d.ris_elements = static_cast<int>(value); break;
        case SweepVariable::ris_x_m: d.ris_x = value; break;
        case SweepVariable::fas_range_over_lambda:
            d.fas_width_wl = value;
            d.min_spacing_wl = shared_spacing_wl(s.scene, s.values);
            break;
    }
    return d;
}

struct SweepCell {
    double value = 0.0;
    Method method = Method::fao;
    std::uint64_t seed = 0;
    Evaluation result;
    int iterations = 0;
};

struct SweepRow {
    double value = 0.0;
    Method method = Method::fao;
    double mean_rate = 0.0;
    int n_seeds = 0;
};

struct SweepResult {
    std::vector<SweepCell> cells;  // ordered value, method, seed
    std::vector<SweepRow> rows;    // ordered value, method
};

inline FaoConfig sweep_fao_config(const SweepSpec& s) {
    FaoConfig c;
    c.mode = s.ris_mode;
    return c;
}

/// Runs every (value, method, seed) cell. Cells are independent and are
/// spread over `threads` workers; the merged tables do not depend on it.
inline SweepResult run_sweep(const SweepSpec& spec, int threads = 1) {
    validate_sweep(spec);
    const std::size_t nv = spec.values.size(), nm = spec.methods.size();
    const auto nr = static_cast<std::size_t>(spec.repetitions);
    const FaoConfig cfg = sweep_fao_config(spec);
    SweepResult out;
    out.cells.resize(nv * nm * nr);
    auto cell_at = [&](std::size_t v, std::size_t m, std::size_t r) -> SweepCell& {
        return out.cells[(v * nm + m) * nr + r];
    };
    const bool fixed = spec.variable == SweepVariable::power_dbm && spec.fixed_configuration;
    if (fixed) {
        parallel_chunks(nm * nr, threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                const std::size_t m = k / nr, r = k % nr;
                const std::uint64_t seed = spec.first_seed + r;
                const MethodResult res = run_method(make_desk_scene(sweep_point(spec, 0.0, seed)), spec.methods[m], seed, cfg);
                for (std::size_t v = 0; v < nv; ++v) {
                    Scene s = res.scene;
                    for (auto& u : s.users) u.power_dbm = spec.values[v];
                    cell_at(v, m, r) = {spec.values[v], spec.methods[m], seed,
                                        evaluate_scene(s, s.fas.positions, s.ris.phase_indices),
                                        res.state.iterations};
                }
            }
        });
    } else {
        parallel_chunks(out.cells.size(), threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                const std::size_t v = k / (nm * nr), m = (k / nr) % nm, r = k % nr;
                const std::uint64_t seed = spec.first_seed + r;
                const MethodResult res =
                    run_method(make_desk_scene(sweep_point(spec, spec.values[v], seed)), spec.methods[m], seed, cfg);
                out.cells[k] = {spec.values[v], spec.methods[m], seed, res.final, res.state.iterations};
            }
        });
    }
    for (std::size_t v = 0; v < nv; ++v)
        for (std::size_t m = 0; m < nm; ++m) {
            double sum = 0.0;
            for (std::size_t r = 0; r < nr; ++r) sum += cell_at(v, m, r).result.rate;
            out.rows.push_back({spec.values[v], spec.methods[m], sum / static_cast<double>(nr), spec.repetitions});
        }
    return out;
}

/// variable,value,method,mean_rate,n_seeds
inline void write_sweep_table(const std::string& path, const SweepSpec& spec, const SweepResult& r) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "variable,value,method,mean_rate,n_seeds\n";
    for (const auto& row : r.rows)
        f << sweep_variable_name(spec.variable) << ',' << format_double(row.value) << ',' << method_name(row.method) << ','
          << format_double(row.mean_rate) << ',' << row.n_seeds << '\n';
}

/// variable,value,method,seed,phi,phi_int,sinr,rate,iterations
inline void write_sweep_cells(const std::string& path, const SweepSpec& spec, const SweepResult& r) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "variable,value,method,seed,phi,phi_int,sinr,rate,iterations\n";
    for (const auto& c : r.cells)
        f << sweep_variable_name(spec.variable) << ',' << format_double(c.value) << ',' << method_name(c.method) << ','
          << c.seed << ',' << format_double(c.result.phi) << ',' << format_double(c.result.phi_int) << ','
          << format_double(c.result.sinr) << ',' << format_double(c.result.rate) << ',' << c.iterations << '\n';
}

// ---- JSON ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw SchemaError("'" + where + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw SchemaError("unknown key '" + it.key() + "' in " + where);
}

inline int positive_int(const nlohmann::json& j, const std::string& path) {
    const int v = integer(j, path);
    if (v < 0) throw SchemaError("'" + path + "' must be non-negative");
    return v;
}

}  // namespace detail

/// Keys mirror DeskSpec; lengths ending in `_over_lambda` are in wavelengths.
inline DeskSpec desk_spec_from_json(const nlohmann::json& j, DeskSpec d = {}) {
    using namespace detail;
    reject_unknown(j,
                   {"ris_elements", "fas_antennas", "levels", "wavelength_m", "fas_range_over_lambda",
                    "min_spacing_over_lambda", "power_dbm", "noise_dbm", "interferers", "hotspots",
                    "hotspot_extent_over_lambda", "ris_x_m", "ris_reflectivity", "seed"},
                   "scene");
    if (j.contains("ris_elements")) d.ris_elements = positive_int(j["ris_elements"], "ris_elements");
    if (j.contains("fas_antennas")) d.fas_antennas = positive_int(j["fas_antennas"], "fas_antennas");
    if (j.contains("levels")) d.levels = positive_int(j["levels"], "levels");
    if (j.contains("wavelength_m")) d.wavelength = number(j["wavelength_m"], "wavelength_m");
    if (j.contains("fas_range_over_lambda")) d.fas_width_wl = number(j["fas_range_over_lambda"], "fas_range_over_lambda");
    if (j.contains("min_spacing_over_lambda"))
        d.min_spacing_wl = number(j["min_spacing_over_lambda"], "min_spacing_over_lambda");
    if (j.contains("power_dbm")) d.power_dbm = number(j["power_dbm"], "power_dbm");
    if (j.contains("noise_dbm")) d.noise_dbm = number(j["noise_dbm"], "noise_dbm");
    if (j.contains("interferers")) d.interferers = positive_int(j["interferers"], "interferers");
    if (j.contains("hotspots")) d.hotspots = positive_int(j["hotspots"], "hotspots");
    if (j.contains("hotspot_extent_over_lambda"))
        d.hotspot_extent_wl = number(j["hotspot_extent_over_lambda"], "hotspot_extent_over_lambda");
    if (j.contains("ris_x_m")) d.ris_x = number(j["ris_x_m"], "ris_x_m");
    if (j.contains("ris_reflectivity")) d.ris_reflectivity = number(j["ris_reflectivity"], "ris_reflectivity");
    if (j.contains("seed")) d.seed = static_cast<std::uint64_t>(positive_int(j["seed"], "seed"));
    return d;
}

inline nlohmann::json desk_spec_to_json(const DeskSpec& d) {
    return {{"ris_elements", d.ris_elements},
            {"fas_antennas", d.fas_antennas},
            {"levels", d.levels},
            {"wavelength_m", d.wavelength},
            {"fas_range_over_lambda", d.fas_width_wl},
            {"min_spacing_over_lambda", d.min_spacing_wl},
            {"power_dbm", d.power_dbm},
            {"noise_dbm", d.noise_dbm},
            {"interferers", d.interferers},
            {"hotspots", d.hotspots},
            {"hotspot_extent_over_lambda", d.hotspot_extent_wl},
            {"ris_x_m", d.ris_x},
            {"ris_reflectivity", d.ris_reflectivity},
            {"seed", d.seed}};
}

inline SweepSpec sweep_spec_from_json(const nlohmann::json& j) {
    using namespace detail;
    reject_unknown(j, {"variable", "values", "repetitions", "first_seed", "methods", "scene", "ris_mode", "fixed_configuration"},
                   "sweep spec");
    SweepSpec s;
    const json& var = require(j, "variable", "");
    if (!var.is_string()) throw SchemaError("'variable' must be a string");
    try {
        s.variable = parse_sweep_variable(var.get<std::string>());
    } catch (const ArgumentError& e) {
        throw SchemaError(e.what());
    }
    const json& vals = require(j, "values", "");
    if (!vals.is_array()) throw SchemaError("'values' must be an array");
    for (std::size_t i = 0; i < vals.size(); ++i) s.values.push_back(number(vals[i], "values[" + std::to_string(i) + "]"));
    if (j.contains("repetitions")) s.repetitions = integer(j["repetitions"], "repetitions");
    if (j.contains("first_seed")) s.first_seed = static_cast<std::uint64_t>(positive_int(j["first_seed"], "first_seed"));
    if (j.contains("methods")) {
        const json& ms = j["methods"];
        if (!ms.is_array()) throw SchemaError("'methods' must be an array");
        s.methods.clear();
        for (const auto& m : ms) {
            if (!m.is_string()) throw SchemaError("'methods' entries must be strings");
            try {
                s.methods.push_back(parse_method(m.get<std::string>()));
            } catch (const ArgumentError& e) {
                throw SchemaError(e.what());
            }
        }
    }
    if (j.contains("scene")) s.scene = desk_spec_from_json(j["scene"]);
    if (j.contains("ris_mode")) {
        const json& m = j["ris_mode"];
        if (!m.is_string() || (m != "greedy" && m != "ga")) throw SchemaError("'ris_mode' must be \"greedy\" or \"ga\"");
        s.ris_mode = m == "ga" ? RisMode::ga : RisMode::greedy;
    }
    if (j.contains("fixed_configuration")) {
        if (!j["fixed_configuration"].is_boolean()) throw SchemaError("'fixed_configuration' must be a boolean");
        s.fixed_configuration = j["fixed_configuration"].get<bool>();
    }
    validate_sweep(s);
    return s;
}

inline nlohmann::json sweep_spec_to_json(const SweepSpec& s) {
    nlohmann::json methods = nlohmann::json::array();
    for (Method m : s.methods) methods.push_back(method_name(m));
    return {{"variable", sweep_variable_name(s.variable)},
            {"values", s.values},
            {"repetitions", s.repetitions},
            {"first_seed", s.first_seed},
            {"methods", methods},
            {"scene", desk_spec_to_json(s.scene)},
            {"ris_mode", s.ris_mode == RisMode::ga ? "ga" : "greedy"},
            {"fixed_configuration", s.fixed_configuration}};
}

}  // namespace rfgs
