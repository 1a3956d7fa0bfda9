// SPDX-License-Identifier: Apache-2.0
//
// rfgs: Gaussian radiation-field modelling and RIS/fluid-antenna optimization
// ------------------------------------------------------------------------
//
// Field-driven joint optimization of fluid-antenna positions and RIS phases.
//
// The objective J is the mean desired power Phi when the scene has no
// interferers and the SINR Gamma = P Phi / (P Phi_int + sigma^2) otherwise;
// rate = log2(1 + Gamma) is monotone in both. Every update below is
// safeguarded so the recorded J never decreases.

#pragma once

#include "rfgs/core.hpp"
#include "rfgs/field.hpp"
#include "rfgs/primitive.hpp"
#include "rfgs/scene.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace rfgs {

struct Codebook {
    int levels = 4;

    double value(int l) const { return two_pi * l / levels; }

    /// Index of `phase` in the codebook, or nullopt when it is not a codebook
    /// value (1e-9 rad tolerance, modulo 2 pi).
    std::optional<int> index_of(double phase) const {
        const double w = wrap_phase(phase);
        for (int l = 0; l < levels; ++l) {
            const double d = std::abs(w - value(l));
            if (d < 1e-9 || std::abs(d - two_pi) < 1e-9) return l;
        }
        return std::nullopt;
    }

    int nearest(double phase) const {
        const double w = wrap_phase(phase);
        const int l = static_cast<int>(std::lround(w / (two_pi / levels)));
        return l % levels;
    }
};

inline std::vector<double> phases_from_indices(const std::vector<int>& idx, int levels) {
    std::vector<double> out(idx.size());
    for (std::size_t n = 0; n < idx.size(); ++n) out[n] = two_pi * idx[n] / levels;
    return out;
}

struct Evaluation {
    double phi = 0.0;
    double phi_int = 0.0;
    double sinr = 0.0;
    double rate = 0.0;
    double objective = 0.0;
    std::vector<double> phi_user;  // per user, indexed like Scene::users
};

inline double sinr_field(double phi, double phi_int, double power_w, double noise_w) {
    if (!(power_w > 0.0) || !(noise_w > 0.0)) throw ArgumentError("sinr_field: power and noise must be positive");
    return power_w * phi / (power_w * phi_int + noise_w);
}

inline double rate_from_sinr(double sinr) { return std::log2(1.0 + sinr); }

inline bool positions_feasible(const std::vector<Vec2>& pos, double width, double spacing) {
    for (const auto& p : pos)
        if (!p.allFinite() || p.x() < 0.0 || p.y() < 0.0 || p.x() > width || p.y() > width) return false;
    for (std::size_t a = 0; a < pos.size(); ++a)
        for (std::size_t b = a + 1; b < pos.size(); ++b)
            if (!spacing_ok(pos[a], pos[b], spacing)) return false;
    return true;
}

/// Clamp into [0, W]^2, then rounds of pairwise push-apart (each violating
/// pair moved symmetrically along its connecting line to distance D, about
/// its midpoint shifted inwards just enough for both to stay in the region;
/// coincident pairs split along u, first antenna towards -u) followed by
/// re-clamping, until feasible or 100 rounds.
inline std::vector<Vec2> project_feasible(std::vector<Vec2> pos, double width, double spacing) {
    auto clamp_all = [&] {
        for (auto& p : pos) {
            if (!p.allFinite()) throw FeasibilityError("project_feasible: non-finite position");
            p.x() = std::clamp(p.x(), 0.0, width);
            p.y() = std::clamp(p.y(), 0.0, width);
        }
    };
    clamp_all();
    for (int round = 0; round < 100; ++round) {
        if (positions_feasible(pos, width, spacing)) return pos;
        for (std::size_t a = 0; a < pos.size(); ++a)
            for (std::size_t b = a + 1; b < pos.size(); ++b) {
                const Vec2 d = pos[b] - pos[a];
                const double dist = d.norm();
                if (spacing_ok(pos[a], pos[b], spacing)) continue;
                const Vec2 dir = dist > 0.0 ? Vec2(d / dist) : Vec2(1.0, 0.0);
                Vec2 mid = 0.5 * (pos[a] + pos[b]);
                for (int c = 0; c < 2; ++c) {
                    const double half = std::min(0.5 * spacing * std::abs(dir[c]), 0.5 * width);
                    mid[c] = std::clamp(mid[c], half, width - half);
                }
                pos[a] = mid - 0.5 * spacing * dir;
                pos[b] = mid + 0.5 * spacing * dir;
            }
        clamp_all();
    }
    if (positions_feasible(pos, width, spacing)) return pos;
    throw FeasibilityError("project_feasible: no feasible layout found after 100 rounds (M = " +
                           std::to_string(pos.size()) + ", W = " + format_double(width) + ", D = " +
                           format_double(spacing) + ")");
}

/// Precomputed per-user field model of a scene. E_u(x) = env_u(x) +
/// sum_n b_{u,n}(x) e^{j theta_n}, where b_{u,n} is the RIS primitive of
/// element n with the element phase removed.
class FieldObjective {
public:
    explicit FieldObjective(const Scene& s, const std::vector<cplx>* env_coeffs = nullptr)
        : fas_(s.fas), wavelength_(s.wavelength), desired_(s.desired_index()), levels_(s.ris.levels) {
        validate_scene(s);
        power_w_ = s.users[desired_].power_watts();
        noise_w_ = s.noise_watts();
        const Vec3 ref = ris_reference_point(s);
        const Mat3 cov = ris_covariance(s);
        const Mat3 prec = checked_precision(cov, "RIS covariance");
        const auto env_all = apply_coefficients(s.environment, env_coeffs);
        for (std::size_t u = 0; u < s.users.size(); ++u) {
            std::vector<GaussianPrimitive> env;
            for (const auto& g : env_all)
                if (g.user_tag == static_cast<int>(u)) env.push_back(g);
            env_.push_back(prepare_all(env));
            const auto geo = ris_geometric_phases(s.ris, s.users[u].position, ref, s.wavelength);
            std::vector<PreparedPrimitive> ris(s.ris.size());
            for (std::size_t n = 0; n < s.ris.size(); ++n)
                ris[n] = {s.ris.element_positions[n], prec,
                          std::polar(s.users[u].ris_gain * s.ris.element_amplitudes[n], geo[n])};
            ris_.push_back(std::move(ris));
        }
    }

    std::size_t users() const { return env_.size(); }
    std::size_t desired() const { return desired_; }
    std::size_t ris_size() const { return ris_.empty() ? 0 : ris_[0].size(); }
    int levels() const { return levels_; }
    bool has_interference() const { return users() > 1; }
    double power_w() const { return power_w_; }
    double noise_w() const { return noise_w_; }
    void set_power_w(double p) { power_w_ = p; }
    const FasRegion& fas() const { return fas_; }
    double wavelength() const { return wavelength_; }

    void check_feasible(const std::vector<Vec2>& pos) const {
        if (pos.empty()) throw ArgumentError("FAS layout is empty");
        if (!positions_feasible(pos, fas_.width, fas_.min_spacing))
            throw ArgumentError("FAS layout violates the region or the minimum spacing");
    }

    cplx field(std::size_t u, const Vec3& x, const std::vector<double>& phases) const {
        cplx e = eval_prepared(env_[u], x);
        for (std::size_t n = 0; n < ris_[u].size(); ++n) e += ris_[u][n].eval(x) * std::polar(1.0, phases[n]);
        return e;
    }

    cplx field(std::size_t u, const Vec3& x, const std::vector<double>& phases, Eigen::Vector3cd& grad) const {
        cplx e = eval_prepared(env_[u], x, grad);
        Eigen::Vector3cd g;
        for (std::size_t n = 0; n < ris_[u].size(); ++n) {
            const cplx rot = std::polar(1.0, phases[n]);
            e += ris_[u][n].eval(x, g) * rot;
            grad += g * rot;
        }
        return e;
    }

    /// Per-antenna samples: env[u][m] and ris[u](n, m).
    struct Basis {
        std::vector<Eigen::VectorXcd> env;
        std::vector<Eigen::MatrixXcd> ris;
    };

    Basis basis(const std::vector<Vec2>& pos) const {
        Basis b;
        const auto m = static_cast<Eigen::Index>(pos.size());
        for (std::size_t u = 0; u < users(); ++u) {
            Eigen::VectorXcd e(m);
            Eigen::MatrixXcd r(static_cast<Eigen::Index>(ris_size()), m);
            for (Eigen::Index k = 0; k < m; ++k) {
                const Vec3 x = fas_.to_world(pos[static_cast<std::size_t>(k)]);
                e[k] = eval_prepared(env_[u], x);
                for (std::size_t n = 0; n < ris_size(); ++n) r(static_cast<Eigen::Index>(n), k) = ris_[u][n].eval(x);
            }
            b.env.push_back(std::move(e));
            b.ris.push_back(std::move(r));
        }
        return b;
    }

    /// Per-user antenna fields from a basis and a phase vector.
    std::vector<Eigen::VectorXcd> fields(const Basis& b, const std::vector<double>& phases) const {
        Eigen::VectorXcd rot(static_cast<Eigen::Index>(phases.size()));
        for (std::size_t n = 0; n < phases.size(); ++n) rot[static_cast<Eigen::Index>(n)] = std::polar(1.0, phases[n]);
        std::vector<Eigen::VectorXcd> out;
        for (std::size_t u = 0; u < users(); ++u) out.push_back(b.env[u] + b.ris[u].transpose() * rot);
        return out;
    }

    Evaluation evaluate_fields(const std::vector<Eigen::VectorXcd>& e) const {
        Evaluation ev;
        for (std::size_t u = 0; u < users(); ++u) {
            const double p = e[u].squaredNorm() / static_cast<double>(e[u].size());
            ev.phi_user.push_back(p);
            if (u == desired_)
                ev.phi = p;
            else
                ev.phi_int += p;
        }
        ev.sinr = sinr_field(ev.phi, ev.phi_int, power_w_, noise_w_);
        ev.rate = rate_from_sinr(ev.sinr);
        ev.objective = has_interference() ? ev.sinr : ev.phi;
        return ev;
    }

    Evaluation evaluate(const std::vector<Vec2>& pos, const std::vector<double>& phases) const {
        check_phases(phases);
        std::vector<Eigen::VectorXcd> e(users(), Eigen::VectorXcd(static_cast<Eigen::Index>(pos.size())));
        for (std::size_t u = 0; u < users(); ++u)
            for (std::size_t m = 0; m < pos.size(); ++m)
                e[u][static_cast<Eigen::Index>(m)] = field(u, fas_.to_world(pos[m]), phases);
        return evaluate_fields(e);
    }

    /// d(objective)/d(u, v) for every antenna, plus the matching
    /// d(Phi)/d(u, v) in `phi_grad` when requested.
    std::vector<Vec2> objective_gradient(const std::vector<Vec2>& pos, const std::vector<double>& phases,
                                         Evaluation* ev_out = nullptr, std::vector<Vec2>* phi_grad = nullptr) const {
        check_phases(phases);
        const std::size_t m = pos.size();
        const double inv_m = 1.0 / static_cast<double>(m);
        const Vec3 eu = fas_.u_axis(), evv = fas_.v_axis();
        std::vector<Vec2> g_phi(m, Vec2::Zero()), g_int(m, Vec2::Zero());
        std::vector<Eigen::VectorXcd> e(users(), Eigen::VectorXcd(static_cast<Eigen::Index>(m)));
        Eigen::Vector3cd de;
        for (std::size_t u = 0; u < users(); ++u)
            for (std::size_t k = 0; k < m; ++k) {
                const cplx v = field(u, fas_.to_world(pos[k]), phases, de);
                e[u][static_cast<Eigen::Index>(k)] = v;
                Vec3 gp;
                for (int c = 0; c < 3; ++c) gp[c] = 2.0 * inv_m * (std::conj(v) * de[c]).real();
                const Vec2 g2(gp.dot(eu), gp.dot(evv));
                (u == desired_ ? g_phi : g_int)[k] += g2;
            }
        const Evaluation ev = evaluate_fields(e);
        if (ev_out) *ev_out = ev;
        if (phi_grad) *phi_grad = g_phi;
        if (!has_interference()) return g_phi;
        const double den = power_w_ * ev.phi_int + noise_w_;
        std::vector<Vec2> g(m);
        for (std::size_t k = 0; k < m; ++k)
            g[k] = power_w_ * g_phi[k] / den - power_w_ * ev.phi * power_w_ * g_int[k] / (den * den);
        return g;
    }

private:
    void check_phases(const std::vector<double>& phases) const {
        if (phases.size() != ris_size()) throw ArgumentError("phase vector length does not match the RIS size");
    }

    FasRegion fas_;
    double wavelength_;
    std::size_t desired_;
    int levels_;
    double power_w_ = 1.0;
    double noise_w_ = 1.0;
    std::vector<std::vector<PreparedPrimitive>> env_;
    std::vector<std::vector<PreparedPrimitive>> ris_;
};

// ---- scene-level helpers ---------------------------------------------------------------

inline Evaluation evaluate_scene(const Scene& s, const std::vector<Vec2>& pos, const std::vector<int>& idx) {
    FieldObjective f(s);
    f.check_feasible(pos);
    return f.evaluate(pos, phases_from_indices(idx, s.ris.levels));
}

inline double phi(const Scene& s, const std::vector<Vec2>& pos, const std::vector<int>& idx) {
    return evaluate_scene(s, pos, idx).phi;
}

inline double phi_int(const Scene& s, const std::vector<Vec2>& pos, const std::vector<int>& idx) {
    return evaluate_scene(s, pos, idx).phi_int;
}

/// d(Phi)/d(u, v) of antenna m.
inline Vec2 fas_gradient(const Scene& s, const std::vector<Vec2>& pos, const std::vector<int>& idx, std::size_t m) {
    FieldObjective f(s);
    f.check_feasible(pos);
    if (m >= pos.size()) throw ArgumentError("fas_gradient: antenna index out of range");
    std::vector<Vec2> g_phi;
    f.objective_gradient(pos, phases_from_indices(idx, s.ris.levels), nullptr, &g_phi);
    return g_phi[m];
}

// ---- FAS position optimization -----------------------------------------------------------

struct ScaConfig {
    double step = 0.25;        // initial step as a fraction of W, in (0, 1]
    double backtrack = 0.5;
    double min_step_wl = 1e-6; // stop once the step falls below this many wavelengths
    int max_iter = 100;        // Q_xi
    double tol = 1e-4;         // relative change threshold eps_xi
};

struct FasResult {
    std::vector<Vec2> positions;
    std::vector<double> trace;      // objective, index 0 = start
    std::vector<double> phi_trace;
    int iterations = 0;
    Evaluation final;
};

inline double relative_change(double a, double b) {
    const double scale = std::max(std::abs(a), 1e-300);
    return std::abs(b - a) / scale;
}

/// Normalised projected gradient ascent: every antenna moves by step*W times
/// its gradient divided by the largest per-antenna gradient norm, followed by
/// projection. The step halves until the objective does not decrease and
/// doubles (up to 1) after each accepted move.
inline FasResult optimize_fas(const FieldObjective& f, std::vector<Vec2> pos, const std::vector<double>& phases,
                              const ScaConfig& cfg = {}) {
    if (!(cfg.step > 0.0 && cfg.step <= 1.0)) throw ArgumentError("optimize_fas: step must lie in (0, 1]");
    f.check_feasible(pos);
    const double width = f.fas().width, spacing = f.fas().min_spacing;
    const double min_step = cfg.min_step_wl * f.wavelength();
    FasResult r;
    Evaluation ev = f.evaluate(pos, phases);
    std::vector<Vec2> g = f.objective_gradient(pos, phases);
    r.trace.push_back(ev.objective);
    r.phi_trace.push_back(ev.phi);
    double step = cfg.step;
    for (int it = 0; it < cfg.max_iter; ++it) {
        r.iterations = it + 1;
        double gmax = 0.0;
        for (const auto& gm : g) gmax = std::max(gmax, gm.norm());
        bool moved = false;
        Evaluation next;
        if (gmax > 0.0 && std::isfinite(gmax)) {
            while (step * width >= min_step) {
                std::vector<Vec2> cand(pos.size());
                for (std::size_t m = 0; m < pos.size(); ++m) cand[m] = pos[m] + step * width * g[m] / gmax;
                bool ok = true;
                try {
                    cand = project_feasible(std::move(cand), width, spacing);
                } catch (const FeasibilityError&) {
                    ok = false;
                }
                if (ok) {
                    Evaluation ce = f.evaluate(cand, phases);
                    if (ce.objective >= ev.objective) {
                        pos = std::move(cand);
                        next = std::move(ce);
                        moved = true;
                        step = std::min(1.0, 2.0 * step);
                        break;
                    }
                }
                step *= cfg.backtrack;
            }
        }
        const double prev = ev.objective;
        if (moved) {
            ev = std::move(next);
            g = f.objective_gradient(pos, phases);
        }
        r.trace.push_back(ev.objective);
        r.phi_trace.push_back(ev.phi);
        if (!moved || relative_change(prev, ev.objective) < cfg.tol) break;
    }
    r.positions = std::move(pos);
    r.final = ev;
    return r;
}

/// Greedy field screening of the FAS region. Candidates lie on a lattice of
/// pitch `pitch_wl` wavelengths anchored at the region centre (so a larger
/// region screens a superset of a smaller one); antennas are placed one at a
/// time at the candidate that maximises the objective of the partial layout
/// while keeping the minimum spacing.
inline std::vector<Vec2> screen_fas_layout(const FieldObjective& f, const std::vector<double>& phases, std::size_t count,
                                           double pitch_wl = 0.05) {
    if (!(pitch_wl > 0.0)) throw ArgumentError("screen_fas_layout: pitch must be positive");
    const double width = f.fas().width, spacing = f.fas().min_spacing, h = pitch_wl * f.wavelength();
    const int half = static_cast<int>(std::floor(0.5 * width / h + 1e-9));
    std::vector<Vec2> cand;
    for (int i = -half; i <= half; ++i)
        for (int j = -half; j <= half; ++j)
            cand.emplace_back(std::clamp(0.5 * width + i * h, 0.0, width), std::clamp(0.5 * width + j * h, 0.0, width));
    const auto e = f.fields(f.basis(cand), phases);
    std::vector<double> des(cand.size(), 0.0), itf(cand.size(), 0.0);
    for (std::size_t u = 0; u < f.users(); ++u)
        for (std::size_t k = 0; k < cand.size(); ++k)
            (u == f.desired() ? des : itf)[k] += std::norm(e[u][static_cast<Eigen::Index>(k)]);
    std::vector<Vec2> chosen;
    std::vector<char> used(cand.size(), 0);
    double sum_des = 0.0, sum_itf = 0.0;
    for (std::size_t m = 0; m < count; ++m) {
        const double n = static_cast<double>(m + 1);
        double best = -1.0;
        std::size_t arg = cand.size();
        for (std::size_t k = 0; k < cand.size(); ++k) {
            if (used[k]) continue;
            bool ok = true;
            for (const auto& c : chosen)
                if (!spacing_ok(c, cand[k], spacing)) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            const double pd = (sum_des + des[k]) / n, pj = (sum_itf + itf[k]) / n;
            const double j = f.has_interference() ? f.power_w() * pd / (f.power_w() * pj + f.noise_w()) : pd;
            if (j > best) {
                best = j;
                arg = k;
            }
        }
        if (arg == cand.size())
            throw FeasibilityError("screen_fas_layout: cannot place " + std::to_string(count) + " antennas at spacing " +
                                   format_double(spacing));
        used[arg] = 1;
        chosen.push_back(cand[arg]);
        sum_des += des[arg];
        sum_itf += itf[arg];
    }
    return chosen;
}

/// The screened layout when it scores at least as well as `pos`, else `pos`.
inline std::vector<Vec2> screened_start(const FieldObjective& f, const std::vector<Vec2>& pos,
                                        const std::vector<double>& phases, double pitch_wl) {
    std::vector<Vec2> s;
    try {
        s = screen_fas_layout(f, phases, pos.size(), pitch_wl);
    } catch (const FeasibilityError&) {
        return pos;
    }
    return f.evaluate(s, phases).objective >= f.evaluate(pos, phases).objective ? s : pos;
}

// ---- RIS phase optimization --------------------------------------------------------------

/// Objective change when element n takes `candidate` (a codebook value)
/// while every other phase is kept.
inline double marginal_power(const FieldObjective& f, const std::vector<Vec2>& pos, const std::vector<double>& phases,
                             std::size_t n, double candidate) {
    if (n >= phases.size()) throw ArgumentError("marginal_power: element index out of range");
    if (!Codebook{f.levels()}.index_of(candidate)) throw ArgumentError("marginal_power: candidate is not a codebook phase");
    std::vector<double> alt = phases;
    alt[n] = candidate;
    return f.evaluate(pos, alt).objective - f.evaluate(pos, phases).objective;
}

struct GreedyConfig {
    double tol = 1e-4;  // relative change between sweeps
    int max_sweeps = 10;
};

struct RisResult {
    std::vector<int> indices;
    std::vector<double> trace;  // objective after every accepted element update / generation; index 0 = start
    int sweeps = 0;
    Evaluation final;
};

/// Coordinate sweeps over the elements; each element takes the codebook
/// value with the largest objective (ties to the lowest index).
inline RisResult optimize_ris_greedy(const FieldObjective& f, const std::vector<Vec2>& pos, std::vector<int> idx,
                                     const GreedyConfig& cfg = {}) {
    f.check_feasible(pos);
    const int lc = f.levels();
    const std::size_t n_el = f.ris_size();
    if (idx.size() != n_el) throw ArgumentError("optimize_ris_greedy: index vector length mismatch");
    const auto basis = f.basis(pos);
    std::vector<cplx> rot(static_cast<std::size_t>(lc));
    for (int l = 0; l < lc; ++l) rot[static_cast<std::size_t>(l)] = std::polar(1.0, two_pi * l / lc);
    auto e = f.fields(basis, phases_from_indices(idx, lc));
    RisResult r;
    Evaluation ev = f.evaluate_fields(e);
    r.trace.push_back(ev.objective);
    std::vector<Eigen::VectorXcd> cand(e.size());
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        r.sweeps = sweep + 1;
        const double start = ev.objective;
        for (std::size_t n = 0; n < n_el; ++n) {
            const cplx cur = rot[static_cast<std::size_t>(idx[n])];
            int best = -1;
            Evaluation best_ev;
            std::vector<Eigen::VectorXcd> best_e;
            for (int l = 0; l < lc; ++l) {
                const cplx diff = rot[static_cast<std::size_t>(l)] - cur;
                for (std::size_t u = 0; u < e.size(); ++u)
                    cand[u] = e[u] + diff * basis.ris[u].row(static_cast<Eigen::Index>(n)).transpose();
                const Evaluation ce = f.evaluate_fields(cand);
                if (best < 0 || ce.objective > best_ev.objective) {
                    best = l;
                    best_ev = ce;
                    best_e = cand;
                }
            }
            if (best != idx[n] && best_ev.objective >= ev.objective) {
                idx[n] = best;
                e = std::move(best_e);
                ev = best_ev;
                r.trace.push_back(ev.objective);
            }
        }
        if (relative_change(start, ev.objective) < cfg.tol) break;
    }
    r.indices = std::move(idx);
    r.final = f.evaluate(pos, phases_from_indices(r.indices, lc));
    return r;
}

struct GaConfig {
    int population = 32;
    int generations = 50;
    int elitism = 1;
    int tournament = 3;
    double crossover = 0.9;
    double mutation = -1.0;  // per gene; negative selects 1/N
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Genetic search over index vectors. The initial population holds `seed_idx`
/// and random individuals; with elitism >= 1 the best fitness never drops.
inline RisResult optimize_ris_ga(const FieldObjective& f, const std::vector<Vec2>& pos, const std::vector<int>& seed_idx,
                                 const GaConfig& cfg = {}) {
    f.check_feasible(pos);
    if (cfg.population < 2) throw ArgumentError("optimize_ris_ga: population must be >= 2");
    if (cfg.elitism < 1 || cfg.elitism > cfg.population) throw ArgumentError("optimize_ris_ga: elitism must lie in [1, population]");
    if (cfg.tournament < 1) throw ArgumentError("optimize_ris_ga: tournament size must be >= 1");
    const int lc = f.levels();
    const std::size_t n_el = f.ris_size();
    if (seed_idx.size() != n_el) throw ArgumentError("optimize_ris_ga: index vector length mismatch");
    const double pm = cfg.mutation >= 0.0 ? cfg.mutation : 1.0 / static_cast<double>(n_el);
    const auto basis = f.basis(pos);
    Rng rng(cfg.seed);
    using Genome = std::vector<int>;
    std::vector<Genome> pop(static_cast<std::size_t>(cfg.population));
    pop[0] = seed_idx;
    for (std::size_t i = 1; i < pop.size(); ++i) {
        pop[i].resize(n_el);
        for (auto& g : pop[i]) g = static_cast<int>(rng.index(static_cast<std::uint64_t>(lc)));
    }
    std::vector<double> fit(pop.size());
    auto evaluate_all = [&] {
        parallel_chunks(pop.size(), cfg.threads, [&](std::size_t b0, std::size_t b1) {
            for (std::size_t i = b0; i < b1; ++i)
                fit[i] = f.evaluate_fields(f.fields(basis, phases_from_indices(pop[i], lc))).objective;
        });
    };
    auto ranking = [&] {
        std::vector<std::size_t> order(pop.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fit[a] > fit[b]; });
        return order;
    };
    evaluate_all();
    RisResult r;
    auto order = ranking();
    r.trace.push_back(fit[order[0]]);
    auto tournament = [&]() -> const Genome& {
        std::size_t best = static_cast<std::size_t>(rng.index(pop.size()));
        for (int t = 1; t < cfg.tournament; ++t) {
            const auto c = static_cast<std::size_t>(rng.index(pop.size()));
            if (fit[c] > fit[best] || (fit[c] == fit[best] && c < best)) best = c;
        }
        return pop[best];
    };
    for (int gen = 0; gen < cfg.generations; ++gen) {
        std::vector<Genome> next;
        next.reserve(pop.size());
        for (int e = 0; e < cfg.elitism; ++e) next.push_back(pop[order[static_cast<std::size_t>(e)]]);
        while (next.size() < pop.size()) {
            const Genome& a = tournament();
            const Genome& b = tournament();
            Genome child = a;
            if (n_el >= 2 && rng.bernoulli(cfg.crossover)) {
                const auto cut = 1 + static_cast<std::size_t>(rng.index(n_el - 1));
                std::copy(b.begin() + static_cast<std::ptrdiff_t>(cut), b.end(), child.begin() + static_cast<std::ptrdiff_t>(cut));
            }
            for (auto& g : child)
                if (rng.bernoulli(pm)) g = static_cast<int>(rng.index(static_cast<std::uint64_t>(lc)));
            next.push_back(std::move(child));
        }
        pop = std::move(next);
        evaluate_all();
        order = ranking();
        r.trace.push_back(fit[order[0]]);
        r.sweeps = gen + 1;
    }
    r.indices = pop[order[0]];
    r.final = f.evaluate(pos, phases_from_indices(r.indices, lc));
    return r;
}

// ---- alternating optimization -----------------------------------------------------------

enum class RisMode { greedy, ga };

struct FaoConfig {
    double tol = 1e-4;  // relative change threshold eps
    int max_outer = 50;  // Q_max
    ScaConfig sca;
    GreedyConfig greedy;
    GaConfig ga;
    RisMode mode = RisMode::greedy;
    bool screen_start = true;     // see prepare_start
    double screen_pitch_wl = 0.05;
};

struct OptimizerState {
    std::vector<Vec2> positions;
    std::vector<int> indices;
    std::vector<Evaluation> history;  // index 0 = initial state, then one per outer iteration
    int iterations = 0;
    bool converged = false;

    const Evaluation& final() const { return history.back(); }
};

/// FAS update with the RIS fixed, then RIS update with the FAS fixed, until
/// the relative change of the objective drops below `tol` or `max_outer`
/// iterations. The RIS reference distance uses the fixed FAS-region centre.
inline OptimizerState fao(const FieldObjective& f, std::vector<Vec2> pos, std::vector<int> idx, const FaoConfig& cfg = {}) {
    f.check_feasible(pos);
    OptimizerState st;
    const int lc = f.levels();
    st.history.push_back(f.evaluate(pos, phases_from_indices(idx, lc)));
    for (int v = 0; v < cfg.max_outer; ++v) {
        const double prev = st.history.back().objective;
        FasResult fr = optimize_fas(f, std::move(pos), phases_from_indices(idx, lc), cfg.sca);
        pos = std::move(fr.positions);
        RisResult rr;
        if (cfg.mode == RisMode::greedy) {
            rr = optimize_ris_greedy(f, pos, idx, cfg.greedy);
        } else {
            GaConfig ga = cfg.ga;
            ga.seed = cfg.ga.seed + static_cast<std::uint64_t>(v);
            rr = optimize_ris_ga(f, pos, idx, ga);
        }
        if (rr.final.objective >= fr.final.objective) idx = std::move(rr.indices);
        st.history.push_back(f.evaluate(pos, phases_from_indices(idx, lc)));
        st.iterations = v + 1;
        if (relative_change(prev, st.history.back().objective) < cfg.tol) {
            st.converged = true;
            break;
        }
    }
    st.positions = std::move(pos);
    st.indices = std::move(idx);
    return st;
}

/// Start for fao when `screen_start` is set: one greedy RIS pass at the given
/// layout, then the screened FAS layout under those phases.
inline void prepare_start(const FieldObjective& f, std::vector<Vec2>& pos, std::vector<int>& idx, const FaoConfig& cfg) {
    if (!cfg.screen_start) return;
    idx = optimize_ris_greedy(f, pos, idx, cfg.greedy).indices;
    pos = screened_start(f, pos, phases_from_indices(idx, f.levels()), cfg.screen_pitch_wl);
}

inline OptimizerState fao(const Scene& s, const FaoConfig& cfg = {}) {
    const FieldObjective f(s);
    f.check_feasible(s.fas.positions);
    std::vector<Vec2> pos = s.fas.positions;
    std::vector<int> idx = s.ris.phase_indices;
    prepare_start(f, pos, idx, cfg);
    return fao(f, pos, idx, cfg);
}

// ---- baselines ---------------------------------------------------------------------------

enum class Method { fao, wo_ris, random_ris, fpa, gd };

inline Method parse_method(const std::string& s) {
    if (s == "fao") return Method::fao;
    if (s == "wo_ris") return Method::wo_ris;
    if (s == "random_ris") return Method::random_ris;
    if (s == "fpa") return Method::fpa;
    if (s == "gd") return Method::gd;
    throw ArgumentError("unknown method '" + s + "' (expected fao, wo_ris, random_ris, fpa or gd)");
}

inline const char* method_name(Method m) {
    switch (m) {
        case Method::fao: return "fao";
        case Method::wo_ris: return "wo_ris";
        case Method::random_ris: return "random_ris";
        case Method::fpa: return "fpa";
        case Method::gd: return "gd";
    }
    return "?";
}

struct GdConfig {
    double step = pi / 4;  // initial phase step (rad) for the largest gradient entry
    double min_step = 1e-9;
    int max_iter = 500;
    double tol = 1e-10;
};

struct ContinuousResult {
    std::vector<double> phases;
    double phi = 0.0;
    int iterations = 0;
};

/// Gradient ascent of Phi over continuous phases at fixed antennas. The step
/// is normalised by the largest partial derivative, halved until Phi does not
/// decrease, and doubled after each accepted step.
inline ContinuousResult optimize_phases_continuous(const FieldObjective& f, const std::vector<Vec2>& pos,
                                                   std::vector<double> phases, const GdConfig& cfg = {}) {
    const auto basis = f.basis(pos);
    const std::size_t k = f.desired();
    const auto& b = basis.ris[k];
    const double inv_m = 1.0 / static_cast<double>(pos.size());
    auto phi_of = [&](const std::vector<double>& th) { return f.fields(basis, th)[k].squaredNorm() * inv_m; };
    double cur = phi_of(phases);
    double step = cfg.step;
    ContinuousResult r;
    for (int it = 0; it < cfg.max_iter; ++it) {
        r.iterations = it + 1;
        const Eigen::VectorXcd e = f.fields(basis, phases)[k];
        std::vector<double> g(phases.size());
        double gmax = 0.0;
        for (std::size_t n = 0; n < phases.size(); ++n) {
            const cplx rot = std::polar(1.0, phases[n]);
            cplx acc = 0.0;
            for (Eigen::Index m = 0; m < e.size(); ++m)
                acc += std::conj(e[m]) * cplx(0.0, 1.0) * b(static_cast<Eigen::Index>(n), m) * rot;
            g[n] = 2.0 * inv_m * acc.real();
            gmax = std::max(gmax, std::abs(g[n]));
        }
        if (!(gmax > 0.0)) break;
        bool moved = false;
        double next = cur;
        while (step >= cfg.min_step) {
            std::vector<double> cand(phases.size());
            for (std::size_t n = 0; n < phases.size(); ++n) cand[n] = wrap_phase(phases[n] + step * g[n] / gmax);
            next = phi_of(cand);
            if (next >= cur) {
                phases = std::move(cand);
                moved = true;
                step = std::min(pi, 2.0 * step);
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
        const double prev = cur;
        cur = next;
        if (relative_change(prev, cur) < cfg.tol) break;
    }
    r.phases = std::move(phases);
    r.phi = cur;
    return r;
}

struct MethodResult {
    Method method = Method::fao;
    OptimizerState state;
    Evaluation final;
    Scene scene;  // the scene the result refers to (RIS zeroed for wo_ris)
    double phi_continuous = 0.0;  // gd only
    double phi_quantized = 0.0;   // gd only, at the same antenna positions
};

/// Runs one method on a scene, starting from the scene's FAS layout and RIS
/// indices. `seed` drives the random RIS draw and the GA.
inline MethodResult run_method(const Scene& scene, Method method, std::uint64_t seed, const FaoConfig& cfg = {}) {
    MethodResult out;
    out.method = method;
    out.scene = scene;
    FaoConfig c = cfg;
    c.ga.seed = seed;
    const int lc = scene.ris.levels;
    std::vector<Vec2> pos = scene.fas.positions;
    std::vector<int> idx = scene.ris.phase_indices;
    switch (method) {
        case Method::fao: {
            out.state = fao(scene, c);
            break;
        }
        case Method::wo_ris: {
            std::fill(out.scene.ris.element_amplitudes.begin(), out.scene.ris.element_amplitudes.end(), 0.0);
            const FieldObjective f(out.scene);
            const auto ph = phases_from_indices(idx, lc);
            out.state.history.push_back(f.evaluate(pos, ph));
            if (c.screen_start) pos = screened_start(f, pos, ph, c.screen_pitch_wl);
            FasResult fr = optimize_fas(f, pos, ph, c.sca);
            out.state.positions = fr.positions;
            out.state.indices = idx;
            out.state.history.push_back(fr.final);
            out.state.iterations = 1;
            break;
        }
        case Method::random_ris: {
            Rng rng(seed);
            for (auto& i : idx) i = static_cast<int>(rng.index(static_cast<std::uint64_t>(lc)));
            const FieldObjective f(scene);
            const auto ph = phases_from_indices(idx, lc);
            out.state.history.push_back(f.evaluate(pos, ph));
            if (c.screen_start) pos = screened_start(f, pos, ph, c.screen_pitch_wl);
            FasResult fr = optimize_fas(f, pos, ph, c.sca);
            out.state.positions = fr.positions;
            out.state.indices = idx;
            out.state.history.push_back(fr.final);
            out.state.iterations = 1;
            break;
        }
        case Method::fpa: {
            const FieldObjective f(scene);
            auto grid = uniform_fas_grid(pos.size(), scene.fas.width);
            if (positions_feasible(grid, scene.fas.width, scene.fas.min_spacing)) pos = std::move(grid);
            out.state.history.push_back(f.evaluate(pos, phases_from_indices(idx, lc)));
            RisResult rr = c.mode == RisMode::greedy ? optimize_ris_greedy(f, pos, idx, c.greedy)
                                                     : optimize_ris_ga(f, pos, idx, c.ga);
            out.state.positions = pos;
            out.state.indices = rr.indices;
            out.state.history.push_back(rr.final);
            out.state.iterations = 1;
            break;
        }
        case Method::gd: {
            const FieldObjective f(scene);
            out.state.history.push_back(f.evaluate(pos, phases_from_indices(idx, lc)));
            const ContinuousResult cr = optimize_phases_continuous(f, pos, phases_from_indices(idx, lc));
            const Codebook cb{lc};
            for (std::size_t n = 0; n < idx.size(); ++n) idx[n] = cb.nearest(cr.phases[n]);
            out.phi_continuous = f.evaluate(pos, cr.phases).phi;
            out.phi_quantized = f.evaluate(pos, phases_from_indices(idx, lc)).phi;
            if (c.screen_start) pos = screened_start(f, pos, phases_from_indices(idx, lc), c.screen_pitch_wl);
            FasResult fr = optimize_fas(f, pos, phases_from_indices(idx, lc), c.sca);
            out.state.positions = fr.positions;
            out.state.indices = idx;
            out.state.history.push_back(fr.final);
            out.state.iterations = 1;
            break;
        }
    }
    out.final = out.state.final();
    out.scene.fas.positions = out.state.positions;
    out.scene.ris.phase_indices = out.state.indices;
    return out;
}

/// iteration,phi,phi_int,sinr,rate
inline void write_run_log(const std::string& path, const OptimizerState& st) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "iteration,phi,phi_int,sinr,rate\n";
    for (std::size_t i = 0; i < st.history.size(); ++i) {
        const auto& e = st.history[i];
        f << i << ',' << format_double(e.phi) << ',' << format_double(e.phi_int) << ',' << format_double(e.sinr) << ','
          << format_double(e.rate) << '\n';
    }
}

}  // namespace rfgs
