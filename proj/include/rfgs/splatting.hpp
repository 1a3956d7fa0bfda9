// SPDX-License-Identifier: Apache-2.0
//
// rfgs: Gaussian radiation-field modelling and RIS/fluid-antenna optimization
// ------------------------------------------------------------------------
//
// Angular (longitude/latitude) rendering of a Gaussian field as seen from
// the receiver, with depth-ordered complex transmittance.

#pragma once

#include "rfgs/core.hpp"
#include "rfgs/field.hpp"
#include "rfgs/metrics.hpp"
#include "rfgs/primitive.hpp"
#include "rfgs/scene.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <utility>
#include <vector>

namespace rfgs {

/// Uniform bins: longitude centres -pi + (i + 1/2) 2pi/n_lon, latitude
/// centres -pi/2 + (j + 1/2) pi/n_lat. Grids are stored row-major with
/// row j = latitude bin j (row 0 is the lowest latitude).
struct AngularGrid {
    int n_lat = 16;
    int n_lon = 16;

    AngularGrid() = default;
    AngularGrid(int lat, int lon) : n_lat(lat), n_lon(lon) {
        if (lat < 1 || lon < 1) throw ArgumentError("angular grid dimensions must be >= 1");
    }

    std::size_t bins() const { return static_cast<std::size_t>(n_lat) * static_cast<std::size_t>(n_lon); }
    double lon_center(int i) const { return -pi + (i + 0.5) * two_pi / n_lon; }
    double lat_center(int j) const { return -0.5 * pi + (j + 0.5) * pi / n_lat; }

    /// Unit direction of bin (j, i) in receiver-local coordinates.
    Vec3 local_direction(int j, int i) const {
        const double lon = lon_center(i), lat = lat_center(j);
        return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
    }

    bool operator==(const AngularGrid& o) const { return n_lat == o.n_lat && n_lon == o.n_lon; }
};

struct AngularSpectrum {
    AngularGrid grid;
    Eigen::MatrixXcd field;  // R per bin
    Grid power;              // |R|^2
};

/// Per-primitive transmittance amplitude mu in [0, 1] and phase offset delta.
struct SplatCoefficients {
    std::vector<double> mu;
    std::vector<double> delta;

    static SplatCoefficients identity(std::size_t n) { return {std::vector<double>(n, 1.0), std::vector<double>(n, 0.0)}; }
    std::size_t size() const { return mu.size(); }
    cplx factor(std::size_t i) const { return std::polar(mu[i], delta[i]); }
};

/// (longitude, latitude) of q as seen from the receiver; atan2(0, 0) = 0.
inline std::pair<double, double> project(const Vec3& q, const Pose& rx) {
    const Vec3 p = rx.to_local(q);
    const double r = p.norm();
    if (!(r > 0.0)) throw ArgumentError("project: point coincides with the receiver origin");
    const double lon = (p.x() == 0.0 && p.y() == 0.0) ? 0.0 : std::atan2(p.y(), p.x());
    const double lat = std::asin(std::clamp(p.z() / r, -1.0, 1.0));
    return {lon, lat};
}

inline constexpr double footprint_cutoff_sq = 9.0;  // Mahalanobis radius 3

/// Squared Mahalanobis distance between the primitive and the ray o + t d
/// (t >= 0) at the ray's closest-approach point. `rel` = q - o.
inline double ray_mahalanobis_sq(const Vec3& rel, const Mat3& precision, const Vec3& dir) {
    const Vec3 pr = precision * rel;
    const double rr = rel.dot(pr);
    const double dr = dir.dot(pr);
    if (dr <= 0.0) return rr;
    const double dd = dir.dot(precision * dir);
    return std::max(rr - dr * dr / dd, 0.0);
}

struct SplatEntry {
    std::uint32_t index;
    double weight;
};

/// Per-bin list of covering primitives in depth order with their footprint
/// weights. Depends only on geometry, so it is reused while amplitudes and
/// transmittances change (SRN training).
struct SplatPlan {
    AngularGrid grid;
    std::size_t primitive_count = 0;
    std::vector<std::vector<SplatEntry>> bins;
};

inline SplatPlan make_splat_plan(const std::vector<GaussianPrimitive>& prims, const Pose& rx, const AngularGrid& grid,
                                 int threads = 1) {
    SplatPlan plan;
    plan.grid = grid;
    plan.primitive_count = prims.size();
    plan.bins.resize(grid.bins());
    const std::size_t n = prims.size();
    std::vector<Vec3> rel(n), prel(n);
    std::vector<double> rr(n);
    std::vector<Mat3> prec(n);
    std::vector<std::pair<double, std::uint32_t>> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        rel[i] = prims[i].center - rx.origin;
        prec[i] = checked_precision(prims[i].covariance, "primitive " + std::to_string(i));
        prel[i] = prec[i] * rel[i];
        rr[i] = rel[i].dot(prel[i]);
        order[i] = {rel[i].norm(), static_cast<std::uint32_t>(i)};
    }
    std::sort(order.begin(), order.end());
    std::vector<Vec3> dirs(grid.bins());
    for (int j = 0; j < grid.n_lat; ++j)
        for (int i = 0; i < grid.n_lon; ++i)
            dirs[static_cast<std::size_t>(j) * grid.n_lon + i] = rx.axes.transpose() * grid.local_direction(j, i);
    parallel_chunks(grid.bins(), threads, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            auto& list = plan.bins[b];
            for (const auto& [range, idx] : order) {
                const double dr = dirs[b].dot(prel[idx]);
                const double m2 = dr <= 0.0 ? rr[idx]
                                            : std::max(rr[idx] - dr * dr / dirs[b].dot(prec[idx] * dirs[b]), 0.0);
                if (m2 <= footprint_cutoff_sq) list.push_back({idx, std::exp(-0.5 * m2)});
            }
        }
    });
    return plan;
}

/// R_b = sum_i T_i c_i w_i with T_0 = 1 and T <- T t_i after each primitive in
/// depth order; `contrib` are the complex primitive amplitudes c_i and `trans`
/// the transmittance factors t_i = mu_i e^{j delta_i}.
inline Eigen::MatrixXcd apply_splat_plan(const SplatPlan& plan, const std::vector<cplx>& contrib,
                                         const std::vector<cplx>& trans, int threads = 1) {
    if (contrib.size() != plan.primitive_count || trans.size() != plan.primitive_count)
        throw ArgumentError("splat: coefficient count does not match primitive count");
    Eigen::MatrixXcd out(plan.grid.n_lat, plan.grid.n_lon);
    parallel_chunks(plan.bins.size(), threads, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            cplx r = 0.0, t = 1.0;
            for (const auto& e : plan.bins[b]) {
                r += t * contrib[e.index] * e.weight;
                t *= trans[e.index];
            }
            out(static_cast<Eigen::Index>(b / plan.grid.n_lon), static_cast<Eigen::Index>(b % plan.grid.n_lon)) = r;
        }
    });
    return out;
}

inline AngularSpectrum spectrum_from_field(const AngularGrid& grid, Eigen::MatrixXcd field) {
    AngularSpectrum s;
    s.grid = grid;
    s.power = field.cwiseAbs2();
    s.field = std::move(field);
    return s;
}

inline std::vector<cplx> primitive_contributions(const RadiationField& f) {
    std::vector<cplx> c(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        c[i] = std::polar(f.amplitude_scale * f.primitives[i].amplitude, f.primitives[i].phase);
    return c;
}

inline AngularSpectrum splat(const RadiationField& f, const SplatCoefficients& coeffs, const Pose& rx,
                             const AngularGrid& grid, int threads = 1) {
    if (coeffs.mu.size() != f.size() || coeffs.delta.size() != f.size())
        throw ArgumentError("splat: coefficient count does not match primitive count");
    const SplatPlan plan = make_splat_plan(f.primitives, rx, grid, threads);
    std::vector<cplx> trans(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) trans[i] = coeffs.factor(i);
    return spectrum_from_field(grid, apply_splat_plan(plan, primitive_contributions(f), trans, threads));
}

inline AngularSpectrum splat(const RadiationField& f, const Pose& rx, const AngularGrid& grid, int threads = 1) {
    return splat(f, SplatCoefficients::identity(f.size()), rx, grid, threads);
}

/// Spectrum of one user's composite field with unit transmittance.
inline AngularSpectrum render_scene(const Scene& s, const AngularGrid& grid, std::size_t user, int threads = 1) {
    return splat(composite_field(s, user), s.rx_pose, grid, threads);
}

struct SpectrumMetrics {
    double mse = 0.0;
    double ssim = 1.0;
    double psnr = 0.0;
};

/// `a` is the reference: it fixes the SSIM stabilisers and the PSNR peak.
inline SpectrumMetrics spectrum_metrics(const Grid& a, const Grid& b, int ssim_window = 0) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("spectrum_metrics: grid mismatch");
    return {mse(a, b), ssim(a, b, ssim_config_for(a, ssim_window)), psnr(a, b)};
}

inline SpectrumMetrics spectrum_metrics(const AngularSpectrum& a, const AngularSpectrum& b, int ssim_window = 0) {
    if (!(a.grid == b.grid)) throw ArgumentError("spectrum_metrics: grid mismatch");
    return spectrum_metrics(a.power, b.power, ssim_window);
}

// ---- export ----------------------------------------------------------------------

inline void write_spectrum_csv(const std::string& path, const Grid& power) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    write_grid_csv(f, power);
}

inline Grid read_spectrum_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_csv_numbers(line));
        if (rows.back().size() != rows.front().size()) throw FormatError(path + ": ragged spectrum CSV");
    }
    if (rows.empty()) throw FormatError(path + ": empty spectrum CSV");
    Grid g(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) g(r, c) = rows[r][c];
    return g;
}

/// Log-normalised 8-bit greymap: pixel = round(255 (log10(p + floor) - lo) / (hi - lo))
/// with floor = 1e-12 max(p), lo/hi the extreme log values. The image's top
/// row is the highest latitude. The sidecar holds floor, lo and hi.
inline void write_spectrum_pgm(const std::string& path, const std::string& sidecar_path, const Grid& power) {
    const double peak = power.size() ? power.maxCoeff() : 0.0;
    const double floor = peak > 0.0 ? 1e-12 * peak : 1e-300;
    Grid lg = (power.array() + floor).log10().matrix();
    const double lo = lg.minCoeff(), hi = lg.maxCoeff();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "P5\n" << power.cols() << ' ' << power.rows() << "\n255\n";
    for (Eigen::Index r = power.rows() - 1; r >= 0; --r)
        for (Eigen::Index c = 0; c < power.cols(); ++c) {
            const double v = hi > lo ? (lg(r, c) - lo) / (hi - lo) : 0.0;
            f.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)))));
        }
    std::ofstream side(sidecar_path, std::ios::binary);
    if (!side) throw IoError("cannot write " + sidecar_path);
    side << "# power = 10^(lo + (hi - lo) * pixel / 255) - floor; top image row = highest latitude\n"
         << "floor " << format_double(floor) << "\nlo " << format_double(lo) << "\nhi " << format_double(hi) << '\n';
}

}  // namespace rfgs
