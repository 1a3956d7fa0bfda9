// SPDX-License-Identifier: Apache-2.0
//
// rfgs: Gaussian radiation-field modelling and RIS/fluid-antenna optimization
// ------------------------------------------------------------------------

#pragma once

#include "rfgs/core.hpp"

#include <Eigen/Cholesky>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace rfgs {

/// Complex-amplitude anisotropic Gaussian kernel
///
///     G(x) = A e^{j zeta} exp(-1/2 (x - q)^T Sigma^{-1} (x - q))
///
/// `user_tag` names the user whose field the primitive belongs to; it is the
/// index into Scene::users.
struct GaussianPrimitive {
    Vec3 center = Vec3::Zero();
    Mat3 covariance = Mat3::Identity();
    double amplitude = 1.0;
    double phase = 0.0;
    int user_tag = 0;
};

inline Mat3 isotropic_covariance(double sigma) { return Mat3::Identity() * (sigma * sigma); }

/// A primitive with its precision matrix and complex weight precomputed.
/// Hot loops (splatting, objective evaluation) work on these.
struct PreparedPrimitive {
    Vec3 center;
    Mat3 precision;
    cplx weight;

    cplx eval(const Vec3& x) const {
        const Vec3 d = x - center;
        return weight * std::exp(-0.5 * d.dot(precision * d));
    }

    /// Value and spatial gradient dG/dx = G * (-Sigma^{-1} (x - q)).
    cplx eval(const Vec3& x, Eigen::Vector3cd& grad) const {
        const Vec3 d = x - center;
        const Vec3 pd = precision * d;
        const cplx g = weight * std::exp(-0.5 * d.dot(pd));
        grad = -pd.cast<cplx>() * g;
        return g;
    }
};

inline Mat3 checked_precision(const Mat3& covariance, std::string_view what) {
    const Mat3 sym = 0.5 * (covariance + covariance.transpose());
    if (!sym.allFinite() || (sym - covariance).norm() > 1e-9 * (1.0 + covariance.norm()))
        throw NumericError(std::string(what) + ": covariance is not symmetric");
    Eigen::LLT<Mat3> llt(sym);
    if (llt.info() != Eigen::Success)
        throw NumericError(std::string(what) + ": covariance is not positive definite");
    return llt.solve(Mat3::Identity());
}

inline PreparedPrimitive prepare(const GaussianPrimitive& g, double scale = 1.0,
                                 std::string_view what = "primitive") {
    return {g.center, checked_precision(g.covariance, what),
            std::polar(g.amplitude * scale, g.phase)};
}

inline std::vector<PreparedPrimitive> prepare_all(const std::vector<GaussianPrimitive>& prims,
                                                  double scale = 1.0) {
    std::vector<PreparedPrimitive> out;
    out.reserve(prims.size());
    for (std::size_t i = 0; i < prims.size(); ++i)
        out.push_back(prepare(prims[i], scale, "primitive " + std::to_string(i)));
    return out;
}

/// Evaluates one primitive at x; the quadratic form goes through a Cholesky
/// solve of the covariance.
inline cplx eval_primitive(const GaussianPrimitive& g, const Vec3& x) {
    const Mat3 sym = 0.5 * (g.covariance + g.covariance.transpose());
    Eigen::LLT<Mat3> llt(sym);
    if (llt.info() != Eigen::Success || !sym.allFinite())
        throw NumericError("primitive at (" + format_double(g.center.x()) + "," +
                           format_double(g.center.y()) + "," + format_double(g.center.z()) +
                           "): covariance is not positive definite");
    const Vec3 d = x - g.center;
    const double m2 = d.dot(llt.solve(d));
    return std::polar(g.amplitude, g.phase) * std::exp(-0.5 * m2);
}

// ---- CSV: qx,qy,qz,s_xx,s_xy,s_xz,s_yy,s_yz,s_zz,amplitude,phase,user_tag ----

inline constexpr std::string_view primitive_csv_header =
    "qx,qy,qz,s_xx,s_xy,s_xz,s_yy,s_yz,s_zz,amplitude,phase,user_tag";

inline std::vector<double> primitive_to_row(const GaussianPrimitive& g) {
    const Mat3& s = g.covariance;
    return {g.center.x(), g.center.y(), g.center.z(), s(0, 0), s(0, 1), s(0, 2),
            s(1, 1),      s(1, 2),      s(2, 2),      g.amplitude, g.phase,
            static_cast<double>(g.user_tag)};
}

inline GaussianPrimitive primitive_from_row(const std::vector<double>& r) {
    if (r.size() != 12) throw FormatError("primitive row needs 12 values, got " + std::to_string(r.size()));
    GaussianPrimitive g;
    g.center = Vec3(r[0], r[1], r[2]);
    g.covariance << r[3], r[4], r[5], r[4], r[6], r[7], r[5], r[7], r[8];
    g.amplitude = r[9];
    g.phase = r[10];
    if (r[11] != std::floor(r[11])) throw FormatError("user_tag must be an integer");
    g.user_tag = static_cast<int>(r[11]);
    return g;
}

inline std::vector<double> split_csv_numbers(const std::string& line) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t end = line.find(',', start);
        if (end == std::string::npos) end = line.size();
        out.push_back(parse_double(std::string_view(line).substr(start, end - start)));
        start = end + 1;
    }
    return out;
}

inline void save_primitives_csv(const std::string& path, const std::vector<GaussianPrimitive>& prims) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << primitive_csv_header << '\n';
    for (const auto& g : prims) {
        const auto row = primitive_to_row(g);
        for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << format_double(row[i]);
        f << '\n';
    }
}

inline std::vector<GaussianPrimitive> load_primitives_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError(path + ": empty primitive file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != primitive_csv_header) throw FormatError(path + ": unexpected header");
    std::vector<GaussianPrimitive> out;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        try {
            out.push_back(primitive_from_row(split_csv_numbers(line)));
        } catch (const FormatError& e) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace rfgs
