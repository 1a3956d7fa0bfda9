// SPDX-License-Identifier: Apache-2.0
//
// rfgs: Gaussian radiation-field modelling and RIS/fluid-antenna optimization
// ------------------------------------------------------------------------
//
// Image-style comparison metrics over real power grids.

#pragma once

#include "rfgs/core.hpp"

#include <algorithm>

namespace rfgs {

using Grid = Eigen::MatrixXd;

/// window == 0 selects a single window spanning the whole grid; otherwise
/// the mean over all k x k windows at stride 1.
struct SsimConfig {
    int window = 0;
    double c1 = 1e-4;
    double c2 = 9e-4;
};

/// Stabilisers C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L the peak of the
/// reference grid (L = 1 for an all-zero reference).
inline SsimConfig ssim_config_for(const Grid& reference, int window = 0) {
    double l = reference.size() ? reference.maxCoeff() : 0.0;
    if (!(l > 0.0)) l = 1.0;
    return {window, (0.01 * l) * (0.01 * l), (0.03 * l) * (0.03 * l)};
}

namespace detail {

/// SSIM of one window [r0, r0+h) x [c0, c0+w). Adds dSSIM/dy to grad_y when non-null.
inline double ssim_window(const Grid& x, const Grid& y, Eigen::Index r0, Eigen::Index c0, Eigen::Index h,
                          Eigen::Index w, const SsimConfig& cfg, Grid* grad_y, double grad_scale) {
    const auto bx = x.block(r0, c0, h, w);
    const auto by = y.block(r0, c0, h, w);
    const double n = static_cast<double>(h * w);
    const double mx = bx.sum() / n, my = by.sum() / n;
    const double vx = (bx.array() - mx).square().sum() / n;
    const double vy = (by.array() - my).square().sum() / n;
    const double cxy = ((bx.array() - mx) * (by.array() - my)).sum() / n;
    const double a1 = 2.0 * mx * my + cfg.c1, a2 = 2.0 * cxy + cfg.c2;
    const double b1 = mx * mx + my * my + cfg.c1, b2 = vx + vy + cfg.c2;
    const double s = (a1 * a2) / (b1 * b2);
    if (grad_y) {
        for (Eigen::Index r = 0; r < h; ++r)
            for (Eigen::Index c = 0; c < w; ++c) {
                const double xi = bx(r, c) - mx, yi = by(r, c) - my;
                const double d = (2.0 * mx / n) / a1 + (2.0 * xi / n) / a2 - (2.0 * my / n) / b1 - (2.0 * yi / n) / b2;
                (*grad_y)(r0 + r, c0 + c) += grad_scale * s * d;
            }
    }
    return s;
}

}  // namespace detail

/// Structural similarity of two equally shaped grids; `grad_y`, when given,
/// receives dSSIM/dy (same shape as y).
inline double ssim(const Grid& x, const Grid& y, const SsimConfig& cfg, Grid* grad_y = nullptr) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) throw ArgumentError("ssim: grid shapes differ");
    if (x.size() < 2) throw ArgumentError("ssim: grids need at least 2 elements");
    if (!(cfg.c1 > 0.0) || !(cfg.c2 > 0.0)) throw ArgumentError("ssim: stabilisers must be positive");
    if (grad_y) grad_y->setZero(y.rows(), y.cols());
    if (cfg.window <= 0) return detail::ssim_window(x, y, 0, 0, x.rows(), x.cols(), cfg, grad_y, 1.0);
    const Eigen::Index k = cfg.window;
    if (k > x.rows() || k > x.cols()) throw ArgumentError("ssim: window larger than the grid");
    const Eigen::Index nr = x.rows() - k + 1, nc = x.cols() - k + 1;
    const double inv = 1.0 / static_cast<double>(nr * nc);
    double acc = 0.0;
    for (Eigen::Index r = 0; r < nr; ++r)
        for (Eigen::Index c = 0; c < nc; ++c) acc += detail::ssim_window(x, y, r, c, k, k, cfg, grad_y, inv);
    return acc * inv;
}

inline double mse(const Grid& a, const Grid& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("mse: grid shapes differ");
    return (a - b).array().square().mean();
}

/// Peak signal-to-noise ratio in dB with the peak taken from `reference`.
inline double psnr(const Grid& reference, const Grid& b) {
    const double e = mse(reference, b);
    const double peak = reference.maxCoeff();
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / e);
}

}  // namespace rfgs
