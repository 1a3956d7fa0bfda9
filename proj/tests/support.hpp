// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the test suite.

#pragma once

#include "rfgs/core.hpp"
#include "rfgs/primitive.hpp"

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

namespace rfgs::test {

inline Mat3 random_spd(Rng& rng, double lo, double hi) {
    Mat3 a;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a(r, c) = rng.normal();
    Eigen::HouseholderQR<Mat3> qr(a);
    const Mat3 q = qr.householderQ();
    const Vec3 ev(rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi));
    Mat3 s = q * ev.asDiagonal() * q.transpose();
    return 0.5 * (s + s.transpose());
}

inline GaussianPrimitive random_primitive(Rng& rng, double extent, double sigma_lo, double sigma_hi, int tag = 0) {
    GaussianPrimitive g;
    g.center = Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent));
    g.covariance = random_spd(rng, sigma_lo * sigma_lo, sigma_hi * sigma_hi);
    g.amplitude = rng.uniform(0.2, 1.0);
    g.phase = rng.uniform(0.0, two_pi);
    g.user_tag = tag;
    return g;
}

/// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-300) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto p = std::filesystem::temp_directory_path() /
             ("rfgs_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace rfgs::test
