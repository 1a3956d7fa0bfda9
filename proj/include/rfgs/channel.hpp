// SPDX-License-Identifier: Apache-2.0
//
// rfgs: Gaussian radiation-field modelling and RIS/fluid-antenna optimization
// ------------------------------------------------------------------------
//
// Statistical channel model: exponentially correlated Rayleigh fading for the
// user-FAS and RIS-FAS hops, free-space line of sight for user-RIS.

#pragma once

#include "rfgs/core.hpp"
#include "rfgs/scene.hpp"

#include <Eigen/Eigenvalues>

#include <fstream>
#include <optional>
#include <vector>

namespace rfgs {

/// Entry (a, b) = rho^{|p_a - p_b|}, distances in whatever unit the caller
/// chose (wavelengths for FAS positions). 0^0 is taken as 1.
inline Eigen::MatrixXd correlation_matrix(double rho, const std::vector<Vec2>& positions) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ArgumentError("correlation_matrix: rho must lie in [0, 1]");
    const auto n = static_cast<Eigen::Index>(positions.size());
    Eigen::MatrixXd r(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        if (!positions[a].allFinite()) throw ArgumentError("correlation_matrix: non-finite position");
        for (Eigen::Index b = 0; b < n; ++b) {
            const double d = (positions[a] - positions[b]).norm();
            r(a, b) = d == 0.0 ? 1.0 : std::pow(rho, d);
        }
    }
    return r;
}

inline Eigen::MatrixXd correlation_matrix(double rho, const std::vector<double>& positions) {
    std::vector<Vec2> p;
    for (double x : positions) p.emplace_back(x, 0.0);
    return correlation_matrix(rho, p);
}

/// Symmetric PSD square root S with S S^T = R. Eigenvalues down to -1e-10
/// (relative to the largest) are clipped to zero.
inline Eigen::MatrixXd hermitian_sqrt(const Eigen::MatrixXd& r) {
    if (r.rows() != r.cols()) throw ArgumentError("hermitian_sqrt: matrix is not square");
    const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
    if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw ArgumentError("hermitian_sqrt: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (r + r.transpose()));
    if (es.info() != Eigen::Success) throw NumericError("hermitian_sqrt: eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -1e-10 * scale) throw ArgumentError("hermitian_sqrt: matrix is not positive semidefinite");
        ev[i] = std::sqrt(std::max(ev[i], 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline double free_space_gain(double wavelength, double distance) {
    const double a = wavelength / (4.0 * pi * distance);
    return a * a;
}

struct UserChannel {
    Eigen::VectorXcd direct;  // h_km, length M
    Eigen::VectorXcd ris;     // h_kr, length N (line of sight)
    double alpha_direct = 0.0;
};

struct ChannelRealization {
    std::vector<UserChannel> users;  // indexed like Scene::users
    Eigen::MatrixXcd ris_fas;        // h_rm, N x M
    double alpha_ris_fas = 0.0;
    double rho_km = 0.0;
    double rho_rm = 0.0;
};

struct ChannelOptions {
    std::optional<double> rho_km;
    std::optional<double> rho_rm;
    std::optional<double> alpha_km;  // overrides the free-space value for every user
    std::optional<double> alpha_rm;
};

/// Draws one realization. The generator is consumed in a fixed order: the
/// RIS-FAS rows n = 0..N-1, then the direct channel of each user.
inline ChannelRealization sample_channel(const Scene& s, Rng& rng, const ChannelOptions& opt = {}) {
    validate_scene(s);
    ChannelRealization out;
    out.rho_km = opt.rho_km.value_or(s.channel.rho_km);
    out.rho_rm = opt.rho_rm.value_or(s.channel.rho_rm);
    const auto m = static_cast<Eigen::Index>(s.fas.size());
    const auto n = static_cast<Eigen::Index>(s.ris.size());

    std::vector<Vec2> pos_wl;
    for (const auto& p : s.fas.positions) pos_wl.push_back(p / s.wavelength);
    const Eigen::MatrixXcd s_km = hermitian_sqrt(correlation_matrix(out.rho_km, pos_wl)).cast<cplx>();
    const Eigen::MatrixXcd s_rm = hermitian_sqrt(correlation_matrix(out.rho_rm, pos_wl)).cast<cplx>();

    const Vec3 fas_center = s.fas.center();
    Vec3 ris_center = Vec3::Zero();
    for (const auto& r : s.ris.element_positions) ris_center += r;
    ris_center /= static_cast<double>(n);

    out.alpha_ris_fas = opt.alpha_rm.value_or(free_space_gain(s.wavelength, (ris_center - fas_center).norm()));
    out.ris_fas.resize(n, m);
    Eigen::VectorXcd g(m);
    for (Eigen::Index row = 0; row < n; ++row) {
        for (Eigen::Index k = 0; k < m; ++k) g[k] = rng.complex_normal(1.0);
        out.ris_fas.row(row) = (std::sqrt(out.alpha_ris_fas) * (s_rm * g)).transpose();
    }
    for (const auto& u : s.users) {
        UserChannel uc;
        uc.alpha_direct = opt.alpha_km.value_or(free_space_gain(s.wavelength, (u.position - fas_center).norm()));
        for (Eigen::Index k = 0; k < m; ++k) g[k] = rng.complex_normal(1.0);
        uc.direct = std::sqrt(uc.alpha_direct) * (s_km * g);
        uc.ris.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = (u.position - s.ris.element_positions[i]).norm();
            uc.ris[i] = std::polar(s.wavelength / (4.0 * pi * d), -two_pi * d / s.wavelength);
        }
        out.users.push_back(std::move(uc));
    }
    return out;
}

inline ChannelRealization sample_channel(const Scene& s, std::uint64_t seed, const ChannelOptions& opt = {}) {
    Rng rng(seed);
    return sample_channel(s, rng, opt);
}

/// h_km[m] + sum_n A_n h_kr[n] e^{j theta_n} h_rm[n, m] for user `user`.
inline cplx effective_channel(const ChannelRealization& ch, const RisPanel& ris, std::size_t m, std::size_t user = 0) {
    if (user >= ch.users.size()) throw ArgumentError("effective_channel: user index out of range");
    const UserChannel& u = ch.users[user];
    if (m >= static_cast<std::size_t>(u.direct.size())) throw ArgumentError("effective_channel: antenna index out of range");
    if (ris.size() != static_cast<std::size_t>(u.ris.size()) || ch.ris_fas.rows() != u.ris.size())
        throw ArgumentError("effective_channel: RIS size does not match the realization");
    cplx h = u.direct[static_cast<Eigen::Index>(m)];
    for (std::size_t n = 0; n < ris.size(); ++n)
        h += ris.element_amplitudes[n] * u.ris[static_cast<Eigen::Index>(n)] * std::polar(1.0, ris.phase(n)) *
             ch.ris_fas(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    return h;
}

/// Mean over antennas of |effective channel|^2 for one user.
inline double mean_channel_power(const ChannelRealization& ch, const RisPanel& ris, std::size_t user) {
    const std::size_t m = static_cast<std::size_t>(ch.users.at(user).direct.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) acc += std::norm(effective_channel(ch, ris, k, user));
    return acc / static_cast<double>(m);
}

/// SINR with the desired user `desired`; every other user interferes with
/// the same transmit power.
inline double sinr_channel(const ChannelRealization& ch, const RisPanel& ris, double power_w, double noise_w,
                           std::size_t desired = 0) {
    if (!(power_w > 0.0) || !(noise_w > 0.0)) throw ArgumentError("sinr_channel: power and noise must be positive");
    double interference = 0.0;
    for (std::size_t j = 0; j < ch.users.size(); ++j)
        if (j != desired) interference += power_w * mean_channel_power(ch, ris, j);
    return power_w * mean_channel_power(ch, ris, desired) / (interference + noise_w);
}

inline double rate(double sinr) {
    if (!(sinr >= 0.0)) throw ArgumentError("rate: SINR must be non-negative");
    return std::log2(1.0 + sinr);
}

/// Writes `antenna,real,imag` rows.
inline void export_channel_csv(const std::string& path, const Eigen::VectorXcd& h) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "antenna,real,imag\n";
    for (Eigen::Index m = 0; m < h.size(); ++m)
        f << m << ',' << format_double(h[m].real()) << ',' << format_double(h[m].imag()) << '\n';
}

}  // namespace rfgs
