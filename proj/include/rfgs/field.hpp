// SPDX-License-Identifier: Apache-2.0
//
// rfgs: Gaussian radiation-field modelling and RIS/fluid-antenna optimization
// ------------------------------------------------------------------------

#pragma once

#include "rfgs/core.hpp"
#include "rfgs/primitive.hpp"
#include "rfgs/scene.hpp"

#include <vector>

namespace rfgs {

/// Superposition of Gaussian primitives. `amplitude_scale` is the per-user
/// amplitude applied uniformly to every primitive when the field is evaluated.
struct RadiationField {
    std::vector<GaussianPrimitive> primitives;
    double wavelength = 0.1;
    double amplitude_scale = 1.0;

    std::size_t size() const { return primitives.size(); }
};

inline cplx eval_field(const RadiationField& f, const Vec3& x) {
    cplx sum = 0.0;
    for (const auto& g : f.primitives) sum += eval_primitive(g, x);
    return f.amplitude_scale * sum;
}

inline cplx eval_prepared(const std::vector<PreparedPrimitive>& prims, const Vec3& x) {
    cplx sum = 0.0;
    for (const auto& p : prims) sum += p.eval(x);
    return sum;
}

/// Field value and its spatial gradient over prepared primitives.
inline cplx eval_prepared(const std::vector<PreparedPrimitive>& prims, const Vec3& x, Eigen::Vector3cd& grad) {
    cplx sum = 0.0;
    grad.setZero();
    Eigen::Vector3cd g;
    for (const auto& p : prims) {
        sum += p.eval(x, g);
        grad += g;
    }
    return sum;
}

/// |E(x)|^2 and its spatial gradient 2 Re(conj(E) dE/dx).
inline double field_power_gradient(const RadiationField& f, const Vec3& x, Vec3& grad) {
    const auto prims = prepare_all(f.primitives, f.amplitude_scale);
    Eigen::Vector3cd dE;
    const cplx e = eval_prepared(prims, x, dE);
    for (int k = 0; k < 3; ++k) grad[k] = 2.0 * (std::conj(e) * dE[k]).real();
    return std::norm(e);
}

/// Discrete-path field sum_l A_l e^{j theta_l} e^{-j 2pi/lambda |x - q_l|}. With
/// `free_space_decay` each term is additionally divided by the distance.
inline cplx virtual_emitter_field(const std::vector<VirtualEmitter>& emitters, const Vec3& x, double wavelength,
                                  bool free_space_decay = false) {
    if (!(wavelength > 0.0)) throw ArgumentError("virtual_emitter_field: wavelength must be positive");
    cplx sum = 0.0;
    for (const auto& e : emitters) {
        const double d = (x - e.position).norm();
        cplx term = std::polar(e.gain, e.phase - two_pi / wavelength * d);
        if (free_space_decay && d > 0.0) term /= d;
        sum += term;
    }
    return sum;
}

/// Geometric phase (2pi/lambda)(|tx - r_n| + |ref - r_n|) of every element, unwrapped.
inline std::vector<double> ris_geometric_phases(const RisPanel& ris, const Vec3& tx, const Vec3& ref, double wavelength) {
    std::vector<double> out(ris.size());
    for (std::size_t n = 0; n < ris.size(); ++n) {
        const Vec3& r = ris.element_positions[n];
        out[n] = two_pi / wavelength * ((tx - r).norm() + (ref - r).norm());
    }
    return out;
}

/// One primitive per RIS element: centre r_n, amplitude gain*A_n,
/// phase wrap(theta_n + geometric phase), covariance `base_covariance`.
inline std::vector<GaussianPrimitive> ris_to_primitives(const RisPanel& ris, const Vec3& tx, const Vec3& ref,
                                                        double wavelength, const Mat3& base_covariance,
                                                        int user_tag = 0, double gain = 1.0) {
    if (!(wavelength > 0.0)) throw ArgumentError("ris_to_primitives: wavelength must be positive");
    checked_precision(base_covariance, "RIS base covariance");
    const auto geo = ris_geometric_phases(ris, tx, ref, wavelength);
    std::vector<GaussianPrimitive> out(ris.size());
    for (std::size_t n = 0; n < ris.size(); ++n) {
        out[n].center = ris.element_positions[n];
        out[n].covariance = base_covariance;
        out[n].amplitude = gain * ris.element_amplitudes[n];
        out[n].phase = wrap_phase(ris.phase(n) + geo[n]);
        out[n].user_tag = user_tag;
    }
    return out;
}

inline Mat3 ris_covariance(const Scene& s) { return isotropic_covariance(s.ris.effective_sigma(s.wavelength)); }

/// Reference point for the RIS receive distance: the centre of the FAS region.
inline Vec3 ris_reference_point(const Scene& s) { return s.fas.center(); }

/// Environment primitives with optional per-primitive complex coefficients
/// C_i = mu_i e^{j delta_i} folded into amplitude and phase.
inline std::vector<GaussianPrimitive> apply_coefficients(std::vector<GaussianPrimitive> prims,
                                                         const std::vector<cplx>* coeffs) {
    if (!coeffs) return prims;
    if (coeffs->size() != prims.size()) throw ArgumentError("coefficient count does not match primitive count");
    for (std::size_t i = 0; i < prims.size(); ++i) {
        const cplx c = (*coeffs)[i];
        prims[i].amplitude *= std::abs(c);
        prims[i].phase = wrap_phase(prims[i].phase + std::arg(c));
    }
    return prims;
}

/// Full field of one user: its environment primitives followed by the RIS
/// primitives built for its transmitter position. Everything is tagged with
/// the user index.
inline RadiationField composite_field(const Scene& s, std::size_t user, const std::vector<GaussianPrimitive>& environment,
                                      const std::vector<cplx>* coeffs = nullptr) {
    if (user >= s.users.size()) throw ArgumentError("composite_field: user index out of range");
    RadiationField f;
    f.wavelength = s.wavelength;
    f.primitives = apply_coefficients(environment, coeffs);
    for (auto& g : f.primitives) g.user_tag = static_cast<int>(user);
    const auto ris = ris_to_primitives(s.ris, s.users[user].position, ris_reference_point(s), s.wavelength,
                                       ris_covariance(s), static_cast<int>(user), s.users[user].ris_gain);
    f.primitives.insert(f.primitives.end(), ris.begin(), ris.end());
    return f;
}

inline RadiationField composite_field(const Scene& s, std::size_t user) {
    return composite_field(s, user, s.environment_for(user));
}

inline cplx received_sample(const RadiationField& f, const Vec3& x, double power_w, double noise_w, Rng& rng) {
    if (!(power_w > 0.0)) throw ArgumentError("received_sample: power must be positive");
    cplx y = std::sqrt(power_w) * eval_field(f, x);
    if (noise_w > 0.0) y += rng.complex_normal(noise_w);
    return y;
}

inline cplx received_sample(const RadiationField& f, const Vec3& x, double power_w, double noise_w,
                            std::uint64_t noise_seed) {
    Rng rng(noise_seed);
    return received_sample(f, x, power_w, noise_w, rng);
}

}  // namespace rfgs
