// SPDX-License-Identifier: Apache-2.0
//
// rfgs: Gaussian radiation-field modelling and RIS/fluid-antenna optimization
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

namespace rfgs {

inline constexpr const char* version = "0.1.0";

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// ---- errors -------------------------------------------------------------
//
// Every error the library raises derives from rfgs::Error. The CLI maps the
// subclasses onto exit codes (io/argument -> 2, schema/validation/format -> 3,
// numeric/feasibility -> 4).

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : Error {
    using Error::Error;
};
struct ArgumentError : Error {
    using Error::Error;
};
struct SchemaError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct FeasibilityError : Error {
    using Error::Error;
};

// ---- units ----------------------------------------------------------------

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }
inline double deg_to_rad(double deg) { return deg * pi / 180.0; }

/// Wraps an angle into [0, 2*pi).
inline double wrap_phase(double phase) {
    double w = std::fmod(phase, two_pi);
    if (w < 0.0) w += two_pi;
    if (w >= two_pi) w = 0.0;  // fmod(-tiny) + 2pi can round up to 2pi
    return w;
}

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

// ---- deterministic random numbers ----------------------------------------
//
// std::mt19937_64 has a standardised output sequence, the std distributions do
// not. Every sampler here is derived from the raw 64-bit stream so seeded runs
// are reproducible across standard libraries.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling removes modulo bias.
    std::uint64_t index(std::uint64_t n) {
        if (n == 0) throw ArgumentError("Rng::index: empty range");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    /// Standard normal via Box-Muller (one value per call, no caching).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    /// Circularly symmetric complex normal with E|z|^2 = variance.
    cplx complex_normal(double variance = 1.0) {
        const double s = std::sqrt(variance / 2.0);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Fisher-Yates shuffle, deterministic for a given seed.
    template <typename Container>
    void shuffle(Container& c) {
        for (std::size_t i = c.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(index(i));
            using std::swap;
            swap(c[i - 1], c[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// ---- text formatting -------------------------------------------------------

/// Shortest decimal representation that round-trips exactly.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError("not a number: '" + std::string(s) + "'");
    return v;
}

// ---- parallel loops ---------------------------------------------------------

/// Runs fn(begin, end) over `threads` contiguous chunks of [0, n). Each index
/// is handled by exactly one call, so results written per index do not depend
/// on the worker count.
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
    if (workers <= 1) {
        if (n) fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = n / workers, extra = n % workers;
    std::size_t begin = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t end = begin + chunk + (w < extra ? 1 : 0);
        auto task = [&fn, &errors, w, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        };
        if (w + 1 == workers)
            task();
        else
            pool.emplace_back(task);
        begin = end;
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// 64-bit FNV-1a, used for config hashes in run manifests.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace rfgs
