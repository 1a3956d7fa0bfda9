// SPDX-License-Identifier: Apache-2.0
//
// rfgs: Gaussian radiation-field modelling and RIS/fluid-antenna optimization
// ------------------------------------------------------------------------

#pragma once

#include "rfgs/core.hpp"
#include "rfgs/primitive.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rfgs {

// ---- geometry ----------------------------------------------------------------

/// Rigid frame. Rows of `axes` are the local x/y/z directions in world coordinates,
/// so local = axes * (world - origin) and world = origin + axes^T * local.
struct Pose {
    Vec3 origin = Vec3::Zero();
    Mat3 axes = Mat3::Identity();

    Vec3 to_local(const Vec3& world) const { return axes * (world - origin); }
    Vec3 to_world(const Vec3& local) const { return origin + axes.transpose() * local; }

    bool orthonormal(double tol = 1e-9) const {
        return axes.allFinite() && origin.allFinite() &&
               ((axes.transpose() * axes - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol);
    }
};

/// Rotation about the world z axis (counter-clockwise, radians), as a Pose axes matrix.
inline Mat3 yaw_axes(double yaw) {
    Mat3 r;
    r << std::cos(yaw), std::sin(yaw), 0.0, -std::sin(yaw), std::cos(yaw), 0.0, 0.0, 0.0, 1.0;
    return r;
}

/// Point source used as an analytic ground truth for the field.
struct VirtualEmitter {
    Vec3 position = Vec3::Zero();
    double gain = 1.0;
    double phase = 0.0;
};

struct RisPanel {
    std::vector<Vec3> element_positions;
    std::vector<int> phase_indices;
    int levels = 4;  // L_c
    std::vector<double> element_amplitudes;
    /// Standard deviation of the isotropic element kernel in meters; 0 selects
    /// half the element pitch.
    double kernel_sigma = 0.0;

    std::size_t size() const { return element_positions.size(); }
    double phase(std::size_t n) const { return two_pi * phase_indices.at(n) / levels; }

    /// Minimum distance between two elements (0 for a single element).
    double pitch() const {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < size(); ++a)
            for (std::size_t b = a + 1; b < size(); ++b)
                best = std::min(best, (element_positions[a] - element_positions[b]).norm());
        return std::isfinite(best) ? best : 0.0;
    }

    double effective_sigma(double wavelength) const {
        if (kernel_sigma > 0.0) return kernel_sigma;
        const double p = pitch();
        return p > 0.0 ? 0.5 * p : 0.25 * wavelength;
    }
};

struct FasRegion {
    Pose frame;
    double width = 0.0;        // W, edge of the square S = [0, W]^2
    double min_spacing = 0.0;  // D
    std::vector<Vec2> positions;

    std::size_t size() const { return positions.size(); }

    Vec3 to_world(const Vec2& uv) const { return frame.to_world(Vec3(uv.x(), uv.y(), 0.0)); }
    Vec3 world_position(std::size_t m) const { return to_world(positions.at(m)); }
    Vec3 center() const { return to_world(Vec2(0.5 * width, 0.5 * width)); }
    Vec3 u_axis() const { return frame.axes.row(0).transpose(); }
    Vec3 v_axis() const { return frame.axes.row(1).transpose(); }
};

struct User {
    Vec3 position = Vec3::Zero();
    double power_dbm = 0.0;
    bool desired = false;
    /// Scale applied to this user's RIS primitives (per-user amplitude A^{(j)}).
    double ris_gain = 1.0;

    double power_watts() const { return dbm_to_watts(power_dbm); }
};

/// Correlation parameters for the statistical channel oracle.
struct ChannelParams {
    double rho_km = 0.9;
    double rho_rm = 0.9;
};

struct Scene {
    Pose rx_pose;
    FasRegion fas;
    RisPanel ris;
    std::vector<User> users;
    double wavelength = 0.0;
    double noise_dbm = -90.0;
    std::vector<Vec3> point_cloud;
    /// Environment (direct-path) primitives, tagged with the user they belong to.
    std::vector<GaussianPrimitive> environment;
    ChannelParams channel;

    double noise_watts() const { return dbm_to_watts(noise_dbm); }

    std::size_t desired_index() const {
        for (std::size_t i = 0; i < users.size(); ++i)
            if (users[i].desired) return i;
        throw ValidationError("scene has no desired user");
    }

    std::vector<GaussianPrimitive> environment_for(std::size_t user) const {
        std::vector<GaussianPrimitive> out;
        for (const auto& g : environment)
            if (g.user_tag == static_cast<int>(user)) out.push_back(g);
        return out;
    }
};

// ---- validation ----------------------------------------------------------------

inline bool spacing_ok(const Vec2& a, const Vec2& b, double d) {
    return (a - b).norm() >= d * (1.0 - 1e-9);
}

inline void validate_fas(const FasRegion& fas) {
    if (!fas.frame.orthonormal()) throw ValidationError("fas.frame: axes are not orthonormal");
    if (!(fas.width > 0.0) || !std::isfinite(fas.width)) throw ValidationError("fas.W_m must be positive");
    if (!(fas.min_spacing >= 0.0) || !std::isfinite(fas.min_spacing))
        throw ValidationError("fas.D_m must be non-negative");
    if (fas.positions.empty()) throw ValidationError("fas: at least one antenna required");
    for (std::size_t m = 0; m < fas.size(); ++m) {
        const Vec2& p = fas.positions[m];
        if (!p.allFinite() || p.x() < 0.0 || p.y() < 0.0 || p.x() > fas.width || p.y() > fas.width)
            throw ValidationError("fas antenna " + std::to_string(m) + " lies outside the region [0, W]^2");
    }
    for (std::size_t a = 0; a < fas.size(); ++a)
        for (std::size_t b = a + 1; b < fas.size(); ++b)
            if (!spacing_ok(fas.positions[a], fas.positions[b], fas.min_spacing))
                throw ValidationError("fas antennas " + std::to_string(a) + " and " + std::to_string(b) +
                                      " violate the minimum spacing D");
}

inline void validate_ris(const RisPanel& ris) {
    const std::size_t n = ris.element_positions.size();
    if (n == 0) throw ValidationError("ris: at least one element required");
    if (ris.phase_indices.size() != n || ris.element_amplitudes.size() != n)
        throw ValidationError("ris: elements, phase_indices and amplitudes must have equal length");
    if (ris.levels < 1) throw ValidationError("ris.Lc must be >= 1");
    for (std::size_t i = 0; i < n; ++i) {
        if (!ris.element_positions[i].allFinite()) throw ValidationError("ris element position is not finite");
        if (ris.phase_indices[i] < 0 || ris.phase_indices[i] >= ris.levels)
            throw ValidationError("ris element " + std::to_string(i) + ": phase index out of range");
        if (!(ris.element_amplitudes[i] >= 0.0) || !std::isfinite(ris.element_amplitudes[i]))
            throw ValidationError("ris element " + std::to_string(i) + ": amplitude must be finite and >= 0");
    }
    if (!(ris.kernel_sigma >= 0.0) || !std::isfinite(ris.kernel_sigma))
        throw ValidationError("ris.sigma_m must be non-negative");
}

inline void validate_scene(const Scene& s) {
    if (!(s.wavelength > 0.0) || !std::isfinite(s.wavelength)) throw ValidationError("wavelength_m must be positive");
    if (!std::isfinite(s.noise_dbm)) throw ValidationError("noise_dbm must be finite");
    if (!s.rx_pose.orthonormal()) throw ValidationError("rx_pose: axes are not orthonormal");
    validate_fas(s.fas);
    validate_ris(s.ris);
    if (s.users.empty()) throw ValidationError("users: at least one user required");
    int desired = 0;
    for (const auto& u : s.users) {
        if (!u.position.allFinite() || !std::isfinite(u.power_dbm) || !std::isfinite(u.ris_gain))
            throw ValidationError("users: non-finite value");
        desired += u.desired ? 1 : 0;
    }
    if (desired != 1) throw ValidationError("users: exactly one desired user required");
    for (const auto& g : s.environment) {
        if (g.user_tag < 0 || g.user_tag >= static_cast<int>(s.users.size()))
            throw ValidationError("primitive user_tag out of range");
        if (!g.center.allFinite() || !std::isfinite(g.amplitude) || g.amplitude < 0.0)
            throw ValidationError("primitive with non-finite center or invalid amplitude");
    }
    if (!(s.channel.rho_km >= 0.0 && s.channel.rho_km <= 1.0 && s.channel.rho_rm >= 0.0 && s.channel.rho_rm <= 1.0))
        throw ValidationError("channel: correlation coefficients must lie in [0, 1]");
    for (const auto& p : s.point_cloud)
        if (!p.allFinite()) throw ValidationError("point cloud contains a non-finite point");
}

// ---- point cloud binary I/O (little-endian float32 triples) ------------------

inline void write_point_cloud(const std::string& path, const std::vector<Vec3>& pts) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    for (const auto& p : pts) {
        for (int k = 0; k < 3; ++k) {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(p[k]));
            unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                  static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
            f.write(reinterpret_cast<const char*>(b), 4);
        }
    }
}

inline std::vector<Vec3> read_point_cloud(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open point cloud " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() % 12 != 0) throw FormatError(path + ": size is not a multiple of 12 bytes");
    std::vector<Vec3> pts(bytes.size() / 12);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            const unsigned char* b = &bytes[12 * i + 4 * k];
            std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
                                 (std::uint32_t(b[3]) << 24);
            pts[i][k] = static_cast<double>(std::bit_cast<float>(bits));
        }
    }
    return pts;
}

// ---- scene JSON ------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) throw SchemaError("'" + path + "' must be an object");
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError("missing key '" + (path.empty() ? "" : path + ".") + key + "'");
    return *it;
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError("'" + path + "' must be a number");
    return j.get<double>();
}

inline int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw SchemaError("'" + path + "' must be an integer");
    return j.get<int>();
}

inline Vec3 vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) throw SchemaError("'" + path + "' must be an array of 3 numbers");
    return {number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]")};
}

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Pose pose(const json& j, const std::string& path) {
    Pose p;
    p.origin = vec3(require(j, "origin", path), path + ".origin");
    const json& axes = require(j, "axes", path);
    if (!axes.is_array() || axes.size() != 3) throw SchemaError("'" + path + ".axes' must be a 3x3 array");
    for (int r = 0; r < 3; ++r) p.axes.row(r) = vec3(axes[r], path + ".axes[" + std::to_string(r) + "]").transpose();
    return p;
}

inline json pose_json(const Pose& p) {
    json axes = json::array();
    for (int r = 0; r < 3; ++r) axes.push_back(vec3_json(p.axes.row(r).transpose()));
    return {{"origin", vec3_json(p.origin)}, {"axes", axes}};
}

}  // namespace detail

/// Parses a scene document. Relative paths inside it resolve against `base_dir`.
inline Scene scene_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    using namespace detail;
    Scene s;
    s.wavelength = number(require(j, "wavelength_m", ""), "wavelength_m");
    s.noise_dbm = number(require(j, "noise_dbm", ""), "noise_dbm");
    s.rx_pose = pose(require(j, "rx_pose", ""), "rx_pose");

    const json& fas = require(j, "fas", "");
    s.fas.frame = pose(require(fas, "frame", "fas"), "fas.frame");
    s.fas.width = number(require(fas, "W_m", "fas"), "fas.W_m");
    s.fas.min_spacing = number(require(fas, "D_m", "fas"), "fas.D_m");
    const json& ants = require(fas, "antennas", "fas");
    if (!ants.is_array()) throw SchemaError("'fas.antennas' must be an array");
    for (std::size_t m = 0; m < ants.size(); ++m) {
        const std::string p = "fas.antennas[" + std::to_string(m) + "]";
        if (!ants[m].is_array() || ants[m].size() != 2) throw SchemaError("'" + p + "' must be [u, v]");
        s.fas.positions.emplace_back(number(ants[m][0], p), number(ants[m][1], p));
    }

    const json& ris = require(j, "ris", "");
    const json& elems = require(ris, "elements", "ris");
    const json& idx = require(ris, "phase_indices", "ris");
    const json& amps = require(ris, "amplitudes", "ris");
    if (!elems.is_array() || !idx.is_array() || !amps.is_array())
        throw SchemaError("'ris.elements', 'ris.phase_indices' and 'ris.amplitudes' must be arrays");
    for (std::size_t n = 0; n < elems.size(); ++n)
        s.ris.element_positions.push_back(vec3(elems[n], "ris.elements[" + std::to_string(n) + "]"));
    for (std::size_t n = 0; n < idx.size(); ++n)
        s.ris.phase_indices.push_back(integer(idx[n], "ris.phase_indices[" + std::to_string(n) + "]"));
    for (std::size_t n = 0; n < amps.size(); ++n)
        s.ris.element_amplitudes.push_back(number(amps[n], "ris.amplitudes[" + std::to_string(n) + "]"));
    s.ris.levels = integer(require(ris, "Lc", "ris"), "ris.Lc");
    if (ris.contains("sigma_m")) s.ris.kernel_sigma = number(ris["sigma_m"], "ris.sigma_m");

    const json& users = require(j, "users", "");
    if (!users.is_array()) throw SchemaError("'users' must be an array");
    for (std::size_t u = 0; u < users.size(); ++u) {
        const std::string p = "users[" + std::to_string(u) + "]";
        User usr;
        usr.position = vec3(require(users[u], "position", p), p + ".position");
        usr.power_dbm = number(require(users[u], "power_dbm", p), p + ".power_dbm");
        const json& d = require(users[u], "desired", p);
        if (!d.is_boolean()) throw SchemaError("'" + p + ".desired' must be a boolean");
        usr.desired = d.get<bool>();
        if (users[u].contains("ris_gain")) usr.ris_gain = number(users[u]["ris_gain"], p + ".ris_gain");
        s.users.push_back(usr);
    }

    if (j.contains("channel")) {
        const json& c = j["channel"];
        if (c.contains("rho_km")) s.channel.rho_km = number(c["rho_km"], "channel.rho_km");
        if (c.contains("rho_rm")) s.channel.rho_rm = number(c["rho_rm"], "channel.rho_rm");
    }

    if (j.contains("point_cloud_path")) {
        const json& p = j["point_cloud_path"];
        if (!p.is_string()) throw SchemaError("'point_cloud_path' must be a string");
        std::filesystem::path pp = p.get<std::string>();
        if (pp.is_relative()) pp = base_dir / pp;
        s.point_cloud = read_point_cloud(pp.string());
    }
    if (j.contains("primitives_path")) {
        const json& p = j["primitives_path"];
        if (!p.is_string()) throw SchemaError("'primitives_path' must be a string");
        std::filesystem::path pp = p.get<std::string>();
        if (pp.is_relative()) pp = base_dir / pp;
        auto prims = load_primitives_csv(pp.string());
        s.environment.insert(s.environment.end(), prims.begin(), prims.end());
    }
    if (j.contains("primitives")) {
        const json& arr = j["primitives"];
        if (!arr.is_array()) throw SchemaError("'primitives' must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string p = "primitives[" + std::to_string(i) + "]";
            if (!arr[i].is_array() || arr[i].size() != 12) throw SchemaError("'" + p + "' must hold 12 numbers");
            std::vector<double> row;
            for (std::size_t k = 0; k < 12; ++k) row.push_back(number(arr[i][k], p));
            s.environment.push_back(primitive_from_row(row));
        }
    }
    validate_scene(s);
    return s;
}

/// Serialises a scene. Environment primitives are stored inline; the point
/// cloud is referenced through `point_cloud_path` when one is given.
inline nlohmann::json scene_to_json(const Scene& s, const std::string& point_cloud_path = {}) {
    using namespace detail;
    json j;
    j["wavelength_m"] = s.wavelength;
    j["noise_dbm"] = s.noise_dbm;
    j["rx_pose"] = pose_json(s.rx_pose);
    json ants = json::array();
    for (const auto& p : s.fas.positions) ants.push_back(json::array({p.x(), p.y()}));
    j["fas"] = {{"frame", pose_json(s.fas.frame)}, {"W_m", s.fas.width}, {"D_m", s.fas.min_spacing}, {"antennas", ants}};
    json elems = json::array();
    for (const auto& e : s.ris.element_positions) elems.push_back(vec3_json(e));
    j["ris"] = {{"elements", elems},
                {"phase_indices", s.ris.phase_indices},
                {"Lc", s.ris.levels},
                {"amplitudes", s.ris.element_amplitudes}};
    if (s.ris.kernel_sigma > 0.0) j["ris"]["sigma_m"] = s.ris.kernel_sigma;
    json users = json::array();
    for (const auto& u : s.users)
        users.push_back({{"position", vec3_json(u.position)},
                         {"power_dbm", u.power_dbm},
                         {"desired", u.desired},
                         {"ris_gain", u.ris_gain}});
    j["users"] = users;
    j["channel"] = {{"rho_km", s.channel.rho_km}, {"rho_rm", s.channel.rho_rm}};
    if (!s.environment.empty()) {
        json prims = json::array();
        for (const auto& g : s.environment) prims.push_back(primitive_to_row(g));
        j["primitives"] = prims;
    }
    if (!point_cloud_path.empty()) j["point_cloud_path"] = point_cloud_path;
    return j;
}

inline Scene load_scene(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open scene file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path + ": " + e.what());
    }
    try {
        return scene_from_json(j, std::filesystem::path(path).parent_path());
    } catch (const SchemaError& e) {
        throw SchemaError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

/// Writes the scene JSON; a non-empty point cloud goes to `<stem>.points.bin` beside it.
inline void save_scene(const std::string& path, const Scene& s) {
    std::string pc_rel;
    if (!s.point_cloud.empty()) {
        const std::filesystem::path p(path);
        pc_rel = p.stem().string() + ".points.bin";
        write_point_cloud((p.parent_path() / pc_rel).string(), s.point_cloud);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << scene_to_json(s, pc_rel).dump(2) << '\n';
}

// ---- point-cloud initialisation ------------------------------------------------

inline constexpr double covariance_floor = 1e-6;  // m^2

/// Symmetrises and raises every eigenvalue to at least `floor`.
inline Mat3 floor_covariance(const Mat3& c, double floor = covariance_floor) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (c + c.transpose()));
    Vec3 ev = es.eigenvalues().cwiseMax(floor);
    Mat3 out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

/// One primitive per (deduplicated, optionally voxel-averaged) point. The
/// covariance is the population covariance of the `neighbor_count` nearest
/// other points, floored at 1e-6 m^2. Amplitude 1, phase 0.
inline std::vector<GaussianPrimitive> init_primitives_from_pointcloud(const std::vector<Vec3>& points,
                                                                       int neighbor_count,
                                                                       double downsample_voxel = 0.0) {
    if (neighbor_count < 1) throw ArgumentError("neighbor_count must be >= 1");
    std::vector<Vec3> pts;
    {
        std::vector<std::array<double, 3>> seen;
        for (const auto& p : points) {
            std::array<double, 3> k{p.x(), p.y(), p.z()};
            if (std::find(seen.begin(), seen.end(), k) == seen.end()) {
                seen.push_back(k);
                pts.push_back(p);
            }
        }
    }
    if (downsample_voxel > 0.0) {
        std::map<std::array<long long, 3>, std::size_t> slot;
        std::vector<Vec3> sum;
        std::vector<int> count;
        for (const auto& p : pts) {
            std::array<long long, 3> key{static_cast<long long>(std::floor(p.x() / downsample_voxel)),
                                         static_cast<long long>(std::floor(p.y() / downsample_voxel)),
                                         static_cast<long long>(std::floor(p.z() / downsample_voxel))};
            auto [it, inserted] = slot.try_emplace(key, sum.size());
            if (inserted) {
                sum.push_back(Vec3::Zero());
                count.push_back(0);
            }
            sum[it->second] += p;
            count[it->second] += 1;
        }
        pts.clear();
        for (std::size_t i = 0; i < sum.size(); ++i) pts.push_back(sum[i] / count[i]);
    }
    if (pts.size() == 1 && downsample_voxel > 0.0) {
        GaussianPrimitive g;
        g.center = pts[0];
        g.covariance = floor_covariance(Mat3::Zero());
        return {g};
    }
    if (pts.size() < static_cast<std::size_t>(neighbor_count) + 1)
        throw ArgumentError("init_primitives_from_pointcloud: need at least neighbor_count + 1 distinct points, have " +
                            std::to_string(pts.size()));

    std::vector<GaussianPrimitive> out;
    out.reserve(pts.size());
    std::vector<std::pair<double, std::size_t>> dist(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t k = 0; k < pts.size(); ++k) dist[k] = {(pts[k] - pts[i]).squaredNorm(), k};
        dist[i].first = std::numeric_limits<double>::infinity();
        std::partial_sort(dist.begin(), dist.begin() + neighbor_count, dist.end());
        Vec3 mean = Vec3::Zero();
        for (int k = 0; k < neighbor_count; ++k) mean += pts[dist[k].second];
        mean /= neighbor_count;
        Mat3 cov = Mat3::Zero();
        for (int k = 0; k < neighbor_count; ++k) {
            const Vec3 d = pts[dist[k].second] - mean;
            cov += d * d.transpose();
        }
        cov /= neighbor_count;
        GaussianPrimitive g;
        g.center = pts[i];
        g.covariance = floor_covariance(cov);
        out.push_back(g);
    }
    return out;
}

// ---- synthetic scenes ----------------------------------------------------------

inline Vec3 float_round(const Vec3& v) {
    return {static_cast<double>(static_cast<float>(v.x())), static_cast<double>(static_cast<float>(v.y())),
            static_cast<double>(static_cast<float>(v.z()))};
}

/// Row-major uniform grid of `count` antennas over [0, W]^2 at cell centers.
inline std::vector<Vec2> uniform_fas_grid(std::size_t count, double width) {
    const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
    const std::size_t rows = (count + cols - 1) / cols;
    std::vector<Vec2> out;
    for (std::size_t m = 0; m < count; ++m) {
        const std::size_t r = m / cols, c = m % cols;
        out.emplace_back((c + 0.5) * width / cols, (r + 0.5) * width / rows);
    }
    return out;
}

struct SyntheticSpec {
    int emitter_count = 4;
    double region_extent = 10.0;  // edge of the cube centred on the receiver, m
    std::uint64_t seed = 0;
    double wavelength = 0.1;
    int points_per_emitter = 16;
    double cluster_spread = 0.4;  // std of point-cloud jitter around each emitter, m
    double min_range = 2.0;       // emitters keep this distance from the receiver
};

struct SyntheticScene {
    Scene scene;
    std::vector<VirtualEmitter> emitters;
};

/// Receiver at the origin, `emitter_count` virtual emitters uniform in the
/// cube, and a point cloud of jittered clusters around each emitter (rounded
/// to float32 so that the binary point-cloud file round-trips).
inline SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec) {
    if (spec.emitter_count < 1) throw ArgumentError("generate_synthetic_scene: emitter count must be >= 1");
    if (!(spec.region_extent > 0.0)) throw ArgumentError("generate_synthetic_scene: region extent must be positive");
    Rng rng(spec.seed);
    const double h = 0.5 * spec.region_extent;
    const double min_range = std::min(spec.min_range, 0.5 * h);
    SyntheticScene out;
    for (int l = 0; l < spec.emitter_count; ++l) {
        VirtualEmitter e;
        do {
            e.position = Vec3(rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-h, h));
        } while (e.position.norm() < min_range);
        e.gain = rng.uniform(0.5, 1.0);
        e.phase = rng.uniform(0.0, two_pi);
        out.emitters.push_back(e);
    }
    Scene& s = out.scene;
    s.wavelength = spec.wavelength;
    s.noise_dbm = -90.0;
    s.fas.width = spec.wavelength;
    s.fas.min_spacing = 0.0;
    s.fas.frame.origin = Vec3(-0.5 * spec.wavelength, -0.5 * spec.wavelength, 0.0);
    s.fas.positions = {Vec2(0.5 * spec.wavelength, 0.5 * spec.wavelength)};
    s.ris.element_positions = {Vec3(0.0, h, 0.0)};
    s.ris.phase_indices = {0};
    s.ris.levels = 4;
    s.ris.element_amplitudes = {0.0};
    User tx;
    tx.position = Vec3(rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-h, h));
    tx.power_dbm = 10.0;
    tx.desired = true;
    s.users.push_back(tx);
    for (const auto& e : out.emitters)
        for (int k = 0; k < spec.points_per_emitter; ++k)
            s.point_cloud.push_back(float_round(
                e.position + spec.cluster_spread * Vec3(rng.normal(), rng.normal(), rng.normal())));
    return out;
}

/// Parameters of the desk-scale RIS/FAS scenes used by the optimizer, the
/// baselines and the sweeps. Lengths ending in `_wl` are in wavelengths.
struct DeskSpec {
    int ris_elements = 64;
    int fas_antennas = 16;
    int levels = 4;
    double wavelength = 0.1;
    double fas_width_wl = 1.0;
    double min_spacing_wl = 0.2;
    double power_dbm = 10.0;
    double noise_dbm = -90.0;
    int interferers = 1;
    int hotspots = 12;
    double hotspot_extent_wl = 4.0;
    double ris_x = 3.0;
    double ris_reflectivity = 0.1;
    std::uint64_t seed = 1;
};

/// Builds a desk scene. The FAS region is centred on the world origin in the
/// z = 0 plane. Every user owns a broad line-of-sight primitive plus
/// `hotspots` small-scale primitives scattered over the plane; the RIS panel
/// is a vertical grid with half-wavelength pitch at x = `ris_x`.
///
/// The random streams for users/hotspots and for the RIS do not depend on the
/// swept quantities (N, W, ris_x, power), so scenes with equal seeds are paired.
inline Scene make_desk_scene(const DeskSpec& spec) {
    if (spec.ris_elements < 1 || spec.fas_antennas < 1 || spec.levels < 1 || spec.interferers < 0)
        throw ArgumentError("make_desk_scene: invalid counts");
    const double lam = spec.wavelength;
    const double W = spec.fas_width_wl * lam;
    Scene s;
    s.wavelength = lam;
    s.noise_dbm = spec.noise_dbm;
    s.rx_pose.origin = Vec3(0.0, 0.0, -0.5);
    s.fas.width = W;
    s.fas.min_spacing = spec.min_spacing_wl * lam;
    s.fas.frame.origin = Vec3(-0.5 * W, -0.5 * W, 0.0);
    s.fas.positions = uniform_fas_grid(static_cast<std::size_t>(spec.fas_antennas), W);

    Rng geo(spec.seed * 0x9E3779B97F4A7C15ULL + 11);
    const int n_users = 1 + spec.interferers;
    for (int u = 0; u < n_users; ++u) {
        User usr;
        if (u == 0)
            usr.position = Vec3(geo.uniform(4.0, 7.0), geo.uniform(-2.0, 2.0), geo.uniform(1.0, 2.0));
        else
            usr.position = Vec3(geo.uniform(-14.0, -10.0), geo.uniform(-4.0, 4.0), geo.uniform(1.0, 2.0));
        usr.power_dbm = spec.power_dbm;
        usr.desired = (u == 0);
        s.users.push_back(usr);
    }
    const Vec3 fas_center = s.fas.center();
    const double ext = spec.hotspot_extent_wl * lam;
    for (int u = 0; u < n_users; ++u) {
        const double a_dir = lam / (4.0 * pi * (s.users[u].position - fas_center).norm());
        GaussianPrimitive los;
        los.center = fas_center + Vec3(geo.uniform(-ext, ext), geo.uniform(-ext, ext), 0.0);
        los.covariance = isotropic_covariance(3.0 * lam);
        los.amplitude = a_dir;
        los.phase = geo.uniform(0.0, two_pi);
        los.user_tag = u;
        s.environment.push_back(los);
        for (int h = 0; h < spec.hotspots; ++h) {
            GaussianPrimitive g;
            g.center = fas_center + Vec3(geo.uniform(-0.5 * ext, 0.5 * ext), geo.uniform(-0.5 * ext, 0.5 * ext),
                                         geo.uniform(-0.1 * lam, 0.1 * lam));
            g.covariance = isotropic_covariance(geo.uniform(0.15, 0.4) * lam);
            g.amplitude = a_dir * geo.uniform(0.5, 1.0);
            g.phase = geo.uniform(0.0, two_pi);
            g.user_tag = u;
            s.environment.push_back(g);
        }
    }

    const int n = spec.ris_elements;
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const int rows = (n + cols - 1) / cols;
    const Vec3 ris_center(spec.ris_x, 2.0, 1.0);
    const double pitch = 0.5 * lam;
    for (int i = 0; i < n; ++i) {
        const int r = i / cols, c = i % cols;
        const Vec3 p = ris_center + Vec3(0.0, (c - 0.5 * (cols - 1)) * pitch, (r - 0.5 * (rows - 1)) * pitch);
        s.ris.element_positions.push_back(p);
        s.ris.phase_indices.push_back(0);
        s.ris.element_amplitudes.push_back(spec.ris_reflectivity / (p - fas_center).norm());
    }
    s.ris.levels = spec.levels;
    // Envelope of every element kernel is ~0.5 at the FAS centre.
    s.ris.kernel_sigma = (ris_center - fas_center).norm() / std::sqrt(2.0 * std::log(2.0));
    for (auto& u : s.users) u.ris_gain = lam / (4.0 * pi * (u.position - ris_center).norm());
    validate_scene(s);
    return s;
}

// ---- spectrum datasets ----------------------------------------------------------

struct SpectrumSample {
    Vec3 tx_position = Vec3::Zero();
    Eigen::MatrixXd power;  // n_lat x n_lon, linear, >= 0
};

struct SpectrumDataset {
    int n_lat = 0;
    int n_lon = 0;
    double train_fraction = 0.8;
    std::uint64_t shuffle_seed = 0;
    std::vector<SpectrumSample> samples;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded Fisher-Yates permutation of 0..n-1; the first round(f*n) entries
/// become the training split. Both splits are returned sorted.
inline void compute_split(SpectrumDataset& ds) {
    const std::size_t n = ds.samples.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(ds.shuffle_seed);
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(ds.train_fraction * static_cast<double>(n)));
    ds.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)));
    ds.test.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)), order.end());
    std::sort(ds.train.begin(), ds.train.end());
    std::sort(ds.test.begin(), ds.test.end());
}

inline SpectrumSample load_spectrum_sample(const std::string& path, int n_lat, int n_lon) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError(path + ": empty sample file");
    std::istringstream head(line);
    std::string tag;
    SpectrumSample s;
    head >> tag;
    if (tag != "tx") throw FormatError(path + ": first line must be 'tx x y z'");
    std::string xs, ys, zs;
    head >> xs >> ys >> zs;
    s.tx_position = Vec3(parse_double(xs), parse_double(ys), parse_double(zs));
    s.power.resize(n_lat, n_lon);
    int r = 0;
    while (std::getline(f, line)) {
        if (line.empty() || line == "\r") continue;
        if (r >= n_lat) throw FormatError(path + ": grid-shape mismatch (too many rows)");
        const auto vals = split_csv_numbers(line);
        if (static_cast<int>(vals.size()) != n_lon)
            throw FormatError(path + ": grid-shape mismatch (row " + std::to_string(r) + " has " +
                              std::to_string(vals.size()) + " values)");
        for (int c = 0; c < n_lon; ++c) {
            if (!(vals[c] >= 0.0) || !std::isfinite(vals[c]))
                throw FormatError(path + ": negative or non-finite power value");
            s.power(r, c) = vals[c];
        }
        ++r;
    }
    if (r != n_lat) throw FormatError(path + ": grid-shape mismatch (" + std::to_string(r) + " rows)");
    return s;
}

inline SpectrumDataset load_spectrum_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);
    const fs::path meta_path = fs::path(dir) / "meta.json";
    if (!fs::exists(meta_path)) throw FormatError(dir + ": missing meta.json");
    std::ifstream mf(meta_path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(mf);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(meta_path.string() + ": " + e.what());
    }
    SpectrumDataset ds;
    try {
        ds.n_lat = detail::integer(detail::require(meta, "n_lat", ""), "n_lat");
        ds.n_lon = detail::integer(detail::require(meta, "n_lon", ""), "n_lon");
        ds.train_fraction = detail::number(detail::require(meta, "train_fraction", ""), "train_fraction");
        const auto& seed = detail::require(meta, "shuffle_seed", "");
        if (!seed.is_number_unsigned() && !seed.is_number_integer()) throw SchemaError("'shuffle_seed' must be an integer");
        ds.shuffle_seed = seed.get<std::uint64_t>();
    } catch (const SchemaError& e) {
        throw FormatError(meta_path.string() + ": " + e.what());
    }
    if (ds.n_lat < 1 || ds.n_lon < 1) throw FormatError("meta.json: grid dimensions must be >= 1");
    if (!(ds.train_fraction >= 0.0 && ds.train_fraction <= 1.0))
        throw FormatError("meta.json: train_fraction must lie in [0, 1]");

    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("sample_", 0) == 0 && e.path().extension() == ".csv") names.push_back(name);
    }
    if (names.empty()) throw FormatError(dir + ": no samples found");
    std::sort(names.begin(), names.end());
    for (const auto& n : names) ds.samples.push_back(load_spectrum_sample((fs::path(dir) / n).string(), ds.n_lat, ds.n_lon));
    compute_split(ds);
    return ds;
}

inline void write_grid_csv(std::ostream& f, const Eigen::MatrixXd& grid) {
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid.cols(); ++c) f << (c ? "," : "") << format_double(grid(r, c));
        f << '\n';
    }
}

inline void save_spectrum_dataset(const std::string& dir, const SpectrumDataset& ds) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream mf(fs::path(dir) / "meta.json", std::ios::binary);
        if (!mf) throw IoError("cannot write meta.json in " + dir);
        nlohmann::json meta = {{"n_lat", ds.n_lat},
                               {"n_lon", ds.n_lon},
                               {"train_fraction", ds.train_fraction},
                               {"shuffle_seed", ds.shuffle_seed}};
        mf << meta.dump(2) << '\n';
    }
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%06zu.csv", i);
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        if (!f) throw IoError(std::string("cannot write ") + name);
        const auto& s = ds.samples[i];
        f << "tx " << format_double(s.tx_position.x()) << ' ' << format_double(s.tx_position.y()) << ' '
          << format_double(s.tx_position.z()) << '\n';
        write_grid_csv(f, s.power);
    }
}

}  // namespace rfgs
