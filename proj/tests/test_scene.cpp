// SPDX-License-Identifier: Apache-2.0

#include "rfgs/field.hpp"
#include "rfgs/scene.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

using namespace rfgs;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json table_one_scene() {
    const double lam = 0.1;
    json ants = json::array();
    for (const auto& p : uniform_fas_grid(16, lam)) ants.push_back({p.x(), p.y()});
    json elems = json::array(), idx = json::array(), amps = json::array();
    for (int n = 0; n < 64; ++n) {
        elems.push_back({3.0, 0.05 * (n % 8), 0.05 * (n / 8)});
        idx.push_back(n % 4);
        amps.push_back(1.0);
    }
    const json eye = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    return {{"wavelength_m", lam},
            {"noise_dbm", -90.0},
            {"rx_pose", {{"origin", {0, 0, 0}}, {"axes", eye}}},
            {"fas", {{"frame", {{"origin", {0, 0, 0}}, {"axes", eye}}}, {"W_m", lam}, {"D_m", lam / 5}, {"antennas", ants}}},
            {"ris", {{"elements", elems}, {"phase_indices", idx}, {"Lc", 4}, {"amplitudes", amps}}},
            {"users", {{{"position", {5, 0, 1}}, {"power_dbm", 10.0}, {"desired", true}}}}};
}

std::string write_json(const fs::path& dir, const json& j) {
    const auto p = dir / "scene.json";
    std::ofstream(p) << j.dump(2);
    return p.string();
}

}  // namespace

TEST(LoadScene, TableOneParameters) {
    const auto dir = test::temp_dir("scene");
    const Scene s = load_scene(write_json(dir, table_one_scene()));
    EXPECT_EQ(s.ris.size(), 64u);
    EXPECT_EQ(s.ris.levels, 4);
    EXPECT_EQ(s.fas.size(), 16u);
    EXPECT_DOUBLE_EQ(s.fas.width, s.wavelength);
    EXPECT_DOUBLE_EQ(s.users[0].power_dbm, 10.0);
    EXPECT_NEAR(s.users[0].power_watts(), 0.01, 1e-15);
    EXPECT_NEAR(s.noise_watts(), 1e-12, 1e-24);
}

TEST(LoadScene, PhaseIndexOutOfRange) {
    auto j = table_one_scene();
    j["ris"]["phase_indices"][5] = 4;
    const auto dir = test::temp_dir("scene");
    try {
        load_scene(write_json(dir, j));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("phase index out of range"), std::string::npos);
    }
}

TEST(LoadScene, CoincidentAntennasViolateSpacing) {
    auto j = table_one_scene();
    j["fas"]["antennas"][1] = j["fas"]["antennas"][0];
    const auto dir = test::temp_dir("scene");
    try {
        load_scene(write_json(dir, j));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("minimum spacing"), std::string::npos);
    }
}

TEST(LoadScene, MissingKeyNamesThePath) {
    auto j = table_one_scene();
    j["fas"].erase("W_m");
    const auto dir = test::temp_dir("scene");
    try {
        load_scene(write_json(dir, j));
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("fas.W_m"), std::string::npos);
    }
}

TEST(LoadScene, MalformedJsonIsSchemaError) {
    const auto dir = test::temp_dir("scene");
    std::ofstream(dir / "bad.json") << "{\"wavelength_m\": 0.1,";
    EXPECT_THROW(load_scene((dir / "bad.json").string()), SchemaError);
    EXPECT_THROW(load_scene((dir / "absent.json").string()), IoError);
}

TEST(LoadScene, AntennaOutsideRegion) {
    auto j = table_one_scene();
    j["fas"]["antennas"][0] = {-0.01, 0.02};
    const auto dir = test::temp_dir("scene");
    EXPECT_THROW(load_scene(write_json(dir, j)), ValidationError);
}

TEST(LoadScene, ExactlyOneDesiredUser) {
    auto j = table_one_scene();
    j["users"].push_back({{"position", {1, 1, 1}}, {"power_dbm", 10.0}, {"desired", true}});
    const auto dir = test::temp_dir("scene");
    EXPECT_THROW(load_scene(write_json(dir, j)), ValidationError);
}

TEST(SceneRoundTrip, DeskSceneIsBitExact) {
    DeskSpec spec;
    spec.seed = 42;
    Scene s = make_desk_scene(spec);
    s.point_cloud = {float_round(Vec3(0.1, 0.2, 0.3)), float_round(Vec3(-1.7, 2.25, 1e-3))};
    const auto dir = test::temp_dir("scene");
    const std::string path = (dir / "desk.json").string();
    save_scene(path, s);
    const Scene t = load_scene(path);
    EXPECT_EQ(scene_to_json(s, "x").dump(), scene_to_json(t, "x").dump());
    ASSERT_EQ(t.environment.size(), s.environment.size());
    for (std::size_t i = 0; i < s.environment.size(); ++i) {
        EXPECT_EQ(t.environment[i].center, s.environment[i].center);
        EXPECT_EQ(t.environment[i].covariance, s.environment[i].covariance);
        EXPECT_EQ(t.environment[i].amplitude, s.environment[i].amplitude);
        EXPECT_EQ(t.environment[i].phase, s.environment[i].phase);
    }
    EXPECT_EQ(t.point_cloud, s.point_cloud);
    EXPECT_EQ(t.ris.element_amplitudes, s.ris.element_amplitudes);
    EXPECT_EQ(t.ris.kernel_sigma, s.ris.kernel_sigma);
    EXPECT_EQ(t.users[1].ris_gain, s.users[1].ris_gain);
}

TEST(PointCloud, BinaryRoundTrip) {
    const auto dir = test::temp_dir("pc");
    const std::vector<Vec3> pts = {float_round(Vec3(1.5, -2.0, 0.1)), float_round(Vec3(3.25, 0.0, -7.0))};
    write_point_cloud((dir / "p.bin").string(), pts);
    EXPECT_EQ(fs::file_size(dir / "p.bin"), 24u);
    EXPECT_EQ(read_point_cloud((dir / "p.bin").string()), pts);
}

TEST(SyntheticScene, SeedDeterministic) {
    SyntheticSpec spec;
    spec.emitter_count = 1;
    spec.region_extent = 10.0;
    spec.seed = 7;
    const auto a = generate_synthetic_scene(spec);
    const auto b = generate_synthetic_scene(spec);
    EXPECT_EQ(scene_to_json(a.scene).dump(), scene_to_json(b.scene).dump());
    EXPECT_EQ(a.scene.point_cloud, b.scene.point_cloud);
    EXPECT_EQ(a.emitters[0].position, b.emitters[0].position);
    spec.seed = 8;
    const auto c = generate_synthetic_scene(spec);
    EXPECT_NE(a.emitters[0].position, c.emitters[0].position);
}

TEST(SyntheticScene, EmittersInsideBox) {
    SyntheticSpec spec;
    spec.emitter_count = 3;
    spec.seed = 1;
    const auto out = generate_synthetic_scene(spec);
    ASSERT_EQ(out.emitters.size(), 3u);
    for (const auto& e : out.emitters) EXPECT_LE(e.position.cwiseAbs().maxCoeff(), 0.5 * spec.region_extent);
}

TEST(SyntheticScene, FieldEqualsTwoPathSum) {
    SyntheticSpec spec;
    spec.emitter_count = 2;
    spec.seed = 5;
    const auto out = generate_synthetic_scene(spec);
    const Vec3 probe(0.3, -0.4, 0.2);
    cplx want = 0.0;
    for (const auto& e : out.emitters) {
        const double d = std::hypot(probe.x() - e.position.x(), probe.y() - e.position.y(), probe.z() - e.position.z());
        want += e.gain * std::exp(cplx(0.0, e.phase - two_pi * d / spec.wavelength));
    }
    EXPECT_LT(std::abs(virtual_emitter_field(out.emitters, probe, spec.wavelength) - want), 1e-12);
}

TEST(SyntheticScene, ZeroEmittersRejected) {
    SyntheticSpec spec;
    spec.emitter_count = 0;
    EXPECT_THROW(generate_synthetic_scene(spec), ArgumentError);
}

TEST(DeskScene, PairedAcrossSweptParameters) {
    DeskSpec a;
    a.seed = 3;
    DeskSpec b = a;
    b.power_dbm = -5.0;
    b.ris_elements = 16;
    const Scene sa = make_desk_scene(a), sb = make_desk_scene(b);
    ASSERT_EQ(sa.environment.size(), sb.environment.size());
    for (std::size_t i = 0; i < sa.environment.size(); ++i) EXPECT_EQ(sa.environment[i].center, sb.environment[i].center);
    EXPECT_EQ(sa.users[0].position, sb.users[0].position);
}

TEST(PointCloudInit, CubeCornersSymmetric) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i) pts.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    const auto prims = init_primitives_from_pointcloud(pts, 3);
    ASSERT_EQ(prims.size(), 8u);
    for (std::size_t i = 0; i < prims.size(); ++i) {
        EXPECT_EQ(prims[i].center, pts[i]);
        EXPECT_EQ(prims[i].covariance, prims[i].covariance.transpose());
        EXPECT_EQ(prims[i].amplitude, 1.0);
        EXPECT_EQ(prims[i].phase, 0.0);
        // The three neighbours of a corner sit on the three adjacent edges, so
        // the spectrum is the same at every corner.
        Eigen::SelfAdjointEigenSolver<Mat3> es(prims[i].covariance);
        Eigen::SelfAdjointEigenSolver<Mat3> e0(prims[0].covariance);
        EXPECT_LT((es.eigenvalues() - e0.eigenvalues()).norm(), 1e-12);
    }
}

TEST(PointCloudInit, PlanarPointsHitTheFloor) {
    Rng rng(21);
    std::vector<Vec3> pts;
    for (int i = 0; i < 40; ++i) pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.5);
    const auto prims = init_primitives_from_pointcloud(pts, 6);
    for (const auto& g : prims) {
        // Independent recomputation of the neighbour covariance.
        std::vector<std::pair<double, int>> d;
        for (int k = 0; k < 40; ++k)
            if (pts[k] != g.center) d.push_back({(pts[k] - g.center).norm(), k});
        std::sort(d.begin(), d.end());
        Eigen::MatrixXd nb(6, 3);
        for (int k = 0; k < 6; ++k) nb.row(k) = pts[d[k].second].transpose();
        const Eigen::MatrixXd centered = nb.rowwise() - nb.colwise().mean();
        const Mat3 cov = centered.transpose() * centered / 6.0;
        Eigen::SelfAdjointEigenSolver<Mat3> raw(cov);
        EXPECT_LT(std::abs(raw.eigenvalues()[0]), 1e-15);  // rank 2
        EXPECT_GT(raw.eigenvalues()[1], covariance_floor);
        Eigen::SelfAdjointEigenSolver<Mat3> es(g.covariance);
        EXPECT_NEAR(es.eigenvalues()[0], covariance_floor, 1e-15);
        EXPECT_NEAR(es.eigenvalues()[1], raw.eigenvalues()[1], 1e-12);
        EXPECT_NEAR(es.eigenvalues()[2], raw.eigenvalues()[2], 1e-12);
    }
}

TEST(PointCloudInit, SingleVoxelGivesCentroid) {
    const std::vector<Vec3> pts = {Vec3(0.1, 0.1, 0.1), Vec3(0.3, 0.2, 0.1), Vec3(0.2, 0.4, 0.3)};
    const auto prims = init_primitives_from_pointcloud(pts, 1, 10.0);
    ASSERT_EQ(prims.size(), 1u);
    EXPECT_LT((prims[0].center - Vec3(0.2, 0.7 / 3, 0.5 / 3)).norm(), 1e-15);
}

TEST(PointCloudInit, DuplicatesRemovedAndTooFewRejected) {
    const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(1, 0, 0)};
    EXPECT_EQ(init_primitives_from_pointcloud(pts, 1).size(), 2u);
    EXPECT_THROW(init_primitives_from_pointcloud(pts, 2), ArgumentError);
}

TEST(PointCloudInit, CovariancesArePositiveDefiniteAndCentersAreInputs) {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Vec3> pts;
        const int n = 10 + static_cast<int>(rng.index(30));
        for (int i = 0; i < n; ++i) {
            pts.emplace_back(rng.normal(), rng.normal(), rng.normal());
            if (rng.bernoulli(0.2)) pts.push_back(pts.back());
            if (rng.bernoulli(0.2)) pts.emplace_back(pts.back().x(), pts.back().y(), 0.0);
        }
        const auto prims = init_primitives_from_pointcloud(pts, 4);
        for (const auto& g : prims) {
            EXPECT_EQ(Eigen::LLT<Mat3>(g.covariance).info(), Eigen::Success);
            EXPECT_EQ(g.covariance, g.covariance.transpose());
            EXPECT_NE(std::find(pts.begin(), pts.end(), g.center), pts.end());
        }
    }
}

namespace {

SpectrumDataset tiny_dataset(int n, double fraction) {
    SpectrumDataset ds;
    ds.n_lat = 2;
    ds.n_lon = 3;
    ds.train_fraction = fraction;
    ds.shuffle_seed = 9;
    for (int i = 0; i < n; ++i) {
        SpectrumSample s;
        s.tx_position = Vec3(i, 0.5, -1.25);
        s.power = Eigen::MatrixXd::Constant(2, 3, 0.1 * i);
        ds.samples.push_back(s);
    }
    return ds;
}

}  // namespace

TEST(SpectrumDataset, SplitEightTwo) {
    const auto dir = test::temp_dir("ds");
    save_spectrum_dataset(dir.string(), tiny_dataset(10, 0.8));
    const auto ds = load_spectrum_dataset(dir.string());
    ASSERT_EQ(ds.samples.size(), 10u);
    EXPECT_EQ(ds.train.size(), 8u);
    EXPECT_EQ(ds.test.size(), 2u);
    std::set<std::size_t> all(ds.train.begin(), ds.train.end());
    for (auto i : ds.test) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), 10u);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(ds.samples[i].tx_position.x(), i);
}

TEST(SpectrumDataset, SplitIsPartitionForManyFractions) {
    for (int n : {1, 2, 7, 33})
        for (double f : {0.0, 0.25, 0.5, 0.8, 1.0}) {
            auto ds = tiny_dataset(n, f);
            compute_split(ds);
            std::vector<std::size_t> all(ds.train);
            all.insert(all.end(), ds.test.begin(), ds.test.end());
            std::sort(all.begin(), all.end());
            ASSERT_EQ(all.size(), static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) EXPECT_EQ(all[i], static_cast<std::size_t>(i));
        }
}

TEST(SpectrumDataset, NegativePowerRejected) {
    const auto dir = test::temp_dir("ds");
    save_spectrum_dataset(dir.string(), tiny_dataset(3, 0.8));
    std::ofstream(dir / "sample_000001.csv") << "tx 0 0 0\n0,0,0\n0,-1,0\n";
    EXPECT_THROW(load_spectrum_dataset(dir.string()), FormatError);
}

TEST(SpectrumDataset, EmptyDirectory) {
    const auto dir = test::temp_dir("ds");
    std::ofstream(dir / "meta.json") << R"({"n_lat": 2, "n_lon": 3, "train_fraction": 0.8, "shuffle_seed": 1})";
    try {
        load_spectrum_dataset(dir.string());
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("no samples found"), std::string::npos);
    }
}

TEST(SpectrumDataset, MissingMetadataAndShapeMismatch) {
    const auto dir = test::temp_dir("ds");
    save_spectrum_dataset(dir.string(), tiny_dataset(3, 0.8));
    std::ofstream(dir / "sample_000002.csv") << "tx 0 0 0\n0,0,0\n0,0\n";
    EXPECT_THROW(load_spectrum_dataset(dir.string()), FormatError);
    fs::remove(dir / "meta.json");
    EXPECT_THROW(load_spectrum_dataset(dir.string()), FormatError);
}
