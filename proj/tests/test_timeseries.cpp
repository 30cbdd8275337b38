#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "mdri/timeseries.hpp"

using namespace mdri;
using nlohmann::json;

namespace {

Trajectory make_traj(std::vector<std::vector<double>> freqs, std::vector<double> inertia, double dt = 0.1) {
    TrajectoryData d;
    d.label = "test";
    const auto n = freqs.front().size();
    for (std::size_t k = 0; k < n; ++k) {
        d.t.push_back(double(k) * dt);
    }
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        d.generators.push_back({"G" + std::to_string(i + 1), inertia[i], freqs[i]});
    }
    return Trajectory::make(std::move(d));
}

json two_gen_sidecar() { return {{"inertia", {{"g1", 4.0}, {"g2", 6.0}}}, {"dt", 0.5}, {"label", "mini"}}; }

} // namespace

TEST(LoadTrajectory, ThreeColumnCsvWithSidecar) {
    std::istringstream csv("t,gen:g1,gen:g2\n0,60,60\n0.5,59.9,60.1\n1.0,59.8,60.0\n");
    const auto traj = load_trajectory(csv, TrajectoryFormat::Csv, two_gen_sidecar());
    ASSERT_EQ(traj.generators().size(), 2u);
    EXPECT_EQ(traj.generators()[0].name, "g1");
    EXPECT_DOUBLE_EQ(traj.generators()[1].inertia, 6.0);
    EXPECT_EQ(traj.size(), 3u);
    EXPECT_EQ(traj.label(), "mini");
    EXPECT_DOUBLE_EQ(traj.dt(), 0.5);
    EXPECT_TRUE(traj.pv().empty());
    EXPECT_FALSE(traj.load().has_value());
}

TEST(LoadTrajectory, DecreasingTimestampsIsGridError) {
    std::istringstream csv("t,gen:g1,gen:g2\n0,60,60\n0.5,60,60\n0.25,60,60\n");
    try {
        load_trajectory(csv, TrajectoryFormat::Csv, two_gen_sidecar());
        FAIL() << "expected GridError";
    } catch (const GridError &e) {
        EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos) << e.what();
        EXPECT_EQ(e.exit_code(), 2);
    }
}

TEST(LoadTrajectory, NonUniformGridReportsIndex) {
    std::istringstream csv("t,gen:g1\n0,60\n0.5,60\n1.0,60\n1.6,60\n");
    try {
        load_trajectory(csv, TrajectoryFormat::Csv, json{{"inertia", {{"g1", 1.0}}}});
        FAIL() << "expected GridError";
    } catch (const GridError &e) {
        EXPECT_NE(std::string(e.what()).find("index 3"), std::string::npos) << e.what();
    }
}

TEST(LoadTrajectory, MalformedHeaderNamesColumn) {
    std::istringstream csv("t,gen:g1,freq2\n0,60,60\n1,60,60\n");
    try {
        load_trajectory(csv, TrajectoryFormat::Csv, two_gen_sidecar());
        FAIL() << "expected ParseError";
    } catch (const ParseError &e) {
        EXPECT_NE(std::string(e.what()).find("freq2"), std::string::npos) << e.what();
    }
}

TEST(LoadTrajectory, BadNumberNamesColumn) {
    std::istringstream csv("t,gen:g1,gen:g2\n0,60,abc\n1,60,60\n");
    try {
        load_trajectory(csv, TrajectoryFormat::Csv, two_gen_sidecar());
        FAIL() << "expected ParseError";
    } catch (const ParseError &e) {
        EXPECT_NE(std::string(e.what()).find("gen:g2"), std::string::npos) << e.what();
    }
}

TEST(LoadTrajectory, MissingInertiaIsSchemaError) {
    std::istringstream csv("t,gen:g1,gen:g2\n0,60,60\n1,60,60\n");
    EXPECT_THROW(load_trajectory(csv, TrajectoryFormat::Csv, json{{"inertia", {{"g1", 4.0}}}}), SchemaError);
    std::istringstream csv2("t,gen:g1\n0,60\n1,60\n");
    EXPECT_THROW(load_trajectory(csv2, TrajectoryFormat::Csv, json::object()), SchemaError);
}

TEST(LoadTrajectory, NoGeneratorColumnIsRejected) {
    std::istringstream csv("t,pv:p1\n0,10\n1,10\n");
    EXPECT_THROW(load_trajectory(csv, TrajectoryFormat::Csv, json{{"inertia", json::object()}}), ParseError);
}

TEST(LoadTrajectory, NonPositiveInertiaIsSchemaError) {
    std::istringstream csv("t,gen:g1\n0,60\n1,60\n");
    EXPECT_THROW(load_trajectory(csv, TrajectoryFormat::Csv, json{{"inertia", {{"g1", 0.0}}}}), SchemaError);
}

TEST(LoadTrajectory, UnknownSidecarFieldIsSchemaError) {
    std::istringstream csv("t,gen:g1\n0,60\n1,60\n");
    EXPECT_THROW(load_trajectory(csv, TrajectoryFormat::Csv, json{{"inertia", {{"g1", 1.0}}}, {"colour", 1}}),
                 SchemaError);
}

TEST(LoadTrajectory, RaggedRowIsParseError) {
    std::istringstream csv("t,gen:g1,gen:g2\n0,60,60\n1,60\n");
    EXPECT_THROW(load_trajectory(csv, TrajectoryFormat::Csv, two_gen_sidecar()), ParseError);
}

TEST(LoadTrajectory, JsonFormatKeepsChannelOrder) {
    const json doc = {{"inertia", {{"b", 2.0}, {"a", 1.0}}},
                      {"pv_rating", {{"p", 50.0}}},
                      {"t", {0.0, 0.1, 0.2}},
                      {"gen", {{{"name", "b"}, {"values", {60.0, 60.0, 60.0}}}, {{"name", "a"}, {"values", {60.0, 59.0, 59.5}}}}},
                      {"pv", {{{"name", "p"}, {"values", {50.0, 0.0, 0.0}}}}}};
    std::istringstream in(doc.dump());
    const auto traj = load_trajectory(in, TrajectoryFormat::Json);
    ASSERT_EQ(traj.generators().size(), 2u);
    EXPECT_EQ(traj.generators()[0].name, "b");
    EXPECT_EQ(traj.generators()[1].name, "a");
    EXPECT_DOUBLE_EQ(traj.pv_total_rating(), 50.0);
}

TEST(LoadTrajectory, BundledScenarioAFixture) {
    const auto traj = load_trajectory(std::filesystem::path(MDRI_SCENARIO_DIR) / "trajectories" / "scenario_A.csv");
    EXPECT_EQ(traj.size(), 1501u);
    EXPECT_EQ(traj.generators().size(), 10u);
    EXPECT_EQ(traj.pv().size(), 9u);
    EXPECT_NEAR(traj.dt(), 0.01, 1e-15);
    EXPECT_NEAR(traj.horizon(), 15.0, 1e-9);
    EXPECT_NEAR(traj.pv_total_rating(), 1500.0, 1e-9);
}

TEST(CoiFrequency, SingleGeneratorIsIdentity) {
    const auto traj = make_traj({{60.0, 60.0, 60.0}}, {3.0});
    for (double f : coi_frequency(traj)) {
        EXPECT_DOUBLE_EQ(f, 60.0);
    }
}

TEST(CoiFrequency, SymmetricPairAveragesToNominal) {
    const auto traj = make_traj({{59.0, 59.0}, {61.0, 61.0}}, {4.0, 4.0});
    for (double f : coi_frequency(traj)) {
        EXPECT_NEAR(f, 60.0, 1e-12);
    }
}

TEST(CoiFrequency, InertiaWeightedMean) {
    // (2 * 60.3 + 1 * 59.7) / 3 = 60.1
    const auto traj = make_traj({{60.3, 60.3}, {59.7, 59.7}}, {2.0, 1.0});
    for (double f : coi_frequency(traj)) {
        EXPECT_NEAR(f, 60.1, 1e-12);
    }
}

TEST(CoiFrequency, ZeroWeightsAreDegenerate) {
    const std::vector<Series> freqs = {{60.0, 60.0}, {60.0, 60.0}};
    const std::vector<double> weights = {0.0, 0.0};
    EXPECT_THROW(coi_frequency(freqs, weights), DegenerateError);
}

TEST(GeneratorSpread, SingleGeneratorIsZero) {
    const auto traj = make_traj({{59.0, 60.5, 61.0}}, {3.0});
    for (double s : generator_spread(traj)) {
        EXPECT_EQ(s, 0.0);
    }
}

TEST(GeneratorSpread, MaxMinusMin) {
    const auto traj = make_traj({{60.0, 60.0}, {59.5, 59.5}, {60.2, 60.2}}, {1.0, 1.0, 1.0});
    for (double s : generator_spread(traj)) {
        EXPECT_NEAR(s, 0.7, 1e-12);
    }
}

TEST(SaveTrajectory, CsvRoundTripThroughFiles) {
    const auto dir = std::filesystem::temp_directory_path() / "mdri_ts_roundtrip";
    std::filesystem::create_directories(dir);
    TrajectoryData d;
    d.label = "rt";
    d.dt = 0.02;
    for (int k = 0; k < 50; ++k) {
        d.t.push_back(k * 0.02);
    }
    Series f1, f2, p1, load;
    for (int k = 0; k < 50; ++k) {
        f1.push_back(60.0 + 0.1 * std::sin(0.37 * k) / 3.0);
        f2.push_back(59.9 - 1e-7 * k);
        p1.push_back(k < 25 ? 123.456 : 0.0);
        load.push_back(6000.0 / 7.0);
    }
    d.generators = {{"A", 4.25, f1}, {"B", 1.0 / 3.0, f2}};
    d.pv = {{"P", 150.0, p1}};
    d.load = load;
    const auto traj = Trajectory::make(d);
    save_trajectory(traj, dir / "rt.csv");
    const auto back = load_trajectory(dir / "rt.csv");
    ASSERT_EQ(back.size(), traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        EXPECT_EQ(back.time()[k], traj.time()[k]);
        EXPECT_EQ(back.generators()[0].freq[k], f1[k]);
        EXPECT_EQ(back.generators()[1].freq[k], f2[k]);
        EXPECT_EQ(back.pv()[0].output[k], p1[k]);
        EXPECT_EQ((*back.load())[k], load[k]);
    }
    EXPECT_EQ(back.generators()[1].inertia, 1.0 / 3.0);
    EXPECT_EQ(back.label(), "rt");
    std::filesystem::remove_all(dir);
}

TEST(Trajectory, ChannelLengthMismatchIsSchemaError) {
    TrajectoryData d;
    d.t = {0.0, 1.0, 2.0};
    d.generators = {{"G", 1.0, {60.0, 60.0}}};
    EXPECT_THROW(Trajectory::make(d), SchemaError);
}

TEST(Trajectory, EmptyGeneratorListIsSchemaError) {
    TrajectoryData d;
    d.t = {0.0, 1.0};
    EXPECT_THROW(Trajectory::make(d), SchemaError);
}
