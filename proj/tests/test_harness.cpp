#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "fwaccel/harness.hpp"

using namespace fwaccel;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ScenarioConfig steps_config() {
    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::AccelSteps;
    cfg.name = "steps";
    cfg.duration = 10.0;
    cfg.steps = {{1.0, 5.0, {0.0, 4.0, 0.0}, Frame::Vehicle2, 20.0, std::nullopt}};
    return cfg;
}

}  // namespace

TEST_CASE("moving average follows the trailing-window semantics") {
    // Constant column: average equals the constant.
    const std::vector<double> constant(25, 3.5);
    for (double v : moving_average(constant, 10)) CHECK(v == doctest::Approx(3.5));

    // Impulse: spread to 1/10 of its height across the window.
    std::vector<double> impulse(30, 0.0);
    impulse[12] = 5.0;
    const auto ma = moving_average(impulse, 10);
    for (int i = 12; i < 22; ++i) CHECK(ma[static_cast<std::size_t>(i)] == doctest::Approx(0.5));
    CHECK(ma[11] == doctest::Approx(0.0));
    CHECK(ma[22] == doctest::Approx(0.0));

    // Step: the average reaches the step value exactly 10 samples after the edge.
    std::vector<double> step(30, 0.0);
    for (std::size_t i = 15; i < 30; ++i) step[i] = 1.0;
    const auto ms = moving_average(step, 10);
    CHECK(ms[23] < 1.0);
    CHECK(ms[24] == doctest::Approx(1.0));  // rows 15..24 are the 10 new samples
}

TEST_CASE("config JSON parsing, defaults and strictness") {
    const std::string text = R"({
        "kind": "accel_steps",
        "name": "demo",
        "duration": 10.0,
        "steps": [
            {"start": 1.0, "duration": 5.0, "normal_accel": [0, 4, 0], "speed_ref": 20.0}
        ],
        "gains": {"k_roll": 2.5},
        "noise": {"enabled": true, "sigma_airspeed": 0.3},
        "seed": 11
    })";
    const ScenarioConfig cfg = ScenarioConfig::from_json_text(text);
    CHECK(cfg.kind == ScenarioKind::AccelSteps);
    CHECK(cfg.gains.k_roll == 2.5);
    CHECK(cfg.gains.k_pitch == 1.5);  // default preserved
    CHECK(cfg.noise.sigma_airspeed == 0.3);
    CHECK(cfg.seed == 11);
    CHECK(cfg.steps.at(0).frame == Frame::Vehicle2);

    // Unknown keys are rejected.
    CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"kind": "accel_steps", "bogus": 1})"),
                    Error);
    // Noise requires a seed.
    CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({
        "kind": "accel_steps", "duration": 5.0,
        "noise": {"enabled": true, "sigma_accel": 0.1}
    })"),
                    Error);
    // Malformed JSON reports a config error.
    CHECK_THROWS_AS(ScenarioConfig::from_json_text("{nope"), Error);
}

TEST_CASE("step schedules must be ordered and disjoint") {
    ScenarioConfig cfg = steps_config();
    cfg.steps.push_back({4.0, 3.0, {0, 1, 0}, Frame::Vehicle2, 20.0, std::nullopt});
    CHECK_THROWS_AS(cfg.validate(), Error);

    cfg = steps_config();
    cfg.steps[0].duration = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("identical config and seed produce byte-identical logs") {
    TempDir a("fwaccel_det_a"), b("fwaccel_det_b");

    ScenarioConfig cfg = steps_config();
    cfg.noise.enabled = true;
    cfg.noise.sigma_airspeed = 0.3;
    cfg.noise.sigma_accel = 0.2;
    cfg.seed = 7;

    run_scenario(cfg, a.str());
    run_scenario(cfg, b.str());
    CHECK(slurp(a.path / "steps.csv") == slurp(b.path / "steps.csv"));

    // A different seed changes the log.
    TempDir c("fwaccel_det_c");
    cfg.seed = 8;
    run_scenario(cfg, c.str());
    CHECK(slurp(a.path / "steps.csv") != slurp(c.path / "steps.csv"));
}

TEST_CASE("replay reproduces every summary metric from the CSV alone") {
    TempDir dir("fwaccel_replay");

    SUBCASE("accel steps") {
        run_scenario(steps_config(), dir.str());
        CHECK(replay_audit(dir.str() + "/steps.csv", dir.str() + "/steps_summary.txt").empty());
    }

    SUBCASE("pn intercept") {
        ScenarioConfig cfg;
        cfg.kind = ScenarioKind::PnIntercept;
        cfg.name = "pn";
        run_scenario(cfg, dir.str());
        CHECK(replay_audit(dir.str() + "/pn.csv", dir.str() + "/pn_summary.txt").empty());
    }

    SUBCASE("calibration") {
        ScenarioConfig cfg;
        cfg.kind = ScenarioKind::Calibration;
        cfg.name = "cal";
        run_scenario(cfg, dir.str());
        CHECK(replay_audit(dir.str() + "/cal.csv", dir.str() + "/cal_summary.txt").empty());

        // The model file exists and loads back.
        std::string provenance;
        const EnergyModel model = load_energy_model(dir.str() + "/cal_model.txt", &provenance);
        CHECK(model.levels.size() == 8);
        CHECK(model.thrust_slope > 0.0);
    }
}

TEST_CASE("a tampered summary fails the replay audit") {
    TempDir dir("fwaccel_tamper");
    run_scenario(steps_config(), dir.str());

    const std::string path = dir.str() + "/steps_summary.txt";
    RunSummary summary = read_summary(path);
    summary.set("step0_settle_s", 0.123456);
    write_summary(path, summary);

    const auto mismatches = replay_audit(dir.str() + "/steps.csv", path);
    REQUIRE(!mismatches.empty());
    CHECK(mismatches.front() == "step0_settle_s");
}

TEST_CASE("thrust saturation event appears in the log and summary") {
    TempDir dir("fwaccel_sat");

    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::AccelSteps;
    cfg.name = "sat";
    cfg.duration = 12.0;
    cfg.steps = {{1.0, 4.0, {0.0, 4.0, 0.0}, Frame::Vehicle2, 20.0, std::nullopt},
                 {5.0, 3.2, {0.0, 0.0, -2.5}, Frame::Vehicle2, 20.0, std::nullopt},
                 {8.2, 3.8, {0.0, 0.0, 0.0}, Frame::Vehicle2, 20.0, std::nullopt}};
    const RunSummary summary = run_scenario(cfg, dir.str());

    const double sat_t = summary.metric("thrust_sat_t").value();
    CHECK(sat_t > 0.0);
    // Ground speed walks away from the reference once thrust pins.
    CHECK(summary.metric("speed_dev_end").value() > summary.metric("speed_dev_at_sat").value() + 1.0);

    const CsvTable table = CsvTable::read(dir.str() + "/sat.csv");
    const auto thrust_cmd = table.numeric_column("thrust_cmd");
    bool pinned = false;
    for (double v : thrust_cmd) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        if (v == 1.0) pinned = true;
    }
    CHECK(pinned);
}

TEST_CASE("plot emitter writes raw and averaged columns side by side") {
    TempDir dir("fwaccel_plot");
    run_scenario(steps_config(), dir.str());
    emit_plot_data(dir.str() + "/steps.csv", dir.str() + "/steps_plot.csv");

    const CsvTable plot = CsvTable::read(dir.str() + "/steps_plot.csv");
    const auto raw = plot.numeric_column("acc_meas_by");
    const auto averaged = plot.numeric_column("acc_meas_by_ma10");
    REQUIRE(raw.size() == averaged.size());
    const auto expected = moving_average(raw, 10);
    for (std::size_t i = 0; i < raw.size(); ++i)
        CHECK(averaged[i] == doctest::Approx(expected[i]).epsilon(1e-12));

    // Text columns are dropped, numeric ones kept.
    CHECK_THROWS_AS(plot.column_index("events"), Error);
    CHECK(plot.column_index("t") == 0);
}

TEST_CASE("envelope abort still writes the log and summary, then propagates") {
    TempDir dir("fwaccel_abort");

    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::AccelSteps;
    cfg.name = "abort";
    cfg.duration = 20.0;
    // An 8 m/s^2 sustained lateral demand needs a 39-degree bank; the
    // command is reachable but the speed loop cannot hold energy and the
    // run ends in an envelope abort.
    cfg.steps = {{1.0, 19.0, {0.0, 0.0, 3.5}, Frame::Vehicle2, 20.0, std::nullopt}};

    bool aborted = false;
    try {
        run_scenario(cfg, dir.str());
    } catch (const EnvelopeError&) {
        aborted = true;
    }
    CHECK(aborted);
    CHECK(fs::exists(dir.path / "abort.csv"));

    const RunSummary summary = read_summary(dir.str() + "/abort_summary.txt");
    CHECK(summary.metric("envelope_violations").value() == 1.0);
    REQUIRE(!summary.events.empty());
    CHECK(summary.events.front().find("envelope_abort") != std::string::npos);
}

TEST_CASE("summary files round-trip") {
    TempDir dir("fwaccel_summary");
    RunSummary summary;
    summary.kind = ScenarioKind::PnIntercept;
    summary.set("miss_distance", 0.6343);
    summary.set("some_metric", -1.25e-7);
    summary.events.push_back("intercept");
    summary.wall_clock_s = 0.5;

    const std::string path = dir.str() + "/s.txt";
    write_summary(path, summary);
    const RunSummary loaded = read_summary(path);
    CHECK(loaded.kind == ScenarioKind::PnIntercept);
    CHECK(loaded.metric("miss_distance").value() == 0.6343);
    CHECK(loaded.metric("some_metric").value() == -1.25e-7);
    CHECK(loaded.events.at(0) == "intercept");
}

TEST_CASE("fnv1a hash is stable") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("fwaccel") != fnv1a_hex("fwaccel "));
    CHECK(fnv1a_hex("abc") == fnv1a_hex("abc"));
}

TEST_CASE("independent scenarios run in parallel with isolated outputs") {
    TempDir dir("fwaccel_parallel");
    std::vector<std::thread> workers;
    std::array<std::optional<double>, 4> misses;
    for (int i = 0; i < 4; ++i) {
        workers.emplace_back([&, i] {
            ScenarioConfig cfg;
            cfg.kind = ScenarioKind::PnIntercept;
            cfg.name = "pn" + std::to_string(i);
            cfg.pn.nav_constant = 2.5 + 0.5 * i;
            const RunSummary s = run_scenario(cfg, dir.str() + "/job" + std::to_string(i));
            misses[static_cast<std::size_t>(i)] = s.metric("miss_distance");
        });
    }
    for (auto& w : workers) w.join();
    for (int i = 0; i < 4; ++i) {
        REQUIRE(misses[static_cast<std::size_t>(i)].has_value());
        CHECK(*misses[static_cast<std::size_t>(i)] < 2.0);
        CHECK(fs::exists(dir.path / ("job" + std::to_string(i)) /
                         ("pn" + std::to_string(i) + ".csv")));
    }
}

TEST_CASE("every shipped config parses and validates") {
    const fs::path dir = FWACCEL_CONFIG_DIR;
    REQUIRE(fs::exists(dir));
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        ++count;
        INFO(entry.path().string());
        CHECK_NOTHROW(ScenarioConfig::from_json_file(entry.path().string()));
    }
    CHECK(count >= 5);
}
