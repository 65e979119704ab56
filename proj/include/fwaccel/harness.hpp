#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fwaccel/csv.hpp"
#include "fwaccel/guidance.hpp"
#include "fwaccel/identification.hpp"
#include "fwaccel/outer_loop.hpp"

namespace fwaccel {

enum class ScenarioKind { Calibration, AccelSteps, PnIntercept };

const char* scenario_kind_name(ScenarioKind kind);

// One commanded segment of an acceleration-step experiment. The normal
// vector is interpreted in the path frame by default (x along velocity,
// y horizontal-right, z completing the triad), so a "lateral step" stays
// lateral as the vehicle turns; inertial interpretation is available.
struct StepSegment {
    double start = 0.0;     // s
    double duration = 0.0;  // s
    Vec3 normal_accel;      // m/s^2
    Frame frame = Frame::Vehicle2;
    double speed_ref = 20.0;  // m/s
    // When set, a fixed tangential demand replaces the speed loop for this
    // segment (used for deliberate infeasible-deceleration experiments).
    std::optional<double> tangential_accel;
};

struct ScenarioConfig {
    int schema_version = 1;
    ScenarioKind kind = ScenarioKind::AccelSteps;
    std::string name = "scenario";

    VehicleParams vehicle;
    struct Initial {
        double speed = 20.0;        // m/s
        double heading_deg = 0.0;
        double flight_path_deg = 0.0;
        double altitude = 100.0;    // m
    } initial;

    OuterLoopGains gains;
    PriorityMode priority = PriorityMode::NormalPriority;
    NoiseParams noise;
    std::uint64_t seed = 0;
    double control_rate_hz = 50.0;
    double sim_dt = 0.005;
    bool integral_trim = false;
    bool literal_gravity_sign = false;

    CalibrationPlan plan;          // calibration kind
    double model_airspeed = 20.0;  // airspeed the inverse model is built at

    std::vector<StepSegment> steps;  // accel_steps kind
    double duration = 0.0;           // s, accel_steps total time

    Vec3 target_offset_ned{600.0, 0.0, -30.0};  // pn kind, from the start point
    PnParams pn;
    double max_duration = 120.0;  // s, pn safety cap
    // LOS rate from finite-differenced bearings instead of the analytic
    // relative-motion expression.
    bool pn_finite_difference_los = false;

    std::string model_file;  // optional pre-identified model; empty = identify in-run

    void validate() const;  // throws config_error
    static ScenarioConfig from_json_text(const std::string& text);
    static ScenarioConfig from_json_file(const std::string& path);
};

struct RunSummary {
    ScenarioKind kind = ScenarioKind::AccelSteps;
    // Ordered so summary files are stable; every metric is recomputable from
    // the CSV log alone (audited by the replay subcommand).
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::string> events;
    double wall_clock_s = 0.0;

    std::optional<double> metric(const std::string& name) const;
    void set(const std::string& name, double value);
};

// Runs one scenario end to end: writes <name>.csv, <name>_summary.txt and,
// for calibration runs, <name>_model.txt under out_dir. Deterministic for a
// given config and seed.
RunSummary run_scenario(const ScenarioConfig& config, const std::string& out_dir,
                        const std::string& provenance = "");

// Metric recomputation from a log table; shared by run_scenario and replay.
RunSummary summarize_log(const CsvTable& table);

void write_summary(const std::string& path, const RunSummary& summary);
RunSummary read_summary(const std::string& path);

// Re-derives every metric from the CSV and compares against the stored
// summary. Returns the mismatched metric names (empty = clean audit).
std::vector<std::string> replay_audit(const std::string& csv_path, const std::string& summary_path);

// Writes <out_path> with each numeric column alongside its 10-sample
// trailing moving average (<col>,<col>_ma10), the smoothing used for
// plot-ready data.
void emit_plot_data(const std::string& csv_path, const std::string& out_path);

// FNV-1a hash of a byte string, hex-encoded; used for model provenance.
std::string fnv1a_hex(const std::string& bytes);

VehicleState state_from_measurement(const SensorSnapshot& snap);

}  // namespace fwaccel
