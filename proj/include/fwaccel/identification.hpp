#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fwaccel/linefit.hpp"
#include "fwaccel/outer_loop.hpp"
#include "fwaccel/vehicle_sim.hpp"

namespace fwaccel {

// Thrust-sweep calibration schedule. Levels are held for dwell_s each;
// samples inside transient_trim_s after a switch are discarded. A small
// alternating hold-pitch weave keeps the airspeed moving through each dwell
// so every level sees enough dynamic-pressure spread to regress on.
struct CalibrationPlan {
    std::vector<double> levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    double dwell_s = 2.0;
    enum class Ordering { Alternating, Increasing } ordering = Ordering::Alternating;
    // Must outlast the thrust lag (3*tau_T) plus the speed-rate
    // differentiator's own settling, or the early samples tilt the fits.
    double transient_trim_s = 1.2;
    int passes = 2;
    double hold_pitch = 0.0;                     // rad, stabilization setpoint
    double pitch_weave = deg_to_rad(4.0);        // rad, alternating offset per dwell
    double filter_cutoff_hz = 2.0;               // speed-rate estimator cutoff

    void validate() const;  // throws invalid_input
    // Dwell-by-dwell thrust levels after ordering and pass expansion.
    std::vector<double> dwell_sequence() const;
};

struct CalibrationSample {
    double t = 0.0;             // s
    double thrust_level = 0.0;  // active command level
    double airspeed_sq = 0.0;   // m^2/s^2, filtered
    double energy_accel = 0.0;  // m/s^2
};

struct LevelFit {
    double thrust_level = 0.0;
    double slope = 0.0;           // 1/m
    double intercept = 0.0;       // m/s^2
    std::size_t count = 0;
    double residual_rms = 0.0;    // m/s^2
    bool positive_slope = false;  // drag slope should be negative; flagged, not rejected
};

// Proportional attitude hold used while sweeping thrust: wings level, pitch
// at the setpoint. Returns (p command, q command).
std::pair<double, double> stabilization_command(const VehicleState& state, double hold_pitch,
                                                const OuterLoopGains& gains);

// Energy acceleration from measured quantities: speed rate minus the
// climb/descent gravity coupling. Throws low_speed below min_speed.
double energy_acceleration(double speed_rate, double sink_rate, double speed,
                           double min_speed = kDefaultMinSpeed);

// Two cascaded one-pole low-pass sections.
class LowPass2 {
public:
    LowPass2(double cutoff_hz, double dt);

    double update(double x);
    void reset(double x0);
    double value() const { return s2_; }

private:
    double alpha_;
    double s1_ = 0.0, s2_ = 0.0;
    bool primed_ = false;
};

// Causal speed-rate estimator: low-pass the measured speed, then first
// differences. The rate is stamped at the midpoint of the differenced pair,
// and speed_filtered is the matching midpoint value, so regression inputs
// share one time base.
class SpeedRateEstimator {
public:
    SpeedRateEstimator(double cutoff_hz, double dt);

    struct Output {
        double speed_filtered = 0.0;
        double speed_rate = 0.0;
        bool valid = false;  // false on the priming sample
    };
    Output update(double speed_measured);

private:
    LowPass2 filter_;
    double dt_;
    double prev_ = 0.0;
    bool primed_ = false;
};

// OLS of energy acceleration against airspeed^2 for one thrust level.
// Requires >= 10 samples spanning >= 20 m^2/s^2; throws
// identification_failure otherwise.
LevelFit fit_level(std::span<const CalibrationSample> samples);

// Evaluate every level fit at the query airspeed and regress energy
// acceleration against thrust command. Needs >= 2 levels. A query airspeed
// outside the calibrated coverage flags the model, it does not fail.
EnergyModel build_energy_model(std::span<const LevelFit> fits, double airspeed_query,
                               std::optional<std::pair<double, double>> speed_range = std::nullopt);

struct CalibrationResult {
    std::vector<LevelFit> fits;
    double speed_min = 0.0;  // m/s, airspeed coverage of the samples
    double speed_max = 0.0;
    std::vector<CalibrationSample> samples;
    std::vector<double> skipped_levels;  // levels with too little spread
};

using MeasureFn = std::function<SensorSnapshot()>;

// Per-control-step tap for logging: time, measurement, command, active
// level, and the regression sample when one was recorded.
using CalibrationObserver = std::function<void(double t, const SensorSnapshot& snap,
                                               const RateThrustCommand& cmd, double level,
                                               const CalibrationSample* sample)>;

// Executes the dwell schedule on the simulator under the stabilization law,
// gathers post-transient samples and fits each level. Levels whose pooled
// samples fail the fit preconditions are skipped and reported. Envelope
// aborts propagate with the active level attached.
CalibrationResult run_calibration(const CalibrationPlan& plan, Simulator& sim,
                                  const OuterLoopGains& gains, double control_dt = 0.02,
                                  const MeasureFn& measure = {},
                                  const CalibrationObserver& observer = {});

// Human-readable key=value model file with a schema-version field and a
// provenance hash of the generating configuration.
void save_energy_model(const std::string& path, const EnergyModel& model,
                       const std::string& provenance);
EnergyModel load_energy_model(const std::string& path, std::string* provenance = nullptr);

}  // namespace fwaccel
