#include "fwaccel/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fwaccel {

namespace {

using nlohmann::json;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) { return format_number(v); }

Vec3 unit_or_throw(const Vec3& v, const char* what) {
    const double n = norm(v);
    if (n < 1e-9) throw Error(Errc::invalid_input, std::string("zero vector: ") + what);
    return v / n;
}

// Path frame: x along velocity, y horizontal-right, z completing the triad.
void path_frame(const Vec3& velocity, Vec3& x_hat, Vec3& y_hat, Vec3& z_hat) {
    x_hat = unit_or_throw(velocity, "velocity for path frame");
    const Vec3 y0 = cross(Vec3{0.0, 0.0, 1.0}, x_hat);
    if (norm(y0) < 1e-6)
        throw Error(Errc::invalid_input, "near-vertical flight; path frame undefined");
    y_hat = y0 / norm(y0);
    z_hat = cross(x_hat, y_hat);
}

const StepSegment* active_segment(const std::vector<StepSegment>& steps, double t, int* index) {
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (t >= steps[i].start && t < steps[i].start + steps[i].duration) {
            if (index) *index = static_cast<int>(i);
            return &steps[i];
        }
    }
    if (index) *index = -1;
    return nullptr;
}

std::string join_events(const std::vector<std::string>& events) {
    std::string out;
    for (const auto& e : events) {
        if (!out.empty()) out += '|';
        out += e;
    }
    return out.empty() ? "-" : out;
}

std::vector<std::string> state_fields(double t, const VehicleState& s) {
    return {fmt(t),
            fmt(s.position.x()), fmt(s.position.y()), fmt(s.position.z()),
            fmt(s.velocity.x()), fmt(s.velocity.y()), fmt(s.velocity.z()),
            fmt(s.attitude.roll), fmt(s.attitude.pitch), fmt(s.attitude.yaw),
            fmt(s.p), fmt(s.q), fmt(s.r), fmt(s.airspeed)};
}

const std::vector<std::string> kStateColumns = {
    "t", "pos_n", "pos_e", "pos_d", "vel_n", "vel_e", "vel_d",
    "roll", "pitch", "yaw", "p", "q", "r", "airspeed"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

struct StepwiseEstimators {
    StepwiseEstimators(double cutoff_hz, double dt) : speed(cutoff_hz, dt), sink(cutoff_hz, dt) {}
    SpeedRateEstimator speed;
    LowPass2 sink;

    // Measured energy acceleration with matched filter lags; NaN until primed.
    double update(const SensorSnapshot& snap) {
        const auto est = speed.update(snap.airspeed);
        const double sink_f = sink.update(snap.velocity.z);
        if (!est.valid) return kNan;
        return energy_acceleration(est.speed_rate, sink_f, std::max(est.speed_filtered, 5.0));
    }
};

EnergyModel obtain_model(const ScenarioConfig& cfg) {
    if (!cfg.model_file.empty()) return load_energy_model(cfg.model_file);
    // Identify on a clean twin of the configured vehicle, flown level at the
    // airspeed the inverse model is built for.
    VehicleState trim =
        Simulator::trim_state(cfg.vehicle, cfg.model_airspeed, 0.0, 0.0, 500.0);
    Simulator sim(cfg.vehicle, trim);
    CalibrationResult res =
        run_calibration(cfg.plan, sim, cfg.gains, 1.0 / cfg.control_rate_hz);
    return build_energy_model(res.fits, cfg.model_airspeed,
                              std::make_pair(res.speed_min, res.speed_max));
}

OuterLoopConfig loop_config(const ScenarioConfig& cfg) {
    OuterLoopConfig out;
    out.gains = cfg.gains;
    out.mode = cfg.priority;
    out.integral_trim = cfg.integral_trim;
    out.literal_gravity_sign = cfg.literal_gravity_sign;
    return out;
}

void common_meta(CsvTable& table, const ScenarioConfig& cfg) {
    table.meta["log"] = "fwaccel v1";
    table.meta["kind"] = scenario_kind_name(cfg.kind);
    table.meta["noise"] = cfg.noise.enabled ? "1" : "0";
    table.meta["control_dt"] = fmt(1.0 / cfg.control_rate_hz);
    table.meta["seed"] = std::to_string(cfg.seed);
}

struct AbortInfo {
    std::string what;
    double time = 0.0;
    VehicleState state;
};

// ---------------------------------------------------------------------------
// Calibration scenario
// ---------------------------------------------------------------------------

CsvTable run_calibration_scenario(const ScenarioConfig& cfg, const std::string& out_dir,
                                  const std::string& provenance) {
    VehicleState trim = Simulator::trim_state(cfg.vehicle, cfg.initial.speed,
                                              deg_to_rad(cfg.initial.heading_deg),
                                              deg_to_rad(cfg.initial.flight_path_deg),
                                              cfg.initial.altitude);
    Simulator sim(cfg.vehicle, trim);
    SensorNoiseRig rig(cfg.noise, cfg.seed);

    CsvTable table;
    common_meta(table, cfg);
    table.meta["model_airspeed"] = fmt(cfg.model_airspeed);
    table.columns = concat(kStateColumns,
                           {"p_cmd", "q_cmd", "thrust_level", "airspeed_filt", "airspeed_sq_filt",
                            "energy_acc", "sampling", "events"});

    auto observer = [&](double t, const SensorSnapshot&, const RateThrustCommand& cmd,
                        double level, const CalibrationSample* sample) {
        std::vector<std::string> row = state_fields(t, sim.state());
        row.push_back(fmt(cmd.p));
        row.push_back(fmt(cmd.q));
        row.push_back(fmt(level));
        row.push_back(sample ? fmt(std::sqrt(sample->airspeed_sq)) : fmt(kNan));
        row.push_back(sample ? fmt(sample->airspeed_sq) : fmt(kNan));
        row.push_back(sample ? fmt(sample->energy_accel) : fmt(kNan));
        row.push_back(sample ? "1" : "0");
        row.push_back("-");
        table.rows.push_back(std::move(row));
    };

    CalibrationResult res =
        run_calibration(cfg.plan, sim, cfg.gains, 1.0 / cfg.control_rate_hz,
                        [&] { return sim.measure(rig); }, observer);

    EnergyModel model = build_energy_model(res.fits, cfg.model_airspeed,
                                           std::make_pair(res.speed_min, res.speed_max));
    save_energy_model(out_dir + "/" + cfg.name + "_model.txt", model,
                      provenance.empty() ? "unspecified" : provenance);
    return table;
}

// ---------------------------------------------------------------------------
// Acceleration-step scenario
// ---------------------------------------------------------------------------

CsvTable run_steps_scenario(const ScenarioConfig& cfg, AbortInfo* abort_info) {
    EnergyModel model = obtain_model(cfg);

    VehicleState trim = Simulator::trim_state(cfg.vehicle, cfg.initial.speed,
                                              deg_to_rad(cfg.initial.heading_deg),
                                              deg_to_rad(cfg.initial.flight_path_deg),
                                              cfg.initial.altitude);
    Simulator sim(cfg.vehicle, trim);
    SensorNoiseRig rig(cfg.noise, cfg.seed);
    OuterLoop loop(loop_config(cfg));
    const double dt_c = 1.0 / cfg.control_rate_hz;
    const int substeps = std::max(1, static_cast<int>(std::round(dt_c / cfg.sim_dt)));
    StepwiseEstimators est(2.0, dt_c);

    CsvTable table;
    common_meta(table, cfg);
    table.columns = concat(
        kStateColumns,
        {"p_cmd_raw", "q_cmd_raw", "thrust_cmd_raw", "p_cmd", "q_cmd", "thrust_cmd",
         "acc_cmd_bx", "acc_cmd_by", "acc_cmd_bz", "acc_meas_bx", "acc_meas_by", "acc_meas_bz",
         "normal_cmd_mag", "tangential_cmd", "energy_acc_cmd", "energy_acc_meas", "speed_ref",
         "segment", "priority", "events"});

    const int n_steps = static_cast<int>(std::round(cfg.duration * cfg.control_rate_hz));
    double speed_ref = cfg.initial.speed;

    for (int k = 0; k < n_steps; ++k) {
        const double t = k * dt_c;
        SensorSnapshot snap = sim.measure(rig);
        VehicleState meas_state = state_from_measurement(snap);

        int seg_index = -1;
        const StepSegment* seg = active_segment(cfg.steps, t, &seg_index);
        Vec3 raw_normal{0, 0, 0};
        if (seg) {
            speed_ref = seg->speed_ref;
            if (seg->frame == Frame::Inertial) {
                raw_normal = seg->normal_accel;
            } else {
                Vec3 x_hat, y_hat, z_hat;
                path_frame(snap.velocity, x_hat, y_hat, z_hat);
                raw_normal = seg->normal_accel.x * x_hat + seg->normal_accel.y * y_hat +
                             seg->normal_accel.z * z_hat;
            }
        }

        const double speed_meas = norm(snap.velocity);
        double a_t = cfg.gains.k_speed * (speed_ref - speed_meas);
        if (seg && seg->tangential_accel) a_t = *seg->tangential_accel;
        AccelCommand cmd =
            AccelCommand::project({raw_normal, Frame::Inertial}, a_t, {snap.velocity, Frame::Inertial});

        const double ea_meas = est.update(snap);

        const Vec3 g_body = to_body({gravity_ned(), Frame::Inertial}, snap.attitude).v;
        const Vec3 acc_meas_b = snap.specific_force + g_body;
        std::optional<Vec3> an_meas;
        std::optional<double> ea_meas_opt;
        if (cfg.integral_trim) {
            FrameVector acc_meas_i =
                inertial_from_body({acc_meas_b, Frame::Body}, snap.attitude);
            const Vec3 v_hat = unit_or_throw(snap.velocity, "measured velocity");
            an_meas = acc_meas_i.v - dot(acc_meas_i.v, v_hat) * v_hat;
            if (std::isfinite(ea_meas)) ea_meas_opt = ea_meas;
        }

        RealizeResult res = loop.step(cmd, meas_state, model, dt_c, an_meas, ea_meas_opt);

        const Vec3 v_hat = unit_or_throw(snap.velocity, "measured velocity");
        const Vec3 acc_cmd_total = cmd.normal.v + cmd.tangential * v_hat;
        const Vec3 acc_cmd_b = to_body({acc_cmd_total, Frame::Inertial}, snap.attitude).v;

        std::vector<std::string> events;
        if (res.thrust_saturated) events.push_back("thrust_sat");
        if (res.pitch_rate_clamped) events.push_back("q_clamped");

        std::vector<std::string> row = state_fields(t, sim.state());
        for (double v : {res.raw.p, res.raw.q, res.raw.thrust, res.command.p, res.command.q,
                         res.command.thrust, acc_cmd_b.x, acc_cmd_b.y, acc_cmd_b.z, acc_meas_b.x,
                         acc_meas_b.y, acc_meas_b.z, norm(cmd.normal), cmd.tangential,
                         res.energy_accel_cmd, ea_meas, speed_ref})
            row.push_back(fmt(v));
        row.push_back(std::to_string(seg_index));
        row.push_back(cfg.priority == PriorityMode::NormalPriority ? "normal" : "tangential");
        row.push_back(join_events(events));
        table.rows.push_back(std::move(row));

        try {
            for (int sub = 0; sub < substeps; ++sub) sim.step(res.command, dt_c / substeps);
        } catch (const EnvelopeError& e) {
            if (abort_info) *abort_info = {e.what(), e.time, e.state};
            return table;
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// PN intercept scenario
// ---------------------------------------------------------------------------

CsvTable run_pn_scenario(const ScenarioConfig& cfg, AbortInfo* abort_info) {
    EnergyModel model = obtain_model(cfg);

    VehicleState trim = Simulator::trim_state(cfg.vehicle, cfg.initial.speed,
                                              deg_to_rad(cfg.initial.heading_deg),
                                              deg_to_rad(cfg.initial.flight_path_deg),
                                              cfg.initial.altitude);
    Simulator sim(cfg.vehicle, trim);
    TargetSpec target{trim.position.v + cfg.target_offset_ned};
    target.validate(trim.position.v);
    cfg.pn.validate();

    SensorNoiseRig rig(cfg.noise, cfg.seed);
    OuterLoop loop(loop_config(cfg));
    const double dt_c = 1.0 / cfg.control_rate_hz;
    const int substeps = std::max(1, static_cast<int>(std::round(dt_c / cfg.sim_dt)));
    StepwiseEstimators est(2.0, dt_c);

    CsvTable table;
    common_meta(table, cfg);
    table.meta["target_n"] = fmt(target.position.x);
    table.meta["target_e"] = fmt(target.position.y);
    table.meta["target_d"] = fmt(target.position.z);
    table.columns = concat(
        kStateColumns,
        {"p_cmd_raw", "q_cmd_raw", "thrust_cmd_raw", "p_cmd", "q_cmd", "thrust_cmd",
         "acc_cmd_bx", "acc_cmd_by", "acc_cmd_bz", "acc_meas_bx", "acc_meas_by", "acc_meas_bz",
         "normal_cmd_mag", "energy_acc_cmd", "energy_acc_meas", "range", "closing_speed",
         "los_rate_mag", "priority", "events"});

    const int max_steps = static_cast<int>(std::round(cfg.max_duration * cfg.control_rate_hz));
    double min_range = std::numeric_limits<double>::infinity();
    std::optional<Vec3> held_normal;
    LosRateEstimator fd_estimator(dt_c);

    for (int k = 0; k < max_steps; ++k) {
        const double t = k * dt_c;
        SensorSnapshot snap = sim.measure(rig);
        VehicleState meas_state = state_from_measurement(snap);

        LosState los = cfg.pn_finite_difference_los ? fd_estimator.update(meas_state, target)
                                                    : los_kinematics(meas_state, target);
        Vec3 demand;
        if (los.range < cfg.pn.terminal_hold_range && held_normal) {
            demand = *held_normal;
        } else {
            demand = pn_accel(los, cfg.pn).v;
            const double mag = norm(demand);
            if (mag > cfg.pn.accel_limit) demand = demand * (cfg.pn.accel_limit / mag);
            held_normal = demand;
        }
        const double a_t = speed_loop_accel(norm(snap.velocity), cfg.pn);
        AccelCommand cmd =
            AccelCommand::project({demand, Frame::Inertial}, a_t, {snap.velocity, Frame::Inertial});

        const double ea_meas = est.update(snap);
        RealizeResult res = loop.step(cmd, meas_state, model, dt_c);

        const Vec3 v_hat = unit_or_throw(snap.velocity, "measured velocity");
        const Vec3 acc_cmd_total = cmd.normal.v + cmd.tangential * v_hat;
        const Vec3 acc_cmd_b = to_body({acc_cmd_total, Frame::Inertial}, snap.attitude).v;
        const Vec3 g_body = to_body({gravity_ned(), Frame::Inertial}, snap.attitude).v;
        const Vec3 acc_meas_b = snap.specific_force + g_body;

        const bool intercept = los.range < cfg.pn.intercept_radius;
        min_range = std::min(min_range, los.range);
        // Hysteresis keeps measurement jitter from faking the closest
        // approach; 3 m exceeds any plausible range noise.
        const bool receding = min_range < 100.0 && los.range > min_range + 3.0;

        std::vector<std::string> events;
        if (res.thrust_saturated) events.push_back("thrust_sat");
        if (res.pitch_rate_clamped) events.push_back("q_clamped");
        if (intercept) events.push_back("intercept");
        if (receding && !intercept) events.push_back("closest_approach");

        std::vector<std::string> row = state_fields(t, sim.state());
        for (double v : {res.raw.p, res.raw.q, res.raw.thrust, res.command.p, res.command.q,
                         res.command.thrust, acc_cmd_b.x, acc_cmd_b.y, acc_cmd_b.z, acc_meas_b.x,
                         acc_meas_b.y, acc_meas_b.z, norm(cmd.normal), res.energy_accel_cmd,
                         ea_meas, los.range, los.closing_speed, norm(los.los_rate)})
            row.push_back(fmt(v));
        row.push_back(cfg.priority == PriorityMode::NormalPriority ? "normal" : "tangential");
        row.push_back(join_events(events));
        table.rows.push_back(std::move(row));

        if (intercept || receding) break;

        try {
            for (int sub = 0; sub < substeps; ++sub) sim.step(res.command, dt_c / substeps);
        } catch (const EnvelopeError& e) {
            if (abort_info) *abort_info = {e.what(), e.time, e.state};
            return table;
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

RunSummary summarize_calibration(const CsvTable& table) {
    RunSummary summary;
    summary.kind = ScenarioKind::Calibration;

    const auto sampling = table.numeric_column("sampling");
    const auto level_col = table.numeric_column("thrust_level");
    const auto va_sq = table.numeric_column("airspeed_sq_filt");
    const auto ea = table.numeric_column("energy_acc");
    const auto va = table.numeric_column("airspeed_filt");
    const auto t_col = table.numeric_column("t");

    std::map<double, std::vector<CalibrationSample>> by_level;
    double speed_min = std::numeric_limits<double>::infinity();
    double speed_max = -speed_min;
    for (std::size_t i = 0; i < sampling.size(); ++i) {
        if (sampling[i] != 1.0) continue;
        by_level[level_col[i]].push_back({t_col[i], level_col[i], va_sq[i], ea[i]});
        speed_min = std::min(speed_min, va[i]);
        speed_max = std::max(speed_max, va[i]);
    }

    std::vector<LevelFit> fits;
    int skipped = 0;
    for (const auto& [level, samples] : by_level) {
        try {
            fits.push_back(fit_level(samples));
        } catch (const Error& e) {
            if (e.code() != Errc::identification_failure) throw;
            ++skipped;
        }
    }

    summary.set("levels_fit", static_cast<double>(fits.size()));
    summary.set("levels_skipped", static_cast<double>(skipped));
    summary.set("speed_min", speed_min);
    summary.set("speed_max", speed_max);
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const std::string prefix = "level" + std::to_string(i) + "_";
        summary.set(prefix + "thrust", fits[i].thrust_level);
        summary.set(prefix + "slope", fits[i].slope);
        summary.set(prefix + "intercept", fits[i].intercept);
        summary.set(prefix + "rms", fits[i].residual_rms);
        summary.set(prefix + "count", static_cast<double>(fits[i].count));
    }
    if (fits.size() >= 2) {
        EnergyModel model = build_energy_model(fits, table.meta_number("model_airspeed"),
                                               std::make_pair(speed_min, speed_max));
        summary.set("inverse_slope", model.thrust_slope);
        summary.set("inverse_intercept", model.thrust_intercept);
        summary.set("extrapolated", model.extrapolated ? 1.0 : 0.0);
    }
    return summary;
}

bool row_has_event(const std::string& cell, const std::string& event) {
    std::stringstream ss(cell);
    std::string item;
    while (std::getline(ss, item, '|'))
        if (item == event) return true;
    return false;
}

RunSummary summarize_steps(const CsvTable& table) {
    RunSummary summary;
    summary.kind = ScenarioKind::AccelSteps;

    const auto t = table.numeric_column("t");
    const auto seg_col = table.numeric_column("segment");
    const auto cmd_by = table.numeric_column("acc_cmd_by");
    const auto cmd_bz = table.numeric_column("acc_cmd_bz");
    auto meas_by = table.numeric_column("acc_meas_by");
    auto meas_bz = table.numeric_column("acc_meas_bz");
    const auto cmd_mag = table.numeric_column("normal_cmd_mag");
    const auto vel_n = table.numeric_column("vel_n");
    const auto vel_e = table.numeric_column("vel_e");
    const auto vel_d = table.numeric_column("vel_d");
    const auto speed_ref = table.numeric_column("speed_ref");
    const auto events = table.text_column("events");

    const bool noisy = table.has_meta("noise") && table.meta_number("noise") == 1.0;
    if (noisy) {
        meas_by = moving_average(meas_by, 10);
        meas_bz = moving_average(meas_bz, 10);
    }

    const std::size_t n = t.size();
    std::vector<double> err(n);
    for (std::size_t i = 0; i < n; ++i)
        err[i] = std::hypot(meas_by[i] - cmd_by[i], meas_bz[i] - cmd_bz[i]);

    // Per-segment tracking metrics.
    std::set<int> seg_ids;
    for (double s : seg_col)
        if (s >= 0.0) seg_ids.insert(static_cast<int>(s));

    for (int seg : seg_ids) {
        std::size_t first = n, last = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (static_cast<int>(seg_col[i]) == seg) {
                first = std::min(first, i);
                last = std::max(last, i);
            }
        if (first >= n) continue;

        double mean_cmd = 0.0;
        for (std::size_t i = first; i <= last; ++i) mean_cmd += cmd_mag[i];
        mean_cmd /= static_cast<double>(last - first + 1);
        const std::string prefix = "step" + std::to_string(seg) + "_";

        if (mean_cmd > 0.5) {
            const double band = 0.1 * mean_cmd;
            std::size_t settle_idx = first;
            for (std::size_t i = last + 1; i-- > first;) {
                if (err[i] > band) {
                    settle_idx = i + 1;
                    break;
                }
                if (i == first) settle_idx = first;
            }
            const double settle =
                settle_idx > last ? -1.0 : t[settle_idx] - t[first];
            summary.set(prefix + "settle_s", settle);

            double overshoot = 0.0;
            for (std::size_t i = first; i <= last; ++i) {
                const double body_norm = std::hypot(cmd_by[i], cmd_bz[i]);
                if (body_norm < 1e-9) continue;
                const double proj =
                    (meas_by[i] * cmd_by[i] + meas_bz[i] * cmd_bz[i]) / body_norm;
                overshoot = std::max(overshoot, (proj - body_norm) / body_norm);
            }
            summary.set(prefix + "overshoot", overshoot);

            const std::size_t tail = first + 3 * (last - first + 1) / 4;
            double sse = 0.0;
            for (std::size_t i = tail; i <= last; ++i) sse += err[i];
            summary.set(prefix + "sse", sse / static_cast<double>(last - tail + 1));
            summary.set(prefix + "cmd", mean_cmd);
        } else {
            double max_err = 0.0;
            for (std::size_t i = first; i <= last; ++i) max_err = std::max(max_err, err[i]);
            summary.set(prefix + "max_err", max_err);
        }
    }

    // Thrust saturation event and ground-speed deviation.
    double sat_t = -1.0;
    for (std::size_t i = 0; i < n; ++i)
        if (row_has_event(events[i], "thrust_sat")) {
            sat_t = t[i];
            break;
        }
    summary.set("thrust_sat_t", sat_t);

    auto speed_dev = [&](std::size_t i) {
        return std::abs(std::sqrt(vel_n[i] * vel_n[i] + vel_e[i] * vel_e[i] + vel_d[i] * vel_d[i]) -
                        speed_ref[i]);
    };
    double dev_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) dev_max = std::max(dev_max, speed_dev(i));
    summary.set("speed_dev_max", dev_max);
    summary.set("speed_dev_end", n ? speed_dev(n - 1) : kNan);
    if (sat_t >= 0.0) {
        std::size_t sat_idx = 0;
        while (sat_idx + 1 < n && t[sat_idx] < sat_t) ++sat_idx;
        summary.set("speed_dev_at_sat", speed_dev(sat_idx));
    }
    return summary;
}

RunSummary summarize_pn(const CsvTable& table) {
    RunSummary summary;
    summary.kind = ScenarioKind::PnIntercept;

    const Vec3 target{table.meta_number("target_n"), table.meta_number("target_e"),
                      table.meta_number("target_d")};
    const auto t = table.numeric_column("t");
    const auto pn = table.numeric_column("pos_n");
    const auto pe = table.numeric_column("pos_e");
    const auto pd = table.numeric_column("pos_d");
    const auto range = table.numeric_column("range");

    // Closest approach over the piecewise-linear trajectory.
    double miss = std::numeric_limits<double>::infinity();
    double miss_t = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const Vec3 a{pn[i], pe[i], pd[i]};
        double d = norm(target - a);
        double when = t[i];
        if (i + 1 < t.size()) {
            const Vec3 b{pn[i + 1], pe[i + 1], pd[i + 1]};
            const Vec3 ab = b - a;
            const double len_sq = dot(ab, ab);
            if (len_sq > 0.0) {
                const double s = std::clamp(dot(target - a, ab) / len_sq, 0.0, 1.0);
                const double d_seg = norm(target - (a + s * ab));
                if (d_seg < d) {
                    d = d_seg;
                    when = t[i] + s * (t[i + 1] - t[i]);
                }
            }
        }
        if (d < miss) {
            miss = d;
            miss_t = when;
        }
    }
    summary.set("miss_distance", miss);
    summary.set("intercept_time", miss_t);
    summary.set("final_range", range.empty() ? kNan : range.back());

    const auto cmd_mag = table.numeric_column("normal_cmd_mag");
    double peak_cmd = 0.0;
    for (double v : cmd_mag) peak_cmd = std::max(peak_cmd, v);
    summary.set("peak_normal_cmd", peak_cmd);
    return summary;
}

}  // namespace

const char* scenario_kind_name(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::Calibration: return "calibration";
        case ScenarioKind::AccelSteps: return "accel_steps";
        case ScenarioKind::PnIntercept: return "pn_intercept";
    }
    return "unknown";
}

std::optional<double> RunSummary::metric(const std::string& name) const {
    for (const auto& [key, value] : metrics)
        if (key == name) return value;
    return std::nullopt;
}

void RunSummary::set(const std::string& name, double value) {
    for (auto& [key, v] : metrics)
        if (key == name) {
            v = value;
            return;
        }
    metrics.emplace_back(name, value);
}

RunSummary summarize_log(const CsvTable& table) {
    auto it = table.meta.find("kind");
    if (it == table.meta.end())
        throw Error(Errc::config_error, "log is missing the kind metadata");
    if (it->second == "calibration") return summarize_calibration(table);
    if (it->second == "accel_steps") return summarize_steps(table);
    if (it->second == "pn_intercept") return summarize_pn(table);
    throw Error(Errc::config_error, "unknown log kind: " + it->second);
}

RunSummary run_scenario(const ScenarioConfig& config, const std::string& out_dir,
                        const std::string& provenance) {
    config.validate();
    std::filesystem::create_directories(out_dir);
    const auto start = std::chrono::steady_clock::now();

    AbortInfo abort_info;
    bool aborted = false;
    CsvTable table;
    switch (config.kind) {
        case ScenarioKind::Calibration:
            table = run_calibration_scenario(config, out_dir, provenance);
            break;
        case ScenarioKind::AccelSteps: {
            AbortInfo info;
            table = run_steps_scenario(config, &info);
            if (!info.what.empty()) {
                abort_info = info;
                aborted = true;
            }
            break;
        }
        case ScenarioKind::PnIntercept: {
            AbortInfo info;
            table = run_pn_scenario(config, &info);
            if (!info.what.empty()) {
                abort_info = info;
                aborted = true;
            }
            break;
        }
    }

    const std::string csv_path = out_dir + "/" + config.name + ".csv";
    table.write(csv_path);

    RunSummary summary = summarize_log(table);
    if (aborted) {
        std::ostringstream dump;
        dump << "envelope_abort t=" << format_number(abort_info.time) << " " << abort_info.what
             << " roll=" << format_number(abort_info.state.attitude.roll)
             << " pitch=" << format_number(abort_info.state.attitude.pitch)
             << " airspeed=" << format_number(abort_info.state.airspeed);
        summary.events.push_back(dump.str());
        summary.set("envelope_violations", 1.0);
    } else {
        summary.set("envelope_violations", 0.0);
    }

    summary.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_summary(out_dir + "/" + config.name + "_summary.txt", summary);

    if (aborted)
        throw EnvelopeError(abort_info.what + " (log written to " + csv_path + ")",
                            abort_info.state, abort_info.time);
    return summary;
}

void write_summary(const std::string& path, const RunSummary& summary) {
    std::ofstream out(path);
    if (!out)
        throw Error(Errc::io_error, "cannot open summary for writing: " + path);
    out << "fwaccel-summary v1\n";
    out << "kind=" << scenario_kind_name(summary.kind) << "\n";
    out << "wall_clock_s=" << format_number(summary.wall_clock_s) << "\n";
    for (const auto& [key, value] : summary.metrics)
        out << "metric." << key << "=" << format_number(value) << "\n";
    for (std::size_t i = 0; i < summary.events.size(); ++i)
        out << "event." << i << "=" << summary.events[i] << "\n";
    if (!out)
        throw Error(Errc::io_error, "failed writing summary: " + path);
}

RunSummary read_summary(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::io_error, "cannot open summary: " + path);

    RunSummary summary;
    std::string line;
    if (!std::getline(in, line) || line != "fwaccel-summary v1")
        throw Error(Errc::config_error, "unrecognized summary header in " + path);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::config_error, "malformed summary line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "kind") {
            if (value == "calibration") summary.kind = ScenarioKind::Calibration;
            else if (value == "accel_steps") summary.kind = ScenarioKind::AccelSteps;
            else if (value == "pn_intercept") summary.kind = ScenarioKind::PnIntercept;
            else throw Error(Errc::config_error, "unknown summary kind: " + value);
        } else if (key == "wall_clock_s") {
            summary.wall_clock_s = std::stod(value);
        } else if (key.rfind("metric.", 0) == 0) {
            summary.metrics.emplace_back(key.substr(7), std::stod(value));
        } else if (key.rfind("event.", 0) == 0) {
            summary.events.push_back(value);
        }
    }
    return summary;
}

std::vector<std::string> replay_audit(const std::string& csv_path,
                                      const std::string& summary_path) {
    const CsvTable table = CsvTable::read(csv_path);
    const RunSummary recomputed = summarize_log(table);
    const RunSummary stored = read_summary(summary_path);

    std::vector<std::string> mismatches;
    for (const auto& [key, value] : stored.metrics) {
        if (key == "envelope_violations") continue;  // run-level, not derivable from rows
        const auto again = recomputed.metric(key);
        const bool both_nan = again && std::isnan(value) && std::isnan(*again);
        if (!again || (!both_nan && *again != value)) mismatches.push_back(key);
    }
    for (const auto& [key, value] : recomputed.metrics)
        if (!stored.metric(key)) mismatches.push_back(key + " (missing)");
    return mismatches;
}

void emit_plot_data(const std::string& csv_path, const std::string& out_path) {
    const CsvTable table = CsvTable::read(csv_path);

    CsvTable out;
    out.meta = table.meta;
    out.meta["smoothing"] = "trailing mean, 10 samples";

    std::vector<std::vector<std::string>> numeric_cols;
    for (const std::string& col : table.columns) {
        std::vector<double> values;
        try {
            values = table.numeric_column(col);
        } catch (...) {
            continue;  // text column
        }
        bool numeric = true;
        for (const auto& row : table.rows) {
            const std::string& cell = row[table.column_index(col)];
            char* end = nullptr;
            std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) {
                numeric = false;
                break;
            }
        }
        if (!numeric) continue;

        const std::vector<double> averaged = moving_average(values, 10);
        out.columns.push_back(col);
        out.columns.push_back(col + "_ma10");
        std::vector<std::string> raw_col, ma_col;
        for (std::size_t i = 0; i < values.size(); ++i) {
            raw_col.push_back(format_number(values[i]));
            ma_col.push_back(format_number(averaged[i]));
        }
        numeric_cols.push_back(std::move(raw_col));
        numeric_cols.push_back(std::move(ma_col));
    }

    out.rows.resize(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        for (const auto& col : numeric_cols) out.rows[r].push_back(col[r]);
    out.write(out_path);
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

VehicleState state_from_measurement(const SensorSnapshot& snap) {
    VehicleState state;
    state.position = {snap.position, Frame::Inertial};
    state.velocity = {snap.velocity, Frame::Inertial};
    state.attitude = snap.attitude;
    state.p = snap.p;
    state.q = snap.q;
    state.r = snap.r;
    state.airspeed = snap.airspeed;
    state.thrust = 0.0;  // not observable; the controller never reads it
    return state;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

Vec3 vec3_from(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3)
        throw Error(Errc::config_error, what + " must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object())
        throw Error(Errc::config_error, where + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw Error(Errc::config_error, "unknown key \"" + key + "\" in " + where);
}

}  // namespace

void ScenarioConfig::validate() const {
    if (schema_version != 1)
        throw Error(Errc::config_error, "unsupported config schema version");
    vehicle.validate();
    gains.validate();
    if (!(control_rate_hz > 0.0))
        throw Error(Errc::config_error, "control_rate_hz must be positive");
    if (!(sim_dt > 0.0 && sim_dt <= 0.05))
        throw Error(Errc::config_error, "sim_dt out of (0, 0.05]");
    if (!(initial.speed > 0.0))
        throw Error(Errc::config_error, "initial speed must be positive");
    if (noise.enabled && seed == 0)
        throw Error(Errc::config_error, "a nonzero seed is required when noise is enabled");

    switch (kind) {
        case ScenarioKind::Calibration:
            plan.validate();
            break;
        case ScenarioKind::AccelSteps: {
            if (!(duration > 0.0))
                throw Error(Errc::config_error, "accel_steps duration must be positive");
            double prev_end = -1.0;
            for (const StepSegment& seg : steps) {
                if (!(seg.duration > 0.0))
                    throw Error(Errc::config_error, "step segment duration must be positive");
                if (seg.start < prev_end)
                    throw Error(Errc::config_error, "step segments overlap or are out of order");
                prev_end = seg.start + seg.duration;
            }
            break;
        }
        case ScenarioKind::PnIntercept:
            pn.validate();
            if (!(max_duration > 0.0))
                throw Error(Errc::config_error, "max_duration must be positive");
            if (norm(target_offset_ned) < 1.0)
                throw Error(Errc::config_error, "target offset is degenerate");
            break;
    }
}

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::config_error, std::string("config is not valid JSON: ") + e.what());
    }

    check_keys(j, {"schema_version", "kind", "name", "seed", "vehicle", "initial", "gains",
                   "priority", "noise", "control_rate_hz", "sim_dt", "integral_trim",
                   "literal_gravity_sign", "calibration", "steps", "duration", "pn",
                   "model_file"},
               "config root");

    ScenarioConfig cfg;
    try {
        cfg.schema_version = j.value("schema_version", 1);

        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "calibration") cfg.kind = ScenarioKind::Calibration;
        else if (kind == "accel_steps") cfg.kind = ScenarioKind::AccelSteps;
        else if (kind == "pn_intercept") cfg.kind = ScenarioKind::PnIntercept;
        else throw Error(Errc::config_error, "unknown scenario kind: " + kind);

        cfg.name = j.value("name", std::string("scenario"));
        cfg.seed = j.value("seed", 0ULL);
        cfg.control_rate_hz = j.value("control_rate_hz", 50.0);
        cfg.sim_dt = j.value("sim_dt", 0.005);
        cfg.integral_trim = j.value("integral_trim", false);
        cfg.literal_gravity_sign = j.value("literal_gravity_sign", false);
        cfg.duration = j.value("duration", 0.0);
        cfg.model_file = j.value("model_file", std::string());

        if (j.contains("vehicle")) {
            const json& v = j["vehicle"];
            check_keys(v, {"mass", "ref_area", "air_density", "drag_coeff", "max_thrust",
                           "tau_rate", "tau_thrust", "stall_speed", "lift_slope",
                           "max_load_factor"},
                       "vehicle");
            cfg.vehicle.mass = v.value("mass", cfg.vehicle.mass);
            cfg.vehicle.ref_area = v.value("ref_area", cfg.vehicle.ref_area);
            cfg.vehicle.air_density = v.value("air_density", cfg.vehicle.air_density);
            cfg.vehicle.drag_coeff = v.value("drag_coeff", cfg.vehicle.drag_coeff);
            cfg.vehicle.max_thrust = v.value("max_thrust", cfg.vehicle.max_thrust);
            cfg.vehicle.tau_rate = v.value("tau_rate", cfg.vehicle.tau_rate);
            cfg.vehicle.tau_thrust = v.value("tau_thrust", cfg.vehicle.tau_thrust);
            cfg.vehicle.stall_speed = v.value("stall_speed", cfg.vehicle.stall_speed);
            cfg.vehicle.lift_slope = v.value("lift_slope", cfg.vehicle.lift_slope);
            cfg.vehicle.max_load_factor = v.value("max_load_factor", cfg.vehicle.max_load_factor);
        }
        if (j.contains("initial")) {
            const json& i = j["initial"];
            check_keys(i, {"speed", "heading_deg", "flight_path_deg", "altitude"}, "initial");
            cfg.initial.speed = i.value("speed", cfg.initial.speed);
            cfg.initial.heading_deg = i.value("heading_deg", cfg.initial.heading_deg);
            cfg.initial.flight_path_deg = i.value("flight_path_deg", cfg.initial.flight_path_deg);
            cfg.initial.altitude = i.value("altitude", cfg.initial.altitude);
        }
        if (j.contains("gains")) {
            const json& g = j["gains"];
            check_keys(g, {"k_roll", "k_pitch", "k_speed"}, "gains");
            cfg.gains.k_roll = g.value("k_roll", cfg.gains.k_roll);
            cfg.gains.k_pitch = g.value("k_pitch", cfg.gains.k_pitch);
            cfg.gains.k_speed = g.value("k_speed", cfg.gains.k_speed);
        }
        if (j.contains("priority")) {
            const std::string p = j["priority"].get<std::string>();
            if (p == "normal") cfg.priority = PriorityMode::NormalPriority;
            else if (p == "tangential") cfg.priority = PriorityMode::TangentialPriority;
            else throw Error(Errc::config_error, "unknown priority mode: " + p);
        }
        if (j.contains("noise")) {
            const json& noise = j["noise"];
            check_keys(noise,
                       {"enabled", "sigma_attitude", "sigma_rates", "sigma_velocity",
                        "sigma_position", "sigma_airspeed", "sigma_accel"},
                       "noise");
            cfg.noise.enabled = noise.value("enabled", false);
            cfg.noise.sigma_attitude = noise.value("sigma_attitude", 0.0);
            cfg.noise.sigma_rates = noise.value("sigma_rates", 0.0);
            cfg.noise.sigma_velocity = noise.value("sigma_velocity", 0.0);
            cfg.noise.sigma_position = noise.value("sigma_position", 0.0);
            cfg.noise.sigma_airspeed = noise.value("sigma_airspeed", 0.0);
            cfg.noise.sigma_accel = noise.value("sigma_accel", 0.0);
        }
        if (j.contains("calibration")) {
            const json& c = j["calibration"];
            check_keys(c,
                       {"levels", "dwell_s", "ordering", "transient_trim_s", "passes",
                        "hold_pitch_deg", "pitch_weave_deg", "filter_cutoff_hz",
                        "model_airspeed"},
                       "calibration");
            if (c.contains("levels")) cfg.plan.levels = c["levels"].get<std::vector<double>>();
            cfg.plan.dwell_s = c.value("dwell_s", cfg.plan.dwell_s);
            if (c.contains("ordering")) {
                const std::string o = c["ordering"].get<std::string>();
                if (o == "alternating") cfg.plan.ordering = CalibrationPlan::Ordering::Alternating;
                else if (o == "increasing") cfg.plan.ordering = CalibrationPlan::Ordering::Increasing;
                else throw Error(Errc::config_error, "unknown calibration ordering: " + o);
            }
            cfg.plan.transient_trim_s = c.value("transient_trim_s", cfg.plan.transient_trim_s);
            cfg.plan.passes = c.value("passes", cfg.plan.passes);
            cfg.plan.hold_pitch = deg_to_rad(c.value("hold_pitch_deg", 0.0));
            if (c.contains("pitch_weave_deg"))
                cfg.plan.pitch_weave = deg_to_rad(c["pitch_weave_deg"].get<double>());
            cfg.plan.filter_cutoff_hz = c.value("filter_cutoff_hz", cfg.plan.filter_cutoff_hz);
            cfg.model_airspeed = c.value("model_airspeed", cfg.model_airspeed);
        }
        if (j.contains("steps")) {
            for (const json& s : j["steps"]) {
                check_keys(s,
                           {"start", "duration", "normal_accel", "frame", "speed_ref",
                            "tangential_accel"},
                           "steps[]");
                StepSegment seg;
                seg.start = s.at("start").get<double>();
                seg.duration = s.at("duration").get<double>();
                seg.normal_accel = vec3_from(s.at("normal_accel"), "normal_accel");
                const std::string frame = s.value("frame", std::string("path"));
                if (frame == "path" || frame == "vehicle2") seg.frame = Frame::Vehicle2;
                else if (frame == "inertial") seg.frame = Frame::Inertial;
                else throw Error(Errc::config_error, "unknown step frame: " + frame);
                seg.speed_ref = s.value("speed_ref", 20.0);
                if (s.contains("tangential_accel"))
                    seg.tangential_accel = s["tangential_accel"].get<double>();
                cfg.steps.push_back(seg);
            }
        }
        if (j.contains("pn")) {
            const json& p = j["pn"];
            check_keys(p,
                       {"nav_constant", "speed_setpoint", "k_speed", "intercept_radius",
                        "offset_ned", "max_duration", "terminal_hold_range", "accel_limit",
                        "los_rate_mode"},
                       "pn");
            cfg.pn.nav_constant = p.value("nav_constant", cfg.pn.nav_constant);
            cfg.pn.speed_setpoint = p.value("speed_setpoint", cfg.pn.speed_setpoint);
            cfg.pn.k_speed = p.value("k_speed", cfg.pn.k_speed);
            cfg.pn.intercept_radius = p.value("intercept_radius", cfg.pn.intercept_radius);
            cfg.pn.terminal_hold_range = p.value("terminal_hold_range", cfg.pn.terminal_hold_range);
            cfg.pn.accel_limit = p.value("accel_limit", cfg.pn.accel_limit);
            if (p.contains("offset_ned"))
                cfg.target_offset_ned = vec3_from(p["offset_ned"], "offset_ned");
            cfg.max_duration = p.value("max_duration", cfg.max_duration);
            if (p.contains("los_rate_mode")) {
                const std::string mode = p["los_rate_mode"].get<std::string>();
                if (mode == "analytic") cfg.pn_finite_difference_los = false;
                else if (mode == "finite_difference") cfg.pn_finite_difference_los = true;
                else throw Error(Errc::config_error, "unknown los_rate_mode: " + mode);
            }
        }
    } catch (const json::exception& e) {
        throw Error(Errc::config_error, std::string("config field error: ") + e.what());
    }

    cfg.validate();
    return cfg;
}

ScenarioConfig ScenarioConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::io_error, "cannot open config: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

}  // namespace fwaccel
