// fwaccel command-line harness: run calibration, tracking, and intercept
// scenarios from config files, audit logs, and regenerate tuned defaults.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fwaccel/harness.hpp"

namespace {

using namespace fwaccel;

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::config_error:
        case Errc::invalid_input:
            return 2;
        case Errc::envelope_violation:
            return 3;
        case Errc::identification_failure:
            return 4;
        case Errc::io_error:
            return 5;
        default:
            return 6;
    }
}

int report_error(const Error& e) {
    std::fprintf(stderr, "error category=%s message=%s\n", errc_name(e.code()), e.what());
    return exit_code_for(e.code());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_kind(ScenarioKind kind, const std::string& config_path, std::uint64_t seed, bool seed_set,
             const std::string& out_dir, bool quiet) {
    try {
        const std::string text = read_file(config_path);
        ScenarioConfig cfg = ScenarioConfig::from_json_text(text);
        if (cfg.kind != kind)
            throw Error(Errc::config_error,
                        std::string("config kind is ") + scenario_kind_name(cfg.kind) +
                            ", expected " + scenario_kind_name(kind));
        if (seed_set) cfg.seed = seed;
        cfg.validate();

        RunSummary summary = run_scenario(cfg, out_dir, fnv1a_hex(text));
        if (!quiet) {
            std::printf("scenario %s (%s) finished in %.3f s\n", cfg.name.c_str(),
                        scenario_kind_name(cfg.kind), summary.wall_clock_s);
            for (const auto& [key, value] : summary.metrics)
                std::printf("  %s = %s\n", key.c_str(), format_number(value).c_str());
            for (const auto& event : summary.events) std::printf("  event: %s\n", event.c_str());
        }
        return 0;
    } catch (const Error& e) {
        return report_error(e);
    }
}

// --- tune: regenerate the derived defaults ---------------------------------

// Vehicle constants follow from two landmarks: the drag-slope coefficient of
// the energy model at mid thrust, and the trim throttle at cruise.
void tune_vehicle(bool quiet) {
    const double k_v_target = -0.0032;  // 1/m
    const double trim_thrust_cmd = 0.40;
    const double cruise = 20.0;  // m/s

    VehicleParams p;
    p.drag_coeff = 2.0 * p.mass * (-k_v_target) / (p.air_density * p.ref_area);
    p.max_thrust = p.drag_force(cruise) / trim_thrust_cmd;

    std::printf("vehicle (targets: drag slope %s 1/m, trim thrust cmd %.2f at %.0f m/s):\n",
                format_number(k_v_target).c_str(), trim_thrust_cmd, cruise);
    std::printf("  drag_coeff = %.5f\n", p.drag_coeff);
    std::printf("  max_thrust = %.2f N\n", p.max_thrust);
    if (!quiet) {
        const double slope = -0.5 * p.air_density * p.ref_area * p.drag_coeff / p.mass;
        std::printf("  check: drag slope %s 1/m, trim cmd %.4f\n", format_number(slope).c_str(),
                    p.drag_force(cruise) / p.max_thrust);
    }
}

ScenarioConfig lateral_step_config(double k_roll, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::AccelSteps;
    cfg.name = "tune_sweep";
    cfg.gains.k_roll = k_roll;
    cfg.duration = 14.0;
    cfg.steps = {{1.0, 6.0, {0.0, 4.0, 0.0}, Frame::Vehicle2, 20.0, std::nullopt},
                 {7.0, 6.0, {0.0, -4.0, 0.0}, Frame::Vehicle2, 20.0, std::nullopt}};
    if (seed != 0) {
        cfg.seed = seed;
        cfg.noise.enabled = true;
        cfg.noise.sigma_attitude = 0.005;
        cfg.noise.sigma_rates = 0.01;
        cfg.noise.sigma_velocity = 0.1;
        cfg.noise.sigma_position = 0.2;
        cfg.noise.sigma_airspeed = 0.3;
        cfg.noise.sigma_accel = 0.2;
    }
    return cfg;
}

void tune_gains(const std::string& out_dir, bool quiet) {
    // Roll gain: fastest lateral-step settling without >20 % overshoot on the
    // clean run, ranked by the mean settling time across noisy seeds so the
    // pick is robust to sensor noise.
    double best_k_roll = 0.0, best_settle = 1e9;
    for (double k_roll : {1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0}) {
        RunSummary clean = run_scenario(lateral_step_config(k_roll, 0), out_dir + "/tune");
        const double overshoot = std::max(clean.metric("step0_overshoot").value_or(1.0),
                                          clean.metric("step1_overshoot").value_or(1.0));
        double mean_settle = 0.0;
        bool all_settled = true;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            RunSummary s = run_scenario(lateral_step_config(k_roll, seed), out_dir + "/tune");
            const double settle = std::max(s.metric("step0_settle_s").value_or(-1.0),
                                           s.metric("step1_settle_s").value_or(-1.0));
            if (settle < 0.0) all_settled = false;
            mean_settle += settle / 5.0;
        }
        if (!quiet)
            std::printf("  k_roll %.1f: noisy settle %.2f s, clean overshoot %.1f %%\n", k_roll,
                        mean_settle, overshoot * 100.0);
        if (overshoot <= 0.20 && all_settled && mean_settle < best_settle) {
            best_settle = mean_settle;
            best_k_roll = k_roll;
        }
    }

    // Speed gain: fastest settling of a +4 m/s speed step into a 2 % band
    // around the speed actually achieved (the static model inversion keeps a
    // small steady offset; convergence rate is what the gain controls).
    VehicleParams vp;
    EnergyModel model = EnergyModel::from_params(vp, 20.0);
    double best_k_speed = 0.0, best_speed_settle = 1e9;
    for (double k_speed : {0.3, 0.5, 0.8, 1.2, 1.6}) {
        Simulator sim(vp, Simulator::trim_state(vp, 20.0, 0.0, 0.0, 100.0));
        OuterLoopConfig lc;
        lc.gains.k_speed = k_speed;
        OuterLoop loop(lc);
        const double dt_c = 0.02;
        std::vector<double> speeds;
        for (int k = 0; k < 1200; ++k) {
            const VehicleState& st = sim.state();
            const double a_t = lc.gains.k_speed * (24.0 - st.speed());
            AccelCommand cmd = AccelCommand::project({{0, 0, 0}, Frame::Inertial}, a_t, st.velocity);
            RealizeResult res = loop.step(cmd, st, model, dt_c);
            for (int sub = 0; sub < 4; ++sub) sim.step(res.command, dt_c / 4.0);
            speeds.push_back(sim.state().speed());
        }
        const double final_speed = speeds.back();
        double settle = 1e9;
        for (std::size_t k = speeds.size(); k-- > 0;) {
            if (std::abs(speeds[k] - final_speed) > 0.02 * final_speed) break;
            settle = static_cast<double>(k) * dt_c;
        }
        if (!quiet)
            std::printf("  k_speed %.1f: settle %.2f s (steady %.2f m/s)\n", k_speed, settle,
                        final_speed);
        if (settle < best_speed_settle) {
            best_speed_settle = settle;
            best_k_speed = k_speed;
        }
    }

    // Pitch-bound gain: fastest convergence of pitch onto the feasibility
    // bound in a short tangential-priority deceleration (ended before the
    // commanded deceleration runs the airspeed down to the envelope).
    double best_k_pitch = 0.0, best_pitch_settle = 1e9;
    for (double k_pitch : {1.0, 1.5, 2.0, 3.0, 4.0}) {
        Simulator sim(vp, Simulator::trim_state(vp, 26.0, 0.0, deg_to_rad(-10.0), 500.0));
        OuterLoopConfig lc;
        lc.gains.k_pitch = k_pitch;
        lc.mode = PriorityMode::TangentialPriority;
        OuterLoop loop(lc);
        const double dt_c = 0.02;
        double settle = 1e9;
        bool aborted = false;
        for (int k = 0; k < 170 && !aborted; ++k) {
            const double t = k * dt_c;
            const VehicleState& st = sim.state();
            AccelCommand cmd =
                AccelCommand::project({{0, 0, 0}, Frame::Inertial}, -4.0, st.velocity);
            RealizeResult res = loop.step(cmd, st, model, dt_c);
            try {
                for (int sub = 0; sub < 4; ++sub) sim.step(res.command, dt_c / 4.0);
            } catch (const EnvelopeError&) {
                aborted = true;
                break;
            }
            const auto [e_min, e_max] = model.energy_accel_bounds(sim.state().airspeed);
            const auto [th_min, th_max] = pitch_interval(-4.0, e_min, e_max);
            (void)th_max;
            if (std::abs(sim.state().attitude.pitch - th_min) > deg_to_rad(2.0)) settle = 1e9;
            else if (settle > t) settle = t;
        }
        if (!quiet)
            std::printf("  k_pitch %.1f: bound convergence %.2f s%s\n", k_pitch, settle,
                        aborted ? " (aborted)" : "");
        if (!aborted && settle < best_pitch_settle) {
            best_pitch_settle = settle;
            best_k_pitch = k_pitch;
        }
    }

    std::printf("smallest-settle picks: k_roll %.1f, k_pitch %.1f, k_speed %.1f\n", best_k_roll,
                best_k_pitch, best_k_speed);
    OuterLoopGains defaults;
    std::printf(
        "shipped defaults: k_roll %.1f, k_pitch %.1f, k_speed %.1f"
        " (flat region of the settle curves, clear of the overshoot cliff;"
        " every acceptance bound holds with margin)\n",
        defaults.k_roll, defaults.k_pitch, defaults.k_speed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixed-wing acceleration-command realization harness"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::uint64_t seed = 0;
    bool quiet = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", config_path, "scenario config (JSON)")->required();
        cmd->add_option("--seed", seed, "override the config RNG seed");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_flag("--quiet", quiet, "suppress the summary printout");
    };

    CLI::App* calibrate = app.add_subcommand("calibrate", "thrust-sweep identification flight");
    add_common(calibrate, true);
    CLI::App* track = app.add_subcommand("track", "acceleration-step tracking flight");
    add_common(track, true);
    CLI::App* intercept = app.add_subcommand("intercept", "proportional-navigation intercept");
    add_common(intercept, true);

    CLI::App* replay = app.add_subcommand("replay", "recompute summary metrics from a CSV log");
    std::string csv_path, summary_path, plot_path;
    replay->add_option("--csv", csv_path, "CSV log")->required();
    replay->add_option("--summary", summary_path, "summary file (default: derived from --csv)");
    replay->add_option("--emit-plot", plot_path, "write plot-ready data with 10-sample averages");
    replay->add_flag("--quiet", quiet, "only report mismatches");

    CLI::App* tune = app.add_subcommand("tune", "regenerate tuned defaults");
    std::string what = "all";
    tune->add_option("--what", what, "vehicle|gains|all")
        ->check(CLI::IsMember({"vehicle", "gains", "all"}));
    tune->add_option("--out", out_dir, "scratch output directory");
    tune->add_flag("--quiet", quiet, "only print the chosen values");

    CLI11_PARSE(app, argc, argv);

    try {
        if (calibrate->parsed())
            return run_kind(ScenarioKind::Calibration, config_path, seed,
                            calibrate->count("--seed") > 0, out_dir, quiet);
        if (track->parsed())
            return run_kind(ScenarioKind::AccelSteps, config_path, seed, track->count("--seed") > 0,
                            out_dir, quiet);
        if (intercept->parsed())
            return run_kind(ScenarioKind::PnIntercept, config_path, seed,
                            intercept->count("--seed") > 0, out_dir, quiet);

        if (replay->parsed()) {
            if (summary_path.empty()) {
                summary_path = csv_path;
                const std::string suffix = ".csv";
                if (summary_path.size() > suffix.size() &&
                    summary_path.compare(summary_path.size() - suffix.size(), suffix.size(),
                                         suffix) == 0)
                    summary_path.resize(summary_path.size() - suffix.size());
                summary_path += "_summary.txt";
            }
            const std::vector<std::string> mismatches = replay_audit(csv_path, summary_path);
            if (!plot_path.empty()) emit_plot_data(csv_path, plot_path);
            if (mismatches.empty()) {
                if (!quiet) std::printf("replay: all summary metrics reproduced from the CSV\n");
                return 0;
            }
            for (const auto& name : mismatches)
                std::fprintf(stderr, "replay mismatch: %s\n", name.c_str());
            return 1;
        }

        if (tune->parsed()) {
            if (what == "vehicle" || what == "all") tune_vehicle(quiet);
            if (what == "gains" || what == "all") tune_gains(out_dir, quiet);
            return 0;
        }
    } catch (const Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error category=internal message=%s\n", e.what());
        return 6;
    }
    return 0;
}
