#include "fwaccel/identification.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace fwaccel {

namespace {

constexpr std::size_t kMinSamplesPerLevel = 10;
constexpr double kMinAirspeedSqSpread = 20.0;  // m^2/s^2

}  // namespace

void CalibrationPlan::validate() const {
    if (levels.size() < 2)
        throw Error(Errc::invalid_input, "calibration needs at least 2 thrust levels");
    for (double lvl : levels)
        if (!(lvl >= 0.0 && lvl <= 1.0))
            throw Error(Errc::invalid_input, "thrust levels must lie in [0, 1]");
    std::vector<double> sorted = levels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw Error(Errc::invalid_input, "duplicate thrust levels in plan");
    if (!(dwell_s > transient_trim_s))
        throw Error(Errc::invalid_input, "dwell must exceed the transient trim window");
    if (!(transient_trim_s >= 0.0))
        throw Error(Errc::invalid_input, "negative transient trim");
    if (passes < 1)
        throw Error(Errc::invalid_input, "passes must be >= 1");
    if (!(filter_cutoff_hz > 0.0))
        throw Error(Errc::invalid_input, "filter cutoff must be positive");
}

std::vector<double> CalibrationPlan::dwell_sequence() const {
    std::vector<double> sorted = levels;
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> one_pass;
    if (ordering == Ordering::Increasing) {
        one_pass = sorted;
    } else {
        // Low/high interleave keeps airspeed margin through the sweep.
        std::size_t lo = 0, hi = sorted.size();
        while (lo < hi) {
            one_pass.push_back(sorted[lo++]);
            if (lo < hi) one_pass.push_back(sorted[--hi]);
        }
    }

    std::vector<double> out;
    out.reserve(one_pass.size() * static_cast<std::size_t>(passes));
    for (int pass = 0; pass < passes; ++pass) {
        // Odd passes run the sequence backwards so each level is entered
        // from different speeds, widening the pooled regression span.
        if (pass % 2 == 0)
            out.insert(out.end(), one_pass.begin(), one_pass.end());
        else
            out.insert(out.end(), one_pass.rbegin(), one_pass.rend());
    }
    return out;
}

std::pair<double, double> stabilization_command(const VehicleState& state, double hold_pitch,
                                                const OuterLoopGains& gains) {
    return {-gains.k_roll * state.attitude.roll,
            -gains.k_pitch * (state.attitude.pitch - hold_pitch)};
}

double energy_acceleration(double speed_rate, double sink_rate, double speed, double min_speed) {
    if (!(speed >= min_speed))
        throw Error(Errc::low_speed, "energy_acceleration: speed below minimum");
    return speed_rate - kGravity * sink_rate / speed;
}

LowPass2::LowPass2(double cutoff_hz, double dt) {
    if (!(cutoff_hz > 0.0) || !(dt > 0.0))
        throw Error(Errc::invalid_input, "low-pass cutoff and dt must be positive");
    const double tau = 1.0 / (2.0 * kPi * cutoff_hz);
    alpha_ = dt / (tau + dt);
}

double LowPass2::update(double x) {
    if (!primed_) {
        reset(x);
        return x;
    }
    s1_ += alpha_ * (x - s1_);
    s2_ += alpha_ * (s1_ - s2_);
    return s2_;
}

void LowPass2::reset(double x0) {
    s1_ = s2_ = x0;
    primed_ = true;
}

SpeedRateEstimator::SpeedRateEstimator(double cutoff_hz, double dt)
    : filter_(cutoff_hz, dt), dt_(dt) {}

SpeedRateEstimator::Output SpeedRateEstimator::update(double speed_measured) {
    Output out;
    const double filtered = filter_.update(speed_measured);
    if (primed_) {
        out.speed_rate = (filtered - prev_) / dt_;
        out.speed_filtered = 0.5 * (filtered + prev_);
        out.valid = true;
    } else {
        out.speed_filtered = filtered;
    }
    prev_ = filtered;
    primed_ = true;
    return out;
}

LevelFit fit_level(std::span<const CalibrationSample> samples) {
    if (samples.size() < kMinSamplesPerLevel)
        throw Error(Errc::identification_failure, "too few samples for a level fit");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::vector<double> xs, ys;
    xs.reserve(samples.size());
    ys.reserve(samples.size());
    for (const CalibrationSample& s : samples) {
        xs.push_back(s.airspeed_sq);
        ys.push_back(s.energy_accel);
        lo = std::min(lo, s.airspeed_sq);
        hi = std::max(hi, s.airspeed_sq);
    }
    if (hi - lo < kMinAirspeedSqSpread)
        throw Error(Errc::identification_failure, "airspeed^2 spread too small for a level fit");

    const LineFit line = fit_line(xs, ys);
    LevelFit fit;
    fit.thrust_level = samples.front().thrust_level;
    fit.slope = line.slope;
    fit.intercept = line.intercept;
    fit.count = line.count;
    fit.residual_rms = line.residual_rms;
    fit.positive_slope = line.slope >= 0.0;
    return fit;
}

EnergyModel build_energy_model(std::span<const LevelFit> fits, double airspeed_query,
                               std::optional<std::pair<double, double>> speed_range) {
    if (fits.size() < 2)
        throw Error(Errc::identification_failure, "inverse model needs >= 2 level fits");

    EnergyModel model;
    const double va_sq = airspeed_query * airspeed_query;
    std::vector<double> xs, ys;
    for (const LevelFit& f : fits) {
        model.levels.push_back({f.thrust_level, f.slope, f.intercept});
        xs.push_back(f.thrust_level);
        ys.push_back(f.slope * va_sq + f.intercept);
    }
    std::sort(model.levels.begin(), model.levels.end(),
              [](const ThrustLevelCoeffs& a, const ThrustLevelCoeffs& b) {
                  return a.thrust_cmd < b.thrust_cmd;
              });

    const LineFit inverse = fit_line(xs, ys);
    model.thrust_slope = inverse.slope;
    model.thrust_intercept = inverse.intercept;
    model.airspeed_query = airspeed_query;
    if (speed_range) {
        model.speed_min = speed_range->first;
        model.speed_max = speed_range->second;
        model.extrapolated = airspeed_query < model.speed_min || airspeed_query > model.speed_max;
    }
    return model;
}

CalibrationResult run_calibration(const CalibrationPlan& plan, Simulator& sim,
                                  const OuterLoopGains& gains, double control_dt,
                                  const MeasureFn& measure, const CalibrationObserver& observer) {
    plan.validate();
    gains.validate();
    if (!(control_dt > 0.0))
        throw Error(Errc::invalid_input, "control period must be positive");

    const std::vector<double> sequence = plan.dwell_sequence();
    const int steps_per_dwell = static_cast<int>(std::round(plan.dwell_s / control_dt));
    const double sim_dt = 0.005;
    const int substeps = std::max(1, static_cast<int>(std::round(control_dt / sim_dt)));

    SpeedRateEstimator estimator(plan.filter_cutoff_hz, control_dt);
    LowPass2 sink_filter(plan.filter_cutoff_hz, control_dt);
    double prev_sink = 0.0;
    bool sink_primed = false;

    CalibrationResult result;
    result.speed_min = std::numeric_limits<double>::infinity();
    result.speed_max = -std::numeric_limits<double>::infinity();
    std::map<double, std::vector<CalibrationSample>> by_level;

    double t = 0.0;
    for (std::size_t dwell = 0; dwell < sequence.size(); ++dwell) {
        const double level = sequence[dwell];
        const double weave = (dwell % 2 == 0) ? plan.pitch_weave : -plan.pitch_weave;
        const double pitch_setpoint = plan.hold_pitch + weave;

        for (int step = 0; step < steps_per_dwell; ++step) {
            const double dwell_time = static_cast<double>(step) * control_dt;

            SensorSnapshot snap;
            try {
                snap = measure ? measure() : sim.measure();
            } catch (const EnvelopeError& e) {
                throw EnvelopeError("calibration abort at thrust level " + std::to_string(level) +
                                        ": " + e.what(),
                                    e.state, e.time);
            }

            const auto [p_cmd, q_cmd] = stabilization_command(
                {.attitude = snap.attitude}, pitch_setpoint, gains);
            RateThrustCommand cmd{p_cmd, q_cmd, 0.0, level};

            const SpeedRateEstimator::Output est = estimator.update(snap.airspeed);
            const double sink_now = sink_filter.update(snap.velocity.z);
            const double sink_mid = sink_primed ? 0.5 * (sink_now + prev_sink) : sink_now;
            prev_sink = sink_now;
            sink_primed = true;

            const CalibrationSample* recorded = nullptr;
            CalibrationSample sample;
            if (est.valid && dwell_time >= plan.transient_trim_s) {
                sample.t = t;
                sample.thrust_level = level;
                sample.airspeed_sq = est.speed_filtered * est.speed_filtered;
                sample.energy_accel =
                    energy_acceleration(est.speed_rate, sink_mid, est.speed_filtered);
                by_level[level].push_back(sample);
                result.samples.push_back(sample);
                result.speed_min = std::min(result.speed_min, est.speed_filtered);
                result.speed_max = std::max(result.speed_max, est.speed_filtered);
                recorded = &sample;
            }

            if (observer) observer(t, snap, cmd, level, recorded);

            try {
                for (int sub = 0; sub < substeps; ++sub) sim.step(cmd, control_dt / substeps);
            } catch (const EnvelopeError& e) {
                throw EnvelopeError("calibration abort at thrust level " + std::to_string(level) +
                                        ": " + e.what(),
                                    e.state, e.time);
            }
            t += control_dt;
        }
    }

    for (const auto& [level, samples] : by_level) {
        try {
            result.fits.push_back(fit_level(samples));
        } catch (const Error& e) {
            if (e.code() != Errc::identification_failure) throw;
            result.skipped_levels.push_back(level);
        }
    }
    std::sort(result.fits.begin(), result.fits.end(),
              [](const LevelFit& a, const LevelFit& b) { return a.thrust_level < b.thrust_level; });
    return result;
}

void save_energy_model(const std::string& path, const EnergyModel& model,
                       const std::string& provenance) {
    std::ofstream out(path);
    if (!out)
        throw Error(Errc::io_error, "cannot open model file for writing: " + path);
    out.precision(17);
    out << "schema_version=1\n";
    out << "kind=energy_model\n";
    out << "provenance=" << provenance << "\n";
    out << "airspeed_query=" << model.airspeed_query << "\n";
    out << "thrust_slope=" << model.thrust_slope << "\n";
    out << "thrust_intercept=" << model.thrust_intercept << "\n";
    out << "speed_min=" << model.speed_min << "\n";
    out << "speed_max=" << model.speed_max << "\n";
    out << "extrapolated=" << (model.extrapolated ? 1 : 0) << "\n";
    out << "levels=" << model.levels.size() << "\n";
    for (std::size_t i = 0; i < model.levels.size(); ++i) {
        const ThrustLevelCoeffs& lvl = model.levels[i];
        out << "level." << i << ".thrust=" << lvl.thrust_cmd << "\n";
        out << "level." << i << ".slope=" << lvl.slope << "\n";
        out << "level." << i << ".intercept=" << lvl.intercept << "\n";
    }
    if (!out)
        throw Error(Errc::io_error, "failed writing model file: " + path);
}

EnergyModel load_energy_model(const std::string& path, std::string* provenance) {
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::io_error, "cannot open model file: " + path);

    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::config_error, "malformed model file line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }

    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw Error(Errc::config_error, "model file missing key: " + key);
        return it->second;
    };
    auto get_num = [&](const std::string& key) { return std::stod(get(key)); };

    if (get("schema_version") != "1")
        throw Error(Errc::config_error, "unsupported model schema version");
    if (get("kind") != "energy_model")
        throw Error(Errc::config_error, "not an energy model file");
    if (provenance) *provenance = get("provenance");

    EnergyModel model;
    model.airspeed_query = get_num("airspeed_query");
    model.thrust_slope = get_num("thrust_slope");
    model.thrust_intercept = get_num("thrust_intercept");
    model.speed_min = get_num("speed_min");
    model.speed_max = get_num("speed_max");
    model.extrapolated = get_num("extrapolated") != 0.0;
    const std::size_t n = static_cast<std::size_t>(get_num("levels"));
    for (std::size_t i = 0; i < n; ++i) {
        const std::string prefix = "level." + std::to_string(i) + ".";
        model.levels.push_back({get_num(prefix + "thrust"), get_num(prefix + "slope"),
                                get_num(prefix + "intercept")});
    }
    return model;
}

}  // namespace fwaccel
