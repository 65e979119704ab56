#include "fwaccel/outer_loop.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fwaccel/linefit.hpp"

namespace fwaccel {

namespace {

constexpr double kDegenerateLiftFraction = 0.1;  // of g
constexpr double kMaxPitchForRollLaw = deg_to_rad(45.0);

double require_speed(const VehicleState& state, double min_speed, const char* where) {
    const double v = state.speed();
    if (!(v >= min_speed))
        throw Error(Errc::low_speed, std::string(where) + ": speed below minimum");
    return v;
}

}  // namespace

void OuterLoopGains::validate() const {
    if (!(k_roll > 0.0) || !(k_pitch > 0.0) || !(k_speed > 0.0))
        throw Error(Errc::invalid_input, "outer-loop gains must be positive");
}

double saturate(double x, double lo, double hi) {
    if (lo > hi)
        throw Error(Errc::invalid_input, "saturation bounds inverted");
    return std::clamp(x, lo, hi);
}

AccelCommand AccelCommand::project(const FrameVector& raw_normal, double tangential,
                                   const FrameVector& velocity) {
    require_frame(raw_normal, Frame::Inertial, "AccelCommand::project");
    require_frame(velocity, Frame::Inertial, "AccelCommand::project");
    const double speed = norm(velocity);
    if (speed < 1e-9)
        throw Error(Errc::low_speed, "cannot project a normal command onto zero velocity");
    const Vec3 dir = velocity.v / speed;
    AccelCommand out;
    out.normal = {raw_normal.v - dot(raw_normal.v, dir) * dir, Frame::Inertial};
    out.tangential = tangential;
    return out;
}

FrameVector required_lift_accel(const FrameVector& normal_accel, bool literal_gravity_sign) {
    require_frame(normal_accel, Frame::Inertial, "required_lift_accel");
    const Vec3 g_vec = gravity_ned();
    Vec3 lift = literal_gravity_sign ? normal_accel.v + g_vec : normal_accel.v - g_vec;
    if (norm(lift) < kDegenerateLiftFraction * kGravity)
        throw Error(Errc::degenerate_lift, "required lift too small to define a direction");
    return {lift, Frame::Inertial};
}

RollCommand roll_command(const FrameVector& lift_accel, const VehicleState& state,
                         const OuterLoopGains& gains) {
    require_frame(lift_accel, Frame::Inertial, "roll_command");
    if (std::abs(state.attitude.pitch) >= kMaxPitchForRollLaw)
        throw Error(Errc::invalid_input, "roll law invalid beyond 45 deg pitch");
    if (norm(lift_accel) < kDegenerateLiftFraction * kGravity)
        throw Error(Errc::degenerate_lift, "degenerate lift vector");

    const FrameVector lift_v2 = to_vehicle2(lift_accel, state.attitude);
    RollCommand out;
    // Signed angle from "up" (-z) toward +y in the yaw/pitch frame: the bank
    // that rolls the lift vector onto the required direction.
    out.roll_angle = std::atan2(lift_v2.y(), -lift_v2.z());
    out.roll_rate = gains.k_roll * (out.roll_angle - state.attitude.roll);
    return out;
}

double pitch_rate_command(const FrameVector& normal_accel, const VehicleState& state,
                          double min_speed) {
    require_frame(normal_accel, Frame::Inertial, "pitch_rate_command");
    const double speed = require_speed(state, min_speed, "pitch_rate_command");
    // Body frame stands in for the velocity frame (small alpha/beta).
    const FrameVector in_body = to_body(normal_accel, state.attitude);
    return -in_body.z() / speed;
}

double energy_accel_command(double tangential_accel, const VehicleState& state, double min_speed) {
    const double speed = require_speed(state, min_speed, "energy_accel_command");
    return tangential_accel - kGravity * state.velocity.z() / speed;
}

double thrust_command(double energy_accel_cmd, const EnergyModel& model) {
    if (!(model.thrust_slope > 0.0))
        throw Error(Errc::invalid_model, "thrust model slope must be positive");
    return (energy_accel_cmd - model.thrust_intercept) / model.thrust_slope;
}

RateThrustCommand apply_normal_priority(const RateThrustCommand& cmd) {
    RateThrustCommand out = cmd;
    out.thrust = saturate(cmd.thrust, 0.0, 1.0);
    return out;
}

std::pair<double, double> pitch_interval(double tangential_accel, double energy_min,
                                         double energy_max, const AttitudeLimits& limits) {
    if (energy_min > energy_max)
        throw Error(Errc::infeasible_constraint, "energy-acceleration bounds inverted");
    auto bound = [&](double energy) {
        const double arg = std::clamp((energy - tangential_accel) / kGravity, -1.0, 1.0);
        return std::clamp(std::asin(arg), -limits.max_pitch, limits.max_pitch);
    };
    // More pitch-up trades kinetic for potential energy, so the low-thrust
    // bound is the floor of the feasible pitch interval.
    return {bound(energy_min), bound(energy_max)};
}

RateThrustCommand apply_tangential_priority(const RateThrustCommand& cmd, double tangential_accel,
                                            const VehicleState& state, const EnergyModel& model,
                                            const OuterLoopGains& gains,
                                            const AttitudeLimits& limits) {
    const auto [energy_min, energy_max] = model.energy_accel_bounds(state.airspeed);
    const auto [pitch_min, pitch_max] = pitch_interval(tangential_accel, energy_min, energy_max, limits);

    const double q_min = gains.k_pitch * (pitch_min - state.attitude.pitch);
    const double q_max = gains.k_pitch * (pitch_max - state.attitude.pitch);

    RateThrustCommand out = cmd;
    out.q = saturate(cmd.q, q_min, q_max);
    out.thrust = saturate(cmd.thrust, 0.0, 1.0);
    return out;
}

std::pair<double, double> EnergyModel::energy_accel_bounds(double airspeed) const {
    if (levels.size() < 2)
        throw Error(Errc::invalid_model, "need >= 2 thrust levels for authority bounds");
    std::vector<double> xs, ys;
    xs.reserve(levels.size());
    ys.reserve(levels.size());
    const double va_sq = airspeed * airspeed;
    for (const ThrustLevelCoeffs& lvl : levels) {
        xs.push_back(lvl.thrust_cmd);
        ys.push_back(lvl.slope * va_sq + lvl.intercept);
    }
    const LineFit fit = fit_line(xs, ys);
    return {fit.intercept, fit.slope + fit.intercept};
}

EnergyModel EnergyModel::from_params(const VehicleParams& params, double airspeed_query) {
    EnergyModel model;
    const double drag_slope = -0.5 * params.air_density * params.ref_area * params.drag_coeff / params.mass;
    for (double level : {0.2, 0.8})
        model.levels.push_back({level, drag_slope, level * params.max_thrust / params.mass});
    model.thrust_slope = params.max_thrust / params.mass;
    model.thrust_intercept = drag_slope * airspeed_query * airspeed_query;
    model.airspeed_query = airspeed_query;
    model.speed_min = 0.0;
    model.speed_max = 1e9;
    return model;
}

namespace {

RealizeResult compose(const AccelCommand& cmd, const VehicleState& state, const EnergyModel& model,
                      const OuterLoopConfig& cfg, std::optional<double> roll_angle_override,
                      double bank_trim, double energy_trim) {
    RealizeResult out;

    double roll_angle;
    if (roll_angle_override) {
        roll_angle = *roll_angle_override;  // already trimmed when it was held
    } else {
        const FrameVector lift = required_lift_accel(cmd.normal, cfg.literal_gravity_sign);
        roll_angle = roll_command(lift, state, cfg.gains).roll_angle + bank_trim;
    }
    roll_angle = std::clamp(roll_angle, -cfg.limits.max_bank, cfg.limits.max_bank);
    out.roll_angle_cmd = roll_angle;

    RateThrustCommand raw;
    raw.p = cfg.gains.k_roll * (roll_angle - state.attitude.roll);
    raw.q = pitch_rate_command(cmd.normal, state, cfg.min_speed);
    raw.r = coordinated_yaw_rate(state.attitude, std::max(state.speed(), cfg.min_speed));
    out.energy_accel_cmd = energy_accel_command(cmd.tangential, state, cfg.min_speed) + energy_trim;
    raw.thrust = thrust_command(out.energy_accel_cmd, model);
    out.raw = raw;

    switch (cfg.mode) {
        case PriorityMode::NormalPriority:
            out.command = apply_normal_priority(raw);
            break;
        case PriorityMode::TangentialPriority:
            out.command = apply_tangential_priority(raw, cmd.tangential, state, model, cfg.gains,
                                                    cfg.limits);
            break;
    }
    out.thrust_saturated = out.command.thrust != raw.thrust;
    out.pitch_rate_clamped = out.command.q != raw.q;
    return out;
}

}  // namespace

RateThrustCommand realize(const AccelCommand& cmd, const VehicleState& state,
                          const EnergyModel& model, const OuterLoopGains& gains,
                          PriorityMode mode) {
    gains.validate();
    OuterLoopConfig cfg;
    cfg.gains = gains;
    cfg.mode = mode;
    return compose(cmd, state, model, cfg, std::nullopt, 0.0, 0.0).command;
}

RealizeResult OuterLoop::step(const AccelCommand& cmd, const VehicleState& state,
                              const EnergyModel& model, double dt,
                              std::optional<Vec3> measured_normal_accel,
                              std::optional<double> measured_energy_accel) {
    std::optional<double> roll_override;
    try {
        const FrameVector lift = required_lift_accel(cmd.normal, config_.literal_gravity_sign);
        (void)lift;
    } catch (const Error& e) {
        if (e.code() != Errc::degenerate_lift || !held_roll_angle_) throw;
        roll_override = *held_roll_angle_;  // direction undefined; keep the last bank
    }

    RealizeResult out =
        compose(cmd, state, model, config_, roll_override, normal_trim_, tangential_trim_);
    held_roll_angle_ = out.roll_angle_cmd;

    if (config_.integral_trim && dt > 0.0) {
        if (measured_normal_accel) {
            const FrameVector err{cmd.normal.v - *measured_normal_accel, Frame::Inertial};
            const FrameVector err_v2 = to_vehicle2(err, state.attitude);
            normal_trim_ += config_.ki_normal * dt * err_v2.y() / kGravity;
            const double authority = 0.2 * config_.limits.max_bank;
            normal_trim_ = std::clamp(normal_trim_, -authority, authority);
        }
        if (measured_energy_accel) {
            const double err = out.energy_accel_cmd - *measured_energy_accel;
            tangential_trim_ += config_.ki_tangential * dt * err;
            const double authority = 0.2 * std::max(model.thrust_slope, 0.0);
            tangential_trim_ = std::clamp(tangential_trim_, -authority, authority);
        }
    }
    return out;
}

void OuterLoop::reset() {
    held_roll_angle_.reset();
    normal_trim_ = 0.0;
    tangential_trim_ = 0.0;
}

}  // namespace fwaccel
