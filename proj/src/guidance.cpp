#include "fwaccel/guidance.hpp"

#include <cmath>

namespace fwaccel {

void TargetSpec::validate(const Vec3& vehicle_start) const {
    if (!finite(position))
        throw Error(Errc::invalid_input, "non-finite target position");
    if (norm(position - vehicle_start) < 1e-6)
        throw Error(Errc::invalid_input, "target coincides with the vehicle start point");
}

void PnParams::validate() const {
    if (!(nav_constant > 0.0))
        throw Error(Errc::invalid_input, "navigation constant must be positive");
    if (!(speed_setpoint > 0.0) || !(k_speed > 0.0))
        throw Error(Errc::invalid_input, "speed loop parameters must be positive");
    if (!(intercept_radius > 0.0))
        throw Error(Errc::invalid_input, "intercept radius must be positive");
    if (!(terminal_hold_range >= 0.0) || !(accel_limit > 0.0))
        throw Error(Errc::invalid_input, "terminal hold range / accel limit out of range");
}

LosState los_kinematics(const VehicleState& vehicle, const TargetSpec& target) {
    const Vec3 rel_pos = target.position - vehicle.position.v;
    const Vec3 rel_vel = -vehicle.velocity.v;  // static target

    LosState out;
    out.range = norm(rel_pos);
    if (out.range < 1e-9)
        throw Error(Errc::invalid_input, "zero range to target");

    out.los_dir = rel_pos / out.range;
    const Vec3 omega_los = cross(rel_pos, rel_vel) / (out.range * out.range);
    out.los_rate = cross(omega_los, out.los_dir);
    out.closing_speed = -dot(rel_pos, rel_vel) / out.range;
    return out;
}

LosRateEstimator::LosRateEstimator(double dt) : dt_(dt) {
    if (!(dt > 0.0))
        throw Error(Errc::invalid_input, "LOS estimator period must be positive");
}

LosState LosRateEstimator::update(const VehicleState& vehicle, const TargetSpec& target) {
    LosState out = los_kinematics(vehicle, target);
    if (primed_) {
        const Vec3 raw_rate = (out.los_dir - prev_dir_) / dt_;
        out.los_rate = raw_rate - dot(raw_rate, out.los_dir) * out.los_dir;
        out.closing_speed = -(out.range - prev_range_) / dt_;
    }
    prev_dir_ = out.los_dir;
    prev_range_ = out.range;
    primed_ = true;
    return out;
}

FrameVector pn_accel(const LosState& los, const PnParams& params) {
    return {params.nav_constant * los.closing_speed * los.los_rate, Frame::Inertial};
}

double speed_loop_accel(double speed, const PnParams& params) {
    return params.k_speed * (params.speed_setpoint - speed);
}

}  // namespace fwaccel
