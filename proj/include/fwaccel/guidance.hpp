#pragma once

#include "fwaccel/frames.hpp"
#include "fwaccel/vehicle_sim.hpp"

namespace fwaccel {

// Static virtual waypoint.
struct TargetSpec {
    Vec3 position;  // m, NED

    void validate(const Vec3& vehicle_start) const;  // throws invalid_input
};

struct PnParams {
    double nav_constant = 3.0;     // dimensionless
    double speed_setpoint = 20.0;  // m/s
    double k_speed = 0.5;          // 1/s, tangential speed loop
    double intercept_radius = 1.0; // m, scenario termination
    // Inside this range the last command is held: the LOS-rate estimate
    // degrades as 1/range^2 under position noise, and commands this late no
    // longer move the closest approach.
    double terminal_hold_range = 15.0;  // m
    // Authority cap on the commanded normal acceleration; demands beyond the
    // bank envelope are unrealizable anyway.
    double accel_limit = 8.0;  // m/s^2

    void validate() const;
};

struct LosState {
    Vec3 los_dir;               // unit vector, vehicle to target, inertial
    Vec3 los_rate;              // rad/s, rotation of the LOS direction
    double closing_speed = 0.0; // m/s, -d(range)/dt
    double range = 0.0;         // m
};

// LOS geometry against a static target from vehicle position/velocity.
// Throws invalid_input at zero range.
LosState los_kinematics(const VehicleState& vehicle, const TargetSpec& target);

// Finite-difference LOS-rate estimator for implementations without a
// relative-velocity truth source; the analytic path above is the default.
// The first update falls back to the analytic rate to prime the history.
class LosRateEstimator {
public:
    explicit LosRateEstimator(double dt);

    LosState update(const VehicleState& vehicle, const TargetSpec& target);

private:
    double dt_;
    bool primed_ = false;
    Vec3 prev_dir_;
    double prev_range_ = 0.0;
};

// Normal-acceleration demand proportional to closing speed times LOS rate.
// Returned in inertial coordinates; the caller projects it orthogonal to the
// vehicle velocity when building the AccelCommand.
FrameVector pn_accel(const LosState& los, const PnParams& params);

// Proportional tangential command toward the speed setpoint.
double speed_loop_accel(double speed, const PnParams& params);

}  // namespace fwaccel
