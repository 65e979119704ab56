#pragma once

#include <cstdint>
#include <random>

#include "fwaccel/frames.hpp"

namespace fwaccel {

struct VehicleParams {
    double mass = 11.3;            // kg
    double ref_area = 0.75;        // m^2
    double air_density = 1.225;    // kg/m^3
    double drag_coeff = 0.07872;   // see `fwaccel tune vehicle`
    double max_thrust = 36.16;     // N, see `fwaccel tune vehicle`
    double tau_rate = 0.1;         // s, inner rate-loop time constant
    double tau_thrust = 0.15;      // s, thrust-lag time constant
    double stall_speed = 12.0;     // m/s
    double lift_slope = 5.5;       // C_L_alpha per rad, envelope diagnostic only
    double max_load_factor = 3.0;  // lift cap, in units of weight

    void validate() const;  // throws invalid_input

    double dynamic_pressure_area(double airspeed) const {
        return 0.5 * air_density * ref_area * airspeed * airspeed;
    }
    double drag_force(double airspeed) const { return dynamic_pressure_area(airspeed) * drag_coeff; }
};

struct VehicleState {
    FrameVector position{{0, 0, 0}, Frame::Inertial};  // m, NED
    FrameVector velocity{{0, 0, 0}, Frame::Inertial};  // m/s, NED
    EulerAngles attitude;
    double p = 0.0;         // roll rate, rad/s
    double q = 0.0;         // pitch rate, rad/s
    double r = 0.0;         // yaw rate, rad/s (coordinated in sim)
    double airspeed = 0.0;  // m/s; equals |velocity| with zero wind
    double thrust = 0.0;    // N, current thrust force

    double speed() const { return norm(velocity); }
};

// Autopilot-facing command: body rate setpoints plus normalized thrust.
struct RateThrustCommand {
    double p = 0.0;       // rad/s
    double q = 0.0;       // rad/s
    double r = 0.0;       // rad/s; coordination channel, ignored by the sim
    double thrust = 0.0;  // dimensionless in [0, 1] after saturation
};

struct SensorSnapshot {
    EulerAngles attitude;
    double p = 0.0, q = 0.0, r = 0.0;  // rad/s
    Vec3 velocity;                     // m/s, NED
    Vec3 position;                     // m, NED
    double airspeed = 0.0;             // m/s
    Vec3 specific_force;               // m/s^2, body frame (what an IMU reads)
    double altitude = 0.0;             // m, = -position.z
};

struct NoiseParams {
    bool enabled = false;
    double sigma_attitude = 0.0;  // rad, per Euler angle
    double sigma_rates = 0.0;     // rad/s
    double sigma_velocity = 0.0;  // m/s, per NED component
    double sigma_position = 0.0;  // m, per NED component
    double sigma_airspeed = 0.0;  // m/s
    double sigma_accel = 0.0;     // m/s^2, per body axis
};

// One generator per sensor so enabling/disabling a channel does not
// reshuffle the draws of the others.
class SensorNoiseRig {
public:
    SensorNoiseRig() = default;
    SensorNoiseRig(const NoiseParams& params, std::uint64_t seed);

    SensorSnapshot apply(const SensorSnapshot& clean);

private:
    NoiseParams params_;
    std::mt19937_64 attitude_rng_, rates_rng_, velocity_rng_, position_rng_, airspeed_rng_, accel_rng_;
};

// Abort info for envelope violations, carrying the offending state.
class EnvelopeError : public Error {
public:
    EnvelopeError(const std::string& what, VehicleState state, double time)
        : Error(Errc::envelope_violation, what), state(std::move(state)), time(time) {}

    VehicleState state;
    double time;
};

// Forces acting on the point mass, for the dynamics and for truth taps.
struct ForceBreakdown {
    Vec3 accel;          // m/s^2, inertial, gravity included
    double thrust = 0;   // N, along body x
    double lift = 0;     // N, perpendicular to velocity
    double drag = 0;     // N, opposing velocity
    double alpha_recon = 0;  // rad, angle of attack the lift model implies
    double alpha_geom = 0;   // rad, angle between body x and velocity
};

ForceBreakdown compute_forces(const VehicleState& state, const VehicleParams& params);

// Yaw rate that keeps the turn coordinated at the current bank.
double coordinated_yaw_rate(const EulerAngles& attitude, double speed);

// Point-mass fixed-wing simulator. Translational dynamics from a parametric
// thrust/lift/drag model; rotational kinematics driven by first-order
// tracking of the commanded body rates; yaw closed by the coordinated-turn
// relation (sideslip held at zero by construction, r commands are ignored).
// Lift magnitude is whatever the current rotational state requires to rotate
// the velocity vector with the attitude, capped at max_load_factor * m * g.
// Single-owner mutable state; independent instances may run in parallel.
class Simulator {
public:
    Simulator(const VehicleParams& params, const VehicleState& initial);

    const VehicleState& state() const { return state_; }
    const VehicleParams& params() const { return params_; }
    double time() const { return time_; }

    // Advance by dt (RK4, command held constant). dt must be in (0, 0.05].
    // Throws EnvelopeError when the state leaves the flight envelope.
    void step(const RateThrustCommand& cmd, double dt);

    SensorSnapshot measure() const;
    SensorSnapshot measure(SensorNoiseRig& rig) const;

    // Truth taps for oracles.
    ForceBreakdown forces() const { return compute_forces(state_, params_); }

    // Straight-line trim: speed (m/s), heading and flight-path angle (rad),
    // altitude (m). Thrust balances drag plus the gravity component.
    static VehicleState trim_state(const VehicleParams& params, double speed, double heading,
                                   double flight_path, double altitude);
    static double trim_thrust(const VehicleParams& params, double speed, double flight_path);

private:
    void check_envelope() const;

    VehicleParams params_;
    VehicleState state_;
    double time_ = 0.0;
};

}  // namespace fwaccel
