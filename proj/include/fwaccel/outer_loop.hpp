#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "fwaccel/vehicle_sim.hpp"

namespace fwaccel {

inline constexpr double kDefaultMinSpeed = 5.0;  // m/s, division guard

struct OuterLoopGains {
    double k_roll = 2.0;   // 1/s, roll-angle proportional gain
    double k_pitch = 1.5;  // 1/s, pitch-angle proportional gain (bound shaping)
    double k_speed = 0.5;  // 1/s, speed-loop gain

    void validate() const;
};

enum class PriorityMode { NormalPriority, TangentialPriority };

// Desired acceleration split into a component orthogonal to the velocity
// (realized by the lift vector) and a scalar along it (realized by thrust).
struct AccelCommand {
    FrameVector normal{{0, 0, 0}, Frame::Inertial};  // m/s^2, orthogonal to velocity
    double tangential = 0.0;                         // m/s^2, along velocity

    // Projects raw_normal orthogonal to the velocity so the invariant
    // normal . velocity == 0 holds by construction.
    static AccelCommand project(const FrameVector& raw_normal, double tangential,
                                const FrameVector& velocity);
};

// One calibrated thrust level: energy acceleration as a line in airspeed^2.
struct ThrustLevelCoeffs {
    double thrust_cmd = 0.0;  // dimensionless level
    double slope = 0.0;       // 1/m
    double intercept = 0.0;   // m/s^2
};

// Identified map between normalized thrust command and energy acceleration.
struct EnergyModel {
    double thrust_slope = 0.0;      // m/s^2 per unit thrust command
    double thrust_intercept = 0.0;  // m/s^2
    double airspeed_query = 0.0;    // m/s the inverse fit was built at
    std::vector<ThrustLevelCoeffs> levels;
    double speed_min = 0.0;  // m/s, calibrated airspeed coverage
    double speed_max = 0.0;
    bool extrapolated = false;  // query airspeed fell outside coverage

    double predict(double thrust_cmd) const { return thrust_slope * thrust_cmd + thrust_intercept; }

    // Energy-acceleration authority at the given airspeed: the per-level
    // family evaluated at airspeed^2, refit against thrust command and
    // extrapolated to the 0 and 1 endpoints. Requires >= 2 levels.
    std::pair<double, double> energy_accel_bounds(double airspeed) const;

    // Exact model for a vehicle with an affine thrust map; test/fixture use.
    static EnergyModel from_params(const VehicleParams& params, double airspeed_query);
};

// Clamp x into [lo, hi]; throws invalid_input if lo > hi.
double saturate(double x, double lo, double hi);

// Specific force the lift vector must supply for a normal-acceleration
// command: gravity compensation plus the command itself. Zero command in
// level flight yields a purely upward vector of magnitude g. Throws
// degenerate_lift when the result is too small to define a direction.
// literal_gravity_sign flips the compensation term for auditing.
FrameVector required_lift_accel(const FrameVector& normal_accel,
                                bool literal_gravity_sign = false);

struct RollCommand {
    double roll_angle = 0.0;  // rad, commanded bank
    double roll_rate = 0.0;   // rad/s
};

// Bank that aligns the lift vector with the required direction: the signed
// angle of the required lift from "up" in the yaw/pitch (vehicle-2) frame,
// then a proportional roll-rate law.
RollCommand roll_command(const FrameVector& lift_accel, const VehicleState& state,
                         const OuterLoopGains& gains);

// q command from the z component of the normal command expressed in the
// (approximately velocity-aligned) body frame, scaled by 1/V.
double pitch_rate_command(const FrameVector& normal_accel, const VehicleState& state,
                          double min_speed = kDefaultMinSpeed);

// Energy acceleration needed for a tangential command: the command plus the
// climb/descent gravity coupling.
double energy_accel_command(double tangential_accel, const VehicleState& state,
                            double min_speed = kDefaultMinSpeed);

// Inverse of the identified thrust map; unsaturated. Throws invalid_model
// when the model slope is not positive.
double thrust_command(double energy_accel_cmd, const EnergyModel& model);

// Thrust clamped to [0, 1]; rate commands untouched.
RateThrustCommand apply_normal_priority(const RateThrustCommand& cmd);

struct AttitudeLimits {
    double max_bank = deg_to_rad(40.0);   // rad
    double max_pitch = deg_to_rad(40.0);  // rad
};

// Clamps q into the pitch-rate interval that keeps the tangential demand
// within the thrust authority at the current airspeed, and thrust to [0, 1].
RateThrustCommand apply_tangential_priority(const RateThrustCommand& cmd, double tangential_accel,
                                            const VehicleState& state, const EnergyModel& model,
                                            const OuterLoopGains& gains,
                                            const AttitudeLimits& limits = {});

// Feasible pitch interval for a tangential demand given thrust authority
// [energy_min, energy_max]; arcsin arguments are clamped to [-1, 1] and the
// interval to the attitude envelope.
std::pair<double, double> pitch_interval(double tangential_accel, double energy_min,
                                         double energy_max, const AttitudeLimits& limits = {});

struct RealizeResult {
    RateThrustCommand command;  // after priority handling
    RateThrustCommand raw;      // before priority handling
    double roll_angle_cmd = 0.0;
    double energy_accel_cmd = 0.0;
    bool thrust_saturated = false;
    bool pitch_rate_clamped = false;
};

struct OuterLoopConfig {
    OuterLoopGains gains;
    PriorityMode mode = PriorityMode::NormalPriority;
    double min_speed = kDefaultMinSpeed;
    AttitudeLimits limits;
    bool literal_gravity_sign = false;
    // Optional integral trim on both channels (off by default). Anti-windup
    // clamps at +/-20 % of channel authority.
    bool integral_trim = false;
    double ki_normal = 0.3;      // 1/s
    double ki_tangential = 0.3;  // 1/s
};

// Stateless composition of the channel mappings. Throws on degenerate lift.
RateThrustCommand realize(const AccelCommand& cmd, const VehicleState& state,
                          const EnergyModel& model, const OuterLoopGains& gains,
                          PriorityMode mode);

// Controller object: adds degenerate-lift hold of the previous bank command
// and the optional integral trims. Single-owner; independent instances are
// independent.
class OuterLoop {
public:
    explicit OuterLoop(const OuterLoopConfig& config) : config_(config) {
        config_.gains.validate();
    }

    const OuterLoopConfig& config() const { return config_; }

    // measured_normal_accel / measured_energy_accel feed the integral trims;
    // pass nullopt when trims are disabled or measurements are unavailable.
    RealizeResult step(const AccelCommand& cmd, const VehicleState& state, const EnergyModel& model,
                       double dt, std::optional<Vec3> measured_normal_accel = std::nullopt,
                       std::optional<double> measured_energy_accel = std::nullopt);

    void reset();

private:
    OuterLoopConfig config_;
    std::optional<double> held_roll_angle_;
    double normal_trim_ = 0.0;      // rad added to the bank command
    double tangential_trim_ = 0.0;  // m/s^2 added to the energy command
};

}  // namespace fwaccel
