#include "fwaccel/vehicle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fwaccel {

namespace {

constexpr double kMaxAttitude = deg_to_rad(45.0);  // abort beyond this
constexpr double kMaxAero = deg_to_rad(15.0);      // alpha envelope
constexpr double kMinDt = 1e-9;
constexpr double kMaxDt = 0.05;

// Plain state vector for the integrator: pos(3) vel(3) euler(3) p q thrust.
struct StateVec {
    std::array<double, 12> y{};

    StateVec& axpy(double a, const StateVec& d) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * d.y[i];
        return *this;
    }
};

StateVec pack(const VehicleState& s) {
    StateVec v;
    v.y = {s.position.x(), s.position.y(), s.position.z(),
           s.velocity.x(), s.velocity.y(), s.velocity.z(),
           s.attitude.roll, s.attitude.pitch, s.attitude.yaw,
           s.p, s.q, s.thrust};
    return v;
}

VehicleState unpack(const StateVec& v, const VehicleParams& params) {
    VehicleState s;
    s.position = {{v.y[0], v.y[1], v.y[2]}, Frame::Inertial};
    s.velocity = {{v.y[3], v.y[4], v.y[5]}, Frame::Inertial};
    s.attitude = {v.y[6], v.y[7], v.y[8]};
    s.p = v.y[9];
    s.q = v.y[10];
    s.thrust = v.y[11];
    s.airspeed = s.speed();  // zero wind
    s.r = coordinated_yaw_rate(s.attitude, std::max(s.airspeed, 1e-6));
    (void)params;
    return s;
}

StateVec derivatives(const StateVec& yv, const RateThrustCommand& cmd, const VehicleParams& params) {
    VehicleState s = unpack(yv, params);
    ForceBreakdown f = compute_forces(s, params);

    const double phi = s.attitude.roll;
    const double theta = s.attitude.pitch;
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    const double ctheta = std::cos(theta), ttheta = std::tan(theta);

    // Euler kinematics with the coordinated yaw rate.
    const double phi_dot = s.p + s.q * sphi * ttheta + s.r * cphi * ttheta;
    const double theta_dot = s.q * cphi - s.r * sphi;
    const double psi_dot = (s.q * sphi + s.r * cphi) / ctheta;

    StateVec d;
    d.y = {s.velocity.x(), s.velocity.y(), s.velocity.z(),
           f.accel.x, f.accel.y, f.accel.z,
           phi_dot, theta_dot, psi_dot,
           (cmd.p - s.p) / params.tau_rate,
           (cmd.q - s.q) / params.tau_rate,
           (cmd.thrust * params.max_thrust - s.thrust) / params.tau_thrust};
    return d;
}

}  // namespace

void VehicleParams::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(mass) || !positive(ref_area) || !positive(air_density) || !positive(max_thrust) ||
        !positive(stall_speed) || !positive(lift_slope) || !positive(max_load_factor))
        throw Error(Errc::invalid_input, "vehicle parameters must be strictly positive");
    if (!(drag_coeff > 0.0 && drag_coeff < 1.0))
        throw Error(Errc::invalid_input, "drag coefficient out of (0, 1)");
    if (!(tau_rate > 0.01 && tau_rate < 1.0) || !(tau_thrust > 0.01 && tau_thrust < 1.0))
        throw Error(Errc::invalid_input, "time constants out of (0.01, 1.0)");
}

double coordinated_yaw_rate(const EulerAngles& attitude, double speed) {
    return kGravity / speed * std::tan(attitude.roll) * std::cos(attitude.pitch);
}

ForceBreakdown compute_forces(const VehicleState& state, const VehicleParams& params) {
    ForceBreakdown out;
    const double speed = state.speed();
    if (speed < 1e-6)
        throw Error(Errc::envelope_violation, "zero velocity; force directions undefined");
    const Vec3 vel_dir = state.velocity.v / speed;
    const Vec3 bx = body_x_axis(state.attitude);
    const Vec3 body_up = -body_z_axis(state.attitude);

    // Lift direction: body "up" projected orthogonal to velocity, so lift
    // never does work on the vehicle.
    Vec3 lift_dir = body_up - dot(body_up, vel_dir) * vel_dir;
    const double lift_dir_norm = norm(lift_dir);
    if (lift_dir_norm < 1e-6)
        throw Error(Errc::envelope_violation, "velocity aligned with body z; lift direction undefined");
    lift_dir = lift_dir / lift_dir_norm;

    // Normal acceleration the rotational state asks for: the velocity
    // direction rotating with the body angular velocity.
    const Vec3 omega_body{state.p, state.q, state.r};
    FrameVector omega_b{omega_body, Frame::Body};
    const Vec3 omega_inertial = inertial_from_body(omega_b, state.attitude).v;
    const Vec3 accel_required = speed * cross(omega_inertial, vel_dir);

    const Vec3 g_vec = gravity_ned();
    const double thrust = state.thrust;
    double lift = params.mass * dot(accel_required, lift_dir) - thrust * dot(bx, lift_dir) -
                  params.mass * dot(g_vec, lift_dir);
    const double lift_cap = params.max_load_factor * params.mass * kGravity;
    lift = std::clamp(lift, -lift_cap, lift_cap);

    const double drag = params.drag_force(state.airspeed);

    out.accel = (thrust * bx + lift * lift_dir - drag * vel_dir) / params.mass + g_vec;
    out.thrust = thrust;
    out.lift = lift;
    out.drag = drag;
    out.alpha_recon = lift / (params.dynamic_pressure_area(state.airspeed) * params.lift_slope);
    out.alpha_geom = std::atan2(-dot(vel_dir, body_up), dot(vel_dir, bx));
    return out;
}

Simulator::Simulator(const VehicleParams& params, const VehicleState& initial)
    : params_(params), state_(initial) {
    params_.validate();
    state_.airspeed = state_.speed();
    check_envelope();
}

void Simulator::step(const RateThrustCommand& cmd, double dt) {
    if (!(dt > kMinDt && dt <= kMaxDt))
        throw Error(Errc::invalid_input, "step dt out of (0, 0.05]");
    if (!std::isfinite(cmd.p) || !std::isfinite(cmd.q) || !std::isfinite(cmd.thrust))
        throw Error(Errc::invalid_input, "non-finite rate/thrust command");
    if (cmd.thrust < 0.0 || cmd.thrust > 1.0)
        throw Error(Errc::invalid_input, "thrust command outside [0, 1]");

    StateVec y0 = pack(state_);
    StateVec k1 = derivatives(y0, cmd, params_);
    StateVec y1 = y0;
    y1.axpy(0.5 * dt, k1);
    StateVec k2 = derivatives(y1, cmd, params_);
    StateVec y2 = y0;
    y2.axpy(0.5 * dt, k2);
    StateVec k3 = derivatives(y2, cmd, params_);
    StateVec y3 = y0;
    y3.axpy(dt, k3);
    StateVec k4 = derivatives(y3, cmd, params_);

    StateVec out = y0;
    out.axpy(dt / 6.0, k1);
    out.axpy(dt / 3.0, k2);
    out.axpy(dt / 3.0, k3);
    out.axpy(dt / 6.0, k4);

    state_ = unpack(out, params_);
    state_.attitude.yaw = wrap_pi(state_.attitude.yaw);
    time_ += dt;
    check_envelope();
}

void Simulator::check_envelope() const {
    const VehicleState& s = state_;
    auto abort = [&](const std::string& what) { throw EnvelopeError(what, s, time_); };

    if (!finite(s.position.v) || !finite(s.velocity.v))
        abort("non-finite state");
    if (std::abs(s.attitude.roll) > kMaxAttitude)
        abort("bank angle beyond 45 deg");
    if (std::abs(s.attitude.pitch) > kMaxAttitude)
        abort("pitch angle beyond 45 deg");
    if (s.airspeed < params_.stall_speed)
        abort("airspeed below stall");

    ForceBreakdown f = compute_forces(s, params_);
    if (std::abs(f.alpha_recon) > kMaxAero)
        abort("implied angle of attack beyond 15 deg");
    if (std::abs(f.alpha_geom) > kMaxAero)
        abort("body/velocity misalignment beyond 15 deg");
}

SensorSnapshot Simulator::measure() const {
    SensorSnapshot snap;
    snap.attitude = state_.attitude;
    snap.p = state_.p;
    snap.q = state_.q;
    snap.r = state_.r;
    snap.velocity = state_.velocity.v;
    snap.position = state_.position.v;
    snap.airspeed = state_.airspeed;

    ForceBreakdown f = compute_forces(state_, params_);
    FrameVector sf{f.accel - gravity_ned(), Frame::Inertial};
    snap.specific_force = to_body(sf, state_.attitude).v;
    snap.altitude = -state_.position.z();
    return snap;
}

SensorSnapshot Simulator::measure(SensorNoiseRig& rig) const { return rig.apply(measure()); }

VehicleState Simulator::trim_state(const VehicleParams& params, double speed, double heading,
                                   double flight_path, double altitude) {
    VehicleState s;
    const double ch = std::cos(heading), sh = std::sin(heading);
    const double cg = std::cos(flight_path), sg = std::sin(flight_path);
    s.position = {{0.0, 0.0, -altitude}, Frame::Inertial};
    s.velocity = {{speed * cg * ch, speed * cg * sh, -speed * sg}, Frame::Inertial};
    s.attitude = {0.0, flight_path, heading};
    s.airspeed = speed;
    s.thrust = trim_thrust(params, speed, flight_path);
    return s;
}

double Simulator::trim_thrust(const VehicleParams& params, double speed, double flight_path) {
    return params.drag_force(speed) + params.mass * kGravity * std::sin(flight_path);
}

SensorNoiseRig::SensorNoiseRig(const NoiseParams& params, std::uint64_t seed) : params_(params) {
    attitude_rng_.seed(seed ^ 0x9e3779b97f4a7c15ULL);
    rates_rng_.seed(seed ^ 0xbf58476d1ce4e5b9ULL);
    velocity_rng_.seed(seed ^ 0x94d049bb133111ebULL);
    position_rng_.seed(seed ^ 0x2545f4914f6cdd1dULL);
    airspeed_rng_.seed(seed ^ 0xda942042e4dd58b5ULL);
    accel_rng_.seed(seed ^ 0xd6e8feb86659fd93ULL);
}

SensorSnapshot SensorNoiseRig::apply(const SensorSnapshot& clean) {
    if (!params_.enabled) return clean;
    SensorSnapshot out = clean;
    std::normal_distribution<double> n01(0.0, 1.0);

    if (params_.sigma_attitude > 0.0) {
        out.attitude.roll += params_.sigma_attitude * n01(attitude_rng_);
        out.attitude.pitch += params_.sigma_attitude * n01(attitude_rng_);
        out.attitude.yaw += params_.sigma_attitude * n01(attitude_rng_);
    }
    if (params_.sigma_rates > 0.0) {
        out.p += params_.sigma_rates * n01(rates_rng_);
        out.q += params_.sigma_rates * n01(rates_rng_);
        out.r += params_.sigma_rates * n01(rates_rng_);
    }
    if (params_.sigma_velocity > 0.0) {
        out.velocity.x += params_.sigma_velocity * n01(velocity_rng_);
        out.velocity.y += params_.sigma_velocity * n01(velocity_rng_);
        out.velocity.z += params_.sigma_velocity * n01(velocity_rng_);
    }
    if (params_.sigma_position > 0.0) {
        out.position.x += params_.sigma_position * n01(position_rng_);
        out.position.y += params_.sigma_position * n01(position_rng_);
        out.position.z += params_.sigma_position * n01(position_rng_);
        out.altitude = -out.position.z;
    }
    if (params_.sigma_airspeed > 0.0)
        out.airspeed += params_.sigma_airspeed * n01(airspeed_rng_);
    if (params_.sigma_accel > 0.0) {
        out.specific_force.x += params_.sigma_accel * n01(accel_rng_);
        out.specific_force.y += params_.sigma_accel * n01(accel_rng_);
        out.specific_force.z += params_.sigma_accel * n01(accel_rng_);
    }
    return out;
}

}  // namespace fwaccel
