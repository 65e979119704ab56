#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fwaccel/vehicle_sim.hpp"

using namespace fwaccel;

namespace {

VehicleParams nominal() { return VehicleParams{}; }

RateThrustCommand hold_command(const VehicleParams& p, const VehicleState& trim) {
    return {0.0, 0.0, 0.0, trim.thrust / p.max_thrust};
}

}  // namespace

TEST_CASE("trimmed level flight is an equilibrium") {
    const VehicleParams p = nominal();
    const VehicleState trim = Simulator::trim_state(p, 20.0, 0.0, 0.0, 100.0);
    Simulator sim(p, trim);

    const RateThrustCommand cmd = hold_command(p, trim);
    for (int i = 0; i < 200; ++i) sim.step(cmd, 0.005);

    const VehicleState& s = sim.state();
    CHECK(s.velocity.x() == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(s.velocity.y() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.velocity.z() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.attitude.roll == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.attitude.pitch == doctest::Approx(0.0).epsilon(1e-9));
    // Position advances by V*t along north.
    CHECK(s.position.x() == doctest::Approx(20.0 * 1.0).epsilon(1e-9));
    CHECK(s.position.z() == doctest::Approx(-100.0).epsilon(1e-6));
}

TEST_CASE("with thrust removed the first-instant deceleration is drag over mass") {
    const VehicleParams p = nominal();
    VehicleState state = Simulator::trim_state(p, 20.0, 0.0, 0.0, 100.0);
    state.thrust = 0.0;  // thrust already spun down
    Simulator sim(p, state);

    const double dt = 0.005;
    sim.step({0.0, 0.0, 0.0, 0.0}, dt);

    const double expected_decel = p.drag_force(20.0) / p.mass;  // 0.5*rho*S*C_D*V^2/m
    const double v_dot = (sim.state().speed() - 20.0) / dt;
    CHECK(v_dot == doctest::Approx(-expected_decel).epsilon(2e-3));
}

TEST_CASE("constant roll-rate command integrates through the first-order lag") {
    const VehicleParams p = nominal();  // tau_rate = 0.1
    const VehicleState trim = Simulator::trim_state(p, 20.0, 0.0, 0.0, 100.0);
    Simulator sim(p, trim);

    RateThrustCommand cmd = hold_command(p, trim);
    cmd.p = 0.1;
    for (int i = 0; i < 200; ++i) sim.step(cmd, 0.005);

    // phi(t) = p_c * (t - tau * (1 - e^{-t/tau})), with yaw/pitch coupling
    // negligible at these angles.
    const double tau = p.tau_rate;
    const double expected = 0.1 * (1.0 - tau * (1.0 - std::exp(-1.0 / tau)));
    CHECK(sim.state().attitude.roll == doctest::Approx(expected).epsilon(5e-3));
}

TEST_CASE("thrust force follows the command through a first-order lag") {
    const VehicleParams p = nominal();
    const VehicleState trim = Simulator::trim_state(p, 20.0, 0.0, 0.0, 100.0);
    Simulator sim(p, trim);

    RateThrustCommand cmd = hold_command(p, trim);
    cmd.thrust = 0.8;
    const double t0 = trim.thrust;
    const double target = 0.8 * p.max_thrust;
    for (int i = 0; i < 60; ++i) sim.step(cmd, 0.005);  // 0.3 s = 2 tau

    const double expected = target + (t0 - target) * std::exp(-0.3 / p.tau_thrust);
    CHECK(sim.state().thrust == doctest::Approx(expected).epsilon(1e-3));
}

TEST_CASE("rate tracking converges within 2 percent after five time constants") {
    const VehicleParams p = nominal();
    const VehicleState trim = Simulator::trim_state(p, 20.0, 0.0, 0.0, 100.0);
    Simulator sim(p, trim);

    RateThrustCommand cmd = hold_command(p, trim);
    cmd.q = 0.05;
    const int steps = static_cast<int>(std::round(5.0 * p.tau_rate / 0.005));
    for (int i = 0; i < steps; ++i) sim.step(cmd, 0.005);
    CHECK(std::abs(sim.state().q - 0.05) / 0.05 < 0.02);
}

TEST_CASE("airspeed always equals ground speed with zero wind") {
    const VehicleParams p = nominal();
    const VehicleState trim = Simulator::trim_state(p, 20.0, 0.0, 0.0, 100.0);
    Simulator sim(p, trim);

    RateThrustCommand cmd = hold_command(p, trim);
    cmd.p = 0.05;
    cmd.q = 0.02;
    for (int i = 0; i < 400; ++i) {
        sim.step(cmd, 0.005);
        CHECK(sim.state().airspeed == doctest::Approx(sim.state().speed()).epsilon(1e-12));
    }
}

TEST_CASE("energy bookkeeping matches thrust-minus-drag power within 2 percent") {
    const VehicleParams p = nominal();
    const VehicleState trim = Simulator::trim_state(p, 20.0, 0.0, 0.0, 200.0);
    Simulator sim(p, trim);

    // A maneuvering trajectory: thrust steps plus pitch and roll activity.
    const double dt = 0.005;
    std::vector<double> energy, power;  // specific energy and (T-D)V/m
    for (int i = 0; i < 2400; ++i) {
        const double t = i * dt;
        RateThrustCommand cmd;
        cmd.thrust = (t < 4.0) ? 0.8 : (t < 8.0 ? 0.15 : 0.55);
        cmd.q = (t < 4.0) ? 0.06 : (t < 8.0 ? -0.05 : 0.02);
        cmd.p = (t > 2.0 && t < 6.0) ? 0.08 : -0.03;
        sim.step(cmd, dt);

        const VehicleState& s = sim.state();
        energy.push_back(kGravity * (-s.position.z()) + 0.5 * s.speed() * s.speed());
        const ForceBreakdown f = sim.forces();
        power.push_back((f.thrust * dot(body_x_axis(s.attitude), s.velocity.v) -
                         f.drag * s.speed()) /
                        p.mass);
    }

    double err_sq = 0.0, ref_sq = 0.0;
    for (std::size_t i = 1; i + 1 < energy.size(); ++i) {
        const double fd = (energy[i + 1] - energy[i - 1]) / (2.0 * dt);
        err_sq += (fd - power[i]) * (fd - power[i]);
        ref_sq += power[i] * power[i];
    }
    CHECK(std::sqrt(err_sq / ref_sq) < 0.02);
}

TEST_CASE("trajectories are deterministic") {
    const VehicleParams p = nominal();
    const VehicleState trim = Simulator::trim_state(p, 20.0, 0.0, 0.0, 100.0);

    auto run = [&] {
        Simulator sim(p, trim);
        std::vector<double> out;
        for (int i = 0; i < 300; ++i) {
            RateThrustCommand cmd{0.02, 0.01, 0.0, 0.5};
            sim.step(cmd, 0.005);
            out.push_back(sim.state().position.x());
            out.push_back(sim.state().attitude.roll);
        }
        return out;
    };

    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("noise-free measurement mirrors the state exactly") {
    const VehicleParams p = nominal();
    const VehicleState trim = Simulator::trim_state(p, 20.0, 0.3, 0.0, 150.0);
    Simulator sim(p, trim);

    const SensorSnapshot snap = sim.measure();
    CHECK(snap.attitude.yaw == trim.attitude.yaw);
    CHECK(snap.velocity.x == trim.velocity.x());
    CHECK(snap.airspeed == trim.airspeed);
    CHECK(snap.altitude == doctest::Approx(150.0));

    // Level trim: lift cancels gravity, so the IMU reads (0, 0, -g).
    CHECK(snap.specific_force.x == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(snap.specific_force.y == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(snap.specific_force.z == doctest::Approx(-kGravity).epsilon(1e-9));
}

TEST_CASE("sensor noise is zero-mean at the configured sigma") {
    const VehicleParams p = nominal();
    const VehicleState trim = Simulator::trim_state(p, 20.0, 0.0, 0.0, 100.0);
    Simulator sim(p, trim);

    NoiseParams noise;
    noise.enabled = true;
    noise.sigma_accel = 0.1;
    SensorNoiseRig rig(noise, 42);

    const int n = 10000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sim.measure(rig).specific_force.z;
    const double mean = sum / n;
    CHECK(std::abs(mean - (-kGravity)) < 3.0 * 0.1 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("noise streams are reproducible per seed") {
    const VehicleParams p = nominal();
    Simulator sim(p, Simulator::trim_state(p, 20.0, 0.0, 0.0, 100.0));
    NoiseParams noise;
    noise.enabled = true;
    noise.sigma_airspeed = 0.3;
    noise.sigma_accel = 0.2;

    SensorNoiseRig a(noise, 7), b(noise, 7), c(noise, 8);
    const SensorSnapshot sa = sim.measure(a), sb = sim.measure(b), sc = sim.measure(c);
    CHECK(sa.airspeed == sb.airspeed);
    CHECK(sa.specific_force.z == sb.specific_force.z);
    CHECK(sa.airspeed != sc.airspeed);
}

TEST_CASE("envelope violations abort with the offending state attached") {
    const VehicleParams p = nominal();
    const VehicleState trim = Simulator::trim_state(p, 20.0, 0.0, 0.0, 100.0);

    SUBCASE("bank runaway") {
        Simulator sim(p, trim);
        RateThrustCommand cmd = hold_command(p, trim);
        cmd.p = 1.0;
        bool aborted = false;
        try {
            for (int i = 0; i < 2000; ++i) sim.step(cmd, 0.005);
        } catch (const EnvelopeError& e) {
            aborted = true;
            CHECK(std::abs(e.state.attitude.roll) > deg_to_rad(40.0));
        }
        CHECK(aborted);
    }

    SUBCASE("decelerating through stall") {
        Simulator sim(p, trim);
        bool aborted = false;
        try {
            for (int i = 0; i < 20000; ++i) sim.step({0.0, 0.0, 0.0, 0.0}, 0.005);
        } catch (const EnvelopeError& e) {
            aborted = true;
            // The implied angle-of-attack limit binds just above the stall
            // floor as lift demand outruns dynamic pressure.
            CHECK(e.state.airspeed < p.stall_speed + 1.5);
        }
        CHECK(aborted);
    }

    SUBCASE("bad dt is rejected") {
        Simulator sim(p, trim);
        CHECK_THROWS_AS(sim.step({}, 0.0), Error);
        CHECK_THROWS_AS(sim.step({}, 0.06), Error);
    }
}

TEST_CASE("parameter validation rejects out-of-range values") {
    VehicleParams p = nominal();
    p.drag_coeff = 1.5;
    CHECK_THROWS_AS(p.validate(), Error);
    p = nominal();
    p.tau_rate = 0.001;
    CHECK_THROWS_AS(p.validate(), Error);
    p = nominal();
    p.mass = -1.0;
    CHECK_THROWS_AS(p.validate(), Error);
}
