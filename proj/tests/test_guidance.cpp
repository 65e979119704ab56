#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "fwaccel/guidance.hpp"
#include "fwaccel/harness.hpp"
#include "fwaccel/outer_loop.hpp"

using namespace fwaccel;

namespace {

VehicleState flying(const Vec3& position, const Vec3& velocity) {
    VehicleState s;
    s.position = {position, Frame::Inertial};
    s.velocity = {velocity, Frame::Inertial};
    s.airspeed = norm(velocity);
    return s;
}

}  // namespace

TEST_CASE("collision course: zero LOS rate, closing at flight speed") {
    const TargetSpec target{{600.0, 0.0, -130.0}};
    const Vec3 to_target = target.position - Vec3{0.0, 0.0, -100.0};
    const Vec3 velocity = 20.0 * (to_target / norm(to_target));
    const VehicleState vehicle = flying({0.0, 0.0, -100.0}, velocity);

    const LosState los = los_kinematics(vehicle, target);
    CHECK(norm(los.los_rate) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(los.closing_speed == doctest::Approx(20.0));
    CHECK(los.range == doctest::Approx(norm(to_target)));

    // No correction needed on a collision course.
    CHECK(norm(pn_accel(los, PnParams{})) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("beam geometry: LOS rate V/R, zero closing speed") {
    const TargetSpec target{{500.0, 0.0, -100.0}};
    const VehicleState vehicle = flying({0.0, 0.0, -100.0}, {0.0, 22.0, 0.0});

    const LosState los = los_kinematics(vehicle, target);
    CHECK(norm(los.los_rate) == doctest::Approx(22.0 / 500.0));
    CHECK(los.closing_speed == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("LOS state invariants on random encounters") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> pos(-800.0, 800.0);
    std::uniform_real_distribution<double> vel(-30.0, 30.0);

    for (int i = 0; i < 300; ++i) {
        const TargetSpec target{{pos(rng), pos(rng), -100.0 + pos(rng) * 0.05}};
        const VehicleState vehicle =
            flying({pos(rng), pos(rng), -100.0}, {vel(rng), vel(rng), vel(rng) * 0.2});
        if (norm(target.position - vehicle.position.v) < 1.0) continue;
        if (vehicle.speed() < 1.0) continue;

        const LosState los = los_kinematics(vehicle, target);
        CHECK(norm(los.los_dir) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(dot(los.los_rate, los.los_dir)) < 1e-9);

        // pn output is orthogonal to the LOS direction.
        const FrameVector a = pn_accel(los, PnParams{});
        CHECK(std::abs(dot(a.v, los.los_dir)) <= 1e-9 * std::max(1.0, norm(a.v)));
    }
}

TEST_CASE("pn command magnitude and linearity") {
    PnParams params;
    params.nav_constant = 3.0;

    LosState los;
    los.los_dir = {1.0, 0.0, 0.0};
    los.los_rate = {0.0, 0.05, 0.0};
    los.closing_speed = 20.0;
    los.range = 400.0;

    const FrameVector a = pn_accel(los, params);
    CHECK(norm(a) == doctest::Approx(3.0 * 20.0 * 0.05));

    // Doubling the closing speed doubles the command exactly.
    los.closing_speed = 40.0;
    CHECK(norm(pn_accel(los, params)) == doctest::Approx(2.0 * 3.0 * 20.0 * 0.05));
}

TEST_CASE("projected pn command is orthogonal to the vehicle velocity") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Vec3 vel{20.0 + 5.0 * u(rng), 10.0 * u(rng), 3.0 * u(rng)};
        const VehicleState vehicle = flying({0, 0, -100.0}, vel);
        const TargetSpec target{{600.0 * (1.0 + 0.2 * u(rng)), 200.0 * u(rng), -130.0}};

        const LosState los = los_kinematics(vehicle, target);
        const FrameVector raw = pn_accel(los, PnParams{});
        const AccelCommand cmd = AccelCommand::project(raw, 0.0, vehicle.velocity);
        CHECK(std::abs(dot(cmd.normal, vehicle.velocity)) <=
              1e-6 * std::max(1.0, norm(cmd.normal) * norm(vehicle.velocity)));
    }
}

TEST_CASE("finite-difference LOS rate matches the analytic rate on a smooth pass") {
    const TargetSpec target{{400.0, 120.0, -130.0}};
    const double dt = 0.02;
    LosRateEstimator estimator(dt);

    // Straight-line flyby: propagate the vehicle ourselves and compare.
    Vec3 pos{0.0, 0.0, -100.0};
    const Vec3 vel{20.0, 2.0, -0.5};
    for (int k = 0; k < 400; ++k) {
        VehicleState vehicle = flying(pos, vel);
        const LosState fd = estimator.update(vehicle, target);
        if (k > 0) {
            const LosState exact = los_kinematics(vehicle, target);
            CHECK(norm(fd.los_rate - exact.los_rate) < 0.02 * std::max(0.01, norm(exact.los_rate)) + 1e-5);
            CHECK(fd.closing_speed == doctest::Approx(exact.closing_speed).epsilon(0.02));
            CHECK(std::abs(dot(fd.los_rate, fd.los_dir)) < 1e-9);
        }
        pos += vel * dt;
    }
}

TEST_CASE("speed loop is proportional") {
    PnParams params;
    params.speed_setpoint = 20.0;
    params.k_speed = 0.5;
    CHECK(speed_loop_accel(20.0, params) == 0.0);
    CHECK(speed_loop_accel(18.0, params) == doctest::Approx(1.0));
    CHECK(speed_loop_accel(24.0, params) == doctest::Approx(-2.0));
}

TEST_CASE("a pure collision course never asks for meaningful normal acceleration") {
    // Target dead ahead on the flight path: the LOS direction is constant,
    // so the commanded normal acceleration stays at numerical-noise level
    // for the whole closed-loop run.
    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::PnIntercept;
    cfg.name = "collision_course";
    cfg.target_offset_ned = {600.0, 0.0, 0.0};
    const RunSummary s = run_scenario(cfg, "test_guidance_out");
    CHECK(s.metric("peak_normal_cmd").value() < 0.1);
    CHECK(s.metric("miss_distance").value() < 1.0);
}

TEST_CASE("miss distance stays at the intercept floor across navigation constants") {
    // Strict monotone non-increase in N does not hold here: all three runs
    // land sub-meter, where the miss is set by the control-rate
    // discretization rather than guidance efficiency (N=2: 0.80 m, N=3:
    // 0.65 m, N=4: 0.98 m on the nominal geometry). The meaningful property
    // at this resolution: every N intercepts, and no N is more than the
    // discretization floor away from the best.
    std::vector<double> misses;
    for (double n : {2.0, 3.0, 4.0}) {
        ScenarioConfig cfg;
        cfg.kind = ScenarioKind::PnIntercept;
        cfg.name = "miss_n";
        cfg.pn.nav_constant = n;
        const RunSummary s = run_scenario(cfg, "test_guidance_out");
        misses.push_back(s.metric("miss_distance").value());
    }
    const double best = *std::min_element(misses.begin(), misses.end());
    for (double m : misses) {
        CHECK(m <= 1.5);
        CHECK(m <= best + 0.5);
    }
}

TEST_CASE("finite-difference LOS mode intercepts like the analytic mode") {
    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::PnIntercept;
    cfg.name = "fd_mode";
    cfg.pn_finite_difference_los = true;
    const RunSummary s = run_scenario(cfg, "test_guidance_out");
    CHECK(s.metric("miss_distance").value() <= 2.0);
}

TEST_CASE("parameter validation") {
    const TargetSpec coincident{{0.0, 0.0, -100.0}};
    CHECK_THROWS_AS(coincident.validate({0.0, 0.0, -100.0}), Error);
    PnParams bad;
    bad.nav_constant = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = PnParams{};
    bad.intercept_radius = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);

    const VehicleState vehicle = flying({0, 0, 0}, {20, 0, 0});
    CHECK_THROWS_AS(los_kinematics(vehicle, TargetSpec{{0, 0, 0}}), Error);
}
