#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "fwaccel/frames.hpp"

using namespace fwaccel;

namespace {

void check_close(const Vec3& a, const Vec3& b, double tol = 1e-9) {
    CHECK(std::abs(a.x - b.x) <= tol);
    CHECK(std::abs(a.y - b.y) <= tol);
    CHECK(std::abs(a.z - b.z) <= tol);
}

void check_identity(const RotationMatrix& r, double tol = 1e-12) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(std::abs(r.m(i, j) - (i == j ? 1.0 : 0.0)) <= tol);
}

EulerAngles random_angles(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> roll(-kPi * 0.9, kPi * 0.9);
    std::uniform_real_distribution<double> pitch(-1.2, 1.2);
    std::uniform_real_distribution<double> yaw(-kPi, kPi);
    return {roll(rng), pitch(rng), yaw(rng)};
}

}  // namespace

TEST_CASE("elementary rotations: identity and quarter-turn cases") {
    check_identity(elementary_rotation(Axis::Z, 0.0));

    // x quarter turn carries +y into +z.
    const Vec3 v = elementary_rotation(Axis::X, kPi / 2.0) * Vec3{0.0, 1.0, 0.0};
    check_close(v, {0.0, 0.0, 1.0});

    CHECK_THROWS_AS(elementary_rotation(Axis::X, std::nan("")), Error);
}

TEST_CASE("elementary rotations compose to the yaw-then-pitch matrix") {
    // Hand-expanded product R_y(theta) * R_z(psi) as the oracle.
    const double theta = 0.1, psi = 0.2;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cp = std::cos(psi), sp = std::sin(psi);
    const double expected[9] = {ct * cp, -ct * sp, st,
                                sp, cp, 0.0,
                                -st * cp, st * sp, ct};

    const RotationMatrix composed =
        elementary_rotation(Axis::Y, theta) * elementary_rotation(Axis::Z, psi);
    const RotationMatrix direct = rot_inertial_to_v2({0.0, theta, psi});
    for (int i = 0; i < 9; ++i) {
        CHECK(composed.m.m[static_cast<std::size_t>(i)] == doctest::Approx(expected[i]).epsilon(1e-12));
        CHECK(direct.m.m[static_cast<std::size_t>(i)] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
}

TEST_CASE("yaw-pitch rotation: trivial cases") {
    check_identity(rot_inertial_to_v2({0.0, 0.0, 0.0}));

    // Pure quarter yaw carries north into east.
    const Vec3 east = rot_inertial_to_v2({0.0, 0.0, kPi / 2.0}) * Vec3{1.0, 0.0, 0.0};
    check_close(east, {0.0, 1.0, 0.0});
}

TEST_CASE("roll rotation: trivial cases and transpose inverse") {
    check_identity(rot_v2_to_body({0.0, 0.0, 0.0}));

    const Vec3 v = rot_v2_to_body({kPi / 6.0, 0.0, 0.0}) * Vec3{0.0, 0.0, 1.0};
    check_close(v, {0.0, -0.5, std::sqrt(3.0) / 2.0}, 1e-12);

    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        const EulerAngles a = random_angles(rng);
        const RotationMatrix r = rot_v2_to_body(a);
        check_identity(r * r.transpose(), 1e-12);
    }
}

TEST_CASE("body-to-velocity rotation") {
    check_identity(rot_body_to_velocity({0.0, 0.0}));

    // alpha only: body x maps to x rotated by -alpha about y.
    const double alpha = 0.05;
    const Vec3 v = rot_body_to_velocity({alpha, 0.0}) * Vec3{1.0, 0.0, 0.0};
    check_close(v, {std::cos(alpha), 0.0, std::sin(alpha)}, 1e-12);
}

TEST_CASE("rotation matrices are orthonormal with unit determinant") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const EulerAngles a = random_angles(rng);
        std::uniform_real_distribution<double> small(-0.25, 0.25);
        const AeroAngles aero{small(rng), small(rng)};

        for (const RotationMatrix& r :
             {rot_inertial_to_v2(a), rot_v2_to_body(a), rot_body_to_velocity(aero),
              rot_inertial_to_v2(a) * rot_v2_to_body(a) * rot_body_to_velocity(aero)}) {
            CHECK(is_orthonormal(r, 1e-9));
            CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("coordinate maps round-trip and invert each other") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> comp(-20.0, 20.0);
    for (int i = 0; i < 200; ++i) {
        const EulerAngles a = random_angles(rng);
        const FrameVector v{{comp(rng), comp(rng), comp(rng)}, Frame::Inertial};

        const FrameVector body = to_body(v, a);
        const FrameVector back = inertial_from_body(body, a);
        check_close(back.v, v.v, 1e-9);
        CHECK(back.frame == Frame::Inertial);

        // Norms are preserved through every map.
        CHECK(norm(to_vehicle2(v, a)) == doctest::Approx(norm(v)).epsilon(1e-12));
        CHECK(norm(body) == doctest::Approx(norm(v)).epsilon(1e-12));
    }
}

TEST_CASE("coordinate maps match the frame geometry") {
    // Heading east, a north-pointing vector sits on -y of the vehicle-2 frame.
    const EulerAngles east_heading{0.0, 0.0, kPi / 2.0};
    const FrameVector north{{1.0, 0.0, 0.0}, Frame::Inertial};
    check_close(to_vehicle2(north, east_heading).v, {0.0, -1.0, 0.0}, 1e-12);

    // Rolled 30 deg right, the inertial up direction tilts toward -y in body.
    const EulerAngles rolled{kPi / 6.0, 0.0, 0.0};
    const FrameVector up{{0.0, 0.0, -1.0}, Frame::Inertial};
    check_close(to_body(up, rolled).v, {0.0, -0.5, -std::sqrt(3.0) / 2.0}, 1e-12);

    // body_x_axis agrees with mapping e_x through the body-to-inertial map.
    std::mt19937_64 rng(17);
    for (int i = 0; i < 20; ++i) {
        const EulerAngles a = random_angles(rng);
        const FrameVector ex{{1.0, 0.0, 0.0}, Frame::Body};
        check_close(body_x_axis(a), inertial_from_body(ex, a).v, 1e-12);
    }
}

TEST_CASE("frame tags are enforced, never reinterpreted") {
    const FrameVector inertial{{1.0, 2.0, 3.0}, Frame::Inertial};
    const FrameVector body{{1.0, 2.0, 3.0}, Frame::Body};

    CHECK_THROWS_AS(inertial + body, Error);
    CHECK_THROWS_AS(dot(inertial, body), Error);
    CHECK_THROWS_AS(cross(inertial, body), Error);
    CHECK_THROWS_AS(to_body(body, {}), Error);
    CHECK_THROWS_AS(inertial_from_body(inertial, {}), Error);

    try {
        (void)(inertial + body);
        FAIL("expected frame mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::frame_mismatch);
    }
}

TEST_CASE("gimbal-lock region is rejected") {
    CHECK_THROWS_AS(rot_inertial_to_v2({0.0, deg_to_rad(89.0), 0.0}), Error);
    CHECK_THROWS_AS(to_body({{1, 0, 0}, Frame::Inertial}, {0.0, deg_to_rad(86.0), 0.0}), Error);
    CHECK_NOTHROW(rot_inertial_to_v2({0.0, deg_to_rad(84.0), 0.0}));
}

TEST_CASE("wrap_pi stays in (-pi, pi]") {
    CHECK(wrap_pi(kPi) == doctest::Approx(kPi));
    CHECK(wrap_pi(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_pi(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
    CHECK(wrap_pi(0.1) == doctest::Approx(0.1));
}
