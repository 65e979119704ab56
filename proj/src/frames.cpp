#include "fwaccel/frames.hpp"

#include <cmath>
#include <string>

namespace fwaccel {

double wrap_pi(double angle) {
    double a = std::fmod(angle + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

const char* frame_name(Frame f) {
    switch (f) {
        case Frame::Inertial: return "inertial";
        case Frame::Vehicle2: return "vehicle2";
        case Frame::Body: return "body";
        case Frame::Velocity: return "velocity";
    }
    return "unknown";
}

void validate(const EulerAngles& angles) {
    if (!std::isfinite(angles.roll) || !std::isfinite(angles.pitch) || !std::isfinite(angles.yaw))
        throw Error(Errc::invalid_input, "non-finite Euler angles");
    if (std::abs(angles.roll) >= kPi)
        throw Error(Errc::invalid_input, "roll out of range");
    if (std::abs(angles.pitch) >= kMaxPitchForTransforms)
        throw Error(Errc::invalid_input, "pitch too close to gimbal lock");
}

bool is_orthonormal(const RotationMatrix& r, double tol) {
    Mat3 e = r.m.transpose() * r.m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double target = (i == j) ? 1.0 : 0.0;
            if (std::abs(e(i, j) - target) > tol) return false;
        }
    return std::abs(r.determinant() - 1.0) <= tol;
}

RotationMatrix elementary_rotation(Axis axis, double angle) {
    if (!std::isfinite(angle))
        throw Error(Errc::invalid_input, "non-finite rotation angle");
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    RotationMatrix r;
    switch (axis) {
        case Axis::X:
            r.m.m = {1, 0, 0,
                     0, c, -s,
                     0, s, c};
            break;
        case Axis::Y:
            r.m.m = {c, 0, s,
                     0, 1, 0,
                     -s, 0, c};
            break;
        case Axis::Z:
            r.m.m = {c, -s, 0,
                     s, c, 0,
                     0, 0, 1};
            break;
    }
    return r;
}

RotationMatrix rot_inertial_to_v2(const EulerAngles& angles) {
    validate(angles);
    return elementary_rotation(Axis::Y, angles.pitch) * elementary_rotation(Axis::Z, angles.yaw);
}

RotationMatrix rot_v2_to_body(const EulerAngles& angles) {
    validate(angles);
    return elementary_rotation(Axis::X, angles.roll);
}

RotationMatrix rot_body_to_velocity(const AeroAngles& aero) {
    if (!std::isfinite(aero.alpha) || !std::isfinite(aero.beta))
        throw Error(Errc::invalid_input, "non-finite aero angles");
    return elementary_rotation(Axis::Y, -aero.alpha) * elementary_rotation(Axis::Z, aero.beta);
}

void require_frame(const FrameVector& a, Frame expected, const char* where) {
    if (a.frame != expected)
        throw Error(Errc::frame_mismatch,
                    std::string(where) + ": expected " + frame_name(expected) + " vector, got " +
                        frame_name(a.frame));
}

void require_same_frame(const FrameVector& a, const FrameVector& b, const char* where) {
    if (a.frame != b.frame)
        throw Error(Errc::frame_mismatch,
                    std::string(where) + ": mixing " + frame_name(a.frame) + " and " +
                        frame_name(b.frame) + " vectors");
}

FrameVector operator+(const FrameVector& a, const FrameVector& b) {
    require_same_frame(a, b, "operator+");
    return {a.v + b.v, a.frame};
}

FrameVector operator-(const FrameVector& a, const FrameVector& b) {
    require_same_frame(a, b, "operator-");
    return {a.v - b.v, a.frame};
}

double dot(const FrameVector& a, const FrameVector& b) {
    require_same_frame(a, b, "dot");
    return dot(a.v, b.v);
}

FrameVector cross(const FrameVector& a, const FrameVector& b) {
    require_same_frame(a, b, "cross");
    return {cross(a.v, b.v), a.frame};
}

FrameVector to_vehicle2(const FrameVector& inertial, const EulerAngles& angles) {
    require_frame(inertial, Frame::Inertial, "to_vehicle2");
    validate(angles);
    // Coordinate change: same factor order, negated angles.
    Mat3 map = (elementary_rotation(Axis::Y, -angles.pitch) *
                elementary_rotation(Axis::Z, -angles.yaw)).m;
    return {map * inertial.v, Frame::Vehicle2};
}

FrameVector to_body(const FrameVector& inertial, const EulerAngles& angles) {
    require_frame(inertial, Frame::Inertial, "to_body");
    validate(angles);
    Mat3 map = (elementary_rotation(Axis::X, -angles.roll) *
                elementary_rotation(Axis::Y, -angles.pitch) *
                elementary_rotation(Axis::Z, -angles.yaw)).m;
    return {map * inertial.v, Frame::Body};
}

FrameVector inertial_from_body(const FrameVector& body, const EulerAngles& angles) {
    require_frame(body, Frame::Body, "inertial_from_body");
    validate(angles);
    Mat3 map = (elementary_rotation(Axis::Z, angles.yaw) *
                elementary_rotation(Axis::Y, angles.pitch) *
                elementary_rotation(Axis::X, angles.roll)).m;
    return {map * body.v, Frame::Inertial};
}

FrameVector vehicle2_from_body(const FrameVector& body, const EulerAngles& angles) {
    require_frame(body, Frame::Body, "vehicle2_from_body");
    validate(angles);
    Mat3 map = elementary_rotation(Axis::X, angles.roll).m;
    return {map * body.v, Frame::Vehicle2};
}

Vec3 body_x_axis(const EulerAngles& angles) {
    const double ct = std::cos(angles.pitch), st = std::sin(angles.pitch);
    const double cp = std::cos(angles.yaw), sp = std::sin(angles.yaw);
    return {ct * cp, ct * sp, -st};
}

Vec3 body_z_axis(const EulerAngles& angles) {
    FrameVector ez{{0.0, 0.0, 1.0}, Frame::Body};
    return inertial_from_body(ez, angles).v;
}

}  // namespace fwaccel
