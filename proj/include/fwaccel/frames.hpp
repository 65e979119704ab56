#pragma once

#include "fwaccel/error.hpp"
#include "fwaccel/math3.hpp"

namespace fwaccel {

// Conventions used throughout:
//  - Inertial frame is North-East-Down (NED): +z points down, gravity is +z.
//  - Attitude is Euler roll/pitch/yaw (phi, theta, psi), radians everywhere;
//    degrees appear only at the CLI/config boundary.
//  - The vehicle-2 frame is the inertial frame rotated through yaw then pitch
//    (Beard & McLain); the body frame adds roll; the velocity frame has its
//    x-axis along the velocity vector.
//  - elementary_rotation() and the rot_* builders return ACTIVE right-handed
//    rotations: they rotate vectors (R_z(+90 deg) carries north into east).
//    Expressing a vector's coordinates in a rotated frame is the inverse
//    operation, so the coordinate-map helpers (to_vehicle2, to_body,
//    inertial_from_body, ...) compose the same factors with negated angles.

inline constexpr double kGravity = 9.81;  // m/s^2
inline constexpr double kPi = 3.14159265358979323846;

// Gravitational acceleration in NED coordinates.
inline Vec3 gravity_ned() { return {0.0, 0.0, kGravity}; }

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Wrap an angle into (-pi, pi].
double wrap_pi(double angle);

enum class Axis { X, Y, Z };

enum class Frame { Inertial, Vehicle2, Body, Velocity };

const char* frame_name(Frame f);

struct EulerAngles {
    double roll = 0.0;   // phi, rad
    double pitch = 0.0;  // theta, rad
    double yaw = 0.0;    // psi, rad
};

// Pitch beyond this is rejected rather than special-cased for gimbal lock;
// the operating envelope keeps |pitch| at or below 30 deg anyway.
inline constexpr double kMaxPitchForTransforms = deg_to_rad(85.0);

// Throws invalid_input for non-finite angles, |roll| >= pi or |pitch| >= 85 deg.
void validate(const EulerAngles& angles);

struct AeroAngles {
    double alpha = 0.0;  // angle of attack, rad
    double beta = 0.0;   // sideslip, rad
};

struct RotationMatrix {
    Mat3 m = Mat3::identity();

    RotationMatrix transpose() const { return {m.transpose()}; }
    double determinant() const { return m.determinant(); }
};

inline RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b) { return {a.m * b.m}; }
inline Vec3 operator*(const RotationMatrix& a, const Vec3& v) { return a.m * v; }

// max |R^T R - I| entry and |det - 1| both within tol.
bool is_orthonormal(const RotationMatrix& r, double tol = 1e-9);

// Standard right-handed (active) rotation about a principal axis.
// Throws invalid_input for a non-finite angle.
RotationMatrix elementary_rotation(Axis axis, double angle);

// R_y(pitch) * R_z(yaw): the yaw-then-pitch rotation that carries the
// inertial axes toward the vehicle-2 frame.
RotationMatrix rot_inertial_to_v2(const EulerAngles& angles);

// R_x(roll): pure roll.
RotationMatrix rot_v2_to_body(const EulerAngles& angles);

// R_y(-alpha) * R_z(beta).
RotationMatrix rot_body_to_velocity(const AeroAngles& aero);

// A 3-vector tagged with the frame its coordinates are expressed in.
// Binary operations require matching tags; mixing frames throws
// frame_mismatch instead of silently reinterpreting coordinates.
struct FrameVector {
    Vec3 v;
    Frame frame = Frame::Inertial;

    double x() const { return v.x; }
    double y() const { return v.y; }
    double z() const { return v.z; }
};

void require_frame(const FrameVector& a, Frame expected, const char* where);
void require_same_frame(const FrameVector& a, const FrameVector& b, const char* where);

FrameVector operator+(const FrameVector& a, const FrameVector& b);
FrameVector operator-(const FrameVector& a, const FrameVector& b);
inline FrameVector operator*(const FrameVector& a, double s) { return {a.v * s, a.frame}; }
inline FrameVector operator*(double s, const FrameVector& a) { return {a.v * s, a.frame}; }
double dot(const FrameVector& a, const FrameVector& b);
FrameVector cross(const FrameVector& a, const FrameVector& b);
inline double norm(const FrameVector& a) { return norm(a.v); }

// Coordinate maps (passive transforms). Input tags are checked.
FrameVector to_vehicle2(const FrameVector& inertial, const EulerAngles& angles);
FrameVector to_body(const FrameVector& inertial, const EulerAngles& angles);
FrameVector inertial_from_body(const FrameVector& body, const EulerAngles& angles);
FrameVector vehicle2_from_body(const FrameVector& body, const EulerAngles& angles);

// Body axes expressed in inertial coordinates (columns of the body-to-NED map).
Vec3 body_x_axis(const EulerAngles& angles);
Vec3 body_z_axis(const EulerAngles& angles);

}  // namespace fwaccel
