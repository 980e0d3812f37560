#pragma once

#include <Eigen/Dense>

#include "warpgeo/field.hpp"

namespace warpgeo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Twist = Eigen::Matrix<double, 6, 1>;  // (omega, v): rotation block first

// Pinhole camera. Pixel x = (u, v) with u along columns, v along rows,
// origin at the top-left pixel centre; the camera looks down +z and depth
// is the z-component of the camera-frame point.
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;

  // K^-1 h(x): the ray through pixel (u, v) at unit depth.
  Vec3 ray(double u, double v) const {
    return {(u - cx) / fx, (v - cy) / fy, 1.0};
  }
  // Dehomogenised projection; caller guards z > 0.
  Vec2 project(const Vec3& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }

  // Intrinsics of pyramid level with box-filter downsampling by `factor`
  // (coarse pixel centres sit at the mean of their fine box).
  CameraIntrinsics pyramid_level(int factor) const;
};

// phi(x) = d * K^-1 h(x); z-component equals d exactly.
Vec3 backproject(const Vec2& x, double d, const CameraIntrinsics& K);

struct PoseSE3 {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static PoseSE3 identity() { return {}; }
  PoseSE3 inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  PoseSE3 operator*(const PoseSE3& o) const { return {R * o.R, R * o.t + t}; }
  Vec3 operator*(const Vec3& p) const { return R * p + t; }

  // Exact bitwise identity test; gates the warp fast path that keeps
  // identity-pose view synthesis bit-exact.
  bool is_identity_bits() const {
    return R == Mat3::Identity() && t == Vec3::Zero();
  }
  // R orthonormal and det +1 within 1e-9.
  void validate() const;
};

Mat3 so3_hat(const Vec3& w);

// Rodrigues closed forms with Taylor branches for small angles, so the maps
// are smooth through zero.
PoseSE3 se3_exp(const Twist& xi);
Twist se3_log(const PoseSE3& T);  // requires rotation angle < pi

// Left Jacobian of SO(3): d/dw exp(w^) = J_l(w) pre-composed; also the
// V-matrix coupling translation into se3_exp (t = J_l(omega) * v).
Mat3 so3_left_jacobian(const Vec3& w);

// Q block of the SE(3) left Jacobian (Barfoot's closed form): together with
// J_l it gives d(exp(xi) p)/d xi = [ -[q]x J_l + Q | J_l ] for q = exp(xi) p.
Mat3 se3_jacobian_q(const Vec3& omega, const Vec3& v);

// Per-pixel rigid warp: project K T (d K^-1 h(x)). `valid` is false
// when the transformed depth z <= eps_z (behind or on the camera plane).
struct PixelWarp {
  double u = 0, v = 0, z = 0;
  bool valid = false;
};
PixelWarp warp_pixel(double u, double v, double d, const PoseSE3& T,
                     const CameraIntrinsics& K, double eps_z = 1e-6);

// Field-level warp. coords has 2 channels (u_s, v_s); a pixel is valid iff
// the input depth pixel is valid and the warped point lies in front of the
// source camera. For a bitwise-identity pose the coordinates are emitted as
// the exact integer grid (no round trip through K), which makes identity
// view synthesis reproduce the source image bit-exactly.
struct WarpField {
  VectorField coords;  // channels (u_s, v_s)
  ScalarField z_s;
};
WarpField warp_coords(const ScalarField& depth, const PoseSE3& T,
                      const CameraIntrinsics& K, double eps_z = 1e-6);

// Reverse-mode derivative of warp_coords w.r.t. the depth map and the twist
// generating T = se3_exp(twist). upstream has 2 channels aligned with
// coords; invalid pixels contribute zero. grad_twist is ordered (omega, v).
struct WarpVjp {
  ScalarField grad_depth;
  Twist grad_twist = Twist::Zero();
};
WarpVjp warp_coords_vjp(const ScalarField& depth, const Twist& twist,
                        const CameraIntrinsics& K,
                        const VectorField& upstream, double eps_z = 1e-6);

}  // namespace warpgeo
