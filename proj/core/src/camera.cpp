#include "warpgeo/camera.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "warpgeo/threading.hpp"

namespace warpgeo {

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0))
    throw std::invalid_argument("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("intrinsics: non-positive image size");
  if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
    throw std::invalid_argument("intrinsics: principal point outside image");
}

CameraIntrinsics CameraIntrinsics::pyramid_level(int factor) const {
  if (factor < 1) throw std::invalid_argument("pyramid_level: factor < 1");
  CameraIntrinsics k;
  k.fx = fx / factor;
  k.fy = fy / factor;
  // A coarse pixel centre sits at the mean of its fine box, so centres map
  // as u_c = (u_f + 0.5)/f - 0.5; the principal point follows the same map.
  k.cx = (cx + 0.5) / factor - 0.5;
  k.cy = (cy + 0.5) / factor - 0.5;
  k.width = (width + factor - 1) / factor;
  k.height = (height + factor - 1) / factor;
  return k;
}

Vec3 backproject(const Vec2& x, double d, const CameraIntrinsics& K) {
  if (!(d > 0)) throw std::domain_error("backproject: non-positive depth");
  return d * K.ray(x.x(), x.y());
}

void PoseSE3::validate() const {
  if (((R.transpose() * R) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("pose: rotation not orthonormal");
  if (std::abs(R.determinant() - 1.0) > 1e-9)
    throw std::invalid_argument("pose: rotation determinant != 1");
}

Mat3 so3_hat(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

namespace {

// Rodrigues-series coefficients. Closed forms cancel catastrophically as
// theta -> 0, so below 0.1 rad we switch to 3-term Taylor expansions, which
// are accurate to ~1e-11 relative at the branch point and exact at zero.
struct SeriesCoeffs {
  double A;   // sin(t)/t
  double B;   // (1 - cos t)/t^2
  double b2;  // (t - sin t)/t^3
  double a2;  // (t^2 + 2cos t - 2)/(2 t^4)
  double a3;  // (2t - 3 sin t + t cos t)/(2 t^5)
};

SeriesCoeffs series_coeffs(double theta) {
  SeriesCoeffs s;
  const double t2 = theta * theta;
  if (theta < 0.1) {
    const double t4 = t2 * t2;
    s.A = 1.0 - t2 / 6.0 + t4 / 120.0;
    s.B = 0.5 - t2 / 24.0 + t4 / 720.0;
    s.b2 = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0;
    s.a2 = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0;
    s.a3 = 1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0;
  } else {
    const double st = std::sin(theta), ct = std::cos(theta);
    const double sh = std::sin(theta / 2.0);
    s.A = st / theta;
    s.B = 2.0 * sh * sh / t2;  // avoids the 1 - cos cancellation
    s.b2 = (theta - st) / (t2 * theta);
    s.a2 = (t2 - 4.0 * sh * sh) / (2.0 * t2 * t2);
    s.a3 = (2.0 * theta - 3.0 * st + theta * ct) / (2.0 * t2 * t2 * theta);
  }
  return s;
}

}  // namespace

PoseSE3 se3_exp(const Twist& xi) {
  const Vec3 w = xi.head<3>(), v = xi.tail<3>();
  const double theta = w.norm();
  const SeriesCoeffs s = series_coeffs(theta);
  const Mat3 W = so3_hat(w);
  const Mat3 W2 = W * W;
  PoseSE3 T;
  T.R = Mat3::Identity() + s.A * W + s.B * W2;
  T.t = (Mat3::Identity() + s.B * W + s.b2 * W2) * v;
  return T;
}

Twist se3_log(const PoseSE3& T) {
  // sin(theta) * axis from the antisymmetric part; atan2 keeps theta well
  // conditioned over (0, pi). Precondition: angle < pi.
  const Vec3 a(0.5 * (T.R(2, 1) - T.R(1, 2)), 0.5 * (T.R(0, 2) - T.R(2, 0)),
               0.5 * (T.R(1, 0) - T.R(0, 1)));
  const double sin_t = a.norm();
  const double cos_t = 0.5 * (T.R.trace() - 1.0);
  const double theta = std::atan2(sin_t, cos_t);
  Vec3 w;
  if (theta < 0.1) {
    const double t2 = theta * theta;
    w = (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * a;  // theta/sin(theta)
  } else {
    w = (theta / sin_t) * a;
  }
  // v = J_l(w)^-1 t with J_l^-1 = I - W/2 + c W^2.
  const double t2 = theta * theta;
  double c;
  if (theta < 0.1)
    c = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  else
    c = (1.0 - 0.5 * theta * std::sin(theta) / (1.0 - std::cos(theta))) / t2;
  const Mat3 W = so3_hat(w);
  const Vec3 v = (Mat3::Identity() - 0.5 * W + c * (W * W)) * T.t;
  Twist xi;
  xi << w, v;
  return xi;
}

Mat3 so3_left_jacobian(const Vec3& w) {
  const SeriesCoeffs s = series_coeffs(w.norm());
  const Mat3 W = so3_hat(w);
  return Mat3::Identity() + s.B * W + s.b2 * (W * W);
}

Mat3 se3_jacobian_q(const Vec3& omega, const Vec3& v) {
  const SeriesCoeffs s = series_coeffs(omega.norm());
  const Mat3 P = so3_hat(omega), V = so3_hat(v);
  const Mat3 PV = P * V, VP = V * P, PVP = PV * P;
  return 0.5 * V + s.b2 * (PV + VP + PVP) +
         s.a2 * (P * PV + VP * P - 3.0 * PVP) +
         s.a3 * (PVP * P + P * PVP);
}

PixelWarp warp_pixel(double u, double v, double d, const PoseSE3& T,
                     const CameraIntrinsics& K, double eps_z) {
  const Vec3 q = T.R * (d * K.ray(u, v)) + T.t;
  PixelWarp out;
  out.z = q.z();
  if (!(q.z() > eps_z)) return out;  // behind (or on) the camera plane
  const Vec2 xs = K.project(q);
  out.u = xs.x();
  out.v = xs.y();
  out.valid = true;
  return out;
}

WarpField warp_coords(const ScalarField& depth, const PoseSE3& T,
                      const CameraIntrinsics& K, double eps_z) {
  const int W = depth.width(), H = depth.height();
  WarpField out{VectorField(W, H, 2), ScalarField(W, H)};
  const bool identity = T.is_identity_bits();
  parallel_rows(H, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < W; ++u) {
        if (!depth.valid_at(u, v)) {
          out.coords.set_valid(u, v, false);
          out.z_s.set_valid(u, v, false);
          continue;
        }
        const double d = depth.at(u, v);
        if (identity) {
          // Exact pixel grid: skips the K round trip whose rounding would
          // otherwise perturb the coordinates by an ulp.
          out.coords.at(u, v, 0) = double(u);
          out.coords.at(u, v, 1) = double(v);
          out.z_s.at(u, v) = d;
          const bool ok = d > eps_z;
          out.coords.set_valid(u, v, ok);
          out.z_s.set_valid(u, v, ok);
          continue;
        }
        const PixelWarp pw = warp_pixel(u, v, d, T, K, eps_z);
        out.coords.at(u, v, 0) = pw.u;
        out.coords.at(u, v, 1) = pw.v;
        out.z_s.at(u, v) = pw.z;
        out.coords.set_valid(u, v, pw.valid);
        out.z_s.set_valid(u, v, pw.valid);
      }
  });
  return out;
}

WarpVjp warp_coords_vjp(const ScalarField& depth, const Twist& twist,
                        const CameraIntrinsics& K, const VectorField& upstream,
                        double eps_z) {
  const int W = depth.width(), H = depth.height();
  if (upstream.width() != W || upstream.height() != H ||
      upstream.channels() != 2)
    throw std::invalid_argument("warp_coords_vjp: upstream shape mismatch");
  const PoseSE3 T = se3_exp(twist);
  const Vec3 omega = twist.head<3>(), vel = twist.tail<3>();
  // d q / d twist = [ -[q]x J_l + Q | J_l ]; J_l and Q depend only on the
  // pose, so they are hoisted out of the pixel loop.
  const Mat3 Jl = so3_left_jacobian(omega);
  const Mat3 Q = se3_jacobian_q(omega, vel);

  WarpVjp out{ScalarField(W, H, 0.0), Twist::Zero()};
  std::vector<Twist> partial(size_t(num_row_tiles(H)), Twist::Zero());
  parallel_tiles(H, [&](int tile, int r0, int r1) {
    Twist acc = Twist::Zero();
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < W; ++u) {
        if (!depth.valid_at(u, v) || !upstream.valid_at(u, v)) continue;
        const double d = depth.at(u, v);
        const Vec3 r = K.ray(u, v);
        const Vec3 q = T.R * (d * r) + T.t;
        if (!(q.z() > eps_z)) continue;  // forward marked this invalid
        const double gu = upstream.at(u, v, 0), gv = upstream.at(u, v, 1);
        if (gu == 0.0 && gv == 0.0) continue;
        const double iz = 1.0 / q.z();
        // g = (d u_s/d q)^T gu + (d v_s/d q)^T gv
        const Vec3 g(K.fx * iz * gu, K.fy * iz * gv,
                     -iz * iz * (K.fx * q.x() * gu + K.fy * q.y() * gv));
        out.grad_depth.at(u, v) = g.dot(T.R * r);
        acc.head<3>() += (Q - so3_hat(q) * Jl).transpose() * g;
        acc.tail<3>() += Jl.transpose() * g;
      }
    partial[size_t(tile)] = acc;
  });
  for (const Twist& p : partial) out.grad_twist += p;  // fixed tile order
  return out;
}

}  // namespace warpgeo
