#pragma once

// Shared oracles and fixtures for the test binaries. Everything here is
// deliberately independent of the library's own closed forms: the matrix
// exponential is scaling-and-squaring on a truncated series, plane normals
// come from an SVD fit, and file helpers read raw bytes.

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "warpgeo/camera.hpp"
#include "warpgeo/field.hpp"

namespace testsup {

using warpgeo::Twist;
using warpgeo::Vec3;

// 4x4 matrix exponential by scaling and squaring over a truncated Taylor
// series; accurate to ~1e-14 for the norms used in tests.
inline Eigen::Matrix4d expm4(Eigen::Matrix4d A) {
  int squarings = 0;
  while (A.cwiseAbs().maxCoeff() > 0.25) {
    A *= 0.5;
    ++squarings;
  }
  Eigen::Matrix4d X = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d term = Eigen::Matrix4d::Identity();
  for (int k = 1; k <= 24; ++k) {
    term = term * A / double(k);
    X += term;
  }
  for (int i = 0; i < squarings; ++i) X = X * X;
  return X;
}

// se(3) generator matrix of a twist (omega, v).
inline Eigen::Matrix4d twist_matrix(const Twist& xi) {
  Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
  A.topLeftCorner<3, 3>() = warpgeo::so3_hat(xi.head<3>());
  A.topRightCorner<3, 1>() = xi.tail<3>();
  return A;
}

struct PlaneFit {
  Vec3 normal = Vec3::Zero();  // unit, oriented n_z < 0
  double rms_residual = 0.0;   // RMS point-plane distance
};

// Total-least-squares plane through a point cloud: the normal is the right
// singular vector with the smallest singular value of the centered stack.
inline PlaneFit fit_plane_svd(const std::vector<Vec3>& pts) {
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) mean += p;
  mean /= double(pts.size());
  Eigen::MatrixXd M(pts.size(), 3);
  for (size_t i = 0; i < pts.size(); ++i) M.row(i) = (pts[i] - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  PlaneFit fit;
  fit.normal = svd.matrixV().col(2);
  if (fit.normal.z() > 0) fit.normal = -fit.normal;
  fit.rms_residual = svd.singularValues()(2) / std::sqrt(double(pts.size()));
  return fit;
}

inline double angle_deg(const Vec3& a, const Vec3& b) {
  double c = a.normalized().dot(b.normalized());
  c = std::max(-1.0, std::min(1.0, c));
  return std::acos(c) * 180.0 / M_PI;
}

inline double urand(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Fresh empty directory under the working directory (ctest runs in the build
// tree); reused names are wiped first so tests are rerunnable.
inline std::string make_temp_dir(const std::string& name) {
  namespace fs = std::filesystem;
  fs::path dir = fs::path("test_tmp") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool file_exists(const std::string& path) {
  return std::filesystem::exists(path);
}

}  // namespace testsup
