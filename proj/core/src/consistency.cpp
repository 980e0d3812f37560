#include "warpgeo/consistency.hpp"

#include <cmath>
#include <stdexcept>

#include "warpgeo/threading.hpp"

namespace warpgeo {

namespace {

constexpr double kDegenerateNormSq = 1e-12 * 1e-12;

int clampi(int x, int lo, int hi) { return x < lo ? lo : (x > hi ? hi : x); }

// Opposite neighbor index: kNeighborOffsets[opp(k)] == -kNeighborOffsets[k].
int opp(int k) { return (k + 4) & 7; }

bool stencil_computable(const ScalarField& d, int u, int v) {
  if (u < 1 || u + 1 >= d.width() || v < 1 || v + 1 >= d.height()) return false;
  for (int dv = -1; dv <= 1; ++dv)
    for (int du = -1; du <= 1; ++du)
      if (!d.valid_at(u + du, v + dv)) return false;
  return true;
}

// Raw (unnormalized) cross-product sum at an interior pixel.
Vec3 raw_normal(const ScalarField& d, const CameraIntrinsics& K,
                const EdgeWeights& W, int u, int v) {
  const Vec3 phi_c = d.at(u, v) * K.ray(u, v);
  Vec3 n = Vec3::Zero();
  for (int p = 0; p < 4; ++p) {
    const int ka = 2 * p, kb = 2 * p + 1;
    const int ua = u + kNeighborOffsets[ka][0], va = v + kNeighborOffsets[ka][1];
    const int ub = u + kNeighborOffsets[kb][0], vb = v + kNeighborOffsets[kb][1];
    const Vec3 da = d.at(ua, va) * K.ray(ua, va) - phi_c;
    const Vec3 db = d.at(ub, vb) * K.ray(ub, vb) - phi_c;
    n += (W.at(u, v, ka) * W.at(u, v, kb)) * da.cross(db);
  }
  return n;
}

}  // namespace

EdgeWeights EdgeWeights::uniform(int width, int height) {
  EdgeWeights e;
  e.width = width;
  e.height = height;
  e.alpha = 0.0;
  e.w.assign(size_t(width) * height * 8, 0.0);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u)
      for (int k = 0; k < 8; ++k) {
        const int un = u + kNeighborOffsets[k][0];
        const int vn = v + kNeighborOffsets[k][1];
        if (un >= 0 && un < width && vn >= 0 && vn < height)
          e.w[(size_t(v) * width + u) * 8 + size_t(k)] = 1.0;
      }
  return e;
}

EdgeWeights edge_weights(const ScalarField& gray, double alpha) {
  if (alpha < 0) throw std::invalid_argument("edge_weights: alpha < 0");
  const int W = gray.width(), H = gray.height();
  EdgeWeights e;
  e.width = W;
  e.height = H;
  e.alpha = alpha;
  e.w.assign(size_t(W) * H * 8, 0.0);
  parallel_rows(H, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < W; ++u) {
        const double c = gray.at(u, v);
        for (int k = 0; k < 8; ++k) {
          const int un = u + kNeighborOffsets[k][0];
          const int vn = v + kNeighborOffsets[k][1];
          if (un < 0 || un >= W || vn < 0 || vn >= H) continue;
          e.w[(size_t(v) * W + u) * 8 + size_t(k)] =
              std::exp(-alpha * std::abs(gray.at(un, vn) - c));
        }
      }
  });
  return e;
}

NormalMap depth_to_normal(const ScalarField& depth, const CameraIntrinsics& K,
                          const EdgeWeights& W) {
  const int w = depth.width(), h = depth.height();
  NormalMap out;
  out.n = VectorField(w, h, 3, 0.0);
  out.degenerate.assign(size_t(w) * h, 0);

  // Pass 1: interior pixels with a fully valid 3x3 stencil.
  std::vector<uint8_t> computable(size_t(w) * h, 0);
  parallel_rows(h, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < w; ++u) {
        if (!stencil_computable(depth, u, v)) continue;
        const Vec3 n = raw_normal(depth, K, W, u, v);
        const size_t i = depth.idx(u, v);
        if (n.squaredNorm() < kDegenerateNormSq) {
          computable[i] = 2;  // computable but degenerate
          continue;
        }
        computable[i] = 1;
        const Vec3 nn = n.normalized();
        out.n.at(u, v, 0) = nn.x();
        out.n.at(u, v, 1) = nn.y();
        out.n.at(u, v, 2) = nn.z();
      }
  });

  // Pass 2: replicate the nearest interior normal onto border/blocked pixels
  // and install the fallback on degenerate ones.
  parallel_rows(h, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < w; ++u) {
        const size_t i = depth.idx(u, v);
        if (computable[i] == 1) continue;
        int su = u, sv = v;
        if (computable[i] == 0 && w >= 3 && h >= 3) {
          su = clampi(u, 1, w - 2);
          sv = clampi(v, 1, h - 2);
        }
        const size_t s = depth.idx(su, sv);
        if (computable[s] == 1) {
          out.n.at(u, v, 0) = out.n.at(su, sv, 0);
          out.n.at(u, v, 1) = out.n.at(su, sv, 1);
          out.n.at(u, v, 2) = out.n.at(su, sv, 2);
          if (computable[i] == 0) out.n.set_valid(u, v, true);
        } else {
          out.n.at(u, v, 2) = -1.0;  // fallback (0, 0, -1)
          out.degenerate[i] = 1;
          out.n.set_valid(u, v, computable[s] == 2);
        }
      }
  });
  return out;
}

ScalarField depth_to_normal_vjp(const ScalarField& depth,
                                const CameraIntrinsics& K,
                                const EdgeWeights& W,
                                const VectorField& upstream) {
  const int w = depth.width(), h = depth.height();
  if (upstream.width() != w || upstream.height() != h ||
      upstream.channels() != 3)
    throw std::invalid_argument("depth_to_normal_vjp: upstream shape mismatch");
  ScalarField grad(w, h, 0.0);
  if (w < 3 || h < 3) return grad;

  // Pass 1: recompute the raw sums; keep N and 1/|n| per computable center.
  std::vector<uint8_t> computable(size_t(w) * h, 0);
  std::vector<double> nvec(size_t(w) * h * 3, 0.0), inv_norm(size_t(w) * h, 0.0);
  parallel_rows(h, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < w; ++u) {
        if (!stencil_computable(depth, u, v)) continue;
        const Vec3 n = raw_normal(depth, K, W, u, v);
        if (n.squaredNorm() < kDegenerateNormSq) continue;  // zero gradient
        const size_t i = depth.idx(u, v);
        computable[i] = 1;
        inv_norm[i] = 1.0 / n.norm();
        const Vec3 nn = n * inv_norm[i];
        nvec[3 * i] = nn.x();
        nvec[3 * i + 1] = nn.y();
        nvec[3 * i + 2] = nn.z();
      }
  });

  // Pass 2 (serial): fold replicated pixels' upstream onto their source,
  // then apply the normalization derivative to get the raw-sum cotangent
  // g_m = (g - N (N.g)) / |n|.
  std::vector<double> gm(size_t(w) * h * 3, 0.0);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!upstream.valid_at(u, v)) continue;
      size_t s = depth.idx(u, v);
      if (!computable[s]) {
        const size_t src =
            depth.idx(clampi(u, 1, w - 2), clampi(v, 1, h - 2));
        if (!computable[src]) continue;
        s = src;
      }
      gm[3 * s] += upstream.at(u, v, 0);
      gm[3 * s + 1] += upstream.at(u, v, 1);
      gm[3 * s + 2] += upstream.at(u, v, 2);
    }
  parallel_rows(h, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < w; ++u) {
        const size_t i = depth.idx(u, v);
        if (!computable[i]) continue;
        const Vec3 N(nvec[3 * i], nvec[3 * i + 1], nvec[3 * i + 2]);
        const Vec3 g(gm[3 * i], gm[3 * i + 1], gm[3 * i + 2]);
        const Vec3 r = (g - N * N.dot(g)) * inv_norm[i];
        gm[3 * i] = r.x();
        gm[3 * i + 1] = r.y();
        gm[3 * i + 2] = r.z();
      }
  });

  // Pass 3 (gather): each pixel x collects from every center m whose stencil
  // contains it. For m != x, x plays exactly one pair slot; for m == x it is
  // the subtracted center of all 4 pairs.
  parallel_rows(h, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < w; ++u) {
        if (!depth.valid_at(u, v)) continue;
        const Vec3 r_x = K.ray(u, v);
        double acc = 0.0;
        const size_t ix = depth.idx(u, v);
        if (computable[ix]) {  // center role
          const Vec3 g(gm[3 * ix], gm[3 * ix + 1], gm[3 * ix + 2]);
          const Vec3 phi_c = depth.at(u, v) * r_x;
          for (int p = 0; p < 4; ++p) {
            const int ka = 2 * p, kb = 2 * p + 1;
            const int ua = u + kNeighborOffsets[ka][0];
            const int va = v + kNeighborOffsets[ka][1];
            const int ub = u + kNeighborOffsets[kb][0];
            const int vb = v + kNeighborOffsets[kb][1];
            const Vec3 A = depth.at(ua, va) * K.ray(ua, va) - phi_c;
            const Vec3 B = depth.at(ub, vb) * K.ray(ub, vb) - phi_c;
            const double w2 = W.at(u, v, ka) * W.at(u, v, kb);
            const Vec3 gA = w2 * B.cross(g);
            const Vec3 gB = w2 * g.cross(A);
            acc -= r_x.dot(gA + gB);
          }
        }
        for (int k = 0; k < 8; ++k) {  // neighbor roles, one per center
          const int um = u - kNeighborOffsets[k][0];
          const int vm = v - kNeighborOffsets[k][1];
          if (um < 0 || um >= w || vm < 0 || vm >= h) continue;
          const size_t im = depth.idx(um, vm);
          if (!computable[im]) continue;
          const Vec3 g(gm[3 * im], gm[3 * im + 1], gm[3 * im + 2]);
          const Vec3 phi_m = depth.at(um, vm) * K.ray(um, vm);
          const int ko = (k % 2 == 0) ? k + 1 : k - 1;  // partner slot
          const int uo = um + kNeighborOffsets[ko][0];
          const int vo = vm + kNeighborOffsets[ko][1];
          const Vec3 other = depth.at(uo, vo) * K.ray(uo, vo) - phi_m;
          const double w2 = W.at(um, vm, 2 * (k / 2)) *
                            W.at(um, vm, 2 * (k / 2) + 1);
          // x is the first factor of its pair when k is even.
          const Vec3 gx = (k % 2 == 0) ? Vec3(w2 * other.cross(g))
                                       : Vec3(w2 * g.cross(other));
          acc += r_x.dot(gx);
        }
        grad.at(u, v) = acc;
      }
  });
  return grad;
}

ScalarField normal_to_depth(const ScalarField& depth_o, const NormalMap& N,
                            const CameraIntrinsics& K, const EdgeWeights& W,
                            double eps_ray) {
  const int w = depth_o.width(), h = depth_o.height();
  ScalarField out(w, h, 0.0);
  parallel_rows(h, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < w; ++u) {
        if (!depth_o.valid_at(u, v)) {
          out.set_valid(u, v, false);
          continue;
        }
        const Vec3 r_j = K.ray(u, v);
        double sumw = 0.0, acc = 0.0;
        for (int k = 0; k < 8; ++k) {
          const int ui = u + kNeighborOffsets[k][0];
          const int vi = v + kNeighborOffsets[k][1];
          if (ui < 0 || ui >= w || vi < 0 || vi >= h) continue;
          if (!depth_o.valid_at(ui, vi) || !N.n.valid_at(ui, vi)) continue;
          const Vec3 n_i = N.at(ui, vi);
          const double denom = n_i.dot(r_j);
          if (std::abs(denom) < eps_ray) continue;  // grazing plane
          const double wi = W.at(u, v, k);
          const double de = n_i.dot(depth_o.at(ui, vi) * K.ray(ui, vi)) / denom;
          sumw += wi;
          acc += wi * de;
        }
        out.at(u, v) = sumw > 0.0 ? acc / sumw : depth_o.at(u, v);
      }
  });
  return out;
}

NormalToDepthVjp normal_to_depth_vjp(const ScalarField& depth_o,
                                     const NormalMap& N,
                                     const CameraIntrinsics& K,
                                     const EdgeWeights& W,
                                     const ScalarField& upstream,
                                     double eps_ray) {
  const int w = depth_o.width(), h = depth_o.height();
  if (!upstream.same_shape(depth_o))
    throw std::invalid_argument("normal_to_depth_vjp: upstream shape mismatch");
  NormalToDepthVjp out{ScalarField(w, h, 0.0), VectorField(w, h, 3, 0.0)};

  // Voter-weight normalizers, recomputed as in the forward pass.
  std::vector<double> sumw(size_t(w) * h, 0.0);
  parallel_rows(h, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < w; ++u) {
        if (!depth_o.valid_at(u, v)) continue;
        const Vec3 r_j = K.ray(u, v);
        double s = 0.0;
        for (int k = 0; k < 8; ++k) {
          const int ui = u + kNeighborOffsets[k][0];
          const int vi = v + kNeighborOffsets[k][1];
          if (ui < 0 || ui >= w || vi < 0 || vi >= h) continue;
          if (!depth_o.valid_at(ui, vi) || !N.n.valid_at(ui, vi)) continue;
          if (std::abs(N.at(ui, vi).dot(r_j)) < eps_ray) continue;
          s += W.at(u, v, k);
        }
        sumw[depth_o.idx(u, v)] = s;
      }
  });

  auto up_at = [&](int u, int v) -> double {
    return (depth_o.valid_at(u, v) && upstream.valid_at(u, v))
               ? upstream.at(u, v)
               : 0.0;
  };

  parallel_rows(h, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < w; ++u) {
        if (!depth_o.valid_at(u, v)) continue;
        const size_t ix = depth_o.idx(u, v);
        double g_d = 0.0;
        Vec3 g_n = Vec3::Zero();
        // Fallback identity when this pixel's own vote set was empty.
        if (sumw[ix] == 0.0) g_d += up_at(u, v);
        // Votes x cast into each neighbor j.
        const bool can_vote = N.n.valid_at(u, v);
        if (can_vote) {
          const Vec3 n_x = N.at(u, v);
          const Vec3 phi_x = depth_o.at(u, v) * K.ray(u, v);
          const double n_dot_rx = n_x.dot(K.ray(u, v));
          for (int k = 0; k < 8; ++k) {
            const int uj = u + kNeighborOffsets[k][0];
            const int vj = v + kNeighborOffsets[k][1];
            if (uj < 0 || uj >= w || vj < 0 || vj >= h) continue;
            if (!depth_o.valid_at(uj, vj)) continue;
            const size_t ij = depth_o.idx(uj, vj);
            if (sumw[ij] == 0.0) continue;
            const double g = up_at(uj, vj);
            if (g == 0.0) continue;
            const Vec3 r_j = K.ray(uj, vj);
            const double denom = n_x.dot(r_j);
            if (std::abs(denom) < eps_ray) continue;  // vote was dropped
            const double wn = W.at(uj, vj, opp(k)) / sumw[ij];
            const double de = n_x.dot(phi_x) / denom;
            g_d += g * wn * n_dot_rx / denom;
            g_n += (g * wn / denom) * (phi_x - de * r_j);
          }
        }
        out.grad_depth.at(u, v) = g_d;
        if (can_vote && !N.degenerate[ix]) {
          out.grad_normals.at(u, v, 0) = g_n.x();
          out.grad_normals.at(u, v, 1) = g_n.y();
          out.grad_normals.at(u, v, 2) = g_n.z();
        }
      }
  });
  return out;
}

}  // namespace warpgeo
