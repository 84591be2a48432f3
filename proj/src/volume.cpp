#include "coseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace coseg {

namespace {

constexpr double kBig = 1e20;
constexpr std::int32_t kNoSite = -1;

// Lower-envelope distance pass along one line (Felzenszwalb-Huttenlocher).
// f holds squared distances accumulated so far, fsite the packed coordinates
// of the site achieving each value. Missing sites carry kBig / kNoSite.
void edt_line(const double* f, const std::int32_t* fsite, int n, double w,
              double* g, std::int32_t* gsite, int* v, double* z) {
  auto intersect = [&](int q, int p) {
    return ((f[q] + w * q * q) - (f[p] + w * p * p)) / (2.0 * w * (q - p));
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int x = 0; x < n; ++x) {
    while (z[k + 1] < x) ++k;
    const int p = v[k];
    const double d = x - p;
    g[x] = w * d * d + f[p];
    gsite[x] = fsite[p];
  }
}

struct Lattice {
  Vec3i dims;
  std::vector<double> dist2;
  std::vector<std::int32_t> site;  // packed 10-bit coords, kNoSite if none

  Index linear(int i, int j, int k) const {
    return static_cast<Index>(i) +
           static_cast<Index>(dims.x()) *
               (static_cast<Index>(j) + static_cast<Index>(dims.y()) * k);
  }
};

std::int32_t pack(int i, int j, int k) {
  return static_cast<std::int32_t>(i | (j << 10) | (k << 20));
}

void unpack(std::int32_t s, int& i, int& j, int& k) {
  i = s & 1023;
  j = (s >> 10) & 1023;
  k = (s >> 20) & 1023;
}

// Runs the three sweep passes over the lattice, propagating site coords.
void edt_sweep(Lattice& lat, const Vec3& axis_weight) {
  const Vec3i d = lat.dims;
  const int nmax = d.maxCoeff();
  std::vector<double> fbuf(nmax), gbuf(nmax), z(nmax + 1);
  std::vector<std::int32_t> fsite(nmax), gsite(nmax);
  std::vector<int> v(nmax);

  for (int axis = 0; axis < 3; ++axis) {
    const int n = d[axis];
    Vec3i stepv = Vec3i::Zero();
    stepv[axis] = 1;
    const Index stride = lat.linear(stepv.x(), stepv.y(), stepv.z());
    const int u_axis = (axis + 1) % 3;
    const int w_axis = (axis + 2) % 3;
    for (int b = 0; b < d[w_axis]; ++b) {
      for (int a = 0; a < d[u_axis]; ++a) {
        Vec3i at = Vec3i::Zero();
        at[u_axis] = a;
        at[w_axis] = b;
        const Index base = lat.linear(at.x(), at.y(), at.z());
        for (int x = 0; x < n; ++x) {
          fbuf[x] = lat.dist2[base + stride * x];
          fsite[x] = lat.site[base + stride * x];
        }
        edt_line(fbuf.data(), fsite.data(), n, axis_weight[axis], gbuf.data(),
                 gsite.data(), v.data(), z.data());
        for (int x = 0; x < n; ++x) {
          lat.dist2[base + stride * x] = gbuf[x];
          lat.site[base + stride * x] = gsite[x];
        }
      }
    }
  }
}

}  // namespace

RealVolume distance_transform(const LabelVolume& label) {
  const int nx = label.nx(), ny = label.ny(), nz = label.nz();
  bool any_fg = false, any_bg = false;
  for (const auto v : label.data()) {
    (v ? any_fg : any_bg) = true;
    if (any_fg && any_bg) break;
  }
  if (!any_fg || !any_bg)
    throw Error(ErrorKind::degenerate_input, "degenerate label volume");

  RealVolume out(label.dims(), label.spacing(), label.origin(),
                 std::numeric_limits<double>::infinity());
  std::vector<double> best(static_cast<std::size_t>(out.size()), kBig);

  // One lattice per face orientation: the family axis is doubled so face
  // midpoints (between centers) and voxel centers are both lattice points.
  for (int family = 0; family < 3; ++family) {
    Lattice lat;
    lat.dims = label.dims();
    lat.dims[family] = 2 * label.dims()[family] + 1;
    if (lat.dims.maxCoeff() >= 1024)
      throw Error(ErrorKind::argument, "distance_transform: dims too large");
    const std::size_t total = static_cast<std::size_t>(lat.dims.x()) *
                              lat.dims.y() * lat.dims.z();
    lat.dist2.assign(total, kBig);
    lat.site.assign(total, kNoSite);

    // Mark internal faces where the label changes along the family axis.
    bool any_site = false;
    Vec3i stepv = Vec3i::Zero();
    stepv[family] = 1;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const int i2 = i + stepv.x(), j2 = j + stepv.y(), k2 = k + stepv.z();
          if (!label.contains(i2, j2, k2)) continue;
          if (label(i, j, k) == label(i2, j2, k2)) continue;
          Vec3i c(i, j, k);
          c[family] = 2 * c[family] + 2;  // face midpoint in doubled units
          lat.dist2[lat.linear(c.x(), c.y(), c.z())] = 0.0;
          lat.site[lat.linear(c.x(), c.y(), c.z())] = pack(c.x(), c.y(), c.z());
          any_site = true;
        }
    if (!any_site) continue;

    Vec3 w = label.spacing().cwiseProduct(label.spacing());
    w[family] *= 0.25;  // doubled axis counts half-voxel steps
    edt_sweep(lat, w);

    // Read off voxel centers and recompute the squared distance from the
    // winning site with the same expression a brute-force scan would use,
    // so the two agree to the last bit.
    Vec3 half = label.spacing() * 0.5;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          Vec3i q(i, j, k);
          q[family] = 2 * q[family] + 1;
          const std::int32_t s = lat.site[lat.linear(q.x(), q.y(), q.z())];
          if (s == kNoSite) continue;
          int si, sj, sk;
          unpack(s, si, sj, sk);
          Vec3i sv(si, sj, sk);
          double d2 = 0.0;
          for (int a = 0; a < 3; ++a) {
            const double step = (a == family) ? half[a] : label.spacing()[a];
            const double delta = (q[a] - sv[a]) * step;
            d2 += delta * delta;
          }
          auto& slot = best[static_cast<std::size_t>(out.linear(i, j, k))];
          slot = std::min(slot, d2);
        }
  }

  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const double d = std::sqrt(best[out.linear(i, j, k)]);
        out(i, j, k) = label(i, j, k) ? -d : d;
      }
  return out;
}

RealVolume gaussian_smooth(const RealVolume& vol, double sigma_mm) {
  if (sigma_mm < 0.0)
    throw Error(ErrorKind::argument, "gaussian_smooth: negative sigma");
  if (sigma_mm == 0.0) return vol;

  RealVolume cur = vol;
  for (int axis = 0; axis < 3; ++axis) {
    const double h = vol.spacing()[axis];
    const int radius = static_cast<int>(std::ceil(4.0 * sigma_mm / h));
    std::vector<double> w(2 * radius + 1);
    for (int d = -radius; d <= radius; ++d)
      w[d + radius] = std::exp(-0.5 * (d * h / sigma_mm) * (d * h / sigma_mm));

    RealVolume next(vol.dims(), vol.spacing(), vol.origin());
    const int n = vol.dims()[axis];
    const int nu = vol.dims()[(axis + 1) % 3];
    const int nw = vol.dims()[(axis + 2) % 3];
    Vec3i at;
    for (int b = 0; b < nw; ++b)
      for (int a = 0; a < nu; ++a)
        for (int x = 0; x < n; ++x) {
          at[axis] = x;
          at[(axis + 1) % 3] = a;
          at[(axis + 2) % 3] = b;
          double acc = 0.0, norm = 0.0;
          const int lo = std::max(-radius, -x);
          const int hi = std::min(radius, n - 1 - x);
          for (int d = lo; d <= hi; ++d) {
            Vec3i src = at;
            src[axis] += d;
            acc += w[d + radius] * cur(src.x(), src.y(), src.z());
            norm += w[d + radius];
          }
          next(at.x(), at.y(), at.z()) = acc / norm;
        }
    cur = std::move(next);
  }
  return cur;
}

TrilinearSample sample_trilinear(const RealVolume& vol, const Vec3& p) {
  int i0[3];
  double f[3];
  bool clamped[3];
  for (int a = 0; a < 3; ++a) {
    const int n = vol.dims()[a];
    double u = (p[a] - vol.origin()[a]) / vol.spacing()[a];
    clamped[a] = false;
    if (n == 1) {
      i0[a] = 0;
      f[a] = 0.0;
      clamped[a] = true;
      continue;
    }
    if (u <= 0.0) {
      clamped[a] = u < 0.0;
      u = 0.0;
    } else if (u >= n - 1) {
      clamped[a] = u > n - 1;
      u = n - 1;
    }
    i0[a] = std::min(static_cast<int>(u), n - 2);
    f[a] = u - i0[a];
  }

  // Weighted 8-corner form: exact at cell corners (weights are exactly 0/1
  // there), and the weight derivatives give the analytic gradient.
  TrilinearSample out;
  Vec3 dfrac = Vec3::Zero();
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const int i = std::min(i0[0] + dx, vol.nx() - 1);
        const int j = std::min(i0[1] + dy, vol.ny() - 1);
        const int k = std::min(i0[2] + dz, vol.nz() - 1);
        const double c = vol(i, j, k);
        const double wx = dx ? f[0] : 1.0 - f[0];
        const double wy = dy ? f[1] : 1.0 - f[1];
        const double wz = dz ? f[2] : 1.0 - f[2];
        out.value += wx * wy * wz * c;
        dfrac.x() += (dx ? wy * wz : -wy * wz) * c;
        dfrac.y() += (dy ? wx * wz : -wx * wz) * c;
        dfrac.z() += (dz ? wx * wy : -wx * wy) * c;
      }
  for (int a = 0; a < 3; ++a)
    out.gradient[a] = clamped[a] ? 0.0 : dfrac[a] / vol.spacing()[a];
  return out;
}

namespace {

// In-place separable min/max filter with window half-width r, truncated at
// the borders (erosion treats out-of-bounds as foreground).
void morph_axis(LabelVolume& vol, int axis, int r, bool dilate) {
  const int n = vol.dims()[axis];
  const int nu = vol.dims()[(axis + 1) % 3];
  const int nw = vol.dims()[(axis + 2) % 3];
  std::vector<std::uint8_t> line(static_cast<std::size_t>(n));
  Vec3i at;
  for (int b = 0; b < nw; ++b)
    for (int a = 0; a < nu; ++a) {
      at[(axis + 1) % 3] = a;
      at[(axis + 2) % 3] = b;
      for (int x = 0; x < n; ++x) {
        at[axis] = x;
        line[x] = vol(at.x(), at.y(), at.z());
      }
      for (int x = 0; x < n; ++x) {
        const int lo = std::max(0, x - r);
        const int hi = std::min(n - 1, x + r);
        std::uint8_t v = dilate ? 0 : 1;
        for (int y = lo; y <= hi; ++y)
          v = dilate ? static_cast<std::uint8_t>(v | line[y])
                     : static_cast<std::uint8_t>(v & line[y]);
        at[axis] = x;
        vol(at.x(), at.y(), at.z()) = v;
      }
    }
}

}  // namespace

LabelVolume morph_close(const LabelVolume& label, int radius_vox) {
  if (radius_vox < 0)
    throw Error(ErrorKind::argument, "morph_close: negative radius");
  if (radius_vox == 0) return label;
  LabelVolume out = label;
  for (int axis = 0; axis < 3; ++axis)
    morph_axis(out, axis, radius_vox, /*dilate=*/true);
  for (int axis = 0; axis < 3; ++axis)
    morph_axis(out, axis, radius_vox, /*dilate=*/false);
  return out;
}

LabelVolume label_union(const LabelVolume& a, const LabelVolume& b) {
  if (a.dims() != b.dims())
    throw Error(ErrorKind::contract, "label_union: dims mismatch");
  LabelVolume out = a;
  for (Index i = 0; i < out.size(); ++i)
    out.data()[i] = out.data()[i] || b.data()[i];
  return out;
}

}  // namespace coseg
