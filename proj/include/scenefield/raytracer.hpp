#pragma once

// Camera ray generation and ray vs oriented-box intersection.
//
// intersect() produces, for the rays that hit at least one object volume, a
// row-major hit/entry/exit table (rows = surviving rays, columns = scene
// objects in list order). Rows that hit nothing are pruned; ray_pixel_index
// maps each surviving row back to its pixel.

#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenefield/scene.hpp"
#include "scenefield/vec.hpp"

namespace scenefield {

// Intervals thinner than this count as misses so the raymarcher never has to
// place samples in a zero-length segment.
constexpr double kMinHitInterval = 1e-6;

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
};

struct BoxHit {
  bool hit = false;
  double t_enter = 0.0;
  double t_exit = 0.0;
};

// Slab test against an axis-aligned box with the given half extents, in the
// box frame. Distances are along the (unit) direction, so they are world-scale.
// Rays starting inside the box report t_enter = 0; intersections entirely
// behind the origin are misses.
inline BoxHit intersect_box_local(const Vec3& origin, const Vec3& dir, const Vec3& half) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double o = origin[axis], d = dir[axis], h = half[axis];
    if (std::abs(d) < 1e-15) {
      if (std::abs(o) > h) return {};
      continue;  // parallel to the slab and inside it
    }
    const double inv = 1.0 / d;
    double ta = (-h - o) * inv;
    double tb = (h - o) * inv;
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) t0 = ta;
    if (tb < t1) t1 = tb;
    if (t0 > t1) return {};
  }
  if (t1 < 0.0) return {};
  t0 = std::max(t0, 0.0);
  if (t1 - t0 < kMinHitInterval) return {};
  return {true, t0, t1};
}

inline BoxHit intersect_object(const Ray& ray, const ObjectInstance& obj) {
  const Vec3 o = world_to_object(obj.pose, ray.origin);
  const Vec3 d = obj.pose.rotation.transposed() * ray.direction;
  return intersect_box_local(o, d, obj.volume.half_extents);
}

inline Ray generate_ray(const Camera& cam, int u, int v) {
  const Vec3 dir_cam{(double(u) - cam.cx) / cam.fx, (double(v) - cam.cy) / cam.fy, 1.0};
  return {cam.pose.translation, normalized(cam.pose.rotation * dir_cam)};
}

inline std::vector<Ray> generate_rays(const Camera& cam) {
  cam.validate();
  std::vector<Ray> rays;
  rays.reserve(size_t(cam.width) * cam.height);
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u) rays.push_back(generate_ray(cam, u, v));
  return rays;
}

struct IntersectionTable {
  int num_rays = 0;     // surviving rays
  int num_objects = 0;  // scene objects (columns, in scene list order)
  std::vector<uint8_t> hit;
  std::vector<double> d_min;
  std::vector<double> d_max;
  std::vector<int> ray_pixel_index;  // surviving row -> original ray index
  std::vector<Ray> rays;             // surviving rays

  bool is_hit(int ray, int obj) const { return hit[size_t(ray) * num_objects + obj] != 0; }
  double enter(int ray, int obj) const { return d_min[size_t(ray) * num_objects + obj]; }
  double exit(int ray, int obj) const { return d_max[size_t(ray) * num_objects + obj]; }
};

inline IntersectionTable intersect(const std::vector<Ray>& rays, const Scene& scene) {
  const int m = int(scene.objects.size());
  IntersectionTable table;
  table.num_objects = m;
  std::vector<uint8_t> row_hit(size_t(m), 0);
  std::vector<double> row_min(size_t(m), 0.0), row_max(size_t(m), 0.0);
  for (size_t n = 0; n < rays.size(); ++n) {
    bool any = false;
    for (int j = 0; j < m; ++j) {
      const BoxHit h = intersect_object(rays[n], scene.objects[size_t(j)]);
      row_hit[size_t(j)] = h.hit ? 1 : 0;
      row_min[size_t(j)] = h.hit ? h.t_enter : 0.0;
      row_max[size_t(j)] = h.hit ? h.t_exit : 0.0;
      any = any || h.hit;
    }
    if (!any) continue;
    table.hit.insert(table.hit.end(), row_hit.begin(), row_hit.end());
    table.d_min.insert(table.d_min.end(), row_min.begin(), row_min.end());
    table.d_max.insert(table.d_max.end(), row_max.begin(), row_max.end());
    table.ray_pixel_index.push_back(int(n));
    table.rays.push_back(rays[n]);
    ++table.num_rays;
  }
  return table;
}

// Structured text dump for golden tests: one line per surviving ray listing
// per-object hit intervals.
inline std::string dump_table(const IntersectionTable& t) {
  std::ostringstream os;
  os.precision(9);
  for (int r = 0; r < t.num_rays; ++r) {
    os << "ray " << t.ray_pixel_index[size_t(r)] << ":";
    for (int j = 0; j < t.num_objects; ++j)
      if (t.is_hit(r, j)) os << " obj" << j << "=[" << t.enter(r, j) << "," << t.exit(r, j) << "]";
    os << "\n";
  }
  return os.str();
}

}  // namespace scenefield
