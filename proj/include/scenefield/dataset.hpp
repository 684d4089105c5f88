#pragma once

// Procedural analytic scenes: a desk-scale stand-in for a scanned-asset
// dataset. Objects are closed-form density/color fields (opaque interior,
// sharp falloff band at the surface), so ground-truth images can be rendered
// by dense sampling of the exact fields and grasp labels can be scored by an
// analytic antipodal stability oracle instead of a physics engine.
//
// On-disk dataset layout:
//   <dir>/manifest.json                generation config + seed
//   <dir>/{train,test}/scene_NNN/
//     layout.json                      scene_model schema (zero latents)
//     cameras.json                     {"views": [{camera..., "image": ...}]}
//     view_NNN.png                     ground-truth renders
//     grasps.txt                       "# columns: object_id px py pz r00..r22 score"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenefield/grasp.hpp"
#include "scenefield/image.hpp"
#include "scenefield/parallel.hpp"
#include "scenefield/renderer.hpp"
#include "scenefield/rng.hpp"
#include "scenefield/scene.hpp"
#include "scenefield/vec.hpp"

namespace scenefield {

// --- analytic objects ---

enum class ShapeKind { Box, Capsule, BarWithWaist, TwoLobe };

// A closed-form object: boundary(p) < 0 inside, density ramps from 0 at the
// surface to sigma_max over falloff_band, color is an affine field clamped to
// [0,1]. All queries are in the object frame.
struct AnalyticObject {
  ShapeKind kind = ShapeKind::Box;

  Vec3 box_half{0.04, 0.03, 0.05};
  double cap_half_len = 0.04, cap_radius = 0.02;
  double bar_half_len = 0.08, bar_r_waist = 0.016, bar_r_end = 0.036;
  double lobe_r1 = 0.05, lobe_r2 = 0.028, lobe_sep = 0.055;

  Vec3 base_color{0.8, 0.3, 0.2};
  Vec3 color_slope{0, 0, 0};  // dColor/dPosition along each world axis, per channel scalar
  Vec3 color_slope_dir{1, 0, 0};

  double sigma_max = 250.0;
  double falloff_band = 0.005;

  double bar_radius_at(double x) const {
    const double t = std::cos(1.5707963267948966 * std::min(std::abs(x), bar_half_len) /
                              bar_half_len);
    return bar_r_end - (bar_r_end - bar_r_waist) * t * t;
  }

  // Signed boundary function, negative inside. Exact SDF for box/capsule and
  // the two-lobe union; a proper sign function (not a true distance) for the
  // waisted bar.
  double boundary(const Vec3& p) const {
    switch (kind) {
      case ShapeKind::Box: {
        const Vec3 q{std::abs(p.x) - box_half.x, std::abs(p.y) - box_half.y,
                     std::abs(p.z) - box_half.z};
        const Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
        return norm(qp) + std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
      }
      case ShapeKind::Capsule: {
        const double cx = std::clamp(p.x, -cap_half_len, cap_half_len);
        return norm(Vec3{p.x - cx, p.y, p.z}) - cap_radius;
      }
      case ShapeKind::BarWithWaist: {
        const double radial = std::sqrt(p.y * p.y + p.z * p.z) - bar_radius_at(p.x);
        return std::max(radial, std::abs(p.x) - bar_half_len);
      }
      case ShapeKind::TwoLobe: {
        const double hx = lobe_bounds_x();
        const double s1 = norm(p - Vec3{-hx + lobe_r1, 0, 0}) - lobe_r1;
        const double s2 = norm(p - Vec3{hx - lobe_r2, 0, 0}) - lobe_r2;
        return std::min(s1, s2);
      }
    }
    return 1.0;
  }

  double lobe_bounds_x() const { return (lobe_sep + lobe_r1 + lobe_r2) / 2.0; }

  double density(const Vec3& p) const {
    const double s = boundary(p);
    if (s >= 0.0) return 0.0;
    return sigma_max * std::min(1.0, -s / falloff_band);
  }

  Vec3 color(const Vec3& p) const {
    const double t = dot(p, color_slope_dir);
    Vec3 c = base_color + color_slope * t;
    return {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0), std::clamp(c.z, 0.0, 1.0)};
  }

  // Outward surface normal from central differences of the boundary function.
  Vec3 normal(const Vec3& p) const {
    const double h = 1e-6;
    const Vec3 g{boundary({p.x + h, p.y, p.z}) - boundary({p.x - h, p.y, p.z}),
                 boundary({p.x, p.y + h, p.z}) - boundary({p.x, p.y - h, p.z}),
                 boundary({p.x, p.y, p.z + h}) - boundary({p.x, p.y, p.z - h})};
    return normalized(g);
  }

  // Snug bounding half-extents (the bounding volume of the scene object).
  Vec3 bounds() const {
    switch (kind) {
      case ShapeKind::Box: return box_half;
      case ShapeKind::Capsule:
        return {cap_half_len + cap_radius, cap_radius, cap_radius};
      case ShapeKind::BarWithWaist: return {bar_half_len, bar_r_end, bar_r_end};
      case ShapeKind::TwoLobe: {
        const double r = std::max(lobe_r1, lobe_r2);
        return {lobe_bounds_x(), r, r};
      }
    }
    return {0.05, 0.05, 0.05};
  }

  Vec3 surface_sample(Rng& rng) const {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    switch (kind) {
      case ShapeKind::Box: {
        std::vector<Vec3> pts;
        detail::sample_box_surface(rng, {0, 0, 0}, box_half, 1, pts);
        return pts[0];
      }
      case ShapeKind::Capsule: {
        const double side = kTwoPi * cap_radius * 2.0 * cap_half_len;
        const double caps = 2.0 * kTwoPi * cap_radius * cap_radius;  // two hemispheres
        if (rng.uniform() * (side + caps) < side) {
          const double x = rng.uniform(-cap_half_len, cap_half_len);
          const double th = rng.uniform(0.0, kTwoPi);
          return {x, cap_radius * std::cos(th), cap_radius * std::sin(th)};
        }
        Vec3 u = rng.unit_vector();
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        if (u.x * sign < 0) u.x = -u.x;
        return Vec3{sign * cap_half_len, 0, 0} + u * cap_radius;
      }
      case ShapeKind::BarWithWaist: {
        // side via rejection on the radius profile, plus the two end disks
        const double disk_area = 2.0 * 3.14159265358979323846 * bar_r_end * bar_r_end;
        const double side_area_bound = kTwoPi * bar_r_end * 2.0 * bar_half_len * 1.6;
        for (;;) {
          if (rng.uniform() * (disk_area + side_area_bound) < disk_area) {
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            const double rr = bar_r_end * std::sqrt(rng.uniform());
            const double th = rng.uniform(0.0, kTwoPi);
            return {sign * bar_half_len, rr * std::cos(th), rr * std::sin(th)};
          }
          const double x = rng.uniform(-bar_half_len, bar_half_len);
          const double r = bar_radius_at(x);
          const double h = 1e-5;
          const double dr = (bar_radius_at(x + h) - bar_radius_at(x - h)) / (2 * h);
          const double w = r * std::sqrt(1.0 + dr * dr);
          if (rng.uniform() * bar_r_end * 1.6 < w) {
            const double th = rng.uniform(0.0, kTwoPi);
            return {x, r * std::cos(th), r * std::sin(th)};
          }
        }
      }
      case ShapeKind::TwoLobe: {
        const double hx = lobe_bounds_x();
        const Vec3 c1{-hx + lobe_r1, 0, 0}, c2{hx - lobe_r2, 0, 0};
        const double a1 = lobe_r1 * lobe_r1, a2 = lobe_r2 * lobe_r2;
        for (;;) {
          const bool first = rng.uniform() * (a1 + a2) < a1;
          const Vec3 p = first ? c1 + rng.unit_vector() * lobe_r1
                               : c2 + rng.unit_vector() * lobe_r2;
          if (boundary(p) > -1e-9) return p;  // reject points buried in the other lobe
        }
      }
    }
    return {0, 0, 0};
  }
};

struct AnalyticSceneObject {
  AnalyticObject shape;
  Pose pose;
  int id = 0;
};

struct AnalyticScene {
  std::vector<AnalyticSceneObject> objects;
  Vec3 background{1.0, 1.0, 1.0};

  // scene_model layout with zero latents of the given dimension.
  Scene layout(int latent_dim) const {
    Scene s;
    s.background_color = background;
    for (const auto& o : objects) {
      ObjectInstance inst;
      inst.pose = o.pose;
      inst.volume.half_extents = o.shape.bounds();
      inst.latent = LatentCode::zeros(latent_dim);
      inst.id = o.id;
      s.objects.push_back(std::move(inst));
    }
    return s;
  }
};

// Radiance query that samples the analytic fields instead of the decoder, for
// oracle-vs-pipeline comparisons.
class AnalyticRadianceField : public RadianceFieldQuery {
 public:
  explicit AnalyticRadianceField(const AnalyticScene& scene) {
    for (const auto& o : scene.objects) shapes_[o.id] = &o.shape;
  }

  void query(const FieldSampleView& view, std::vector<double>& sigma,
             std::vector<Vec3>& color) const override {
    const size_t n = view.positions_obj->size();
    sigma.resize(n);
    color.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const AnalyticObject* shape = shapes_.at((*view.object_ids)[i]);
      const Vec3& p = (*view.positions_obj)[i];
      sigma[i] = shape->density(p);
      color[i] = shape->color(p);
    }
  }

 private:
  std::unordered_map<int, const AnalyticObject*> shapes_;
};

inline SceneDensityField analytic_density_field(const AnalyticScene& scene) {
  SceneDensityField f;
  for (const auto& o : scene.objects) {
    SceneDensityField::Entry e;
    e.pose = o.pose;
    e.volume.half_extents = o.shape.bounds();
    e.sigma = [shape = &o.shape](const Vec3& p) { return shape->density(p); };
    f.objects.push_back(std::move(e));
  }
  return f;
}

// --- brute-force reference renderer ---

// Independent compositor over given samples: accumulates optical depth and
// takes weights as differences of transmittance. Same equation as
// integrate_ray, different numerical route.
inline Vec3 oracle_composite(const std::vector<double>& sigma, const std::vector<Vec3>& color,
                             const std::vector<double>& delta, const Vec3& background) {
  double tau = 0.0;
  double t_prev = 1.0;
  Vec3 rgb{0, 0, 0};
  for (size_t j = 0; j < sigma.size(); ++j) {
    tau += sigma[j] * delta[j];
    const double t = std::exp(-tau);
    rgb += (t_prev - t) * color[j];
    t_prev = t;
  }
  rgb += t_prev * background;
  return rgb;
}

// Dense uniform sampling of the analytic fields along each pixel ray, with no
// per-object sample budget. The marchable span per ray comes from bounding
// spheres, independent of the slab-based raytracer.
inline Image oracle_render(const AnalyticScene& scene, const Camera& camera,
                           double step = 7.5e-4) {
  camera.validate();
  Image img(camera.width, camera.height);
  img.fill(scene.background.x, scene.background.y, scene.background.z);
  struct Sphere {
    Vec3 center;
    double radius;
  };
  std::vector<Sphere> spheres;
  for (const auto& o : scene.objects)
    spheres.push_back({o.pose.translation, norm(o.shape.bounds()) + 1e-6});

  parallel_for(size_t(camera.width) * camera.height, [&](long long i0, long long i1) {
    std::vector<double> sigma, delta;
    std::vector<Vec3> color;
    for (long long i = i0; i < i1; ++i) {
      const int u = int(i % camera.width), v = int(i / camera.width);
      const Ray ray = generate_ray(camera, u, v);
      double t0 = 1e30, t1 = -1e30;
      for (const auto& s : spheres) {
        const Vec3 oc = ray.origin - s.center;
        const double b = dot(oc, ray.direction);
        const double disc = b * b - (dot(oc, oc) - s.radius * s.radius);
        if (disc <= 0.0) continue;
        const double sq = std::sqrt(disc);
        const double enter = std::max(0.0, -b - sq), exit = -b + sq;
        if (exit <= 0.0) continue;
        t0 = std::min(t0, enter);
        t1 = std::max(t1, exit);
      }
      if (t1 <= t0) continue;
      const int n = std::max(1, int(std::ceil((t1 - t0) / step)));
      const double dt = (t1 - t0) / n;
      sigma.assign(size_t(n), 0.0);
      delta.assign(size_t(n), dt);
      color.assign(size_t(n), Vec3{0, 0, 0});
      for (int k = 0; k < n; ++k) {
        const Vec3 p = ray.origin + ray.direction * (t0 + (k + 0.5) * dt);
        double total = 0.0;
        Vec3 mix{0, 0, 0};
        for (const auto& o : scene.objects) {
          const Vec3 local = world_to_object(o.pose, p);
          const double d = o.shape.density(local);
          if (d > 0.0) {
            total += d;
            mix += d * o.shape.color(local);
          }
        }
        sigma[size_t(k)] = total;
        color[size_t(k)] = total > 0.0 ? mix / total : Vec3{0, 0, 0};
      }
      const Vec3 rgb = oracle_composite(sigma, color, delta, scene.background);
      img.rgb[size_t(i) * 3 + 0] = rgb.x;
      img.rgb[size_t(i) * 3 + 1] = rgb.y;
      img.rgb[size_t(i) * 3 + 2] = rgb.z;
    }
  });
  return img;
}

// --- grasp annotation machinery ---

struct GraspAnnotation {
  Vec3 position;   // object frame
  Mat3 rotation;   // orthonormal
  double score = 0.0;
};

struct GraspPose {
  Vec3 position;
  Mat3 rotation;  // columns [closing, up, approach]
};

struct StabilityParams {
  double friction_mu = 0.5;
  double contact_step = 5e-4;
  double side_clearance = 1e-3;
  int collision_stride = 5;  // open-cloud subsample for the oracle's collision check
};

namespace detail {

// First boundary crossing (inside -> outside) along dir from origin, up to
// max_dist. Returns distance, or a negative value when no crossing exists.
inline double march_to_surface(const AnalyticObject& obj, const Vec3& origin, const Vec3& dir,
                               double max_dist, double step) {
  double prev_t = 0.0;
  double prev_s = obj.boundary(origin);
  if (prev_s >= 0.0) return -1.0;
  for (double t = step; t <= max_dist + step * 0.5; t += step) {
    const double tt = std::min(t, max_dist);
    const double s = obj.boundary(origin + dir * tt);
    if (s >= 0.0) {
      double lo = prev_t, hi = tt;
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (obj.boundary(origin + dir * mid) < 0.0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev_t = tt;
    prev_s = s;
    if (tt >= max_dist) break;
  }
  return -1.0;
}

}  // namespace detail

// Analytic antipodal stability check for a parallel-jaw grasp: the closing
// line through the grasp center must cross the surface on both sides within
// the jaw span, both contact normals must lie in the friction cone of the
// closing axis, and the open gripper must not intersect the object.
inline bool antipodal_stable(const AnalyticObject& obj, const GraspPose& grasp,
                             const GripperModel& gripper,
                             const StabilityParams& sp = StabilityParams{}) {
  const Vec3 closing = grasp.rotation.col(0);
  const double reach = gripper.width / 2.0 - sp.side_clearance;
  if (obj.boundary(grasp.position) >= 0.0) return false;  // nothing between the jaws

  const double t_pos =
      detail::march_to_surface(obj, grasp.position, closing, reach, sp.contact_step);
  if (t_pos < 0.0) return false;
  const double t_neg =
      detail::march_to_surface(obj, grasp.position, -closing, reach, sp.contact_step);
  if (t_neg < 0.0) return false;

  const double cone_cos = 1.0 / std::sqrt(1.0 + sp.friction_mu * sp.friction_mu);
  const Vec3 n_pos = obj.normal(grasp.position + closing * t_pos);
  const Vec3 n_neg = obj.normal(grasp.position - closing * t_neg);
  if (dot(n_pos, closing) < cone_cos) return false;
  if (dot(n_neg, -closing) < cone_cos) return false;

  for (size_t i = 0; i < gripper.open_cloud.size(); i += size_t(sp.collision_stride)) {
    const Vec3 p = grasp.position + grasp.rotation * gripper.open_cloud[i];
    if (obj.boundary(p) < 0.0) return false;
  }
  return true;
}

struct PerturbationBounds {
  double max_translation = 0.005;                  // meters
  double max_rotation = 5.0 * 3.14159265358979323846 / 180.0;  // radians
};

// Empirical grasp score: fraction of N randomly perturbed poses the oracle
// accepts. The perturbation composes on the world side of the grasp pose.
inline double score_grasp(const GraspPose& pose, int trials, const PerturbationBounds& bounds,
                          const std::function<bool(const GraspPose&)>& oracle, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  int successes = 0;
  for (int i = 0; i < trials; ++i) {
    const Mat3 dr = axis_angle(rng.unit_vector(), rng.uniform(0.0, bounds.max_rotation));
    const Vec3 dt = rng.in_unit_ball() * bounds.max_translation;
    GraspPose perturbed;
    perturbed.rotation = dr * pose.rotation;
    perturbed.position = dr * pose.position + dt;
    if (oracle(perturbed)) ++successes;
  }
  return double(successes) / double(trials);
}

inline double score_grasp_analytic(const AnalyticObject& obj, const GraspPose& pose,
                                   const GripperModel& gripper, int trials,
                                   const PerturbationBounds& bounds, Rng& rng,
                                   const StabilityParams& sp = StabilityParams{}) {
  return score_grasp(
      pose, trials, bounds,
      [&](const GraspPose& g) { return antipodal_stable(obj, g, gripper, sp); }, rng);
}

// Samples grasp annotations over the object surface: the closing axis follows
// the inward surface normal, the grasp center sits midway through the local
// thickness (or at jaw reach when the object is thicker than the opening),
// and the approach is the first of eight perpendicular candidates whose open
// gripper is collision-free. Scores come from the perturbation oracle, so
// both high- and low-quality grasps appear.
inline std::vector<GraspAnnotation> sample_grasp_annotations(
    const AnalyticObject& obj, const GripperModel& gripper, int count, int trials, Rng& rng,
    const StabilityParams& sp = StabilityParams{},
    const PerturbationBounds& bounds = PerturbationBounds{}) {
  std::vector<GraspAnnotation> out;
  out.reserve(size_t(count));
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (int i = 0; i < count; ++i) {
    const Vec3 q = obj.surface_sample(rng);
    const Vec3 n = obj.normal(q);
    const Vec3 closing = -n;

    const double thickness = detail::march_to_surface(obj, q + closing * 1e-5, closing,
                                                      gripper.width, sp.contact_step);
    const double reach = gripper.width / 2.0 - sp.side_clearance;
    const Vec3 center =
        thickness > 0.0 ? q + closing * std::min(thickness * 0.5, reach) : q + closing * reach;

    Vec3 e1 = cross(closing, std::abs(closing.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0});
    e1 = normalized(e1);
    const Vec3 e2 = cross(closing, e1);
    GraspPose pose;
    pose.position = center;
    bool found = false;
    for (int k = 0; k < 8 && !found; ++k) {
      const double th = kTwoPi * k / 8.0;
      const Vec3 a = e1 * std::cos(th) + e2 * std::sin(th);
      const Mat3 rot = Mat3::from_cols(closing, cross(a, closing), a);
      bool clear = true;
      for (size_t j = 0; j < gripper.open_cloud.size() && clear;
           j += size_t(sp.collision_stride)) {
        clear = obj.boundary(center + rot * gripper.open_cloud[j]) >= 0.0;
      }
      if (clear || k == 7) {
        pose.rotation = rot;
        found = clear;
        if (!found && k == 7) pose.rotation = Mat3::from_cols(closing, cross(e1, closing), e1);
      }
    }
    GraspAnnotation ann;
    ann.position = pose.position;
    ann.rotation = pose.rotation;
    ann.score = score_grasp_analytic(obj, pose, gripper, trials, bounds, rng, sp);
    out.push_back(ann);
  }
  return out;
}

// --- dataset generation ---

struct DatasetConfig {
  int num_train_objects = 16;
  int num_test_objects = 4;
  int views_per_scene = 50;
  int grasps_per_object = 200;
  int image_size = 64;
  double focal_at_64 = 190.0;  // pixels for a 64-wide image, scaled linearly
  double camera_distance = 1.0;
  double gripper_width = 0.06;
  int score_trials = 50;
  int multi_object_scenes = 0;
  double sigma_max = 250.0;
  double falloff_band = 0.005;
  double oracle_step = 7.5e-4;
  uint64_t seed = 1;
};

struct DatasetScene {
  AnalyticScene analytic;
  Scene base_layout;  // zero latents
  std::vector<Camera> cameras;
  std::vector<Image> images;
  std::vector<std::vector<GraspAnnotation>> annotations;  // aligned with layout objects
};

struct SceneDataset {
  DatasetConfig config;
  std::vector<DatasetScene> train;
  std::vector<DatasetScene> test;
  int num_train_objects = 0;
};

namespace detail {

inline AnalyticObject random_object(int index, Rng& rng, const DatasetConfig& cfg) {
  AnalyticObject o;
  o.sigma_max = cfg.sigma_max;
  o.falloff_band = cfg.falloff_band;
  switch (index % 4) {
    case 0:
      o.kind = ShapeKind::Box;
      o.box_half = {rng.uniform(0.02, 0.05), rng.uniform(0.02, 0.05), rng.uniform(0.02, 0.05)};
      break;
    case 1:
      o.kind = ShapeKind::Capsule;
      o.cap_half_len = rng.uniform(0.03, 0.06);
      o.cap_radius = rng.uniform(0.012, 0.026);
      break;
    case 2:
      o.kind = ShapeKind::BarWithWaist;
      o.bar_half_len = rng.uniform(0.06, 0.09);
      o.bar_r_waist = rng.uniform(0.012, 0.02);
      o.bar_r_end = rng.uniform(0.032, 0.045);
      break;
    default:
      o.kind = ShapeKind::TwoLobe;
      o.lobe_r1 = rng.uniform(0.04, 0.055);
      o.lobe_r2 = rng.uniform(0.02, 0.03);
      o.lobe_sep = 0.7 * (o.lobe_r1 + o.lobe_r2);
      break;
  }
  o.base_color = {rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)};
  o.color_slope_dir = rng.unit_vector();
  o.color_slope = {rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5)};
  return o;
}

inline Camera random_view(Rng& rng, const DatasetConfig& cfg, bool upper_hemisphere) {
  Vec3 dir = rng.unit_vector();
  if (upper_hemisphere && dir.z < 0.05) dir.z = 0.1 + std::abs(dir.z);
  dir = normalized(dir);
  const Vec3 eye = dir * cfg.camera_distance;
  const double focal = cfg.focal_at_64 * cfg.image_size / 64.0;
  return Camera::look_at(eye, {0, 0, 0}, {0, 0, 1}, focal, cfg.image_size, cfg.image_size);
}

inline void render_scene_views(DatasetScene& scene, const DatasetConfig& cfg) {
  scene.images.clear();
  for (const Camera& cam : scene.cameras)
    scene.images.push_back(oracle_render(scene.analytic, cam, cfg.oracle_step));
}

}  // namespace detail

// Deterministic generation: scene k draws from Rng(seed + k) with train
// scenes first, then test, then multi-object scenes.
inline SceneDataset generate_dataset(const DatasetConfig& cfg) {
  if (cfg.num_train_objects < 1 || cfg.views_per_scene < 1)
    throw std::invalid_argument("dataset needs at least one object and one view");
  SceneDataset ds;
  ds.config = cfg;
  ds.num_train_objects = cfg.num_train_objects;
  const GripperModel gripper = make_gripper(cfg.gripper_width);

  int scene_index = 0;
  auto build_single = [&](int object_id) {
    Rng rng(cfg.seed + uint64_t(scene_index));
    ++scene_index;
    DatasetScene s;
    AnalyticSceneObject obj;
    obj.shape = detail::random_object(object_id, rng, cfg);
    obj.pose.rotation = rotation_z(rng.uniform(0.0, 6.283185307179586));
    obj.pose.translation = {0, 0, 0};
    obj.id = object_id;
    s.analytic.objects.push_back(obj);
    for (int v = 0; v < cfg.views_per_scene; ++v)
      s.cameras.push_back(detail::random_view(rng, cfg, false));
    s.annotations.push_back(sample_grasp_annotations(obj.shape, gripper,
                                                     cfg.grasps_per_object, cfg.score_trials,
                                                     rng));
    detail::render_scene_views(s, cfg);
    s.base_layout = s.analytic.layout(1);
    return s;
  };

  for (int i = 0; i < cfg.num_train_objects; ++i) ds.train.push_back(build_single(i));
  for (int i = 0; i < cfg.num_test_objects; ++i)
    ds.test.push_back(build_single(cfg.num_train_objects + i));

  for (int k = 0; k < cfg.multi_object_scenes; ++k) {
    Rng rng(cfg.seed + uint64_t(scene_index));
    ++scene_index;
    DatasetScene s;
    const int count = 3 + rng.uniform_int(3);
    // conservative non-overlap placement by bounding-sphere rejection
    for (int j = 0; j < count; ++j) {
      const int object_id = rng.uniform_int(cfg.num_train_objects);
      AnalyticSceneObject obj;
      obj.shape = detail::random_object(object_id, rng, cfg);
      obj.id = object_id;
      // regenerate with the id's own stream so shapes match the train scene
      Rng obj_rng(cfg.seed + uint64_t(object_id));
      obj.shape = detail::random_object(object_id, obj_rng, cfg);
      const double radius = norm(obj.shape.bounds());
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const Vec3 t{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), obj.shape.bounds().z};
        bool ok = true;
        for (const auto& other : s.analytic.objects) {
          const double min_dist = radius + norm(other.shape.bounds());
          if (norm(t - other.pose.translation) < min_dist) ok = false;
        }
        if (ok) {
          obj.pose.rotation = rotation_z(rng.uniform(0.0, 6.283185307179586));
          obj.pose.translation = t;
          placed = true;
        }
      }
      if (!placed) continue;
      // ids must stay unique within a scene; skip duplicates
      bool dup = false;
      for (const auto& other : s.analytic.objects) dup = dup || other.id == obj.id;
      if (!dup) s.analytic.objects.push_back(obj);
    }
    if (s.analytic.objects.empty()) continue;
    for (int v = 0; v < cfg.views_per_scene; ++v)
      s.cameras.push_back(detail::random_view(rng, cfg, true));
    for (const auto& obj : s.analytic.objects)
      s.annotations.push_back(sample_grasp_annotations(obj.shape, gripper,
                                                       cfg.grasps_per_object, cfg.score_trials,
                                                       rng));
    detail::render_scene_views(s, cfg);
    s.base_layout = s.analytic.layout(1);
    ds.train.push_back(std::move(s));
  }
  return ds;
}

// --- disk I/O ---

namespace detail {

inline void save_scene_dir(const std::string& dir, const DatasetScene& s) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_scene(dir + "/layout.json", s.base_layout);
  nlohmann::json views = nlohmann::json::array();
  for (size_t v = 0; v < s.cameras.size(); ++v) {
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03zu.png", v);
    nlohmann::json jc = camera_to_json(s.cameras[v]);
    jc["image"] = name;
    views.push_back(jc);
    write_png(dir + "/" + name, s.images[v]);
  }
  std::ofstream cf(dir + "/cameras.json");
  cf << nlohmann::json{{"views", views}}.dump(2) << "\n";

  std::ofstream gf(dir + "/grasps.txt");
  gf << "# columns: object_id px py pz r00 r01 r02 r10 r11 r12 r20 r21 r22 score\n";
  gf.precision(9);
  for (size_t oi = 0; oi < s.annotations.size(); ++oi) {
    const int id = s.base_layout.objects[oi].id;
    for (const auto& a : s.annotations[oi]) {
      gf << id << " " << a.position.x << " " << a.position.y << " " << a.position.z;
      for (int i = 0; i < 9; ++i) gf << " " << a.rotation.m[size_t(i)];
      gf << " " << a.score << "\n";
    }
  }
}

inline DatasetScene load_scene_dir(const std::string& dir) {
  DatasetScene s;
  s.base_layout = load_scene(dir + "/layout.json");
  std::ifstream cf(dir + "/cameras.json");
  if (!cf) throw std::runtime_error("missing cameras.json in " + dir);
  const nlohmann::json jc = nlohmann::json::parse(cf);
  for (const auto& jv : jc.at("views")) {
    s.cameras.push_back(camera_from_json(jv));
    s.images.push_back(read_png(dir + "/" + jv.at("image").get<std::string>()));
  }
  s.annotations.assign(s.base_layout.objects.size(), {});
  std::unordered_map<int, size_t> slot;
  for (size_t i = 0; i < s.base_layout.objects.size(); ++i)
    slot[s.base_layout.objects[i].id] = i;
  std::ifstream gf(dir + "/grasps.txt");
  if (!gf) throw std::runtime_error("missing grasps.txt in " + dir);
  std::string line;
  while (std::getline(gf, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    int id;
    GraspAnnotation a;
    is >> id >> a.position.x >> a.position.y >> a.position.z;
    for (int i = 0; i < 9; ++i) is >> a.rotation.m[size_t(i)];
    is >> a.score;
    if (!is) throw std::runtime_error("malformed grasp annotation line in " + dir);
    s.annotations[slot.at(id)].push_back(a);
  }
  return s;
}

}  // namespace detail

inline void save_dataset(const std::string& dir, const SceneDataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json m;
  m["num_train_objects"] = ds.num_train_objects;
  m["num_train_scenes"] = ds.train.size();
  m["num_test_scenes"] = ds.test.size();
  m["seed"] = ds.config.seed;
  m["image_size"] = ds.config.image_size;
  m["views_per_scene"] = ds.config.views_per_scene;
  m["grasps_per_object"] = ds.config.grasps_per_object;
  m["gripper_width"] = ds.config.gripper_width;
  std::ofstream mf(dir + "/manifest.json");
  mf << m.dump(2) << "\n";
  for (size_t i = 0; i < ds.train.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03zu", i);
    detail::save_scene_dir(dir + "/train/" + name, ds.train[i]);
  }
  for (size_t i = 0; i < ds.test.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03zu", i);
    detail::save_scene_dir(dir + "/test/" + name, ds.test[i]);
  }
}

inline SceneDataset load_dataset(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("missing dataset manifest in " + dir);
  const nlohmann::json m = nlohmann::json::parse(mf);
  SceneDataset ds;
  ds.num_train_objects = m.at("num_train_objects").get<int>();
  ds.config.seed = m.at("seed").get<uint64_t>();
  ds.config.image_size = m.at("image_size").get<int>();
  ds.config.views_per_scene = m.at("views_per_scene").get<int>();
  ds.config.grasps_per_object = m.at("grasps_per_object").get<int>();
  ds.config.gripper_width = m.at("gripper_width").get<double>();
  const size_t n_train = m.at("num_train_scenes").get<size_t>();
  const size_t n_test = m.at("num_test_scenes").get<size_t>();
  for (size_t i = 0; i < n_train; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03zu", i);
    ds.train.push_back(detail::load_scene_dir(dir + "/train/" + name));
  }
  for (size_t i = 0; i < n_test; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03zu", i);
    ds.test.push_back(detail::load_scene_dir(dir + "/test/" + name));
  }
  return ds;
}

}  // namespace scenefield
