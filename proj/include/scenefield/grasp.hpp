#pragma once

// Grasp proposal and filtering.
//
// Proposals come from querying the grasp decoder on a res^3 grid of cell
// centers spanning the object volume; the rotation matrix is assembled from
// the decoder's raw (a, b_hat) output as R = [b, a x b, a] with
// b = (a x b_hat) x a, a and b normalized. The filtering stage transforms two
// 1000-point gripper clouds (open and closed jaw configuration) by the grasp
// pose and sums the radiance density over the points: a grasp survives when
// the open cloud clears every object (sum < T_open) while the closed cloud
// intersects matter (sum > T_closed).
//
// Grasp output file: text, one header line, then one proposal per line:
//   grid_index score px py pz r00 r01 r02 r10 r11 r12 r20 r21 r22
//     open_sum closed_sum open_pass closed_pass keep
// Positions/rotations are in the object frame.

#include <algorithm>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenefield/network.hpp"
#include "scenefield/rng.hpp"
#include "scenefield/scene.hpp"
#include "scenefield/vec.hpp"

namespace scenefield {

struct GraspProposal {
  Vec3 position;   // object frame
  Mat3 rotation;   // object frame, orthonormal, det +1
  double score = 0.0;
  int grid_index = -1;
};

// Parallel-jaw gripper as two surface point clouds in the gripper frame:
// origin at the point between the fingertips, x is the closing axis
// (gripper-left), z the approach direction pointing at the grasp.
struct GripperModel {
  std::vector<Vec3> open_cloud;
  std::vector<Vec3> closed_cloud;
  double width = 0.06;  // max jaw opening, meters
  double finger_length = 0.04;
  double finger_thickness = 0.012;
};

namespace detail {

// Uniform points on the surface of an axis-aligned box.
inline void sample_box_surface(Rng& rng, const Vec3& center, const Vec3& half, int count,
                               std::vector<Vec3>& out) {
  const double ax = half.y * half.z, ay = half.x * half.z, az = half.x * half.y;
  const double total = 2.0 * (ax + ay + az);
  for (int i = 0; i < count; ++i) {
    double pick = rng.uniform() * total;
    int axis;
    double sign;
    if (pick < 2 * ax) {
      axis = 0;
      sign = pick < ax ? 1.0 : -1.0;
    } else if (pick < 2 * ax + 2 * ay) {
      axis = 1;
      sign = pick < 2 * ax + ay ? 1.0 : -1.0;
    } else {
      axis = 2;
      sign = pick < 2 * ax + 2 * ay + az ? 1.0 : -1.0;
    }
    Vec3 p{rng.uniform(-half.x, half.x), rng.uniform(-half.y, half.y),
           rng.uniform(-half.z, half.z)};
    p[axis] = sign * half[axis];
    out.push_back(center + p);
  }
}

}  // namespace detail

// Procedural gripper clouds: 400 points per finger, 200 on the palm, for
// exactly 1000 per configuration. Seeded so presets are reproducible.
inline GripperModel make_gripper(double width, uint64_t seed = 9001) {
  GripperModel g;
  g.width = width;
  const double ft = g.finger_thickness, fl = g.finger_length;
  const double fd = 0.02;   // finger depth (y)
  const double pz = 0.02;   // palm thickness (z)
  const Vec3 finger_half{ft / 2, fd / 2, fl / 2};
  const Vec3 palm_half{width / 2 + ft, fd / 2, pz / 2};
  const double zc = -fl / 2;          // finger center z
  const double zp = -fl - pz / 2;     // palm center z
  auto build = [&](double finger_x, std::vector<Vec3>& cloud) {
    Rng rng(seed);
    detail::sample_box_surface(rng, {finger_x, 0, zc}, finger_half, 400, cloud);
    detail::sample_box_surface(rng, {-finger_x, 0, zc}, finger_half, 400, cloud);
    detail::sample_box_surface(rng, {0, 0, zp}, palm_half, 200, cloud);
  };
  build(width / 2 + ft / 2, g.open_cloud);
  build(ft / 2, g.closed_cloud);
  return g;
}

inline Mat3 assemble_rotation(const Vec3& a, const Vec3& b_hat) {
  const double an = norm(a);
  if (an < 1e-9) throw std::invalid_argument("degenerate grasp rotation: |a| ~ 0");
  const Vec3 approach = a / an;
  const Vec3 u = cross(approach, b_hat);
  if (norm(u) < 1e-9 * std::max(norm(b_hat), 1e-30))
    throw std::invalid_argument("degenerate grasp rotation: a and b_hat are parallel");
  const Vec3 left = normalized(cross(u, approach));
  const Vec3 up = cross(approach, left);
  return Mat3::from_cols(left, up, approach);
}

// Query the grasp decoder on all res^3 cell centers of the object volume and
// keep the K best proposals (score descending, ties by grid index; grid index
// is (ix * res + iy) * res + iz). Grid points whose raw rotation output is
// degenerate are dropped.
inline std::vector<GraspProposal> propose(const ObjectInstance& object,
                                          const ParameterStore& params,
                                          const NetworkConfig& config, int res, int top_k) {
  if (res < 2) throw std::invalid_argument("grid resolution must be >= 2");
  if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  object.latent.validate(config.latent_dim);

  const Vec3 h = object.volume.half_extents;
  const Vec3 cell{2 * h.x / res, 2 * h.y / res, 2 * h.z / res};
  std::vector<Vec3> points;
  points.reserve(size_t(res) * res * res);
  for (int ix = 0; ix < res; ++ix)
    for (int iy = 0; iy < res; ++iy)
      for (int iz = 0; iz < res; ++iz)
        points.push_back({-h.x + (ix + 0.5) * cell.x, -h.y + (iy + 0.5) * cell.y,
                          -h.z + (iz + 0.5) * cell.z});

  Tensor enc_p = encode_positions(points, config.pos_freqs, config.include_input,
                                  config.coord_scale);
  Tensor lat(int(points.size()), config.latent_dim);
  for (size_t i = 0; i < points.size(); ++i)
    for (int c = 0; c < config.latent_dim; ++c)
      lat.at(int(i), c) = object.latent.values[size_t(c)];
  const FieldOutputs out = field_forward(params, config, enc_p, lat, nullptr, false, true);

  std::vector<GraspProposal> all;
  all.reserve(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    const Vec3 a{out.a_raw.at(int(i), 0), out.a_raw.at(int(i), 1), out.a_raw.at(int(i), 2)};
    const Vec3 b{out.b_raw.at(int(i), 0), out.b_raw.at(int(i), 1), out.b_raw.at(int(i), 2)};
    GraspProposal p;
    p.position = points[i];
    p.score = out.score.v[i];
    p.grid_index = int(i);
    try {
      p.rotation = assemble_rotation(a, b);
    } catch (const std::invalid_argument&) {
      continue;
    }
    all.push_back(p);
  }
  std::sort(all.begin(), all.end(), [](const GraspProposal& x, const GraspProposal& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.grid_index < y.grid_index;
  });
  if (int(all.size()) > top_k) all.resize(size_t(top_k));
  return all;
}

// Scene-wide density for collision queries. A point only sees objects whose
// volume contains it; densities of covering objects are summed. The optional
// ground plane (z < 0 in world frame) contributes an effectively infinite
// density and is never rendered.
struct SceneDensityField {
  struct Entry {
    Pose pose;
    BoundingVolume volume;
    std::function<double(const Vec3&)> sigma;  // object-frame query
  };

  std::vector<Entry> objects;
  bool ground_plane = false;
  double ground_density = 1e6;

  double sigma_at(const Vec3& world) const {
    double total = 0.0;
    for (const auto& e : objects) {
      const Vec3 local = world_to_object(e.pose, world);
      if (e.volume.contains_local(local)) total += e.sigma(local);
    }
    if (ground_plane && world.z < 0.0) total += ground_density;
    return total;
  }
};

inline SceneDensityField density_field_from_network(const ParameterStore& params,
                                                    const NetworkConfig& config,
                                                    const Scene& scene) {
  SceneDensityField f;
  for (const auto& o : scene.objects) {
    o.latent.validate(config.latent_dim);
    SceneDensityField::Entry e;
    e.pose = o.pose;
    e.volume = o.volume;
    e.sigma = [&params, &config, latent = o.latent](const Vec3& p) {
      return density_forward(params, config, latent, p);
    };
    f.objects.push_back(std::move(e));
  }
  return f;
}

struct GraspFilterResult {
  GraspProposal proposal;
  double open_sum = 0.0;
  double closed_sum = 0.0;
  bool open_pass = false;
  bool closed_pass = false;
  bool keep = false;
};

// `object_pose` places proposals (object frame) into the world before the
// cloud density sums are taken. The closed test uses >= so that a zero
// threshold disables it (the pipeline's trivial pass-through configuration).
inline std::vector<GraspFilterResult> filter(const std::vector<GraspProposal>& proposals,
                                             const Pose& object_pose,
                                             const SceneDensityField& field,
                                             const GripperModel& gripper, double t_open,
                                             double t_closed) {
  if (!(t_open > 0.0) || !(t_closed >= 0.0))
    throw std::invalid_argument("filter thresholds must be positive");
  std::vector<GraspFilterResult> results;
  results.reserve(proposals.size());
  for (const auto& p : proposals) {
    const Mat3 rot_w = object_pose.rotation * p.rotation;
    const Vec3 pos_w = object_to_world(object_pose, p.position);
    GraspFilterResult r;
    r.proposal = p;
    for (const Vec3& pt : gripper.open_cloud) r.open_sum += field.sigma_at(pos_w + rot_w * pt);
    for (const Vec3& pt : gripper.closed_cloud)
      r.closed_sum += field.sigma_at(pos_w + rot_w * pt);
    r.open_pass = r.open_sum < t_open;
    r.closed_pass = r.closed_sum >= t_closed;
    r.keep = r.open_pass && r.closed_pass;
    results.push_back(std::move(r));
  }
  return results;
}

inline void write_grasp_file(const std::string& path, int object_id,
                             const std::vector<GraspFilterResult>& results) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "# object " << object_id
    << "; columns: grid_index score px py pz r00 r01 r02 r10 r11 r12 r20 r21 r22 "
       "open_sum closed_sum open_pass closed_pass keep\n";
  f.precision(9);
  for (const auto& r : results) {
    const GraspProposal& p = r.proposal;
    f << p.grid_index << " " << p.score << " " << p.position.x << " " << p.position.y << " "
      << p.position.z;
    for (int i = 0; i < 9; ++i) f << " " << p.rotation.m[size_t(i)];
    f << " " << r.open_sum << " " << r.closed_sum << " " << int(r.open_pass) << " "
      << int(r.closed_pass) << " " << int(r.keep) << "\n";
  }
}

}  // namespace scenefield
