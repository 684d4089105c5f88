#pragma once

// Scene domain types: rigid poses, oriented box volumes, per-object latent
// codes, object instances, scenes, and pinhole cameras. Every object is the
// tuple (pose, volume, latent); all types are immutable values after
// construction and safe to share across threads.
//
// Scene file schema (JSON):
//   {
//     "background": [r, g, b],
//     "objects": [
//       {
//         "id": 0,
//         "rotation": [9 row-major floats],
//         "translation": [x, y, z],
//         "half_extents": [hx, hy, hz],
//         "latent": {"values": [...]} | {"file": "path"} | {"table_row": k}
//       }, ...
//     ]
//   }
// Latent "file" entries point to a JSON file {"values": [...]};  "table_row"
// entries are resolved against a checkpoint's latent table by the caller.

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "scenefield/vec.hpp"

namespace scenefield {

constexpr double kPoseTolerance = 1e-6;

// Rigid transform: object -> world.
struct Pose {
  Mat3 rotation = Mat3::identity();
  Vec3 translation{0, 0, 0};

  void validate() const {
    if (orthonormality_error(rotation) > kPoseTolerance)
      throw std::invalid_argument("pose rotation is not orthonormal");
    if (std::abs(rotation.det() - 1.0) > kPoseTolerance)
      throw std::invalid_argument("pose rotation determinant is not +1");
    if (!finite(translation)) throw std::invalid_argument("pose translation is not finite");
  }
};

inline Vec3 world_to_object(const Pose& pose, const Vec3& point) {
  return pose.rotation.transposed() * (point - pose.translation);
}

inline Vec3 object_to_world(const Pose& pose, const Vec3& point) {
  return pose.rotation * point + pose.translation;
}

inline Vec3 direction_to_object(const Pose& pose, const Vec3& dir) {
  const double n = norm(dir);
  if (n < 1e-12) throw std::invalid_argument("direction has zero norm");
  return pose.rotation.transposed() * dir;
}

inline Vec3 direction_to_world(const Pose& pose, const Vec3& dir) { return pose.rotation * dir; }

// Oriented box centered at the object origin, axes aligned with the object frame.
struct BoundingVolume {
  Vec3 half_extents{0.05, 0.05, 0.05};

  void validate() const {
    if (!(half_extents.x > 0 && half_extents.y > 0 && half_extents.z > 0))
      throw std::invalid_argument("half extents must be positive");
  }

  bool contains_local(const Vec3& p, double tol = 0.0) const {
    return std::abs(p.x) <= half_extents.x + tol && std::abs(p.y) <= half_extents.y + tol &&
           std::abs(p.z) <= half_extents.z + tol;
  }
};

struct LatentCode {
  std::vector<double> values;

  static LatentCode zeros(int dim) {
    LatentCode l;
    l.values.assign(size_t(dim), 0.0);
    return l;
  }

  void validate(int expected_dim) const {
    if (int(values.size()) != expected_dim)
      throw std::invalid_argument("latent code has wrong dimension");
    for (const double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("latent code has non-finite entries");
  }
};

struct ObjectInstance {
  Pose pose;
  BoundingVolume volume;
  LatentCode latent;
  int id = 0;
};

struct Scene {
  std::vector<ObjectInstance> objects;
  Vec3 background_color{1.0, 1.0, 1.0};

  void validate() const {
    std::unordered_map<int, bool> seen;
    for (const auto& o : objects) {
      o.pose.validate();
      o.volume.validate();
      if (seen.count(o.id)) throw std::invalid_argument("duplicate object id in scene");
      seen[o.id] = true;
    }
  }

  const ObjectInstance* find(int id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
};

// Pinhole camera. `pose` maps camera frame to world; the camera looks down its
// local +z axis, image u grows to the right (+x), v grows downward (+y).
// Pixel (u, v) is sampled at its center; a symmetric camera has
// cx = width/2 - 0.5, cy = height/2 - 0.5.
struct Camera {
  Pose pose;
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  void validate() const {
    pose.validate();
    if (!(fx > 0 && fy > 0)) throw std::invalid_argument("focal lengths must be positive");
    if (width < 1 || height < 1) throw std::invalid_argument("image size must be at least 1x1");
  }

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                        int width, int height) {
    const Vec3 fwd = normalized(target - eye);
    Vec3 right = cross(fwd, up);
    if (norm(right) < 1e-9) right = cross(fwd, Vec3{1, 0, 0});
    right = normalized(right);
    const Vec3 down = cross(fwd, right);
    Camera cam;
    cam.pose.rotation = Mat3::from_cols(right, down, fwd);
    cam.pose.translation = eye;
    cam.fx = cam.fy = focal;
    cam.width = width;
    cam.height = height;
    cam.cx = width / 2.0 - 0.5;
    cam.cy = height / 2.0 - 0.5;
    return cam;
  }
};

// --- JSON serialization ---

namespace detail {

inline nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json mat3_to_json(const Mat3& m) {
  nlohmann::json j = nlohmann::json::array();
  for (const double x : m.m) j.push_back(x);
  return j;
}

inline Mat3 mat3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 9) throw std::runtime_error("expected a 9-element array");
  Mat3 m;
  for (int i = 0; i < 9; ++i) m.m[size_t(i)] = j[size_t(i)].get<double>();
  return m;
}

}  // namespace detail

inline nlohmann::json camera_to_json(const Camera& cam) {
  nlohmann::json j;
  j["rotation"] = detail::mat3_to_json(cam.pose.rotation);
  j["translation"] = detail::vec3_to_json(cam.pose.translation);
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  return j;
}

inline Camera camera_from_json(const nlohmann::json& j) {
  Camera cam;
  cam.pose.rotation = detail::mat3_from_json(j.at("rotation"));
  cam.pose.translation = detail::vec3_from_json(j.at("translation"));
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  cam.validate();
  return cam;
}

inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["background"] = detail::vec3_to_json(scene.background_color);
  j["objects"] = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    nlohmann::json jo;
    jo["id"] = o.id;
    jo["rotation"] = detail::mat3_to_json(o.pose.rotation);
    jo["translation"] = detail::vec3_to_json(o.pose.translation);
    jo["half_extents"] = detail::vec3_to_json(o.volume.half_extents);
    jo["latent"] = {{"values", o.latent.values}};
    j["objects"].push_back(jo);
  }
  return j;
}

// Loads a scene description. "file" latent references are resolved relative to
// `base_dir`; "table_row" references are returned through `table_rows` (object
// id -> row) with a zero latent placeholder for the caller to fill in.
inline Scene scene_from_json(const nlohmann::json& j, const std::string& base_dir = ".",
                             std::unordered_map<int, int>* table_rows = nullptr) {
  Scene scene;
  if (j.contains("background")) scene.background_color = detail::vec3_from_json(j.at("background"));
  for (const auto& jo : j.at("objects")) {
    ObjectInstance o;
    o.id = jo.at("id").get<int>();
    o.pose.rotation = detail::mat3_from_json(jo.at("rotation"));
    o.pose.translation = detail::vec3_from_json(jo.at("translation"));
    o.volume.half_extents = detail::vec3_from_json(jo.at("half_extents"));
    if (jo.contains("latent")) {
      const auto& jl = jo.at("latent");
      if (jl.contains("values")) {
        o.latent.values = jl.at("values").get<std::vector<double>>();
      } else if (jl.contains("file")) {
        std::ifstream f(base_dir + "/" + jl.at("file").get<std::string>());
        if (!f) throw std::runtime_error("cannot open latent file " + jl.at("file").get<std::string>());
        nlohmann::json lat = nlohmann::json::parse(f);
        o.latent.values = lat.at("values").get<std::vector<double>>();
      } else if (jl.contains("table_row")) {
        if (table_rows) (*table_rows)[o.id] = jl.at("table_row").get<int>();
      } else {
        throw std::runtime_error("latent entry must have values, file, or table_row");
      }
    }
    scene.objects.push_back(std::move(o));
  }
  scene.validate();
  return scene;
}

inline void save_scene(const std::string& path, const Scene& scene) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << scene_to_json(scene).dump(2) << "\n";
}

inline Scene load_scene(const std::string& path,
                        std::unordered_map<int, int>* table_rows = nullptr) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scene file: " + path);
  const std::string base_dir = path.find('/') == std::string::npos
                                   ? std::string(".")
                                   : path.substr(0, path.find_last_of('/'));
  return scene_from_json(nlohmann::json::parse(f), base_dir, table_rows);
}

}  // namespace scenefield
