#pragma once

// Voxel-map extraction and point collision queries against a density field.
//
// Occupancy is sampled at cell centers with the >= threshold convention. A
// per-object grid spans the object's bounding volume in the object frame; a
// scene grid spans the world axis-aligned bounds of all object volumes.
//
// Voxel text export: "# voxelgrid res=R origin=x y z cell=cx cy cz" followed
// by one "ix iy iz" line per occupied cell.
// Binary export: magic "SFVX", u32 version=1, u32 res, f64 origin[3],
// f64 cell[3], then res^3 occupancy bytes in x-major (ix, iy, iz) order.

#include <cstring>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenefield/grasp.hpp"
#include "scenefield/scene.hpp"
#include "scenefield/vec.hpp"

namespace scenefield {

struct VoxelGrid {
  int res = 0;
  Vec3 origin;  // min corner
  Vec3 cell;    // per-axis cell size
  std::vector<uint8_t> occupancy;  // res^3, x-major: ((ix*res)+iy)*res+iz

  size_t index(int ix, int iy, int iz) const {
    return (size_t(ix) * res + size_t(iy)) * res + size_t(iz);
  }

  bool occupied(int ix, int iy, int iz) const { return occupancy[index(ix, iy, iz)] != 0; }

  Vec3 center(int ix, int iy, int iz) const {
    return {origin.x + (ix + 0.5) * cell.x, origin.y + (iy + 0.5) * cell.y,
            origin.z + (iz + 0.5) * cell.z};
  }

  size_t occupied_count() const {
    size_t n = 0;
    for (const uint8_t o : occupancy) n += o != 0;
    return n;
  }
};

// Object-frame occupancy grid over the bounding volume.
inline VoxelGrid voxelize(const BoundingVolume& volume,
                          const std::function<double(const Vec3&)>& sigma, int res,
                          double sigma_threshold) {
  if (res < 2) throw std::invalid_argument("voxel resolution must be >= 2");
  if (!(sigma_threshold > 0.0)) throw std::invalid_argument("sigma threshold must be positive");
  VoxelGrid g;
  g.res = res;
  g.origin = -volume.half_extents;
  g.cell = volume.half_extents * (2.0 / res);
  g.occupancy.assign(size_t(res) * res * res, 0);
  for (int ix = 0; ix < res; ++ix)
    for (int iy = 0; iy < res; ++iy)
      for (int iz = 0; iz < res; ++iz)
        g.occupancy[g.index(ix, iy, iz)] = sigma(g.center(ix, iy, iz)) >= sigma_threshold;
  return g;
}

inline VoxelGrid voxelize_object(const ObjectInstance& object, const ParameterStore& params,
                                 const NetworkConfig& config, int res, double sigma_threshold) {
  object.latent.validate(config.latent_dim);
  return voxelize(
      object.volume,
      [&](const Vec3& p) { return density_forward(params, config, object.latent, p); }, res,
      sigma_threshold);
}

// World-frame occupancy grid covering the union of all object volumes.
inline VoxelGrid voxelize_scene(const Scene& scene, const SceneDensityField& field, int res,
                                double sigma_threshold) {
  if (res < 2) throw std::invalid_argument("voxel resolution must be >= 2");
  if (scene.objects.empty()) throw std::invalid_argument("scene has no objects");
  Vec3 lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
  for (const auto& o : scene.objects) {
    const Vec3& h = o.volume.half_extents;
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 local{(corner & 1 ? h.x : -h.x), (corner & 2 ? h.y : -h.y),
                       (corner & 4 ? h.z : -h.z)};
      const Vec3 w = object_to_world(o.pose, local);
      for (int axis = 0; axis < 3; ++axis) {
        lo[axis] = std::min(lo[axis], w[axis]);
        hi[axis] = std::max(hi[axis], w[axis]);
      }
    }
  }
  VoxelGrid g;
  g.res = res;
  g.origin = lo;
  g.cell = (hi - lo) / double(res);
  g.occupancy.assign(size_t(res) * res * res, 0);
  for (int ix = 0; ix < res; ++ix)
    for (int iy = 0; iy < res; ++iy)
      for (int iz = 0; iz < res; ++iz)
        g.occupancy[g.index(ix, iy, iz)] =
            field.sigma_at(g.center(ix, iy, iz)) >= sigma_threshold;
  return g;
}

// A world point collides iff any covering object (or the optional ground
// half-space) reaches the density threshold there.
inline std::vector<uint8_t> query_collision(const std::vector<Vec3>& points,
                                            const SceneDensityField& field,
                                            double sigma_threshold) {
  std::vector<uint8_t> out(points.size(), 0);
  for (size_t i = 0; i < points.size(); ++i) {
    if (!finite(points[i])) throw std::invalid_argument("collision query point is not finite");
    bool hit = false;
    for (const auto& e : field.objects) {
      const Vec3 local = world_to_object(e.pose, points[i]);
      if (e.volume.contains_local(local) && e.sigma(local) >= sigma_threshold) {
        hit = true;
        break;
      }
    }
    if (!hit && field.ground_plane && points[i].z < 0.0) hit = true;
    out[i] = hit ? 1 : 0;
  }
  return out;
}

inline void write_voxels_text(const std::string& path, const VoxelGrid& g) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.precision(9);
  f << "# voxelgrid res=" << g.res << " origin=" << g.origin.x << " " << g.origin.y << " "
    << g.origin.z << " cell=" << g.cell.x << " " << g.cell.y << " " << g.cell.z << "\n";
  for (int ix = 0; ix < g.res; ++ix)
    for (int iy = 0; iy < g.res; ++iy)
      for (int iz = 0; iz < g.res; ++iz)
        if (g.occupied(ix, iy, iz)) f << ix << " " << iy << " " << iz << "\n";
}

inline void write_voxels_binary(const std::string& path, const VoxelGrid& g) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write("SFVX", 4);
  auto put_u32 = [&f](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto put_f64 = [&f](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  put_u32(1);
  put_u32(uint32_t(g.res));
  put_f64(g.origin.x);
  put_f64(g.origin.y);
  put_f64(g.origin.z);
  put_f64(g.cell.x);
  put_f64(g.cell.y);
  put_f64(g.cell.z);
  f.write(reinterpret_cast<const char*>(g.occupancy.data()),
          std::streamsize(g.occupancy.size()));
}

inline VoxelGrid read_voxels_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "SFVX", 4) != 0)
    throw std::runtime_error("not a voxel file: " + path);
  auto get_u32 = [&f]() {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get_f64 = [&f]() {
    double v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  if (get_u32() != 1) throw std::runtime_error("unsupported voxel file version");
  VoxelGrid g;
  g.res = int(get_u32());
  g.origin = {get_f64(), get_f64(), get_f64()};
  g.cell = {get_f64(), get_f64(), get_f64()};
  g.occupancy.resize(size_t(g.res) * g.res * g.res);
  f.read(reinterpret_cast<char*>(g.occupancy.data()), std::streamsize(g.occupancy.size()));
  if (!f) throw std::runtime_error("truncated voxel file: " + path);
  return g;
}

}  // namespace scenefield
