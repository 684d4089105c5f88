#pragma once

// Converts an intersection table into exactly J+1 depth-sorted samples per
// ray, partitioned fairly among the objects the ray hits and confined to
// their volumes.
//
// Allocation: each of the ray's hit objects receives floor((J+1)/m) samples;
// the remainder goes to objects with the longest hit interval (ties broken by
// lowest object id). Each object's interval is then sampled with stratified
// strata of its own — midpoints when no jitter source is given, uniform
// within each stratum otherwise — and the per-object sample streams are
// merged in depth order (ties by object id). Segment lengths are
// delta_j = d_{j+1} - d_j, with the final delta reaching the exit depth of
// the last object, so gaps between disjoint objects are attributed to the
// last sample before the gap.

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "scenefield/raytracer.hpp"
#include "scenefield/rng.hpp"
#include "scenefield/scene.hpp"

namespace scenefield {

struct RaySampleBatch {
  int num_rays = 0;
  int samples_per_ray = 0;  // J+1
  std::vector<Vec3> positions;
  std::vector<int> object_ids;
  std::vector<double> depths;
  std::vector<double> deltas;
  std::vector<int> ray_pixel_index;
  std::vector<Ray> rays;

  size_t index(int ray, int j) const { return size_t(ray) * samples_per_ray + size_t(j); }
};

inline RaySampleBatch march(const IntersectionTable& table, const Scene& scene, int total_samples,
                            Rng* jitter = nullptr) {
  if (total_samples < 1) throw std::invalid_argument("need at least one sample per ray");
  const int m = table.num_objects;
  if (m != int(scene.objects.size()))
    throw std::invalid_argument("table does not match the scene");

  RaySampleBatch batch;
  batch.num_rays = table.num_rays;
  batch.samples_per_ray = total_samples;
  batch.ray_pixel_index = table.ray_pixel_index;
  batch.rays = table.rays;
  batch.positions.resize(size_t(table.num_rays) * total_samples);
  batch.object_ids.resize(size_t(table.num_rays) * total_samples);
  batch.depths.resize(size_t(table.num_rays) * total_samples);
  batch.deltas.resize(size_t(table.num_rays) * total_samples);

  struct HitObj {
    int scene_index;
    int id;
    double enter, exit;
    int count = 0;
  };
  std::vector<HitObj> hits;
  struct Sample {
    double depth;
    int id;
    Vec3 pos;
  };
  std::vector<Sample> samples;

  for (int r = 0; r < table.num_rays; ++r) {
    hits.clear();
    for (int j = 0; j < m; ++j)
      if (table.is_hit(r, j)) {
        const double a = table.enter(r, j), b = table.exit(r, j);
        if (b - a < kMinHitInterval)
          throw std::runtime_error("hit interval shorter than the tracing epsilon");
        hits.push_back({j, scene.objects[size_t(j)].id, a, b});
      }
    const int num_hit = int(hits.size());
    if (num_hit == 0) throw std::logic_error("pruned table contains a ray with no hits");
    if (total_samples < num_hit)
      throw std::invalid_argument("sample budget smaller than the number of hit objects");

    // fair allocation: equal base counts, remainder to the longest intervals
    const int base = total_samples / num_hit;
    int rem = total_samples % num_hit;
    for (auto& h : hits) h.count = base;
    if (rem > 0) {
      std::vector<int> order(hits.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
      std::sort(order.begin(), order.end(), [&](int x, int y) {
        const double lx = hits[size_t(x)].exit - hits[size_t(x)].enter;
        const double ly = hits[size_t(y)].exit - hits[size_t(y)].enter;
        if (lx != ly) return lx > ly;
        return hits[size_t(x)].id < hits[size_t(y)].id;
      });
      for (int i = 0; i < rem; ++i) ++hits[size_t(order[size_t(i)])].count;
    }

    // stratified samples per object, then a depth-ordered merge
    const Ray& ray = table.rays[size_t(r)];
    samples.clear();
    double exit_depth = 0.0;
    for (const auto& h : hits) {
      exit_depth = std::max(exit_depth, h.exit);
      const double width = (h.exit - h.enter) / double(h.count);
      for (int k = 0; k < h.count; ++k) {
        const double offset = jitter ? jitter->uniform() : 0.5;
        const double depth = h.enter + (double(k) + offset) * width;
        samples.push_back({depth, h.id, ray.origin + ray.direction * depth});
      }
    }
    std::stable_sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
      if (a.depth != b.depth) return a.depth < b.depth;
      return a.id < b.id;
    });

    for (int j = 0; j < total_samples; ++j) {
      const size_t idx = batch.index(r, j);
      batch.positions[idx] = samples[size_t(j)].pos;
      batch.object_ids[idx] = samples[size_t(j)].id;
      batch.depths[idx] = samples[size_t(j)].depth;
      batch.deltas[idx] = (j + 1 < total_samples ? samples[size_t(j) + 1].depth
                                                 : exit_depth) -
                          samples[size_t(j)].depth;
    }
  }
  return batch;
}

// Text dump, one ray per line: "ray P: (depth obj) (depth obj) ...".
inline std::string dump_samples(const RaySampleBatch& b) {
  std::ostringstream os;
  os.precision(9);
  for (int r = 0; r < b.num_rays; ++r) {
    os << "ray " << b.ray_pixel_index[size_t(r)] << ":";
    for (int j = 0; j < b.samples_per_ray; ++j)
      os << " (" << b.depths[b.index(r, j)] << " " << b.object_ids[b.index(r, j)] << ")";
    os << "\n";
  }
  return os.str();
}

}  // namespace scenefield
