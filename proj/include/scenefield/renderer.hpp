#pragma once

// Volumetric rendering: query a radiance field at marched samples and fold
// them into pixels with the standard alpha-compositing equation
//
//   alpha_j = 1 - exp(-sigma_j * delta_j)
//   T_j     = prod_{k<j} (1 - alpha_k)
//   rgb     = sum_j T_j alpha_j c_j + T_end * background
//   alpha   = 1 - T_end
//   depth   = sum_j T_j alpha_j d_j / max(alpha, eps)
//
// render() is the plain inference path (parallel over rays, deterministic for
// any thread count). The differentiable training path in training.hpp builds
// the same computation on a tape; both share the math above through
// integrate_ray / the Composite tape node.

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "scenefield/image.hpp"
#include "scenefield/network.hpp"
#include "scenefield/raymarcher.hpp"
#include "scenefield/raytracer.hpp"
#include "scenefield/scene.hpp"

namespace scenefield {

constexpr double kDepthAlphaCutoff = 1e-3;

struct IntegratedRay {
  Vec3 rgb{0, 0, 0};
  double alpha = 0.0;
  double depth = 0.0;
};

inline IntegratedRay integrate_ray(const std::vector<double>& sigma,
                                   const std::vector<Vec3>& color,
                                   const std::vector<double>& delta,
                                   const std::vector<double>& depth,
                                   const Vec3& background) {
  const size_t n = sigma.size();
  if (color.size() != n || delta.size() != n || depth.size() != n)
    throw std::invalid_argument("integrate_ray length mismatch");
  IntegratedRay out;
  double trans = 1.0;
  double depth_acc = 0.0;
  for (size_t j = 0; j < n; ++j) {
    if (!std::isfinite(sigma[j]) || !std::isfinite(delta[j]))
      throw std::invalid_argument("integrate_ray rejects non-finite inputs");
    if (sigma[j] < 0.0 || delta[j] < 0.0)
      throw std::invalid_argument("integrate_ray requires sigma >= 0 and delta >= 0");
    const double alpha = 1.0 - std::exp(-sigma[j] * delta[j]);
    const double w = trans * alpha;
    out.rgb += w * color[j];
    depth_acc += w * depth[j];
    trans *= 1.0 - alpha;
  }
  out.rgb += trans * background;
  out.alpha = 1.0 - trans;
  out.depth = depth_acc / std::max(out.alpha, 1e-12);
  return out;
}

struct RenderedImage {
  Image rgb;
  std::vector<double> depth;        // expected termination depth, meters
  std::vector<double> alpha;        // [0, 1]
  std::vector<uint8_t> depth_valid; // 0 where alpha < cutoff (depth reported 0)

  RenderedImage() = default;
  RenderedImage(int w, int h)
      : rgb(w, h),
        depth(size_t(w) * h, 0.0),
        alpha(size_t(w) * h, 0.0),
        depth_valid(size_t(w) * h, 0) {}
};

// Batched field query at marched samples. Positions and view directions are
// already expressed in each sample's object frame.
struct FieldSampleView {
  const std::vector<int>* object_ids = nullptr;
  const std::vector<Vec3>* positions_obj = nullptr;
  const std::vector<Vec3>* dirs_obj = nullptr;
};

class RadianceFieldQuery {
 public:
  virtual ~RadianceFieldQuery() = default;
  virtual void query(const FieldSampleView& view, std::vector<double>& sigma,
                     std::vector<Vec3>& color) const = 0;
};

// Learned field: decoder weights plus per-object latent codes keyed by id.
// Holds references; the store, config, and scene must outlive the field.
class NetworkRadianceField : public RadianceFieldQuery {
 public:
  NetworkRadianceField(const ParameterStore& params, const NetworkConfig& config,
                       const Scene& scene)
      : params_(params), config_(config) {
    for (const auto& o : scene.objects) {
      o.latent.validate(config.latent_dim);
      latents_[o.id] = &o.latent;
    }
  }

  void query(const FieldSampleView& view, std::vector<double>& sigma,
             std::vector<Vec3>& color) const override {
    const size_t n = view.positions_obj->size();
    Tensor enc_p = encode_positions(*view.positions_obj, config_.pos_freqs,
                                    config_.include_input, config_.coord_scale);
    Tensor enc_d = encode_positions(*view.dirs_obj, config_.dir_freqs, config_.include_input, 1.0);
    Tensor lat(int(n), config_.latent_dim);
    for (size_t i = 0; i < n; ++i) {
      const auto it = latents_.find((*view.object_ids)[i]);
      if (it == latents_.end()) throw std::runtime_error("sample references unknown object id");
      const auto& vals = it->second->values;
      for (int c = 0; c < config_.latent_dim; ++c) lat.at(int(i), c) = vals[size_t(c)];
    }
    const FieldOutputs out = field_forward(params_, config_, enc_p, lat, &enc_d, true, false);
    sigma.resize(n);
    color.resize(n);
    for (size_t i = 0; i < n; ++i) {
      sigma[i] = out.sigma.v[i];
      color[i] = {out.color.at(int(i), 0), out.color.at(int(i), 1), out.color.at(int(i), 2)};
    }
  }

 private:
  const ParameterStore& params_;
  const NetworkConfig& config_;
  std::unordered_map<int, const LatentCode*> latents_;
};

namespace detail {

struct SampleFrames {
  std::vector<Vec3> positions_obj;
  std::vector<Vec3> dirs_obj;
};

inline SampleFrames to_object_frames(const RaySampleBatch& batch, const Scene& scene) {
  std::unordered_map<int, const ObjectInstance*> by_id;
  for (const auto& o : scene.objects) by_id[o.id] = &o;
  const size_t total = batch.positions.size();
  SampleFrames f;
  f.positions_obj.resize(total);
  f.dirs_obj.resize(total);
  for (int r = 0; r < batch.num_rays; ++r) {
    const Vec3 dir = batch.rays[size_t(r)].direction;
    for (int j = 0; j < batch.samples_per_ray; ++j) {
      const size_t i = batch.index(r, j);
      const ObjectInstance* obj = by_id.at(batch.object_ids[i]);
      f.positions_obj[i] = world_to_object(obj->pose, batch.positions[i]);
      f.dirs_obj[i] = obj->pose.rotation.transposed() * dir;
    }
  }
  return f;
}

}  // namespace detail

// Full pipeline: raytrace -> march -> field query -> integrate. Pixels whose
// ray misses every volume get the background color with alpha 0.
inline RenderedImage render(const Scene& scene, const RadianceFieldQuery& field,
                            const Camera& camera, int samples_per_ray, Rng* jitter = nullptr) {
  scene.validate();
  camera.validate();
  RenderedImage out(camera.width, camera.height);
  out.rgb.fill(scene.background_color.x, scene.background_color.y, scene.background_color.z);
  if (scene.objects.empty()) return out;

  const std::vector<Ray> rays = generate_rays(camera);
  const IntersectionTable table = intersect(rays, scene);
  if (table.num_rays == 0) return out;
  const RaySampleBatch batch = march(table, scene, samples_per_ray, jitter);
  const detail::SampleFrames frames = detail::to_object_frames(batch, scene);

  FieldSampleView view{&batch.object_ids, &frames.positions_obj, &frames.dirs_obj};
  std::vector<double> sigma;
  std::vector<Vec3> color;
  field.query(view, sigma, color);

  const int spr = batch.samples_per_ray;
  parallel_for(batch.num_rays, [&](long long r0, long long r1) {
    std::vector<double> s(size_t(spr), 0.0), dl(size_t(spr), 0.0), dp(size_t(spr), 0.0);
    std::vector<Vec3> c(size_t(spr), Vec3{});
    for (long long r = r0; r < r1; ++r) {
      for (int j = 0; j < spr; ++j) {
        const size_t i = batch.index(int(r), j);
        s[size_t(j)] = sigma[i];
        c[size_t(j)] = color[i];
        dl[size_t(j)] = batch.deltas[i];
        dp[size_t(j)] = batch.depths[i];
      }
      const IntegratedRay ray = integrate_ray(s, c, dl, dp, scene.background_color);
      const size_t pix = size_t(batch.ray_pixel_index[size_t(r)]);
      out.rgb.rgb[pix * 3 + 0] = ray.rgb.x;
      out.rgb.rgb[pix * 3 + 1] = ray.rgb.y;
      out.rgb.rgb[pix * 3 + 2] = ray.rgb.z;
      out.alpha[pix] = ray.alpha;
      if (ray.alpha >= kDepthAlphaCutoff) {
        out.depth[pix] = ray.depth;
        out.depth_valid[pix] = 1;
      }
    }
  });
  return out;
}

// Grasp-score colormap: score 0 renders red, score 1 renders green, linear
// in between (green channel equals the score).
inline Vec3 score_colormap(double s) {
  const double t = s < 0.0 ? 0.0 : (s > 1.0 ? 1.0 : s);
  return {1.0 - t, t, 0.0};
}

// Same integration as render(), but the sample color is the color-mapped
// grasp score; density still comes from the radiance head.
inline RenderedImage render_grasp_field(const Scene& scene, const ParameterStore& params,
                                        const NetworkConfig& config, const Camera& camera,
                                        int samples_per_ray,
                                        const std::function<Vec3(double)>& colormap = score_colormap) {
  scene.validate();
  camera.validate();
  RenderedImage out(camera.width, camera.height);
  out.rgb.fill(scene.background_color.x, scene.background_color.y, scene.background_color.z);
  if (scene.objects.empty()) return out;

  const std::vector<Ray> rays = generate_rays(camera);
  const IntersectionTable table = intersect(rays, scene);
  if (table.num_rays == 0) return out;
  const RaySampleBatch batch = march(table, scene, samples_per_ray, nullptr);
  const detail::SampleFrames frames = detail::to_object_frames(batch, scene);

  const size_t total = batch.positions.size();
  Tensor enc_p = encode_positions(frames.positions_obj, config.pos_freqs, config.include_input,
                                  config.coord_scale);
  Tensor lat(int(total), config.latent_dim);
  std::unordered_map<int, const LatentCode*> by_id;
  for (const auto& o : scene.objects) by_id[o.id] = &o.latent;
  for (size_t i = 0; i < total; ++i) {
    const auto& vals = by_id.at(batch.object_ids[i])->values;
    for (int c = 0; c < config.latent_dim; ++c) lat.at(int(i), c) = vals[size_t(c)];
  }
  const FieldOutputs fo = field_forward(params, config, enc_p, lat, nullptr, false, true);

  const int spr = batch.samples_per_ray;
  parallel_for(batch.num_rays, [&](long long r0, long long r1) {
    std::vector<double> s(size_t(spr), 0.0), dl(size_t(spr), 0.0), dp(size_t(spr), 0.0);
    std::vector<Vec3> c(size_t(spr), Vec3{});
    for (long long r = r0; r < r1; ++r) {
      for (int j = 0; j < spr; ++j) {
        const size_t i = batch.index(int(r), j);
        s[size_t(j)] = fo.sigma.v[i];
        c[size_t(j)] = colormap(fo.score.v[i]);
        dl[size_t(j)] = batch.deltas[i];
        dp[size_t(j)] = batch.depths[i];
      }
      const IntegratedRay ray = integrate_ray(s, c, dl, dp, scene.background_color);
      const size_t pix = size_t(batch.ray_pixel_index[size_t(r)]);
      out.rgb.rgb[pix * 3 + 0] = ray.rgb.x;
      out.rgb.rgb[pix * 3 + 1] = ray.rgb.y;
      out.rgb.rgb[pix * 3 + 2] = ray.rgb.z;
      out.alpha[pix] = ray.alpha;
      if (ray.alpha >= kDepthAlphaCutoff) {
        out.depth[pix] = ray.depth;
        out.depth_valid[pix] = 1;
      }
    }
  });
  return out;
}

}  // namespace scenefield
