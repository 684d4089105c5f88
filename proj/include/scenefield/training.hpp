#pragma once

// Joint reconstruction/grasp training and test-time latent inversion.
//
// Pre-training minimizes L = L_rgb + L_gscore + L_grot with RMSprop over a
// multi-scene dataset, one latent-table row per training object. Each step
// samples one scene, a batch of surviving pixel rays (stratified jitter on),
// and a batch of grasp annotations; the whole step runs on one tape.
//
// Fine-tuning (inversion) recovers latent codes for the objects of a known
// layout from a single image by minimizing L_rgb only. Modes: latent_only
// (decoders frozen), decoder_only (fixed random latent), both. An epoch is
// one pass worth of steps over the image's surviving rays; the best-loss
// iterate (full surviving-ray L_rgb, checked once per epoch) is returned.
//
// Pre-training log lines: "step=N loss=X rgb=X gscore=X grot=X psnr=X",
// where psnr tracks a fixed probe view rendered with the current parameters.
// Fine-tuning log lines: "epoch=N loss=X best=X".

#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenefield/dataset.hpp"
#include "scenefield/metrics.hpp"
#include "scenefield/network.hpp"
#include "scenefield/renderer.hpp"
#include "scenefield/tape.hpp"

namespace scenefield {

struct TrainConfig {
  double lambda = 0.1;  // down-weight for over-predicted grasp scores; << 1
  double learning_rate = 2e-3;
  double rms_decay = 0.95;
  double rms_epsilon = 1e-8;
  int rays_per_batch = 192;
  int grasps_per_batch = 64;
  int samples_per_ray = 16;  // J+1
  int steps = 4000;          // pre-training
  int epochs = 100;          // fine-tuning
  int holdout_views = 5;     // per-scene views excluded from pre-training
  int log_every = 200;
  uint64_t seed = 7;

  void validate() const {
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must be in (0, 1)");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (rays_per_batch < 1 || samples_per_ray < 1)
      throw std::invalid_argument("batch sizes must be positive");
  }
};

enum class FinetuneMode { LatentOnly, DecoderOnly, Both };

// Aborts pathological inversion runs: batch loss above 10x the first batch
// loss for 100 consecutive steps.
struct DivergenceGuard {
  double initial = -1.0;
  int run = 0;
  static constexpr int kPatience = 100;
  static constexpr double kFactor = 10.0;

  bool update(double loss) {
    if (initial < 0.0) initial = loss;
    run = loss > kFactor * initial ? run + 1 : 0;
    return run >= kPatience;
  }
};

inline FinetuneMode finetune_mode_from_string(const std::string& s) {
  if (s == "latent") return FinetuneMode::LatentOnly;
  if (s == "decoder") return FinetuneMode::DecoderOnly;
  if (s == "both") return FinetuneMode::Both;
  throw std::invalid_argument("unknown fine-tune mode: " + s);
}

// --- losses (scalar reference forms) ---

inline double loss_rgb(const Image& rendered, const Image& target) { return mse(rendered, target); }

inline double loss_gscore(double predicted, double label, double lambda) {
  const double over = std::max(predicted - label, 0.0);
  const double under = std::max(label - predicted, 0.0);
  return lambda * over * over + under * under;
}

inline double loss_grot(const Mat3& predicted, const Mat3& label, double label_score) {
  double sum = 0.0;
  for (int i = 0; i < 9; ++i) {
    const double d = predicted.m[size_t(i)] - label.m[size_t(i)];
    sum += d * d;
  }
  return label_score * sum / 9.0;
}

// --- optimizer ---

class RmsProp {
 public:
  RmsProp(const ParameterStore& params, double lr, double decay, double eps)
      : lr_(lr), decay_(decay), eps_(eps) {
    for (const auto& e : params.entries) ms_.emplace_back(e.value.rows, e.value.cols);
  }

  // grads aligned with params.entries; only trainable entries move.
  void step(ParameterStore& params, const std::vector<Tensor>& grads) {
    if (grads.size() != params.entries.size())
      throw std::invalid_argument("gradient list does not match the parameter store");
    for (size_t i = 0; i < grads.size(); ++i) {
      auto& e = params.entries[i];
      if (!e.trainable) continue;
      Tensor& ms = ms_[i];
      for (size_t k = 0; k < e.value.size(); ++k) {
        const double g = grads[i].v[k];
        ms.v[k] = decay_ * ms.v[k] + (1.0 - decay_) * g * g;
        e.value.v[k] -= lr_ * g / (std::sqrt(ms.v[k]) + eps_);
      }
    }
  }

 private:
  double lr_, decay_, eps_;
  std::vector<Tensor> ms_;
};

// --- tape builders shared by pre-training and fine-tuning ---

namespace traindetail {

struct RayBatch {
  std::vector<Ray> rays;
  std::vector<Vec3> gt;
};

// Surviving rays of one view with their ground-truth colors.
inline RayBatch surviving_rays(const Scene& layout, const Camera& cam, const Image& gt) {
  RayBatch out;
  const std::vector<Ray> rays = generate_rays(cam);
  const IntersectionTable table = intersect(rays, layout);
  out.rays = table.rays;
  out.gt.reserve(table.rays.size());
  for (int r = 0; r < table.num_rays; ++r) {
    const size_t pix = size_t(table.ray_pixel_index[size_t(r)]);
    out.gt.push_back({gt.rgb[pix * 3], gt.rgb[pix * 3 + 1], gt.rgb[pix * 3 + 2]});
  }
  return out;
}

// L_rgb over a ray batch: raytrace/march as constants, decoder + compositing
// on the tape. `latent_row_of_id` maps scene object ids to latent-table rows.
inline int build_rgb_loss(Tape& tape, const NetworkConfig& net, const Scene& layout,
                          const std::vector<Ray>& rays, const std::vector<Vec3>& gt,
                          int samples_per_ray, Rng* jitter,
                          const std::unordered_map<int, int>& latent_row_of_id) {
  const IntersectionTable table = intersect(rays, layout);
  if (table.num_rays != int(rays.size()))
    throw std::logic_error("rgb loss batch contains rays that miss the scene");
  const RaySampleBatch batch = march(table, layout, samples_per_ray, jitter);
  const detail::SampleFrames frames = detail::to_object_frames(batch, layout);

  const size_t total = batch.positions.size();
  std::vector<int> rows(total);
  for (size_t i = 0; i < total; ++i) rows[i] = latent_row_of_id.at(batch.object_ids[i]);

  const int enc_p = tape.constant(
      encode_positions(frames.positions_obj, net.pos_freqs, net.include_input, net.coord_scale));
  const int enc_d =
      tape.constant(encode_positions(frames.dirs_obj, net.dir_freqs, net.include_input, 1.0));
  const int lat = tape.embed(tape.leaf(names::kLatents), rows);
  const FieldNodes f = field_forward_tape(tape, net, enc_p, lat, enc_d, true, false);

  auto aux = std::make_shared<CompositeAux>();
  aux->num_rays = batch.num_rays;
  aux->samples_per_ray = batch.samples_per_ray;
  aux->delta = batch.deltas;
  aux->background[0] = layout.background_color.x;
  aux->background[1] = layout.background_color.y;
  aux->background[2] = layout.background_color.z;
  const int composed = tape.composite(f.sigma, f.color, std::move(aux));
  const int pred = tape.slice_cols(composed, 0, 3);

  Tensor target(batch.num_rays, 3);
  for (int r = 0; r < batch.num_rays; ++r) {
    target.at(r, 0) = gt[size_t(r)].x;
    target.at(r, 1) = gt[size_t(r)].y;
    target.at(r, 2) = gt[size_t(r)].z;
  }
  return tape.mean_all(tape.square(tape.sub(pred, tape.constant(std::move(target)))));
}

struct GraspBatchRef {
  const GraspAnnotation* annotation;
  int latent_row;
};

// L_gscore + L_grot over an annotation batch. The predicted rotation columns
// are stacked as [b | a x b | a] in a G x 9 tensor; labels use the same
// layout, so the elementwise squared error matches the matrix form.
inline std::pair<int, int> build_grasp_losses(Tape& tape, const NetworkConfig& net,
                                              const std::vector<GraspBatchRef>& batch,
                                              double lambda) {
  const int g = int(batch.size());
  std::vector<Vec3> positions(size_t(g), Vec3{});
  std::vector<int> rows(size_t(g), 0);
  Tensor score_label(g, 1);
  Tensor rot_label(g, 9);
  Tensor rot_weight(g, 9);
  for (int i = 0; i < g; ++i) {
    const GraspAnnotation& a = *batch[size_t(i)].annotation;
    positions[size_t(i)] = a.position;
    rows[size_t(i)] = batch[size_t(i)].latent_row;
    score_label.v[size_t(i)] = a.score;
    for (int col = 0; col < 3; ++col)
      for (int r = 0; r < 3; ++r) {
        rot_label.at(i, col * 3 + r) = a.rotation.at(r, col);
        rot_weight.at(i, col * 3 + r) = a.score;
      }
  }
  const int enc_p = tape.constant(
      encode_positions(positions, net.pos_freqs, net.include_input, net.coord_scale));
  const int lat = tape.embed(tape.leaf(names::kLatents), rows);
  const FieldNodes f = field_forward_tape(tape, net, enc_p, lat, -1, false, true);

  const int labels = tape.constant(std::move(score_label));
  const int over = tape.relu(tape.sub(f.score, labels));
  const int under = tape.relu(tape.sub(labels, f.score));
  const int l_score =
      tape.add(tape.scale(tape.mean_all(tape.square(over)), lambda),
               tape.mean_all(tape.square(under)));

  const int a_n = tape.row_normalize(f.a_raw);
  const int u = tape.cross3(a_n, f.b_raw);
  const int b_n = tape.row_normalize(tape.cross3(u, a_n));
  const int mid = tape.cross3(a_n, b_n);
  const int rot_pred = tape.concat_cols(tape.concat_cols(b_n, mid), a_n);
  const int diff = tape.square(tape.sub(rot_pred, tape.constant(std::move(rot_label))));
  const int l_rot = tape.mean_all(tape.mul(diff, tape.constant(std::move(rot_weight))));
  return {l_score, l_rot};
}

inline std::vector<Tensor> collect_grads(const Tape& tape, const ParameterStore& params) {
  std::vector<Tensor> grads;
  grads.reserve(params.entries.size());
  for (const auto& e : params.entries) grads.push_back(tape.param_grad(e.name));
  return grads;
}

}  // namespace traindetail

// Scene with latent codes filled in from a latent table by object id.
inline Scene bind_table_latents(const Scene& layout, const ParameterStore& params,
                                const std::unordered_map<int, int>& latent_row_of_id) {
  const Tensor& table = params.at(names::kLatents).value;
  Scene s = layout;
  for (auto& o : s.objects) {
    const int row = latent_row_of_id.at(o.id);
    if (row < 0 || row >= table.rows) throw std::out_of_range("latent row out of range");
    o.latent.values.assign(table.row_ptr(row), table.row_ptr(row) + table.cols);
  }
  return s;
}

inline Scene bind_table_latents(const Scene& layout, const Checkpoint& ck,
                                const std::unordered_map<int, int>& latent_row_of_id) {
  return bind_table_latents(layout, ck.params, latent_row_of_id);
}

struct PretrainResult {
  Checkpoint checkpoint;
  double final_loss = 0.0;
  std::vector<std::string> log_lines;
};

// Pre-train decoders and per-object latents. Train-object id i owns latent
// table row i; each scene's last `holdout_views` views are excluded.
inline PretrainResult pretrain(const SceneDataset& ds, const NetworkConfig& net,
                               const TrainConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  if (ds.train.empty()) throw std::invalid_argument("dataset has no training scenes");

  PretrainResult result;
  result.checkpoint.config = net;
  result.checkpoint.params = init_params(net, ds.num_train_objects, cfg.seed);
  ParameterStore& params = result.checkpoint.params;
  if (cfg.steps == 0) return result;  // initialized checkpoint, untouched

  // per-scene ray pools over training views, and flattened annotation pools
  std::vector<traindetail::RayBatch> pools(ds.train.size());
  std::vector<std::vector<traindetail::GraspBatchRef>> grasp_pools(ds.train.size());
  std::unordered_map<int, int> row_of_id;
  for (int i = 0; i < ds.num_train_objects; ++i) row_of_id[i] = i;
  for (size_t s = 0; s < ds.train.size(); ++s) {
    const DatasetScene& scene = ds.train[s];
    const int train_views =
        std::max(1, int(scene.cameras.size()) - cfg.holdout_views);
    for (int v = 0; v < train_views; ++v) {
      traindetail::RayBatch rb =
          traindetail::surviving_rays(scene.base_layout, scene.cameras[size_t(v)],
                                      scene.images[size_t(v)]);
      pools[s].rays.insert(pools[s].rays.end(), rb.rays.begin(), rb.rays.end());
      pools[s].gt.insert(pools[s].gt.end(), rb.gt.begin(), rb.gt.end());
    }
    for (size_t oi = 0; oi < scene.annotations.size(); ++oi) {
      const int row = row_of_id.at(scene.base_layout.objects[oi].id);
      for (const auto& a : scene.annotations[oi]) grasp_pools[s].push_back({&a, row});
    }
    if (pools[s].rays.empty())
      throw std::runtime_error("a training scene has no rays hitting any volume");
  }

  RmsProp opt(params, cfg.learning_rate, cfg.rms_decay, cfg.rms_epsilon);
  Rng rng(cfg.seed + 0x5eed);
  std::vector<Ray> rays(size_t(cfg.rays_per_batch));
  std::vector<Vec3> gt(size_t(cfg.rays_per_batch));
  std::vector<traindetail::GraspBatchRef> grasp_batch;

  for (int step = 1; step <= cfg.steps; ++step) {
    const size_t s = size_t(rng.uniform_int(int(ds.train.size())));
    const auto& pool = pools[s];
    for (int i = 0; i < cfg.rays_per_batch; ++i) {
      const int pick = rng.uniform_int(int(pool.rays.size()));
      rays[size_t(i)] = pool.rays[size_t(pick)];
      gt[size_t(i)] = pool.gt[size_t(pick)];
    }
    grasp_batch.clear();
    if (!grasp_pools[s].empty())
      for (int i = 0; i < cfg.grasps_per_batch; ++i)
        grasp_batch.push_back(grasp_pools[s][size_t(rng.uniform_int(int(grasp_pools[s].size())))]);

    Tape tape(&params);
    const int l_rgb = traindetail::build_rgb_loss(tape, net, ds.train[s].base_layout, rays, gt,
                                                  cfg.samples_per_ray, &rng, row_of_id);
    int total = l_rgb;
    double v_score = 0.0, v_rot = 0.0;
    if (!grasp_batch.empty()) {
      const auto [l_score, l_rot] =
          traindetail::build_grasp_losses(tape, net, grasp_batch, cfg.lambda);
      v_score = tape.val(l_score).v[0];
      v_rot = tape.val(l_rot).v[0];
      total = tape.add(tape.add(l_rgb, l_score), l_rot);
    }
    const double loss = tape.val(total).v[0];
    if (!std::isfinite(loss)) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "non-finite loss at step %d (rgb=%g gscore=%g grot=%g)", step,
                    tape.val(l_rgb).v[0], v_score, v_rot);
      throw std::runtime_error(buf);
    }
    tape.backward(total);
    opt.step(params, traindetail::collect_grads(tape, params));
    result.final_loss = loss;

    if (step % cfg.log_every == 0 || step == cfg.steps) {
      // progress PSNR on a fixed probe view (first held-out view of scene 0)
      const DatasetScene& probe = ds.train[0];
      const size_t probe_view =
          probe.cameras.size() > size_t(cfg.holdout_views)
              ? probe.cameras.size() - size_t(std::max(cfg.holdout_views, 1))
              : 0;
      const Scene bound = bind_table_latents(probe.base_layout, params, row_of_id);
      const NetworkRadianceField field(params, net, bound);
      const PsnrResult probe_psnr =
          psnr(render(bound, field, probe.cameras[probe_view], 32).rgb,
               probe.images[probe_view]);
      char buf[192];
      std::snprintf(buf, sizeof(buf),
                    "step=%d loss=%.6f rgb=%.6f gscore=%.6f grot=%.6f psnr=%.2f", step, loss,
                    tape.val(l_rgb).v[0], v_score, v_rot,
                    probe_psnr.exact_match ? 99.0 : probe_psnr.db);
      result.log_lines.emplace_back(buf);
      if (log) *log << buf << "\n";
    }
  }
  if (!params.all_finite()) throw std::runtime_error("non-finite parameters after training");
  return result;
}

struct FinetuneResult {
  Checkpoint checkpoint;              // updated store (latents always refreshed)
  std::vector<LatentCode> latents;    // best iterate, one per layout object
  std::unordered_map<int, int> latent_row_of_id;
  double best_loss = 0.0;
  int best_epoch = 0;
  std::vector<std::string> log_lines;
};

// Single-image inversion against a known layout (poses + volumes). Only
// L_rgb is optimized; grasp annotations are never consulted.
inline FinetuneResult finetune(const Image& target, const Camera& camera, const Scene& layout,
                               FinetuneMode mode, const Checkpoint& start,
                               const TrainConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  layout.validate();
  if (target.width != camera.width || target.height != camera.height)
    throw std::invalid_argument("target image does not match the camera");

  FinetuneResult result;
  result.checkpoint.config = start.config;
  const NetworkConfig& net = start.config;

  // fresh latent table: one row per layout object, random init; decoder copied
  ParameterStore& params = result.checkpoint.params;
  Rng rng(cfg.seed + 0xf17e);
  for (const auto& e : start.params.entries) {
    if (e.name == names::kLatents) continue;
    const int id = params.add(e.name, e.value.rows, e.value.cols);
    params.entries[size_t(id)].value = e.value;
    params.entries[size_t(id)].trainable = mode != FinetuneMode::LatentOnly;
  }
  const int lat_id = params.add(names::kLatents, int(layout.objects.size()), net.latent_dim);
  for (double& x : params.entries[size_t(lat_id)].value.v) x = rng.normal(0.0, 0.1);
  params.entries[size_t(lat_id)].trainable = mode != FinetuneMode::DecoderOnly;

  for (size_t i = 0; i < layout.objects.size(); ++i)
    result.latent_row_of_id[layout.objects[i].id] = int(i);

  const traindetail::RayBatch pool = traindetail::surviving_rays(layout, camera, target);
  if (pool.rays.empty())
    throw std::runtime_error("no target rays intersect the layout volumes");
  const int steps_per_epoch =
      std::max(1, (int(pool.rays.size()) + cfg.rays_per_batch - 1) / cfg.rays_per_batch);

  auto full_loss = [&]() {
    Tape tape(&params);
    return tape.val(traindetail::build_rgb_loss(tape, net, layout, pool.rays, pool.gt,
                                                cfg.samples_per_ray, nullptr,
                                                result.latent_row_of_id))
        .v[0];
  };

  RmsProp opt(params, cfg.learning_rate, cfg.rms_decay, cfg.rms_epsilon);
  std::vector<Ray> rays(size_t(cfg.rays_per_batch));
  std::vector<Vec3> gt(size_t(cfg.rays_per_batch));
  DivergenceGuard guard;
  result.best_loss = full_loss();
  std::vector<Tensor> best_values;
  for (const auto& e : params.entries) best_values.push_back(e.value);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int step = 0; step < steps_per_epoch; ++step) {
      for (int i = 0; i < cfg.rays_per_batch; ++i) {
        const int pick = rng.uniform_int(int(pool.rays.size()));
        rays[size_t(i)] = pool.rays[size_t(pick)];
        gt[size_t(i)] = pool.gt[size_t(pick)];
      }
      Tape tape(&params);
      const int l = traindetail::build_rgb_loss(tape, net, layout, rays, gt,
                                                cfg.samples_per_ray, &rng,
                                                result.latent_row_of_id);
      const double loss = tape.val(l).v[0];
      if (!std::isfinite(loss)) throw std::runtime_error("non-finite inversion loss");
      if (guard.update(loss)) throw std::runtime_error("inversion diverged");
      tape.backward(l);
      opt.step(params, traindetail::collect_grads(tape, params));
    }
    const double epoch_loss = full_loss();
    if (epoch_loss < result.best_loss) {
      result.best_loss = epoch_loss;
      result.best_epoch = epoch;
      for (size_t i = 0; i < params.entries.size(); ++i)
        if (params.entries[i].trainable) best_values[i] = params.entries[i].value;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "epoch=%d loss=%.6f best=%.6f", epoch, epoch_loss,
                  result.best_loss);
    result.log_lines.emplace_back(buf);
    if (log) *log << buf << "\n";
  }

  for (size_t i = 0; i < params.entries.size(); ++i) params.entries[i].value = best_values[i];
  const Tensor& table = params.at(names::kLatents).value;
  for (int r = 0; r < table.rows; ++r) {
    LatentCode l;
    l.values.assign(table.row_ptr(r), table.row_ptr(r) + table.cols);
    result.latents.push_back(std::move(l));
  }
  return result;
}

}  // namespace scenefield
