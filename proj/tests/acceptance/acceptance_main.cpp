// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// gated criterion fails. The throughput benchmark (criterion 9) is reported
// but never gates.
//
// Run with --only N[,M...] to execute a subset during development.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scenefield/dataset.hpp"
#include "scenefield/field_tools.hpp"
#include "scenefield/grasp.hpp"
#include "scenefield/metrics.hpp"
#include "scenefield/network.hpp"
#include "scenefield/renderer.hpp"
#include "scenefield/training.hpp"

using namespace scenefield;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Criterion {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Oracle renderer equivalence on 20 random single-object analytic scenes.
Criterion criterion_oracle_equivalence() {
  const auto t0 = Clock::now();
  double worst_mean = 0.0, worst_peak = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    DatasetConfig cfg;
    cfg.num_train_objects = 1;
    cfg.num_test_objects = 0;
    cfg.views_per_scene = 1;
    cfg.grasps_per_object = 1;
    cfg.score_trials = 1;
    cfg.image_size = 64;
    cfg.seed = 1000 + uint64_t(trial);
    const SceneDataset ds = generate_dataset(cfg);
    const DatasetScene& scene = ds.train[0];

    const Scene layout = scene.analytic.layout(1);
    const AnalyticRadianceField field(scene.analytic);
    const RenderedImage ours = render(layout, field, scene.cameras[0], 64);
    const Image& oracle = scene.images[0];

    double total = 0.0, peak = 0.0;
    for (size_t i = 0; i < oracle.rgb.size(); ++i) {
      const double d = std::abs(ours.rgb.rgb[i] - oracle.rgb[i]);
      total += d;
      peak = std::max(peak, d);
    }
    worst_mean = std::max(worst_mean, total / double(oracle.rgb.size()));
    worst_peak = std::max(worst_peak, peak);
  }
  const double elapsed = seconds_since(t0);
  Criterion c;
  c.pass = worst_mean <= 2e-2 && worst_peak <= 1e-1 && elapsed < 60.0;
  c.detail = fmt("worst mean abs err %.4g (<= 0.02), worst max err %.4g (<= 0.1), %.1f s (< 60)",
                 worst_mean, worst_peak, elapsed);
  return c;
}

// ---------------------------------------------------------------------------
// 2. End-to-end gradients vs central finite differences, every parameter class.
Criterion criterion_gradients() {
  const auto t0 = Clock::now();
  DatasetConfig dcfg;
  dcfg.num_train_objects = 2;
  dcfg.num_test_objects = 0;
  dcfg.views_per_scene = 2;
  dcfg.grasps_per_object = 6;
  dcfg.score_trials = 5;
  dcfg.image_size = 20;
  dcfg.seed = 77;
  const SceneDataset ds = generate_dataset(dcfg);

  NetworkConfig net;
  net.trunk_width = 24;
  net.color_hidden = 12;
  net.grasp_hidden = 12;
  net.latent_dim = 8;
  ParameterStore params = init_params(net, ds.num_train_objects, 5);

  const DatasetScene& scene = ds.train[0];
  const traindetail::RayBatch pool =
      traindetail::surviving_rays(scene.base_layout, scene.cameras[0], scene.images[0]);
  if (pool.rays.size() < 4) return {false, "fixture produced fewer than 4 rays"};
  std::vector<Ray> rays(pool.rays.begin(), pool.rays.begin() + 4);
  std::vector<Vec3> gt(pool.gt.begin(), pool.gt.begin() + 4);
  std::vector<traindetail::GraspBatchRef> grasps = {{&scene.annotations[0][0], 0},
                                                    {&scene.annotations[0][1], 0}};
  std::unordered_map<int, int> rows{{scene.base_layout.objects[0].id, 0}};

  auto build = [&](Tape& t) {
    const int l_rgb =
        traindetail::build_rgb_loss(t, net, scene.base_layout, rays, gt, 8, nullptr, rows);
    const auto [l_s, l_r] = traindetail::build_grasp_losses(t, net, grasps, 0.1);
    return t.add(t.add(l_rgb, l_s), l_r);
  };

  Tape tape(&params);
  const int loss = build(tape);
  tape.backward(loss);

  Rng rng(123);
  double worst = 0.0;
  std::string worst_param = "-";
  for (const auto& e : params.entries) {
    const Tensor g = tape.param_grad(e.name);
    for (int probe = 0; probe < 6; ++probe) {
      const size_t k = size_t(rng.uniform_int(int(e.value.size())));
      double& slot = params.at(e.name).value.v[k];
      const double saved = slot;
      const double h = 1e-5;
      slot = saved + h;
      Tape up(&params);
      const double fu = up.val(build(up)).v[0];
      slot = saved - h;
      Tape dn(&params);
      const double fd = dn.val(build(dn)).v[0];
      slot = saved;
      const double fdiff = (fu - fd) / (2 * h);
      const double err =
          std::abs(g.v[k] - fdiff) / std::max({1.0, std::abs(g.v[k]), std::abs(fdiff)});
      if (err > worst) {
        worst = err;
        worst_param = e.name;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  Criterion c;
  c.pass = worst <= 1e-3 && elapsed < 10.0;
  c.detail = fmt("worst relative error %.3g (<= 1e-3, at %s), %.2f s (< 10)", worst,
                 worst_param.c_str(), elapsed);
  return c;
}

// ---------------------------------------------------------------------------
// 3. Raymarcher invariants over 1000 random scenes.
Criterion criterion_raymarcher() {
  Rng rng(2024);
  long long violations = 0;
  long long rays_checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Scene scene;
    const int m = 1 + rng.uniform_int(5);
    for (int i = 0; i < m; ++i) {
      ObjectInstance o;
      o.pose.rotation = rng.rotation();
      o.pose.translation = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                            rng.uniform(0.4, 1.6)};
      o.volume.half_extents = {rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3),
                               rng.uniform(0.05, 0.3)};
      o.id = i;
      scene.objects.push_back(o);
    }
    std::vector<Ray> rays;
    for (int r = 0; r < 8; ++r)
      rays.push_back({{rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), -0.4},
                      normalized(Vec3{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), 1.0})});
    const IntersectionTable table = intersect(rays, scene);
    if (table.num_rays == 0) continue;
    const int total = 6 + rng.uniform_int(12);
    Rng jitter(uint64_t(trial) * 13 + 7);
    const RaySampleBatch b =
        march(table, scene, total, trial % 2 == 0 ? &jitter : nullptr);

    for (int r = 0; r < b.num_rays; ++r) {
      ++rays_checked;
      std::map<int, int> counts;
      std::set<int> hit_ids;
      for (int j = 0; j < table.num_objects; ++j)
        if (table.is_hit(r, j)) hit_ids.insert(scene.objects[size_t(j)].id);
      int emitted = 0;
      for (int j = 0; j < total; ++j) {
        const size_t idx = b.index(r, j);
        ++emitted;
        counts[b.object_ids[idx]]++;
        if (j > 0 && b.depths[idx] < b.depths[b.index(r, j - 1)]) ++violations;
        const ObjectInstance* obj = scene.find(b.object_ids[idx]);
        const Vec3 local = world_to_object(obj->pose, b.positions[idx]);
        if (!obj->volume.contains_local(local, 1e-6)) ++violations;
      }
      if (emitted != total) ++violations;
      if (int(hit_ids.size()) <= total) {
        int lo = total, hi = 0;
        for (const int id : hit_ids) {
          lo = std::min(lo, counts[id]);
          hi = std::max(hi, counts[id]);
        }
        if (hi - lo > 1) ++violations;
      }
    }
  }
  Criterion c;
  c.pass = violations == 0 && rays_checked > 1000;
  c.detail = fmt("%lld violations across %lld rays (1000 scenes)", violations, rays_checked);
  return c;
}

// ---------------------------------------------------------------------------
// 4. Ray/box fuzz against the marching oracle, 1e5 pairs.
Criterion criterion_raybox_fuzz() {
  Rng rng(31337);
  long long mismatches = 0;
  long long hits = 0;
  double worst_boundary = 0.0;
  const double step = 1e-4;
  for (int i = 0; i < 100000; ++i) {
    ObjectInstance obj;
    obj.volume.half_extents = {rng.uniform(0.05, 0.35), rng.uniform(0.05, 0.35),
                               rng.uniform(0.05, 0.35)};
    obj.pose.rotation = rng.rotation();
    obj.pose.translation = {rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                            rng.uniform(-0.4, 0.4)};
    obj.id = 0;
    const Vec3 origin{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    const Vec3 dir = i % 2 == 0
                         ? rng.unit_vector()
                         : normalized(obj.pose.translation - origin + rng.in_unit_ball() * 0.35);
    const Ray ray{origin, dir};
    const BoxHit slab = intersect_object(ray, obj);

    // marching oracle over the bounding-sphere window
    const double radius = norm(obj.volume.half_extents) + 4 * step;
    const double t_mid = dot(obj.pose.translation - origin, dir);
    const double lo = std::max(0.0, t_mid - radius);
    const double hi = t_mid + radius;
    bool oracle_hit = false;
    double enter = 0.0, exit = 0.0;
    if (hi > 0.0) {
      const Mat3 rt = obj.pose.rotation.transposed();
      const Vec3& h = obj.volume.half_extents;
      for (double t = lo; t <= hi; t += step) {
        const Vec3 p = rt * (origin + dir * t - obj.pose.translation);
        if (std::abs(p.x) <= h.x && std::abs(p.y) <= h.y && std::abs(p.z) <= h.z) {
          if (!oracle_hit) enter = t;
          oracle_hit = true;
          exit = t;
        }
      }
    }
    if (slab.hit != oracle_hit) {
      // near-tangent case at the marching resolution: re-march the same
      // window at fine steps and apply the tracer's documented rule that
      // intervals shorter than kMinHitInterval count as misses
      const double fine = 2e-7;
      bool refined_hit = false;
      double fenter = 0.0, fexit = 0.0;
      const Mat3 rt = obj.pose.rotation.transposed();
      const Vec3& h = obj.volume.half_extents;
      for (double t = lo; t <= hi; t += fine) {
        const Vec3 p = rt * (origin + dir * t - obj.pose.translation);
        if (std::abs(p.x) <= h.x && std::abs(p.y) <= h.y && std::abs(p.z) <= h.z) {
          if (!refined_hit) fenter = t;
          refined_hit = true;
          fexit = t;
        }
      }
      refined_hit = refined_hit && (fexit - fenter) >= kMinHitInterval;
      if (slab.hit != refined_hit) ++mismatches;
      continue;
    }
    if (slab.hit) {
      ++hits;
      worst_boundary = std::max(worst_boundary, std::abs(slab.t_enter - enter));
      worst_boundary = std::max(worst_boundary, std::abs(slab.t_exit - exit));
    }
  }
  Criterion c;
  c.pass = mismatches == 0 && worst_boundary <= 2e-4 && hits > 10000;
  c.detail = fmt("hit/miss mismatches %lld of 100000 (%lld hits), worst boundary error %.3g "
                 "(<= 2e-4)",
                 mismatches, hits, worst_boundary);
  return c;
}

// ---------------------------------------------------------------------------
// shared state for criteria 5 and 6
struct OverfitArtifacts {
  SceneDataset dataset;
  Checkpoint checkpoint;
  std::unordered_map<int, int> rows;
  bool ready = false;
};

OverfitArtifacts g_overfit;

// 5. Desk-scale overfit: pretrain on 16 analytic objects, hold out views,
// invert 4 unseen objects against a random-latent baseline.
Criterion criterion_overfit() {
  const auto t0 = Clock::now();
  DatasetConfig dcfg;  // 16 train objects, 4 test, 50 views, 64x64
  dcfg.seed = 1;
  g_overfit.dataset = generate_dataset(dcfg);
  SceneDataset& ds = g_overfit.dataset;

  NetworkConfig net;
  TrainConfig tc;
  tc.steps = 5000;
  tc.log_every = 1000;
  const PretrainResult pre = pretrain(ds, net, tc);
  g_overfit.checkpoint = pre.checkpoint;
  for (int i = 0; i < ds.num_train_objects; ++i) g_overfit.rows[i] = i;
  g_overfit.ready = true;

  // held-out view PSNR on training objects
  double holdout_sum = 0.0;
  int holdout_count = 0;
  for (const auto& scene : ds.train) {
    const Scene bound = bind_table_latents(scene.base_layout, pre.checkpoint, g_overfit.rows);
    const NetworkRadianceField field(pre.checkpoint.params, pre.checkpoint.config, bound);
    for (size_t v = scene.cameras.size() - size_t(tc.holdout_views); v < scene.cameras.size();
         ++v) {
      holdout_sum += psnr(render(bound, field, scene.cameras[v], 64).rgb, scene.images[v]).db;
      ++holdout_count;
    }
  }
  const double holdout_psnr = holdout_sum / holdout_count;

  // single-image inversion on the unseen objects vs a random-latent baseline
  double inverted_sum = 0.0, baseline_sum = 0.0;
  for (const auto& scene : ds.test) {
    TrainConfig ft = tc;
    ft.epochs = 100;
    ft.seed = 17;
    ft.learning_rate = 1e-2;  // latent-only inversion tolerates larger steps
    const FinetuneResult fr = finetune(scene.images[0], scene.cameras[0], scene.base_layout,
                                       FinetuneMode::LatentOnly, pre.checkpoint, ft);
    Scene inv_scene = scene.base_layout;
    inv_scene.objects[0].latent = fr.latents[0];
    Scene base_scene = scene.base_layout;
    Rng baseline_rng(4242);
    base_scene.objects[0].latent.values.assign(size_t(net.latent_dim), 0.0);
    for (auto& v : base_scene.objects[0].latent.values) v = baseline_rng.normal(0.0, 0.1);

    const NetworkRadianceField inv_field(pre.checkpoint.params, pre.checkpoint.config,
                                         inv_scene);
    const NetworkRadianceField base_field(pre.checkpoint.params, pre.checkpoint.config,
                                          base_scene);
    for (int v = 1; v <= 15; ++v) {
      inverted_sum +=
          psnr(render(inv_scene, inv_field, scene.cameras[size_t(v)], 64).rgb,
               scene.images[size_t(v)]).db;
      baseline_sum +=
          psnr(render(base_scene, base_field, scene.cameras[size_t(v)], 64).rgb,
               scene.images[size_t(v)]).db;
    }
  }
  const double inverted = inverted_sum / (15.0 * double(ds.test.size()));
  const double baseline = baseline_sum / (15.0 * double(ds.test.size()));
  const double margin = inverted - baseline;
  const double elapsed = seconds_since(t0);

  Criterion c;
  c.pass = holdout_psnr >= 24.0 && margin >= 5.0 && elapsed < 1800.0;
  c.detail = fmt("holdout PSNR %.2f dB (>= 24), inversion %.2f dB vs baseline %.2f dB, margin "
                 "%.2f dB (>= 5), %.0f s (< 1800)",
                 holdout_psnr, inverted, baseline, margin, elapsed);
  return c;
}

// ---------------------------------------------------------------------------
// 6. Inversion self-consistency: a render from a known latent is recovered.
Criterion criterion_self_consistency() {
  if (!g_overfit.ready) return {false, "skipped: overfit checkpoint unavailable"};
  const auto t0 = Clock::now();
  const SceneDataset& ds = g_overfit.dataset;
  const Checkpoint& ck = g_overfit.checkpoint;

  const DatasetScene& scene = ds.train[0];
  const Scene bound = bind_table_latents(scene.base_layout, ck, g_overfit.rows);
  const NetworkRadianceField field(ck.params, ck.config, bound);
  const Image target = render(bound, field, scene.cameras[0], 64).rgb;

  TrainConfig ft;
  ft.epochs = 100;
  ft.seed = 909;
  ft.learning_rate = 1e-2;
  const FinetuneResult fr = finetune(target, scene.cameras[0], scene.base_layout,
                                     FinetuneMode::LatentOnly, ck, ft);
  Scene inv_scene = scene.base_layout;
  inv_scene.objects[0].latent = fr.latents[0];
  const NetworkRadianceField inv_field(ck.params, ck.config, inv_scene);
  const PsnrResult p = psnr(render(inv_scene, inv_field, scene.cameras[0], 64).rgb, target);
  const double elapsed = seconds_since(t0);

  Criterion c;
  const double db = p.exact_match ? 99.0 : p.db;
  c.pass = db >= 35.0 && elapsed < 120.0;
  c.detail = fmt("re-render PSNR %.2f dB (>= 35), %.1f s (< 120)", db, elapsed);
  return c;
}

// ---------------------------------------------------------------------------
// 7. Grasp pipeline property suite.
Criterion criterion_grasp_pipeline() {
  const auto t0 = Clock::now();
  std::vector<std::string> problems;

  // (a) rotation orthonormality over random decoder outputs
  {
    Rng rng(555);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      Vec3 a{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      Vec3 b{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      if (norm(a) < 0.05 || norm(cross(normalized(a), b)) < 1e-4) continue;
      const Mat3 r = assemble_rotation(a, b);
      worst = std::max(worst, orthonormality_error(r));
      worst = std::max(worst, std::abs(r.det() - 1.0));
    }
    if (worst > 1e-5) problems.push_back(fmt("orthonormality error %.3g > 1e-5", worst));
  }

  // (b) 100% rejection of empty-space grasps and open-cloud penetrations
  {
    AnalyticScene ascene;
    AnalyticSceneObject box;
    box.shape.kind = ShapeKind::Box;
    box.shape.box_half = {0.06, 0.06, 0.06};
    box.id = 0;
    ascene.objects.push_back(box);
    const SceneDensityField field = analytic_density_field(ascene);
    const GripperModel gripper = make_gripper(0.08);
    Rng rng(556);
    int empty_rejected = 0, empty_total = 0, buried_rejected = 0, buried_total = 0;
    for (int i = 0; i < 100; ++i) {
      GraspProposal empty;
      empty.position = normalized(rng.unit_vector()) * rng.uniform(0.5, 1.0);
      empty.rotation = rng.rotation();
      ++empty_total;
      if (!filter({empty}, Pose{}, field, gripper, 1.0, 50.0)[0].keep) ++empty_rejected;

      GraspProposal buried;  // grasp center inside the opaque box
      buried.position = {rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03),
                         rng.uniform(-0.03, 0.03)};
      buried.rotation = rng.rotation();
      const auto res = filter({buried}, Pose{}, field, gripper, 1.0, 50.0)[0];
      ++buried_total;
      // the open cloud of a grasp centered in a 12 cm box always penetrates
      if (!res.keep && !res.open_pass) ++buried_rejected;
    }
    if (empty_rejected != empty_total)
      problems.push_back(fmt("empty-space rejections %d/%d", empty_rejected, empty_total));
    if (buried_rejected != buried_total)
      problems.push_back(fmt("penetration rejections %d/%d", buried_rejected, buried_total));
  }

  // (c) train on the waisted-bar and boot-analog fixtures with analytic
  // annotations (score formula, N = 50), then check the learned score field
  {
    DatasetConfig dcfg;
    dcfg.num_train_objects = 2;  // index 2,3 patterns below override shapes
    dcfg.num_test_objects = 0;
    dcfg.views_per_scene = 16;
    dcfg.grasps_per_object = 200;
    dcfg.score_trials = 50;
    dcfg.seed = 21;
    SceneDataset ds = generate_dataset(dcfg);
    // replace both objects with the fixtures (ids stay 0 and 1)
    const GripperModel gripper = make_gripper(dcfg.gripper_width);
    AnalyticObject bar;
    bar.kind = ShapeKind::BarWithWaist;
    bar.bar_half_len = 0.08;
    bar.bar_r_waist = 0.016;
    bar.bar_r_end = 0.038;
    bar.base_color = {0.8, 0.4, 0.2};
    AnalyticObject boot;
    boot.kind = ShapeKind::TwoLobe;
    boot.lobe_r1 = 0.05;
    boot.lobe_r2 = 0.025;
    boot.lobe_sep = 0.7 * (boot.lobe_r1 + boot.lobe_r2);
    boot.base_color = {0.3, 0.5, 0.8};
    const AnalyticObject shapes[2] = {bar, boot};
    for (int s = 0; s < 2; ++s) {
      DatasetScene& scene = ds.train[size_t(s)];
      scene.analytic.objects[0].shape = shapes[s];
      scene.analytic.objects[0].pose = Pose{};
      scene.base_layout = scene.analytic.layout(1);
      Rng rng(999 + uint64_t(s));
      scene.annotations[0] = sample_grasp_annotations(shapes[s], gripper,
                                                      dcfg.grasps_per_object, 50, rng);
      detail::render_scene_views(scene, dcfg);
    }

    NetworkConfig net;
    TrainConfig tc;
    tc.steps = 2500;
    tc.grasps_per_batch = 96;
    tc.log_every = 1000;
    const PretrainResult pre = pretrain(ds, net, tc);

    // top-1 proposal sits within one grid cell of the bar's waist: at most one
    // cell from the x = 0 waist section, and on or inside the bulge there
    // (the annotations constrain the axis and the surface; radially interior
    // points of the narrow section are all legitimate waist grasps)
    const int res = 10;
    ObjectInstance bar_obj = ds.train[0].base_layout.objects[0];
    bar_obj.latent = pre.checkpoint.latent_row(0);
    const auto proposals = propose(bar_obj, pre.checkpoint.params, pre.checkpoint.config, res, 5);
    if (proposals.empty()) {
      problems.push_back("no proposals on the bar fixture");
    } else {
      const Vec3 cell = bar_obj.volume.half_extents * (2.0 / res);
      const Vec3 top = proposals[0].position;
      const double radial = std::sqrt(top.y * top.y + top.z * top.z);
      const double bulge = bar.bar_radius_at(top.x) + std::max(cell.y, cell.z);
      if (!(std::abs(top.x) <= cell.x && radial <= bulge))
        problems.push_back(fmt("top-1 grasp at (%.3f %.3f %.3f): |x| vs cell %.3f, radial %.3f "
                               "vs bulge %.3f",
                               top.x, top.y, top.z, cell.x, radial, bulge));
      for (const auto& p : proposals)
        if (orthonormality_error(p.rotation) > 1e-5)
          problems.push_back("proposal rotation above orthonormality tolerance");
    }

    // the boot-analog bulk scores near zero
    const LatentCode boot_latent = pre.checkpoint.latent_row(1);
    const AnalyticObject& bshape = boot;
    Rng rng(777);
    double mean_bulk = 0.0;
    int bulk_count = 0;
    const Vec3 bulk_center{-bshape.lobe_bounds_x() + bshape.lobe_r1, 0, 0};
    for (int i = 0; i < 200; ++i) {
      const Vec3 p = bulk_center + rng.in_unit_ball() * (bshape.lobe_r1 * 0.8);
      mean_bulk += grasp_forward(pre.checkpoint.params, pre.checkpoint.config, boot_latent, p)
                       .score;
      ++bulk_count;
    }
    mean_bulk /= bulk_count;
    if (mean_bulk > 0.2) problems.push_back(fmt("boot bulk mean score %.3f > 0.2", mean_bulk));
  }

  Criterion c;
  c.pass = problems.empty();
  std::ostringstream os;
  if (problems.empty())
    os << fmt("rotations orthonormal, 100%% rejection of empty/colliding grasps, waist "
              "localized, boot bulk near zero (%.0f s)",
              seconds_since(t0));
  else
    for (const auto& p : problems) os << p << "; ";
  c.detail = os.str();
  return c;
}

// ---------------------------------------------------------------------------
// 8. CLI determinism: every command, fixed seed, --threads 1, two runs.
Criterion criterion_cli_determinism() {
  const std::string cli = SCENEFIELD_CLI_PATH;
  const std::string work = "/tmp/sf_acceptance_cli";
  fs::remove_all(work);
  fs::create_directories(work);

  auto shell = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  auto dir_bytes = [](const std::string& dir) {
    std::map<std::string, std::vector<uint8_t>> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
      if (entry.is_regular_file())
        files[fs::relative(entry.path(), dir).string()] =
            read_file_bytes(entry.path().string());
    return files;
  };

  // shared fixtures
  if (shell("gen-data --objects 2 --test-objects 1 --views 3 --grasps 6 --score-trials 5 "
            "--size 24 --seed 3 --threads 1 --out " + work + "/data") != 0)
    return {false, "gen-data failed"};
  if (shell("pretrain --data " + work + "/data/dataset --steps 25 --rays_per_batch 24 "
            "--grasps_per_batch 8 --samples_per_ray 8 --width 16 --color-hidden 8 "
            "--grasp-hidden 8 --latent-dim 8 --seed 3 --threads 1 --out " + work + "/ckpt") != 0)
    return {false, "pretrain failed"};
  {
    std::ofstream f(work + "/scene.json");
    f << R"({"background":[1,1,1],"objects":[{"id":0,"rotation":[1,0,0,0,1,0,0,0,1],)"
      << R"("translation":[0,0,0],"half_extents":[0.05,0.05,0.05],"latent":{"table_row":0}}]})";
  }
  const std::string data = work + "/data/dataset";
  const std::string ckpt = work + "/ckpt/checkpoint.bin";
  const std::string cam = data + "/train/scene_000/cameras.json";
  const std::string img = data + "/train/scene_000/view_000.png";
  const std::string layout = data + "/train/scene_000/layout.json";
  const std::string scene = work + "/scene.json";

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "gen-data --objects 1 --test-objects 1 --views 2 --grasps 4 --score-trials 4 "
                   "--size 20"},
      {"pretrain", "pretrain --data " + data + " --steps 12 --rays_per_batch 16 "
                   "--grasps_per_batch 6 --samples_per_ray 6 --width 16 --color-hidden 8 "
                   "--grasp-hidden 8 --latent-dim 8"},
      {"invert", "invert --ckpt " + ckpt + " --image " + img + " --camera " + cam +
                 " --view-index 0 --layout " + layout +
                 " --mode latent --epochs 2 --rays_per_batch 16 --samples_per_ray 6"},
      {"render", "render --ckpt " + ckpt + " --scene " + scene + " --camera " + cam +
                 " --samples 12"},
      {"render-depth", "render-depth --ckpt " + ckpt + " --scene " + scene + " --camera " + cam +
                       " --samples 12"},
      {"render-graspfield", "render-graspfield --ckpt " + ckpt + " --scene " + scene +
                            " --camera " + cam + " --samples 12"},
      {"grasp", "grasp --ckpt " + ckpt + " --scene " + scene +
                " --object-id 0 --res 5 --top-k 4 --t-open 1 --t-closed 5"},
      {"voxelize", "voxelize --ckpt " + ckpt + " --scene " + scene +
                   " --object-id 0 --res 6 --sigma-threshold 5"},
      {"eval", "eval --a " + img + " --b " + img},
      {"bench", "bench --size 24 --samples 6 --reps 1"},
  };

  std::vector<std::string> failures;
  for (const auto& [name, args] : commands) {
    const std::string out1 = work + "/run1_" + name;
    const std::string out2 = work + "/run2_" + name;
    const std::string full1 = args + " --seed 11 --threads 1 --out " + out1;
    const std::string full2 = args + " --seed 11 --threads 1 --out " + out2;
    if (shell(full1) != 0 || shell(full2) != 0) {
      failures.push_back(name + " (nonzero exit)");
      continue;
    }
    auto files1 = dir_bytes(out1);
    auto files2 = dir_bytes(out2);
    if (files1.empty()) failures.push_back(name + " (no outputs)");
    bool same = files1.size() == files2.size();
    if (same)
      for (const auto& [rel, bytes] : files1) {
        auto it = files2.find(rel);
        if (it == files2.end() || it->second != bytes) {
          same = false;
          break;
        }
      }
    // bench timings legitimately differ between runs; compare files except bench.json
    if (!same && name == "bench") {
      files1.erase("bench.json");
      files2.erase("bench.json");
      same = files1 == files2;
    }
    if (!same) failures.push_back(name + " (outputs differ)");
  }
  fs::remove_all(work);

  Criterion c;
  c.pass = failures.empty();
  if (failures.empty()) {
    c.detail = fmt("%zu commands byte-identical across runs (seeded, --threads 1)",
                   commands.size());
  } else {
    std::ostringstream os;
    for (const auto& f : failures) os << f << "; ";
    c.detail = os.str();
  }
  return c;
}

// ---------------------------------------------------------------------------
// 9. Throughput benchmark (reported, not gated).
Criterion criterion_benchmark() {
  const Checkpoint ck = make_checkpoint(NetworkConfig{}, 1, 42);
  Scene scene;
  ObjectInstance obj;
  obj.volume.half_extents = {0.06, 0.05, 0.07};
  obj.latent = ck.latent_row(0);
  obj.id = 0;
  scene.objects.push_back(obj);
  const Camera cam =
      Camera::look_at({0, -0.9, 0.4}, {0, 0, 0}, {0, 0, 1}, 380.0, 128, 128);
  const NetworkRadianceField field(ck.params, ck.config, scene);
  double best_ms = 1e30;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = Clock::now();
    const RenderedImage img = render(scene, field, cam, 32);
    best_ms = std::min(best_ms, seconds_since(t0) * 1000.0);
    (void)img;
  }
  Criterion c;
  c.pass = true;  // reported, never gates
  c.detail = fmt("128x128 render at 32 samples/ray: %.0f ms (target 200 ms, %s)", best_ms,
                 best_ms <= 200.0 ? "met" : "not met on this machine");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[i + 1]);
      for (int n; ss >> n;) {
        only.insert(n);
        if (ss.peek() == ',') ss.ignore();
      }
    }
  }
  set_num_threads(2);

  struct Entry {
    int id;
    const char* name;
    Criterion (*fn)();
    bool gates;
  };
  const std::vector<Entry> entries = {
      {1, "oracle renderer equivalence", criterion_oracle_equivalence, true},
      {2, "end-to-end gradient correctness", criterion_gradients, true},
      {3, "raymarcher invariant suite", criterion_raymarcher, true},
      {4, "ray-box fuzz vs marching oracle", criterion_raybox_fuzz, true},
      {5, "desk-scale overfit and inversion", criterion_overfit, true},
      {6, "inversion self-consistency", criterion_self_consistency, true},
      {7, "grasp pipeline properties", criterion_grasp_pipeline, true},
      {8, "CLI determinism", criterion_cli_determinism, true},
      {9, "throughput benchmark (report only)", criterion_benchmark, false},
  };

  int failures = 0;
  for (const auto& e : entries) {
    if (!only.empty() && !only.count(e.id)) continue;
    const Criterion c = e.fn();
    const char* tag = c.pass ? "PASS" : (e.gates ? "FAIL" : "REPORT");
    std::printf("%s criterion %d (%s): %s\n", tag, e.id, e.name, c.detail.c_str());
    std::fflush(stdout);
    if (!c.pass && e.gates) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
