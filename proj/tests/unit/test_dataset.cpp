#include <doctest.h>

#include <filesystem>

#include "scenefield/dataset.hpp"
#include "scenefield/metrics.hpp"

using namespace scenefield;

namespace {

AnalyticObject bar_fixture() {
  AnalyticObject o;
  o.kind = ShapeKind::BarWithWaist;
  o.bar_half_len = 0.08;
  o.bar_r_waist = 0.016;
  o.bar_r_end = 0.038;
  return o;
}

AnalyticObject boot_fixture() {
  AnalyticObject o;
  o.kind = ShapeKind::TwoLobe;
  o.lobe_r1 = 0.05;
  o.lobe_r2 = 0.025;
  o.lobe_sep = 0.7 * (o.lobe_r1 + o.lobe_r2);
  return o;
}

}  // namespace

TEST_CASE("analytic densities vanish outside and saturate inside") {
  Rng rng(71);
  std::vector<AnalyticObject> shapes;
  shapes.push_back({});  // default box
  AnalyticObject cap;
  cap.kind = ShapeKind::Capsule;
  shapes.push_back(cap);
  shapes.push_back(bar_fixture());
  shapes.push_back(boot_fixture());

  for (const auto& s : shapes) {
    const Vec3 b = s.bounds();
    // outside the support: density 0 (sample outside the bounding volume too)
    for (int i = 0; i < 200; ++i) {
      Vec3 p{rng.uniform(-2, 2) * b.x, rng.uniform(-2, 2) * b.y, rng.uniform(-2, 2) * b.z};
      if (s.boundary(p) >= 0.0) CHECK(s.density(p) == 0.0);
    }
    // interior core: at least sigma_max / 2
    for (int i = 0; i < 200; ++i) {
      Vec3 p{rng.uniform(-1, 1) * b.x, rng.uniform(-1, 1) * b.y, rng.uniform(-1, 1) * b.z};
      if (s.boundary(p) < -s.falloff_band / 2)
        CHECK(s.density(p) >= s.sigma_max / 2);
    }
    // surface samples live on the boundary inside the bounds
    for (int i = 0; i < 200; ++i) {
      const Vec3 p = s.surface_sample(rng);
      CHECK(std::abs(s.boundary(p)) < 1e-4);
      CHECK(std::abs(p.x) <= b.x + 1e-6);
      CHECK(std::abs(p.y) <= b.y + 1e-6);
      CHECK(std::abs(p.z) <= b.z + 1e-6);
      CHECK(std::abs(norm(s.normal(p)) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("oracle compositor agrees with integrate_ray on matched samples") {
  Rng rng(72);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + rng.uniform_int(12);
    std::vector<double> sigma, delta, depth;
    std::vector<Vec3> color;
    for (int i = 0; i < n; ++i) {
      sigma.push_back(rng.uniform(0, 80));
      delta.push_back(rng.uniform(0.001, 0.05));
      depth.push_back(0.5 + 0.05 * i);
      color.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    }
    const Vec3 bg{rng.uniform(), rng.uniform(), rng.uniform()};
    const Vec3 a = oracle_composite(sigma, color, delta, bg);
    const IntegratedRay b = integrate_ray(sigma, color, delta, depth, bg);
    CHECK(norm(a - b.rgb) < 1e-6);
  }
}

TEST_CASE("score_grasp is the success fraction of the oracle") {
  Rng rng(73);
  GraspPose pose;
  CHECK(score_grasp(pose, 50, {}, [](const GraspPose&) { return true; }, rng) == 1.0);
  CHECK(score_grasp(pose, 50, {}, [](const GraspPose&) { return false; }, rng) == 0.0);
  int calls = 0;
  const double half = score_grasp(
      pose, 50, {}, [&calls](const GraspPose&) { return calls++ % 2 == 0; }, rng);
  CHECK(half == doctest::Approx(0.5));
}

TEST_CASE("score_grasp estimates stabilize as trials double") {
  // mid-range score pose: slightly off-waist so perturbations sometimes fail
  const AnalyticObject bar = bar_fixture();
  const GripperModel gripper = make_gripper(0.06);
  GraspPose pose;
  pose.position = {0.038, 0, 0};
  pose.rotation = Mat3::from_cols({0, 1, 0}, cross(Vec3{0, 0, -1}, Vec3{0, 1, 0}), {0, 0, -1});

  const int n = 25;
  double mean_abs_diff = 0.0;
  double mean_score = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng r1(uint64_t(seed) * 2 + 1), r2(uint64_t(seed) * 2 + 2);
    const double s_n = score_grasp_analytic(bar, pose, gripper, n, {}, r1);
    const double s_2n = score_grasp_analytic(bar, pose, gripper, 2 * n, {}, r2);
    mean_abs_diff += std::abs(s_2n - s_n);
    mean_score += s_n;
  }
  mean_abs_diff /= 100.0;
  mean_score /= 100.0;
  CHECK(mean_score > 0.02);  // the pose is neither trivially good nor hopeless
  CHECK(mean_score < 0.98);
  CHECK(mean_abs_diff <= 2.0 / std::sqrt(double(n)));
}

TEST_CASE("antipodal oracle accepts waist grasps and rejects wide ones") {
  const AnalyticObject bar = bar_fixture();
  const GripperModel gripper = make_gripper(0.06);

  GraspPose waist;
  waist.position = {0, 0, 0};
  // closing along y, approaching along -z (from above)
  waist.rotation = Mat3::from_cols({0, 1, 0}, {-1, 0, 0}, {0, 0, -1});
  // keep the gripper body above: approach column must point down toward the bar
  waist.rotation = Mat3::from_cols({0, 1, 0}, cross(Vec3{0, 0, -1}, Vec3{0, 1, 0}), {0, 0, -1});
  CHECK(antipodal_stable(bar, waist, gripper));

  GraspPose end = waist;
  end.position = {0.06, 0, 0};  // radius there ~ 3.6 cm -> 7.2 cm thickness > 6 cm jaws
  CHECK_FALSE(antipodal_stable(bar, end, gripper));

  const AnalyticObject boot = boot_fixture();
  GraspPose bulk = waist;
  bulk.position = {-boot.lobe_bounds_x() + boot.lobe_r1, 0, 0};  // center of the big lobe
  CHECK_FALSE(antipodal_stable(boot, bulk, gripper));
}

TEST_CASE("waist-centered grasps score high, over-wide grasps score zero") {
  const AnalyticObject bar = bar_fixture();
  const GripperModel gripper = make_gripper(0.06);
  GraspPose waist;
  waist.position = {0, 0, 0};
  waist.rotation = Mat3::from_cols({0, 1, 0}, cross(Vec3{0, 0, -1}, Vec3{0, 1, 0}), {0, 0, -1});
  Rng rng(741);
  CHECK(score_grasp_analytic(bar, waist, gripper, 50, {}, rng) >= 0.9);

  GraspPose wide = waist;
  wide.position = {0.07, 0, 0};  // local thickness ~7.5 cm exceeds the 6 cm jaws
  Rng rng2(742);
  CHECK(score_grasp_analytic(bar, wide, gripper, 50, {}, rng2) == 0.0);
}

TEST_CASE("scored waist grasps dominate on the bar fixture") {
  const AnalyticObject bar = bar_fixture();
  const GripperModel gripper = make_gripper(0.06);
  Rng rng(74);
  const auto annotations = sample_grasp_annotations(bar, gripper, 60, 25, rng);
  REQUIRE(annotations.size() == 60);
  double best_score = 0.0, best_x = 1.0;
  for (const auto& a : annotations) {
    CHECK(a.score >= 0.0);
    CHECK(a.score <= 1.0);
    CHECK(orthonormality_error(a.rotation) < 1e-6);
    if (a.score > best_score) {
      best_score = a.score;
      best_x = std::abs(a.position.x);
    }
    // anything scoring well must be near the waist
    if (a.score >= 0.5) CHECK(std::abs(a.position.x) < 0.04);
  }
  CHECK(best_score >= 0.7);
  CHECK(best_x < 0.03);
}

TEST_CASE("boot-analog annotations score near zero on the bulk") {
  const AnalyticObject boot = boot_fixture();
  const GripperModel gripper = make_gripper(0.06);
  Rng rng(75);
  const auto annotations = sample_grasp_annotations(boot, gripper, 40, 25, rng);
  double bulk_max = 0.0;
  for (const auto& a : annotations)
    if (a.position.x < 0.0) bulk_max = std::max(bulk_max, a.score);  // big lobe side
  CHECK(bulk_max <= 0.2);
}

TEST_CASE("dataset generation is deterministic and annotated") {
  DatasetConfig cfg;
  cfg.num_train_objects = 2;
  cfg.num_test_objects = 1;
  cfg.views_per_scene = 2;
  cfg.grasps_per_object = 8;
  cfg.score_trials = 10;
  cfg.image_size = 24;
  cfg.seed = 5;

  const SceneDataset a = generate_dataset(cfg);
  const SceneDataset b = generate_dataset(cfg);
  REQUIRE(a.train.size() == 2);
  REQUIRE(a.test.size() == 1);
  CHECK(a.train[0].images[0].rgb == b.train[0].images[0].rgb);
  CHECK(a.train[1].annotations[0][3].score == b.train[1].annotations[0][3].score);

  for (const auto& scene : a.train) {
    CHECK(scene.cameras.size() == 2);
    for (const auto& cam : scene.cameras)
      CHECK(norm(cam.pose.translation) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(scene.annotations[0].size() == 8);
  }
  // ids are dense: train object i gets id i, test objects follow
  CHECK(a.train[0].base_layout.objects[0].id == 0);
  CHECK(a.train[1].base_layout.objects[0].id == 1);
  CHECK(a.test[0].base_layout.objects[0].id == 2);
}

TEST_CASE("multi-object scenes avoid volume overlap") {
  DatasetConfig cfg;
  cfg.num_train_objects = 4;
  cfg.num_test_objects = 0;
  cfg.views_per_scene = 1;
  cfg.grasps_per_object = 4;
  cfg.score_trials = 5;
  cfg.image_size = 16;
  cfg.multi_object_scenes = 2;
  cfg.seed = 9;

  const SceneDataset ds = generate_dataset(cfg);
  REQUIRE(ds.train.size() >= 5);
  for (size_t s = 4; s < ds.train.size(); ++s) {
    const auto& objs = ds.train[s].analytic.objects;
    CHECK(objs.size() >= 1);
    CHECK(objs.size() <= 5);
    for (size_t i = 0; i < objs.size(); ++i)
      for (size_t j = i + 1; j < objs.size(); ++j) {
        const double gap = norm(objs[i].pose.translation - objs[j].pose.translation);
        CHECK(gap >= norm(objs[i].shape.bounds()) + norm(objs[j].shape.bounds()) - 1e-9);
      }
  }
}

TEST_CASE("dataset disk round trip") {
  DatasetConfig cfg;
  cfg.num_train_objects = 1;
  cfg.num_test_objects = 1;
  cfg.views_per_scene = 2;
  cfg.grasps_per_object = 5;
  cfg.score_trials = 5;
  cfg.image_size = 16;
  cfg.seed = 11;
  const SceneDataset ds = generate_dataset(cfg);

  const std::string dir = "/tmp/sf_dataset_test";
  std::filesystem::remove_all(dir);
  save_dataset(dir, ds);
  const SceneDataset back = load_dataset(dir);
  REQUIRE(back.train.size() == 1);
  REQUIRE(back.test.size() == 1);
  CHECK(back.num_train_objects == 1);
  CHECK(back.train[0].cameras.size() == 2);
  CHECK(back.train[0].base_layout.objects[0].id == 0);
  REQUIRE(back.train[0].annotations[0].size() == 5);
  // annotations survive the text format at printed precision
  for (size_t i = 0; i < 5; ++i) {
    const auto& orig = ds.train[0].annotations[0][i];
    const auto& load = back.train[0].annotations[0][i];
    CHECK(norm(orig.position - load.position) < 1e-7);
    CHECK(orig.score == doctest::Approx(load.score).epsilon(1e-7));
  }
  // images survive at 8-bit precision
  const Image& orig = ds.train[0].images[0];
  const Image& load = back.train[0].images[0];
  for (size_t i = 0; i < orig.rgb.size(); ++i)
    CHECK(std::abs(load.rgb[i] - quantize_8bit(orig.rgb[i]) / 255.0) < 1e-9);
  std::filesystem::remove_all(dir);
}
