// Command-line entry point. One binary, subcommand style; every command
// validates its flags before any side effect, writes results only under
// --out, and records the effective configuration, seeds, and input hashes in
// <out>/manifest.json. Progress goes to stderr, results to files.
//
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "scenefield/dataset.hpp"
#include "scenefield/field_tools.hpp"
#include "scenefield/grasp.hpp"
#include "scenefield/metrics.hpp"
#include "scenefield/network.hpp"
#include "scenefield/renderer.hpp"
#include "scenefield/training.hpp"

#ifndef SCENEFIELD_GIT_DESCRIBE
#define SCENEFIELD_GIT_DESCRIBE "unknown"
#endif

namespace sf = scenefield;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint64_t fnv1a64(const std::vector<uint8_t>& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (const uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

struct RunContext {
  std::string out;
  uint64_t seed = 1;
  int threads = 1;
  std::string command;
  std::map<std::string, json> config;
  std::map<std::string, std::string> input_hashes;

  void add_input(const std::string& path) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  (unsigned long long)fnv1a64(sf::read_file_bytes(path)));
    input_hashes[path] = buf;
  }

  std::string path(const std::string& name) const { return out + "/" + name; }

  void write_manifest() const {
    json m;
    m["command"] = command;
    m["seed"] = seed;
    m["threads"] = threads;
    m["git_describe"] = SCENEFIELD_GIT_DESCRIBE;
    m["config"] = config;
    m["inputs"] = input_hashes;
    std::ofstream f(path("manifest.json"));
    if (!f) throw std::runtime_error("cannot write manifest under " + out);
    f << m.dump(2) << "\n";
  }
};

// Resolve table_row latent references against a checkpoint.
sf::Scene load_scene_with_checkpoint(const std::string& path, const sf::Checkpoint& ck) {
  std::unordered_map<int, int> table_rows;
  sf::Scene scene = sf::load_scene(path, &table_rows);
  for (auto& obj : scene.objects) {
    auto it = table_rows.find(obj.id);
    if (it != table_rows.end()) obj.latent = ck.latent_row(it->second);
    obj.latent.validate(ck.config.latent_dim);
  }
  return scene;
}

sf::Camera load_camera_file(const std::string& path, int view_index) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open camera file: " + path);
  const json j = json::parse(f);
  if (j.contains("views")) {
    const auto& views = j.at("views");
    if (view_index < 0 || view_index >= int(views.size()))
      throw std::invalid_argument("view index out of range");
    return sf::camera_from_json(views[size_t(view_index)]);
  }
  return sf::camera_from_json(j);
}

void write_render_outputs(const RunContext& ctx, const sf::RenderedImage& img,
                          const std::string& stem) {
  sf::write_png(ctx.path(stem + ".png"), img.rgb);
  sf::write_depth_raster(ctx.path(stem + "_depth.raster"), img.rgb.width, img.rgb.height,
                         img.depth);
  // 8-bit depth preview normalized over valid pixels
  double lo = 1e30, hi = -1e30;
  for (size_t i = 0; i < img.depth.size(); ++i)
    if (img.depth_valid[i]) {
      lo = std::min(lo, img.depth[i]);
      hi = std::max(hi, img.depth[i]);
    }
  sf::Image preview(img.rgb.width, img.rgb.height);
  if (hi > lo)
    for (size_t i = 0; i < img.depth.size(); ++i) {
      const double v = img.depth_valid[i] ? 1.0 - (img.depth[i] - lo) / (hi - lo) : 0.0;
      preview.rgb[i * 3] = preview.rgb[i * 3 + 1] = preview.rgb[i * 3 + 2] = v;
    }
  sf::write_png(ctx.path(stem + "_depth.png"), preview);
}

sf::TrainConfig train_config_from(const std::map<std::string, json>& cfg) {
  sf::TrainConfig t;
  t.lambda = cfg.at("lambda").get<double>();
  t.learning_rate = cfg.at("lr").get<double>();
  t.rms_decay = cfg.at("rms_decay").get<double>();
  t.rms_epsilon = cfg.at("rms_epsilon").get<double>();
  t.rays_per_batch = cfg.at("rays_per_batch").get<int>();
  t.grasps_per_batch = cfg.at("grasps_per_batch").get<int>();
  t.samples_per_ray = cfg.at("samples_per_ray").get<int>();
  t.steps = cfg.at("steps").get<int>();
  t.epochs = cfg.at("epochs").get<int>();
  t.holdout_views = cfg.at("holdout_views").get<int>();
  t.log_every = cfg.at("log_every").get<int>();
  t.seed = cfg.at("seed").get<uint64_t>();
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-centric latent scene fields: rendering, grasping, reconstruction"};
  app.require_subcommand(1);

  RunContext ctx;

  // shared flags, registered on each subcommand
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", ctx.out, "output directory (all results land here)")->required();
    cmd->add_option("--seed", ctx.seed, "random seed")->capture_default_str();
    cmd->add_option("--threads", ctx.threads, "worker threads (1 = deterministic reference)")
        ->capture_default_str();
  };

  // --- gen-data ---
  auto* gen = app.add_subcommand("gen-data", "generate an analytic multiview dataset");
  add_common(gen);
  sf::DatasetConfig dcfg;
  gen->add_option("--objects", dcfg.num_train_objects, "training objects")->capture_default_str();
  gen->add_option("--test-objects", dcfg.num_test_objects, "held-out objects")
      ->capture_default_str();
  gen->add_option("--views", dcfg.views_per_scene, "views per scene")->capture_default_str();
  gen->add_option("--grasps", dcfg.grasps_per_object, "grasp annotations per object")
      ->capture_default_str();
  gen->add_option("--size", dcfg.image_size, "image width/height")->capture_default_str();
  gen->add_option("--multi", dcfg.multi_object_scenes, "extra multi-object scenes")
      ->capture_default_str();
  gen->add_option("--gripper-width", dcfg.gripper_width, "jaw opening in meters")
      ->capture_default_str();
  gen->add_option("--score-trials", dcfg.score_trials, "oracle trials per annotation")
      ->capture_default_str();

  // --- network/training flag block shared by pretrain and invert ---
  sf::NetworkConfig net;
  std::string config_path;
  std::map<std::string, json> tflags{
      {"lambda", 0.1},       {"lr", 2e-3},           {"rms_decay", 0.95},
      {"rms_epsilon", 1e-8}, {"rays_per_batch", 192}, {"grasps_per_batch", 64},
      {"samples_per_ray", 16}, {"steps", 4000},      {"epochs", 100},
      {"holdout_views", 5},  {"log_every", 200},     {"seed", 1}};
  std::map<std::string, int*> net_ints{
      {"latent_dim", &net.latent_dim},     {"width", &net.trunk_width},
      {"color_hidden", &net.color_hidden}, {"grasp_hidden", &net.grasp_hidden},
      {"grasp_layers", &net.grasp_hidden_layers}, {"pos_freqs", &net.pos_freqs},
      {"dir_freqs", &net.dir_freqs}};
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "JSON config file; explicit flags take precedence");
    for (auto& [key, value] : tflags) {
      if (key == "seed") continue;  // comes from --seed
      if (value.is_number_integer())
        cmd->add_option_function<int>(
               "--" + key, [&value](const int& v) { value = v; },
               "training parameter")
            ->default_str(value.dump());
      else
        cmd->add_option_function<double>(
               "--" + key, [&value](const double& v) { value = v; },
               "training parameter")
            ->default_str(value.dump());
    }
  };
  auto add_net_flags = [&](CLI::App* cmd) {
    cmd->add_option("--latent-dim", net.latent_dim)->capture_default_str();
    cmd->add_option("--width", net.trunk_width)->capture_default_str();
    cmd->add_option("--color-hidden", net.color_hidden)->capture_default_str();
    cmd->add_option("--grasp-hidden", net.grasp_hidden)->capture_default_str();
    cmd->add_option("--grasp-layers", net.grasp_hidden_layers)->capture_default_str();
    cmd->add_option("--pos-freqs", net.pos_freqs)->capture_default_str();
    cmd->add_option("--dir-freqs", net.dir_freqs)->capture_default_str();
    cmd->add_option("--coord-scale", net.coord_scale)->capture_default_str();
  };
  // config-file values fill in whatever the command line left at its default
  auto apply_config_file = [&](CLI::App* cmd) {
    if (config_path.empty()) return;
    std::ifstream f(config_path);
    if (!f) throw std::invalid_argument("cannot open config file: " + config_path);
    const json file_cfg = json::parse(f);
    for (auto& [key, value] : tflags) {
      if (key == "seed") continue;
      if (file_cfg.contains(key) && cmd->count("--" + key) == 0) value = file_cfg.at(key);
    }
    for (auto& [key, slot] : net_ints) {
      std::string flag = "--" + key;
      for (auto& ch : flag)
        if (ch == '_') ch = '-';
      if (file_cfg.contains(key) && cmd->count(flag) == 0) *slot = file_cfg.at(key).get<int>();
    }
    if (file_cfg.contains("coord_scale") && cmd->count("--coord-scale") == 0)
      net.coord_scale = file_cfg.at("coord_scale").get<double>();
  };

  // --- pretrain ---
  auto* pre = app.add_subcommand("pretrain", "train decoders + latent table on a dataset");
  add_common(pre);
  std::string data_dir;
  pre->add_option("--data", data_dir, "dataset directory from gen-data")->required();
  add_train_flags(pre);
  add_net_flags(pre);

  // --- invert ---
  auto* inv = app.add_subcommand("invert", "recover latent codes from a single image");
  add_common(inv);
  std::string ckpt_path, image_path, camera_path, layout_path, mode_str = "latent";
  int view_index = 0;
  inv->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  inv->add_option("--image", image_path, "target view (PNG)")->required();
  inv->add_option("--camera", camera_path, "camera json (bare or cameras.json)")->required();
  inv->add_option("--view-index", view_index, "view index when --camera lists views")
      ->capture_default_str();
  inv->add_option("--layout", layout_path, "scene layout json (poses + volumes)")->required();
  inv->add_option("--mode", mode_str, "latent | decoder | both")->capture_default_str();
  add_train_flags(inv);

  // --- render family ---
  std::string scene_path;
  int samples_per_ray = 64;
  auto add_render_flags = [&](CLI::App* cmd) {
    cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    cmd->add_option("--scene", scene_path, "scene json")->required();
    cmd->add_option("--camera", camera_path, "camera json")->required();
    cmd->add_option("--view-index", view_index)->capture_default_str();
    cmd->add_option("--samples", samples_per_ray, "samples per ray (J+1)")->capture_default_str();
  };
  auto* render_cmd = app.add_subcommand("render", "render RGB + depth + alpha");
  add_common(render_cmd);
  add_render_flags(render_cmd);
  auto* depth_cmd = app.add_subcommand("render-depth", "render the depth map only");
  add_common(depth_cmd);
  add_render_flags(depth_cmd);
  auto* gfield_cmd =
      app.add_subcommand("render-graspfield", "render with color-mapped grasp scores");
  add_common(gfield_cmd);
  add_render_flags(gfield_cmd);

  // --- grasp ---
  auto* grasp_cmd = app.add_subcommand("grasp", "grid proposal + density filtering");
  add_common(grasp_cmd);
  int object_id = 0, grid_res = 16, top_k = 5;
  double t_open = 1.0, t_closed = 50.0, gripper_width = 0.06;
  bool with_ground = false;
  grasp_cmd->add_option("--ckpt", ckpt_path)->required();
  grasp_cmd->add_option("--scene", scene_path)->required();
  grasp_cmd->add_option("--object-id", object_id, "object to grasp")->capture_default_str();
  grasp_cmd->add_option("--res", grid_res, "grid resolution per axis")->capture_default_str();
  grasp_cmd->add_option("--top-k", top_k)->capture_default_str();
  grasp_cmd->add_option("--t-open", t_open, "open-gripper density threshold")
      ->capture_default_str();
  grasp_cmd->add_option("--t-closed", t_closed, "closed-gripper density threshold")
      ->capture_default_str();
  grasp_cmd->add_option("--gripper-width", gripper_width)->capture_default_str();
  grasp_cmd->add_flag("--ground", with_ground, "treat z<0 as an infinite obstacle");

  // --- voxelize ---
  auto* vox_cmd = app.add_subcommand("voxelize", "extract an occupancy grid");
  add_common(vox_cmd);
  int vox_res = 32;
  double sigma_threshold = 50.0;
  bool scene_grid = false;
  vox_cmd->add_option("--ckpt", ckpt_path)->required();
  vox_cmd->add_option("--scene", scene_path)->required();
  vox_cmd->add_option("--object-id", object_id, "object grid (default object 0)")
      ->capture_default_str();
  vox_cmd->add_flag("--scene-grid", scene_grid, "one grid over the whole scene");
  vox_cmd->add_option("--res", vox_res)->capture_default_str();
  vox_cmd->add_option("--sigma-threshold", sigma_threshold)->capture_default_str();

  // --- eval ---
  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM between two images");
  add_common(eval_cmd);
  std::string img_a, img_b;
  eval_cmd->add_option("--a", img_a)->required();
  eval_cmd->add_option("--b", img_b)->required();

  // --- bench ---
  auto* bench_cmd = app.add_subcommand("bench", "render throughput report (not a gate)");
  add_common(bench_cmd);
  std::string bench_ckpt;
  int bench_size = 128, bench_samples = 32, bench_reps = 3;
  bench_cmd->add_option("--ckpt", bench_ckpt, "checkpoint (seeded random when omitted)");
  bench_cmd->add_option("--size", bench_size)->capture_default_str();
  bench_cmd->add_option("--samples", bench_samples)->capture_default_str();
  bench_cmd->add_option("--reps", bench_reps)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    sf::set_num_threads(ctx.threads);
    tflags["seed"] = ctx.seed;
    dcfg.seed = ctx.seed;
    fs::create_directories(ctx.out);

    if (gen->parsed()) {
      ctx.command = "gen-data";
      ctx.config = {{"objects", dcfg.num_train_objects},
                    {"test_objects", dcfg.num_test_objects},
                    {"views", dcfg.views_per_scene},
                    {"grasps", dcfg.grasps_per_object},
                    {"size", dcfg.image_size},
                    {"multi", dcfg.multi_object_scenes},
                    {"gripper_width", dcfg.gripper_width},
                    {"score_trials", dcfg.score_trials}};
      std::cerr << "generating dataset...\n";
      const sf::SceneDataset ds = sf::generate_dataset(dcfg);
      sf::save_dataset(ctx.path("dataset"), ds);
      ctx.write_manifest();
    } else if (pre->parsed()) {
      ctx.command = "pretrain";
      apply_config_file(pre);
      ctx.config = tflags;
      ctx.config["data"] = data_dir;
      ctx.config["latent_dim"] = net.latent_dim;
      ctx.config["width"] = net.trunk_width;
      ctx.config["color_hidden"] = net.color_hidden;
      ctx.config["grasp_hidden"] = net.grasp_hidden;
      ctx.config["grasp_layers"] = net.grasp_hidden_layers;
      ctx.config["pos_freqs"] = net.pos_freqs;
      ctx.config["dir_freqs"] = net.dir_freqs;
      ctx.config["coord_scale"] = net.coord_scale;
      ctx.add_input(data_dir + "/manifest.json");
      const sf::SceneDataset ds = sf::load_dataset(data_dir);
      const sf::TrainConfig tc = train_config_from(ctx.config);
      std::ofstream log(ctx.path("train_log.txt"));
      std::cerr << "pretraining for " << tc.steps << " steps...\n";
      const sf::PretrainResult r = sf::pretrain(ds, net, tc, &log);
      sf::save_checkpoint(ctx.path("checkpoint.bin"), r.checkpoint);
      json report;
      report["final_loss"] = r.final_loss;
      report["radiance_params"] = sf::radiance_param_count(net);
      report["grasp_params"] = sf::grasp_param_count(net);
      report["total_params"] = r.checkpoint.params.total_params();
      std::ofstream rf(ctx.path("report.json"));
      rf << report.dump(2) << "\n";
      ctx.write_manifest();
    } else if (inv->parsed()) {
      ctx.command = "invert";
      apply_config_file(inv);
      ctx.config = tflags;
      ctx.config["mode"] = mode_str;
      ctx.config["ckpt"] = ckpt_path;
      ctx.add_input(ckpt_path);
      ctx.add_input(image_path);
      ctx.add_input(camera_path);
      ctx.add_input(layout_path);
      const sf::Checkpoint ck = sf::load_checkpoint(ckpt_path);
      const sf::Image target = sf::read_png(image_path);
      const sf::Camera cam = load_camera_file(camera_path, view_index);
      const sf::Scene layout = sf::load_scene(layout_path);
      sf::TrainConfig tc = train_config_from(ctx.config);
      std::ofstream log(ctx.path("invert_log.txt"));
      std::cerr << "inverting for " << tc.epochs << " epochs...\n";
      const sf::FinetuneResult r = sf::finetune(target, cam, layout,
                                                sf::finetune_mode_from_string(mode_str), ck, tc,
                                                &log);
      json latents;
      for (size_t i = 0; i < r.latents.size(); ++i)
        latents["objects"].push_back({{"id", layout.objects[i].id},
                                      {"values", r.latents[i].values}});
      latents["best_loss"] = r.best_loss;
      latents["best_epoch"] = r.best_epoch;
      std::ofstream lf(ctx.path("latents.json"));
      lf << latents.dump(2) << "\n";
      sf::save_checkpoint(ctx.path("checkpoint.bin"), r.checkpoint);
      ctx.write_manifest();
    } else if (render_cmd->parsed() || depth_cmd->parsed() || gfield_cmd->parsed()) {
      ctx.command = render_cmd->parsed() ? "render"
                    : depth_cmd->parsed() ? "render-depth"
                                          : "render-graspfield";
      ctx.config = {{"samples", samples_per_ray}, {"scene", scene_path}};
      ctx.add_input(ckpt_path);
      ctx.add_input(scene_path);
      ctx.add_input(camera_path);
      const sf::Checkpoint ck = sf::load_checkpoint(ckpt_path);
      const sf::Scene scene = load_scene_with_checkpoint(scene_path, ck);
      const sf::Camera cam = load_camera_file(camera_path, view_index);
      if (gfield_cmd->parsed()) {
        const sf::RenderedImage img =
            sf::render_grasp_field(scene, ck.params, ck.config, cam, samples_per_ray);
        sf::write_png(ctx.path("graspfield.png"), img.rgb);
      } else {
        const sf::NetworkRadianceField field(ck.params, ck.config, scene);
        const sf::RenderedImage img = sf::render(scene, field, cam, samples_per_ray);
        write_render_outputs(ctx, img, render_cmd->parsed() ? "render" : "depth");
      }
      ctx.write_manifest();
    } else if (grasp_cmd->parsed()) {
      ctx.command = "grasp";
      ctx.config = {{"object_id", object_id}, {"res", grid_res},
                    {"top_k", top_k},         {"t_open", t_open},
                    {"t_closed", t_closed},   {"gripper_width", gripper_width},
                    {"ground", with_ground}};
      ctx.add_input(ckpt_path);
      ctx.add_input(scene_path);
      const sf::Checkpoint ck = sf::load_checkpoint(ckpt_path);
      const sf::Scene scene = load_scene_with_checkpoint(scene_path, ck);
      const sf::ObjectInstance* obj = scene.find(object_id);
      if (!obj) throw std::invalid_argument("scene has no object with the requested id");
      const auto proposals = sf::propose(*obj, ck.params, ck.config, grid_res, top_k);
      sf::SceneDensityField field = sf::density_field_from_network(ck.params, ck.config, scene);
      field.ground_plane = with_ground;
      const auto results = sf::filter(proposals, obj->pose, field,
                                      sf::make_gripper(gripper_width), t_open, t_closed);
      sf::write_grasp_file(ctx.path("grasps.txt"), object_id, results);
      ctx.write_manifest();
    } else if (vox_cmd->parsed()) {
      ctx.command = "voxelize";
      ctx.config = {{"res", vox_res},
                    {"sigma_threshold", sigma_threshold},
                    {"scene_grid", scene_grid},
                    {"object_id", object_id}};
      ctx.add_input(ckpt_path);
      ctx.add_input(scene_path);
      const sf::Checkpoint ck = sf::load_checkpoint(ckpt_path);
      const sf::Scene scene = load_scene_with_checkpoint(scene_path, ck);
      sf::VoxelGrid grid;
      if (scene_grid) {
        const sf::SceneDensityField field =
            sf::density_field_from_network(ck.params, ck.config, scene);
        grid = sf::voxelize_scene(scene, field, vox_res, sigma_threshold);
      } else {
        const sf::ObjectInstance* obj = scene.find(object_id);
        if (!obj) throw std::invalid_argument("scene has no object with the requested id");
        grid = sf::voxelize_object(*obj, ck.params, ck.config, vox_res, sigma_threshold);
      }
      sf::write_voxels_text(ctx.path("voxels.txt"), grid);
      sf::write_voxels_binary(ctx.path("voxels.bin"), grid);
      ctx.write_manifest();
    } else if (eval_cmd->parsed()) {
      ctx.command = "eval";
      ctx.config = {{"a", img_a}, {"b", img_b}};
      ctx.add_input(img_a);
      ctx.add_input(img_b);
      const sf::Image a = sf::read_png(img_a);
      const sf::Image b = sf::read_png(img_b);
      const sf::PsnrResult p = sf::psnr(a, b);
      json report;
      report["psnr_db"] = p.exact_match ? json("inf") : json(p.db);
      report["exact_match"] = p.exact_match;
      report["ssim"] = sf::ssim(a, b);
      std::ofstream f(ctx.path("eval.json"));
      f << report.dump(2) << "\n";
      ctx.write_manifest();
    } else if (bench_cmd->parsed()) {
      ctx.command = "bench";
      ctx.config = {{"size", bench_size}, {"samples", bench_samples}, {"reps", bench_reps}};
      sf::Checkpoint ck = bench_ckpt.empty()
                              ? sf::make_checkpoint(sf::NetworkConfig{}, 1, ctx.seed)
                              : sf::load_checkpoint(bench_ckpt);
      sf::Scene scene;
      sf::ObjectInstance obj;
      obj.volume.half_extents = {0.06, 0.05, 0.07};
      obj.latent = ck.latent_row(0);
      obj.id = 0;
      scene.objects.push_back(obj);
      const sf::Camera cam =
          sf::Camera::look_at({0, -0.9, 0.4}, {0, 0, 0}, {0, 0, 1},
                              190.0 * bench_size / 64.0, bench_size, bench_size);
      const sf::NetworkRadianceField field(ck.params, ck.config, scene);
      double best_ms = 1e30;
      for (int rep = 0; rep < bench_reps; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        const sf::RenderedImage img = sf::render(scene, field, cam, bench_samples);
        const auto t1 = std::chrono::steady_clock::now();
        best_ms = std::min(best_ms,
                           std::chrono::duration<double, std::milli>(t1 - t0).count());
        if (rep == 0) sf::write_png(ctx.path("bench.png"), img.rgb);
      }
      json report;
      report["best_ms"] = best_ms;
      report["size"] = bench_size;
      report["samples_per_ray"] = bench_samples;
      report["threads"] = ctx.threads;
      report["target_ms"] = 200.0;
      report["meets_target"] = best_ms <= 200.0;
      std::ofstream f(ctx.path("bench.json"));
      f << report.dump(2) << "\n";
      std::cerr << "render " << bench_size << "x" << bench_size << " took " << best_ms
                << " ms\n";
      ctx.write_manifest();
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
