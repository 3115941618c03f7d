#include "contactservo/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "contactservo/jsonio.hpp"
#include "contactservo/parallel.hpp"
#include "contactservo/perception.hpp"
#include "contactservo/rng.hpp"

namespace contactservo {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Adapters

void LearnedModelAdapter::observe(const PointCloud& v_ee,
                                  const WrenchHistory& h, const Pose& t_we) {
  z0_ = encode(params_, v_ee, h);
  t_we_ = t_we;
}

std::vector<PredictedContact> LearnedModelAdapter::predict(
    const std::vector<TwistDelta>& actions) {
  const auto steps = rollout_from_latent(params_, z0_, t_we_, actions);
  std::vector<PredictedContact> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back({s.c_b_prob, s.line_world, s.wrench});
  return out;
}

std::vector<PredictedContact> RigidBaselineAdapter::predict(
    const std::vector<TwistDelta>& actions) {
  const auto preds = rigid_rollout(tool_, t_we_, actions);
  std::vector<PredictedContact> out;
  out.reserve(preds.size());
  Pose t_we = t_we_;
  std::size_t t = 0;
  for (const auto& p : preds) {
    PredictedContact pc;
    pc.c_b_prob = p.c_b;
    if (p.line_world) {
      pc.line_world = *p.line_world;
    } else {
      // No penetration: steer with the lowest tool point projected onto the
      // table so the line cost still pulls toward the goal.
      Vec3 lowest = apply(t_we, tool_.tool_cloud_ee.front());
      for (const auto& q : tool_.tool_cloud_ee) {
        const Vec3 qw = apply(t_we, q);
        if (qw.z() < lowest.z()) lowest = qw;
      }
      lowest.z() = 0.0;
      pc.line_world = {lowest, lowest};
    }
    pc.wrench.setZero();  // baseline predicts no wrench
    out.push_back(pc);
    if (t < actions.size()) t_we = compose(t_we, exp_delta(actions[t]));
    ++t;
  }
  return out;
}

std::vector<PredictedContact> OracleSimAdapter::predict(
    const std::vector<TwistDelta>& actions) {
  std::vector<PredictedContact> out;
  SimState s = state_;
  out.push_back({static_cast<double>(s.contact.c_b), s.contact.line,
                 s.contact.wrench});
  for (const auto& a : actions) {
    try {
      s = step(s, a);
      out.push_back({static_cast<double>(s.contact.c_b), s.contact.line,
                     s.contact.wrench});
    } catch (const SimError&) {
      PredictedContact far;
      far.line_world = {Vec3(0, 0, 1e6), Vec3(0, 0, 1e6)};
      out.push_back(far);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config

namespace {

ToolSpec tool_from_json(const json& j, const ToolSpec& base = {}) {
  ToolSpec t = base;
  t.blade_width = j.value("blade_width", t.blade_width);
  t.blade_length = j.value("blade_length", t.blade_length);
  t.handle_length = j.value("handle_length", t.handle_length);
  t.mount_angle = j.value("mount_angle", t.mount_angle);
  t.bend_stiffness = j.value("bend_stiffness", t.bend_stiffness);
  t.normal_stiffness = j.value("normal_stiffness", t.normal_stiffness);
  t.friction_mu = j.value("friction_mu", t.friction_mu);
  t.name = j.value("name", t.name);
  return t;
}

void apply_override(json& j, const std::string& expr) {
  const auto eq = expr.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must be key=value: " + expr);
  const std::string path = expr.substr(0, eq);
  const std::string value = expr.substr(eq + 1);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (dot == std::string::npos) {
      try {
        (*node)[key] = json::parse(value);
      } catch (const json::exception&) {
        (*node)[key] = value;  // plain string
      }
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text,
                                       const std::vector<std::string>& overrides) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(j, o);
  if (j.value("schema", 0) != 1)
    throw ConfigError("config: unsupported or missing schema (expected 1)");

  ExperimentConfig cfg;
  cfg.seed = j.value("seed", 1ull);
  cfg.output_dir = j.value("output_dir", "out");

  if (j.contains("tools")) {
    for (const auto& t : j["tools"].value("train", json::array()))
      cfg.train_tools.push_back(tool_from_json(t));
    if (j["tools"].contains("unseen"))
      cfg.unseen_tool = tool_from_json(j["tools"]["unseen"]);
  }
  if (cfg.train_tools.empty()) {
    ToolSpec a, b, c;
    a.blade_width = 0.06; a.bend_stiffness = 1.0; a.name = "train-60";
    b.blade_width = 0.08; b.bend_stiffness = 2.0; b.name = "train-80";
    c.blade_width = 0.10; c.bend_stiffness = 4.0; c.name = "train-100";
    cfg.train_tools = {b, a, c};  // first entry is the primary servo tool
    cfg.unseen_tool.blade_width = 0.09;
    cfg.unseen_tool.bend_stiffness = 3.0;
    cfg.unseen_tool.name = "unseen-90";
  }
  for (const auto& t : cfg.train_tools) t.validate();
  cfg.unseen_tool.validate();

  if (j.contains("impedance")) {
    cfg.impedance.kp_trans = j["impedance"].value("kp_trans", 600.0);
    cfg.impedance.kp_rot = j["impedance"].value("kp_rot", 30.0);
  }
  if (j.contains("camera")) {
    const auto& c = j["camera"];
    cfg.scene.camera.translation =
        Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
  }

  const json d = j.value("dataset", json::object());
  cfg.episodes_per_tool = d.value("episodes_per_tool", 50);
  cfg.collect.length = d.value("length", 50);
  cfg.collect.point_count = d.value("point_count", 1024);
  if (d.contains("split")) {
    for (int i = 0; i < 3; ++i) cfg.split_ratios[i] = d["split"].at(i).get<double>();
  }
  const json r = d.value("render", json::object());
  cfg.collect.render.density = r.value("density", 15000.0);
  cfg.collect.render.tool_density_factor = r.value("tool_density_factor", 6.0);
  cfg.collect.render.noise_sigma = r.value("noise_sigma", 0.002);

  const json m = j.value("model", json::object());
  cfg.model.variant = variant_from_name(m.value("variant", "full"));
  cfg.model.latent_dim = m.value("latent_dim", 128);
  cfg.model.point_count = m.value("point_count", cfg.collect.point_count);

  const json lw = j.value("loss", json::object());
  cfg.loss_weights.alpha = lw.value("alpha", 100.0);
  cfg.loss_weights.beta = lw.value("beta", 0.1);
  cfg.loss_weights.rho = lw.value("rho", 0.1);
  cfg.loss_weights.gamma = lw.value("gamma", 0.1);

  const json tr = j.value("train", json::object());
  cfg.train_opts.learning_rate = tr.value("learning_rate", 1e-3);
  cfg.train_opts.batch_size = tr.value("batch_size", 32);
  cfg.train_opts.max_epochs = tr.value("max_epochs", 60);
  cfg.train_opts.patience = tr.value("patience", 10);
  cfg.train_opts.threads = tr.value("threads", 2);
  cfg.train_opts.stop_gradient_targets = tr.value("stop_gradient_targets", false);
  cfg.train_opts.seed = cfg.seed;

  cfg.horizon = j.value("horizon", 3);

  const json mp = j.value("mppi", json::object());
  cfg.mppi.samples = mp.value("samples", 256);
  cfg.mppi.temperature = mp.value("temperature", 0.02);
  cfg.mppi.noise_trans = mp.value("noise_trans", 0.005);
  cfg.mppi.noise_rot = mp.value("noise_rot", 0.03);
  cfg.mppi.horizon = cfg.horizon;

  const json sv = j.value("servo", json::object());
  cfg.servo_cfg.psi = sv.value("psi", 0.45);
  cfg.servo_cfg.phi = sv.value("phi", 0.05);
  cfg.servo_cfg.goal_advance_eps = sv.value("goal_advance_eps", 0.005);
  cfg.servo_cfg.max_steps = sv.value("max_steps", 150);
  cfg.servo_cfg.wrench_offset_enabled = sv.value("wrench_offset", false);
  cfg.servo_runs = sv.value("runs", 5);
  cfg.servo_max_steps = cfg.servo_cfg.max_steps;

  cfg.goals_dir = j.value("goals_dir", "configs/goals");

  const json mat = j.value("material", json::object());
  if (mat.contains("origin"))
    cfg.material_origin = Eigen::Vector2d(mat["origin"].at(0).get<double>(),
                                          mat["origin"].at(1).get<double>());
  if (mat.contains("size"))
    cfg.material_size = Eigen::Vector2d(mat["size"].at(0).get<double>(),
                                        mat["size"].at(1).get<double>());
  cfg.material_cell = mat.value("cell", 0.002);
  cfg.material_mass_per_cell = mat.value("mass_per_cell", 5e-4);

  cfg.config_hash = hash_hex(j.dump());
  return cfg;
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), {});
  return config_from_json_text(text, overrides);
}

// ---------------------------------------------------------------------------
// Pipeline

std::string cmd_collect(const ExperimentConfig& cfg) {
  const fs::path dir = fs::path(cfg.output_dir) / "dataset";
  fs::create_directories(dir);

  struct Job {
    ToolSpec tool;
    uint64_t seed;
    std::string path;
  };
  std::vector<Job> jobs;
  DatasetManifest manifest;
  manifest.config_hash = cfg.config_hash;
  for (std::size_t ti = 0; ti < cfg.train_tools.size(); ++ti) {
    for (int e = 0; e < cfg.episodes_per_tool; ++e) {
      const uint64_t seed = stream_key(cfg.seed, 1000 + ti, e);
      const std::string name =
          "ep_" + cfg.train_tools[ti].name + "_" + std::to_string(e) + ".jsonl";
      jobs.push_back({cfg.train_tools[ti], seed, (dir / name).string()});
      manifest.episodes.push_back(
          {name, cfg.train_tools[ti].name, seed, Split::kTrain});
    }
  }

  parallel_for(jobs.size(), cfg.train_opts.threads, [&](std::size_t i) {
    const EpisodeRecord ep = collect_episode(cfg.scene, jobs[i].tool,
                                             cfg.impedance, cfg.collect,
                                             jobs[i].seed);
    write_episode(ep, jobs[i].path, cfg.config_hash);
  });

  manifest = split_dataset(manifest, cfg.split_ratios, cfg.seed);
  const std::string manifest_path = (dir / "manifest.json").string();
  write_manifest(manifest, manifest_path);
  return manifest_path;
}

std::string cmd_augment(const ExperimentConfig& cfg,
                        const std::string& manifest_path) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const fs::path out_dir = fs::path(cfg.output_dir) / "dataset_aug";
  fs::create_directories(out_dir);

  std::map<std::string, ToolSpec> tools;
  for (const auto& t : cfg.train_tools) tools[t.name] = t;
  tools[cfg.unseen_tool.name] = cfg.unseen_tool;

  DatasetManifest out = manifest;
  out.config_hash = cfg.config_hash;
  parallel_for(manifest.episodes.size(), cfg.train_opts.threads,
               [&](std::size_t i) {
    const auto& entry = manifest.episodes[i];
    fs::path src(entry.path);
    if (src.is_relative()) src = fs::path(manifest_path).parent_path() / src;
    EpisodeRecord ep = read_episode(src.string());
    const ToolSpec& tool = tools.count(entry.tool) ? tools.at(entry.tool)
                                                   : cfg.train_tools.front();
    for (auto& rec : ep.transitions) {
      PointCloud world;
      world.reserve(rec.v_ee.size());
      for (const auto& p : rec.v_ee) world.push_back(apply(rec.t_we, p));
      const Vec3 center =
          rec.c_l_ee ? apply(rec.t_we, rec.c_l_ee->centroid())
                     : apply(rec.t_we, blade_point_ee(tool, tool.blade_length,
                                                      0.0, 0.0));
      RngStream rng = RngStream::of(cfg.seed, 0xA06, ep.seed, rec.t);
      const PointCloud augmented =
          augment_occlusion(world, cfg.scene.camera, center, rng);
      const PointCloud clipped =
          clip_to_ee_frame(augmented, rec.t_we, cfg.collect.clip_box);
      rec.v_ee = farthest_point_downsample(
          clipped, cfg.collect.point_count, stream_key(ep.seed, 0xA07, rec.t));
    }
    write_episode(ep, (out_dir / entry.path).string(), cfg.config_hash);
  });

  const std::string out_manifest = (out_dir / "manifest.json").string();
  write_manifest(out, out_manifest);
  return out_manifest;
}

namespace {

std::vector<WindowData> windows_for_split(const ExperimentConfig& cfg,
                                          const std::string& manifest_path,
                                          Split split) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const auto episodes = load_split(manifest, manifest_path, split);
  std::vector<WindowData> out;
  for (const auto& ep : episodes)
    for (const auto& w : make_training_windows(ep, cfg.horizon))
      out.push_back(pack_window(w, cfg.model.point_count));
  return out;
}

}  // namespace

std::string cmd_train(const ExperimentConfig& cfg,
                      const std::string& manifest_path, ModelVariant variant) {
  const auto train_w = windows_for_split(cfg, manifest_path, Split::kTrain);
  const auto val_w = windows_for_split(cfg, manifest_path, Split::kVal);

  ModelConfig mc = cfg.model;
  mc.variant = variant;
  TrainOptions opts = cfg.train_opts;
  opts.on_epoch = [&](int e, double tr, double va) {
    std::cout << "[train " << variant_name(variant) << "] epoch " << e
              << " train " << tr << " val " << va << std::endl;
  };

  const TrainResult result = train(train_w, val_w, mc, cfg.loss_weights, opts);

  const fs::path dir = fs::path(cfg.output_dir) / "models";
  fs::create_directories(dir);
  const std::string model_path =
      (dir / ("model_" + variant_name(variant) + ".json")).string();
  save_model(result.params, model_path, cfg.config_hash);

  std::vector<std::vector<double>> rows;
  for (std::size_t e = 0; e < result.train_losses.size(); ++e)
    rows.push_back({static_cast<double>(e), result.train_losses[e],
                    result.val_losses[e]});
  write_csv((dir / ("train_curve_" + variant_name(variant) + ".csv")).string(),
            {"epoch", "train_loss", "val_loss"}, rows);
  return model_path;
}

std::vector<PredictionReport> cmd_eval(const ExperimentConfig& cfg,
                                       const std::string& manifest_path,
                                       const std::vector<std::string>& model_paths,
                                       bool include_baseline, bool unseen_tool) {
  std::vector<WindowData> windows;
  if (unseen_tool) {
    const int n_eps = std::max(3, cfg.episodes_per_tool / 10 + 2);
    std::vector<EpisodeRecord> eps(n_eps);
    parallel_for(n_eps, cfg.train_opts.threads, [&](std::size_t e) {
      eps[e] = collect_episode(cfg.scene, cfg.unseen_tool, cfg.impedance,
                               cfg.collect, stream_key(cfg.seed, 0xE0E, e));
    });
    for (const auto& ep : eps)
      for (const auto& w : make_training_windows(ep, cfg.horizon))
        windows.push_back(pack_window(w, cfg.model.point_count));
  } else {
    windows = windows_for_split(cfg, manifest_path, Split::kTest);
  }
  if (windows.empty()) throw EvaluationError("cmd_eval: no test windows");

  std::vector<PredictionReport> reports;
  for (const auto& path : model_paths) {
    const ModelParams params = load_model(path);
    PredictionReport rep = prediction_metrics(
        model_predictor(params), windows,
        variant_name(params.config.variant) + (unseen_tool ? "_unseen" : ""));
    rep.pose_error = pose_propagation_error(params, windows);
    reports.push_back(std::move(rep));
  }

  if (include_baseline) {
    std::map<std::string, RigidToolModel> tools;
    for (const auto& t : cfg.train_tools)
      tools.emplace(t.name, RigidToolModel::from_tool(t));
    tools.emplace(cfg.unseen_tool.name,
                  RigidToolModel::from_tool(cfg.unseen_tool));
    const WindowPredictor dispatch = [tools](const WindowData& w) {
      const auto it = tools.find(w.tool);
      if (it == tools.end())
        throw EvaluationError("baseline: unknown tool " + w.tool);
      return baseline_predictor(it->second)(w);
    };
    reports.push_back(prediction_metrics(
        dispatch, windows,
        std::string("rigid_baseline") + (unseen_tool ? "_unseen" : "")));
  }

  const fs::path dir = fs::path(cfg.output_dir) / "eval";
  fs::create_directories(dir);
  write_prediction_report_csv(
      reports, (dir / (unseen_tool ? "prediction_report_unseen.csv"
                                   : "prediction_report.csv")).string());
  return reports;
}

Pose servo_start_pose(const ToolSpec& tool) {
  const ToolFrame f = tool_frame(tool);
  Pose p;
  p.translation = Vec3(
      0.0, 0.0,
      0.002 + tool.handle_length + tool.blade_length * std::sin(f.pitch));
  return p;
}

SimState servo_start_state(const ExperimentConfig& cfg, const ToolSpec& tool,
                           const SceneSpec& scene, uint64_t seed) {
  return reset(scene, tool, cfg.impedance, servo_start_pose(tool), seed);
}

SceneSpec scrape_scene(const ExperimentConfig& cfg, bool with_obstacles) {
  SceneSpec scene = cfg.scene;
  MaterialGrid grid;
  grid.cell_size = cfg.material_cell;
  Eigen::Vector2d origin = cfg.material_origin;
  Eigen::Vector2d size = cfg.material_size;
  if (with_obstacles) {
    // The avoid trajectory keeps corner contact on the -y side; the target
    // patch sits under that corridor.
    origin = Eigen::Vector2d(cfg.material_origin.x(), -0.062);
    size = Eigen::Vector2d(cfg.material_size.x(), 0.038);
  }
  grid.origin = origin;
  grid.mass = Eigen::MatrixXd::Constant(
      std::max(1, static_cast<int>(std::lround(size.x() / grid.cell_size))),
      std::max(1, static_cast<int>(std::lround(size.y() / grid.cell_size))),
      cfg.material_mass_per_cell);
  scene.material = grid;
  if (with_obstacles) {
    // A full-width sweep would plow through this; the corner-contact
    // trajectory passes beside it.
    Ellipsoid ob;
    ob.semi_axes = Vec3(0.018, 0.02, 0.0075);
    ob.center = Vec3(origin.x() + 0.5 * size.x(), 0.032, ob.semi_axes.z());
    scene.obstacles.push_back(ob);
  }
  return scene;
}

ServoTrialResult run_servo_trial(const ExperimentConfig& cfg,
                                 DynamicsAdapter& adapter,
                                 const GoalTrajectory& goals,
                                 const std::string& trajectory_name,
                                 uint64_t seed, const ToolSpec& tool,
                                 const SceneSpec& scene,
                                 const std::string& log_path) {
  SimState env = servo_start_state(cfg, tool, scene, seed);
  const double before_mass = scene.material ? scene.material->total_mass() : 0.0;

  const ServoResult result =
      servo(env, adapter, goals, cfg.mppi, cfg.servo_cfg, seed,
            cfg.collect.render, cfg.collect.clip_box, cfg.train_opts.threads);

  ServoTrialResult trial;
  trial.trajectory = trajectory_name;
  trial.seed = seed;
  trial.aborted = result.aborted;
  trial.collisions = result.final_state.collision_count;

  // IoU of the goal area and the realized swept area, on a merged raster.
  std::vector<char> goal_flags(goals.goals.size(), 1);
  RasterFrame frame = RasterFrame::covering(goals.goals);
  if (!result.realized_lines.empty())
    frame = RasterFrame::merge(frame, RasterFrame::covering(result.realized_lines));
  const AreaMask goal_mask = swept_area(goals.goals, goal_flags, frame);
  const AreaMask swept =
      swept_area(result.realized_lines, result.realized_contact, frame);
  trial.iou = iou(goal_mask, swept);

  if (scene.material && before_mass > 0.0) {
    const auto [mass, footprint] =
        scrape_metrics(*scene.material, *result.final_state.scene.material);
    trial.mass_removed = mass;
    trial.footprint_removed = footprint;
  }
  if (!log_path.empty()) write_servo_log(result, log_path, cfg.config_hash);
  return trial;
}

std::vector<ServoTrialResult> cmd_servo(const ExperimentConfig& cfg,
                                        const std::string& model_path,
                                        bool use_baseline, bool unseen_tool) {
  const ToolSpec tool = unseen_tool ? cfg.unseen_tool : cfg.train_tools.front();
  const fs::path dir = fs::path(cfg.output_dir) / "servo";
  fs::create_directories(dir);

  std::vector<ServoTrialResult> results;
  const std::array<std::string, 4> trajectories = {"straight", "v_shape",
                                                   "tilt", "tilt_back"};
  for (const auto& name : trajectories) {
    const GoalTrajectory goals =
        GoalTrajectory::load((fs::path(cfg.goals_dir) / (name + ".json")).string());
    for (int run = 0; run < cfg.servo_runs; ++run) {
      const uint64_t seed = stream_key(cfg.seed, 0x5EB0, results.size(), run);
      std::unique_ptr<DynamicsAdapter> adapter;
      std::string label;
      if (use_baseline) {
        adapter = std::make_unique<RigidBaselineAdapter>(
            RigidToolModel::from_tool(tool));
        label = "baseline";
      } else {
        adapter = std::make_unique<LearnedModelAdapter>(load_model(model_path));
        label = "model";
      }
      if (unseen_tool) label += "_unseen";
      const std::string log_path =
          (dir / (name + "_" + label + "_run" + std::to_string(run) + ".jsonl"))
              .string();
      results.push_back(run_servo_trial(cfg, *adapter, goals, name, seed, tool,
                                        cfg.scene, log_path));
    }
  }

  std::ofstream f((dir / ("servo_iou_" +
                          std::string(use_baseline ? "baseline" : "model") +
                          (unseen_tool ? "_unseen" : "") + ".csv")).string(),
                  std::ios::binary);
  f << "trajectory,seed,iou,aborted,collisions\n";
  for (const auto& r : results)
    f << r.trajectory << "," << r.seed << "," << fmt_g9(r.iou) << ","
      << (r.aborted ? 1 : 0) << "," << r.collisions << "\n";
  return results;
}

std::vector<ServoTrialResult> cmd_scrape(const ExperimentConfig& cfg,
                                         const std::string& model_path,
                                         bool with_obstacles) {
  const ToolSpec tool = cfg.train_tools.front();
  const fs::path dir = fs::path(cfg.output_dir) / "scrape";
  fs::create_directories(dir);

  const SceneSpec scene = scrape_scene(cfg, with_obstacles);
  const std::string traj = with_obstacles ? "scrape_avoid" : "straight";
  const GoalTrajectory goals =
      GoalTrajectory::load((fs::path(cfg.goals_dir) / (traj + ".json")).string());

  std::vector<ServoTrialResult> results;
  for (int run = 0; run < cfg.servo_runs; ++run) {
    const uint64_t seed = stream_key(cfg.seed, 0x5C8A, with_obstacles ? 1 : 0, run);
    LearnedModelAdapter adapter(load_model(model_path));
    const std::string log_path =
        (dir / (traj + (with_obstacles ? "_obstacles" : "_free") + "_run" +
                std::to_string(run) + ".jsonl")).string();
    results.push_back(run_servo_trial(cfg, adapter, goals, traj, seed, tool,
                                      scene, log_path));
  }

  std::ofstream f((dir / (std::string("scrape_metrics_") +
                          (with_obstacles ? "obstacles" : "free") + ".csv"))
                      .string(),
                  std::ios::binary);
  f << "trajectory,seed,mass_removed,footprint_removed,collisions,aborted\n";
  for (const auto& r : results)
    f << r.trajectory << "," << r.seed << "," << fmt_g9(r.mass_removed) << ","
      << fmt_g9(r.footprint_removed) << "," << r.collisions << ","
      << (r.aborted ? 1 : 0) << "\n";
  return results;
}

void cmd_plot(const ExperimentConfig& cfg) {
  const fs::path out = fs::path(cfg.output_dir) / "plots";
  fs::create_directories(out);

  const fs::path eval_csv = fs::path(cfg.output_dir) / "eval" / "prediction_report.csv";
  if (fs::exists(eval_csv)) {
    std::ifstream f(eval_csv);
    std::string line;
    std::getline(f, line);  // header
    std::map<std::string, std::vector<double>> acc, line_err, force_err;
    while (std::getline(f, line)) {
      std::stringstream ss(line);
      std::string series, cell;
      std::getline(ss, series, ',');
      std::vector<double> vals;
      while (std::getline(ss, cell, ','))
        vals.push_back(cell == "nan" || cell == "-nan" ? std::nan("") : std::stod(cell));
      if (vals.size() >= 5) {
        acc[series].push_back(vals[1]);
        line_err[series].push_back(vals[2]);
        force_err[series].push_back(vals[3]);
      }
    }
    auto emit = [&](const std::string& name, const std::string& title,
                    const std::map<std::string, std::vector<double>>& data) {
      std::vector<std::string> labels;
      std::vector<std::vector<double>> series;
      for (const auto& [k, v] : data) {
        labels.push_back(k);
        series.push_back(v);
      }
      write_line_chart_svg((out / name).string(), title, labels, series);
    };
    emit("binary_accuracy.svg", "Binary contact accuracy per step", acc);
    emit("line_error.svg", "Contact line RMS error (m) per step", line_err);
    emit("force_error.svg", "Force RMS error (N) per step", force_err);
  }

  for (const std::string stem : {"servo_iou_model", "servo_iou_baseline",
                                 "servo_iou_model_unseen"}) {
    const fs::path csv = fs::path(cfg.output_dir) / "servo" / (stem + ".csv");
    if (!fs::exists(csv)) continue;
    std::ifstream f(csv);
    std::string line;
    std::getline(f, line);
    std::map<std::string, std::pair<double, int>> sums;
    while (std::getline(f, line)) {
      std::stringstream ss(line);
      std::string traj, cell;
      std::getline(ss, traj, ',');
      std::getline(ss, cell, ',');
      std::getline(ss, cell, ',');
      sums[traj].first += std::stod(cell);
      sums[traj].second += 1;
    }
    std::vector<std::string> labels;
    std::vector<double> means;
    for (const auto& [k, v] : sums) {
      labels.push_back(k);
      means.push_back(v.first / std::max(1, v.second));
    }
    write_bar_chart_svg((out / (stem + ".svg")).string(),
                        "Swept-area IoU: " + stem, labels, means);
  }

  for (const std::string stem : {"scrape_metrics_free", "scrape_metrics_obstacles"}) {
    const fs::path csv = fs::path(cfg.output_dir) / "scrape" / (stem + ".csv");
    if (!fs::exists(csv)) continue;
    std::ifstream f(csv);
    std::string line;
    std::getline(f, line);
    double mass = 0, fp = 0;
    int n = 0;
    while (std::getline(f, line)) {
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      std::getline(ss, cell, ',');
      std::getline(ss, cell, ',');
      mass += std::stod(cell);
      std::getline(ss, cell, ',');
      fp += std::stod(cell);
      ++n;
    }
    if (n) {
      write_bar_chart_svg((fs::path(cfg.output_dir) / "plots" / (stem + ".svg")).string(),
                          "Scrape results: " + stem,
                          {"mass_removed", "footprint_removed"},
                          {mass / n, fp / n});
    }
  }
}

}  // namespace contactservo
