#pragma once

#include <string>
#include <vector>

#include "contactservo/baseline.hpp"
#include "contactservo/controller.hpp"
#include "contactservo/dataset.hpp"
#include "contactservo/evaluation.hpp"
#include "contactservo/model.hpp"
#include "contactservo/sim.hpp"

namespace contactservo {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dynamics adapters for the servo loop.

class LearnedModelAdapter : public DynamicsAdapter {
 public:
  explicit LearnedModelAdapter(ModelParams params) : params_(std::move(params)) {}
  void observe(const PointCloud& v_ee, const WrenchHistory& h,
               const Pose& t_we) override;
  std::vector<PredictedContact> predict(
      const std::vector<TwistDelta>& actions) override;

 private:
  ModelParams params_;
  LatentState z0_;
  Pose t_we_;
};

class RigidBaselineAdapter : public DynamicsAdapter {
 public:
  explicit RigidBaselineAdapter(RigidToolModel tool) : tool_(std::move(tool)) {}
  void observe(const PointCloud&, const WrenchHistory&, const Pose& t_we) override {
    t_we_ = t_we;
  }
  std::vector<PredictedContact> predict(
      const std::vector<TwistDelta>& actions) override;

 private:
  RigidToolModel tool_;
  Pose t_we_;
};

/// Plans against the true simulator (test oracle).
class OracleSimAdapter : public DynamicsAdapter {
 public:
  void observe(const PointCloud&, const WrenchHistory&, const Pose&) override {}
  void observe_state(const SimState& s) override { state_ = s; }
  std::vector<PredictedContact> predict(
      const std::vector<TwistDelta>& actions) override;

 private:
  SimState state_;
};

// ---------------------------------------------------------------------------
// Experiment configuration (JSON file with dotted-path overrides).

struct ExperimentConfig {
  uint64_t seed = 1;
  std::string output_dir = "out";
  std::vector<ToolSpec> train_tools;
  ToolSpec unseen_tool;
  ImpedanceSpec impedance;
  SceneSpec scene;
  int episodes_per_tool = 50;
  CollectParams collect;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  int horizon = 3;
  ModelConfig model;
  LossWeights loss_weights;
  TrainOptions train_opts;
  MppiConfig mppi;
  ServoConfig servo_cfg;
  std::string goals_dir = "configs/goals";
  int servo_runs = 5;
  int servo_max_steps = 150;
  // Scrape scenario: the patch sits inside the straight-scrape corridor.
  Eigen::Vector2d material_origin{0.085, -0.034};
  Eigen::Vector2d material_size{0.05, 0.068};
  double material_cell = 0.002;
  double material_mass_per_cell = 5e-4;
  std::string config_hash;
};

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});
ExperimentConfig config_from_json_text(const std::string& text,
                                       const std::vector<std::string>& overrides = {});

// ---------------------------------------------------------------------------
// Pipeline commands (shared by the CLI and the acceptance suite). Every
// artifact lands under cfg.output_dir; reruns with identical config and seed
// are byte-identical.

std::string cmd_collect(const ExperimentConfig& cfg);  // returns manifest path
std::string cmd_augment(const ExperimentConfig& cfg, const std::string& manifest_path);
std::string cmd_train(const ExperimentConfig& cfg, const std::string& manifest_path,
                      ModelVariant variant);
std::vector<PredictionReport> cmd_eval(const ExperimentConfig& cfg,
                                       const std::string& manifest_path,
                                       const std::vector<std::string>& model_paths,
                                       bool include_baseline, bool unseen_tool);

struct ServoTrialResult {
  std::string trajectory;
  uint64_t seed = 0;
  double iou = 0.0;
  bool aborted = false;
  int collisions = 0;
  double mass_removed = 0.0;
  double footprint_removed = 0.0;
};

/// Servos along one goal file; returns the IoU of goal vs realized swept
/// area and writes the per-step log.
ServoTrialResult run_servo_trial(const ExperimentConfig& cfg,
                                 DynamicsAdapter& adapter,
                                 const GoalTrajectory& goals,
                                 const std::string& trajectory_name,
                                 uint64_t seed, const ToolSpec& tool,
                                 const SceneSpec& scene,
                                 const std::string& log_path = "");

/// Initial pose used by servo/scrape runs: light leading-edge contact at the
/// origin, matching the bundled goal trajectories.
Pose servo_start_pose(const ToolSpec& tool);
SimState servo_start_state(const ExperimentConfig& cfg, const ToolSpec& tool,
                           const SceneSpec& scene, uint64_t seed);

/// Scene with the play-dough patch (and optionally obstacles) configured.
SceneSpec scrape_scene(const ExperimentConfig& cfg, bool with_obstacles);

std::vector<ServoTrialResult> cmd_servo(const ExperimentConfig& cfg,
                                        const std::string& model_path,
                                        bool use_baseline, bool unseen_tool);
std::vector<ServoTrialResult> cmd_scrape(const ExperimentConfig& cfg,
                                         const std::string& model_path,
                                         bool with_obstacles);
void cmd_plot(const ExperimentConfig& cfg);

}  // namespace contactservo
