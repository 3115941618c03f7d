#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "contactservo/contact.hpp"
#include "contactservo/perception.hpp"
#include "contactservo/se3.hpp"
#include "contactservo/sim.hpp"

namespace contactservo {

struct ControllerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Ordered desired contact lines; consecutive centroids at most 2 cm apart
/// after resampling.
struct GoalTrajectory {
  std::vector<ContactLine> goals;

  static GoalTrajectory load(const std::string& path);
  void save(const std::string& path) const;
  /// Inserts interpolated lines so consecutive centroids are within
  /// max_spacing.
  void resample(double max_spacing = 0.02);
};

struct MppiConfig {
  int samples = 256;
  double temperature = 0.02;
  double noise_trans = 0.005;  // m, per axis
  double noise_rot = 0.03;     // rad, per axis
  int horizon = 3;
  ActionBounds bounds;
  int iterations = 1;
};

struct ServoConfig {
  double psi = 0.45;  // contact likelihood threshold
  double phi = 0.05;  // penalty weight
  double goal_advance_eps = 0.005;  // m
  int max_steps = 150;
  bool wrench_offset_enabled = false;
};

/// Minimum over the two endpoint correspondences of the mean endpoint
/// distance.
double line_distance(const ContactLine& a, const ContactLine& b);

struct PredictedContact {
  double c_b_prob = 0.0;
  ContactLine line_world;
  Vec6 wrench{Vec6::Zero()};
};

/// Model interface the controller plans against. observe() is called once
/// per control step; predict() maps a candidate action sequence to T+1
/// predicted contacts (t = 0..T). observe_state() exposes the simulator
/// state before each plan; only oracle adapters use it.
class DynamicsAdapter {
 public:
  virtual ~DynamicsAdapter() = default;
  virtual void observe(const PointCloud& v_ee, const WrenchHistory& h,
                       const Pose& t_we) = 0;
  virtual void observe_state(const SimState&) {}
  virtual std::vector<PredictedContact> predict(
      const std::vector<TwistDelta>& actions) = 0;
};

/// Hinged contact-maintenance cost over predictions t = 1..T:
/// sum_t d(l_t, g_t) + phi * max(0, psi - c_b_t).
double trajectory_cost(const std::vector<PredictedContact>& pred,
                       const std::vector<ContactLine>& goals,
                       const ServoConfig& cfg);

struct MppiDiagnostics {
  double best_cost = 0.0;
  double weighted_cost = 0.0;
  double contact_penalty_share = 0.0;
  bool all_out_of_contact = false;  // every sample violated at every step
};

/// One MPPI update: K perturbed sequences, exponential weighting by cost,
/// weighted-noise update, per-axis clamping. Deterministic given rng_key.
std::vector<TwistDelta> mppi_plan(
    const std::function<std::vector<PredictedContact>(
        const std::vector<TwistDelta>&)>& predict,
    const std::vector<TwistDelta>& nominal,
    const std::vector<ContactLine>& goals, const MppiConfig& mcfg,
    const ServoConfig& scfg, uint64_t rng_key,
    MppiDiagnostics* diagnostics = nullptr, int threads = 1);

/// Compensating action for a wrench prediction error: delta_w / k_p,
/// translation from force, rotation from torque, clamped to bounds.
TwistDelta wrench_offset_action(const Vec6& predicted_wrench,
                                const Vec6& measured_wrench,
                                const ImpedanceSpec& imp,
                                const ActionBounds& bounds = {});

struct ServoStepLog {
  int step = 0;
  Pose commanded;
  Pose realized;
  TwistDelta action;
  PredictedContact predicted;  // model's t=1 prediction for this action
  ContactState true_contact;
  int goal_index = 0;
  double plan_cost = 0.0;
  double contact_penalty_share = 0.0;
  bool obstacle_collision = false;
};

struct ServoResult {
  std::vector<ServoStepLog> steps;
  SimState final_state;
  bool aborted = false;
  std::string abort_reason;
  int goals_reached = 0;
  std::vector<ContactLine> realized_lines;  // true lines while in contact
  std::vector<char> realized_contact;
};

/// Receding-horizon servo loop: observe, plan with MPPI, execute the first
/// action (plus the wrench-offset action when enabled), advance the goal
/// index while the current line is within goal_advance_eps of the next goal.
ServoResult servo(SimState env, DynamicsAdapter& adapter,
                  const GoalTrajectory& goals, const MppiConfig& mcfg,
                  const ServoConfig& scfg, uint64_t seed,
                  const RenderParams& render = {}, const ClipBox& clip = {},
                  int threads = 1);

void write_servo_log(const ServoResult& result, const std::string& path,
                     const std::string& config_hash = "");

}  // namespace contactservo
