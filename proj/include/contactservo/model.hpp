#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "contactservo/contact.hpp"
#include "contactservo/dataset.hpp"
#include "contactservo/se3.hpp"

namespace contactservo {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ModelVariant { kFull, kNoOffset, kVisionOnly };
std::string variant_name(ModelVariant v);
ModelVariant variant_from_name(const std::string& name);

/// Architecture constants follow the reference dimensions: point MLP
/// 3-64-128-64 max-pooled then projected, wrench MLP 24-64-64-64, dynamics
/// 192-256-128-128 with a 192-128-64-6 offset head, decoder heads
/// 128-64-1 / 128-128-64-6 / 128-128-64-6.
struct ModelConfig {
  ModelVariant variant = ModelVariant::kFull;
  int latent_dim = 128;
  int point_count = 1024;

  bool operator==(const ModelConfig&) const = default;
};

struct LossWeights {
  double alpha = 100.0;  // contact line
  double beta = 0.1;     // wrench
  double rho = 0.1;      // action offset
  double gamma = 0.1;    // latent consistency
};

struct ModelParams {
  ModelConfig config;
  Eigen::VectorXd theta;
  Eigen::VectorXd h_mean{Eigen::VectorXd::Zero(24)};
  Eigen::VectorXd h_std{Eigen::VectorXd::Ones(24)};
};

using LatentState = Eigen::VectorXd;

struct Decoded {
  double c_b_prob = 0.0;
  ContactLine line_ee;
  Vec6 wrench{Vec6::Zero()};
};

struct RolloutStep {
  double c_b_prob = 0.0;
  ContactLine line_world;
  ContactLine line_ee;
  Vec6 wrench{Vec6::Zero()};
  Pose t_we_hat;
};

/// Packed training window (horizon T gives T+1 frames).
struct WindowData {
  int horizon = 0;
  std::string tool;  // episode tool name (baselines key geometry off it)
  std::vector<Eigen::Matrix3Xd> clouds;          // T+1, 3 x point_count
  std::vector<Eigen::VectorXd> wrench_flat;      // T+1, 24
  std::vector<Vec6> actions;                     // T
  std::vector<Vec6> offsets;                     // T (delta_a at t=1..T)
  std::vector<int> c_b;                          // T+1
  std::vector<std::optional<Vec6>> line_ee;      // T+1, [a; b]
  std::vector<Vec6> c_w;                         // T+1
  std::vector<Pose> t_we;                        // T+1 realized poses
};

WindowData pack_window(const TrainingWindow& window, int point_count);

ModelParams init_params(const ModelConfig& config, uint64_t seed);
long param_count(const ModelConfig& config);

LatentState encode(const ModelParams& params, const PointCloud& v0_ee,
                   const WrenchHistory& h0);
std::pair<LatentState, TwistDelta> latent_step(const ModelParams& params,
                                               const LatentState& z,
                                               const TwistDelta& a);
Decoded decode(const ModelParams& params, const LatentState& z);

std::vector<RolloutStep> rollout_from_latent(
    const ModelParams& params, const LatentState& z0, const Pose& t_we0,
    const std::vector<TwistDelta>& actions);
std::vector<RolloutStep> rollout(const ModelParams& params,
                                 const PointCloud& v0_ee,
                                 const WrenchHistory& h0, const Pose& t_we0,
                                 const std::vector<TwistDelta>& actions);

double loss(const ModelParams& params, const WindowData& window,
            const LossWeights& weights);
/// Exact reverse-mode gradient of `loss` over every parameter.
Eigen::VectorXd grad(const ModelParams& params, const WindowData& window,
                     const LossWeights& weights, double* loss_out = nullptr);

struct TrainOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int max_epochs = 60;
  int patience = 10;
  int threads = 2;
  bool stop_gradient_targets = false;  // latent-consistency targets train too
  uint64_t seed = 0;
  std::function<void(int, double, double)> on_epoch;  // epoch, train, val
};

struct TrainResult {
  ModelParams params;  // best validation
  std::vector<double> train_losses;
  std::vector<double> val_losses;
  int best_epoch = -1;
};

TrainResult train(const std::vector<WindowData>& train_windows,
                  const std::vector<WindowData>& val_windows,
                  const ModelConfig& config, const LossWeights& weights,
                  const TrainOptions& options);

void save_model(const ModelParams& params, const std::string& path,
                const std::string& config_hash = "");
ModelParams load_model(const std::string& path);

}  // namespace contactservo
