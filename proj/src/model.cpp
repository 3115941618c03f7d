#include "contactservo/model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "contactservo/parallel.hpp"
#include "contactservo/rng.hpp"
#include "model_impl.hpp"

namespace contactservo {

using detail::build_layer_table;
using detail::Grad;
using detail::LayerTable;
using detail::Net;
using nlohmann::json;

std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::kFull: return "full";
    case ModelVariant::kNoOffset: return "no_offset";
    case ModelVariant::kVisionOnly: return "vision_only";
  }
  return "full";
}

ModelVariant variant_from_name(const std::string& name) {
  if (name == "full") return ModelVariant::kFull;
  if (name == "no_offset") return ModelVariant::kNoOffset;
  if (name == "vision_only") return ModelVariant::kVisionOnly;
  throw ModelError("unknown model variant: " + name);
}

long param_count(const ModelConfig& config) {
  return build_layer_table(config).total;
}

namespace {

Net<double> view(const ModelParams& p) {
  return detail::make_net<double>(p.config, p.theta.data(), p.h_mean, p.h_std);
}

Eigen::Matrix3Xd to_matrix(const PointCloud& pts, int point_count) {
  if (pts.empty()) throw ModelError("encode: empty point set");
  Eigen::Matrix3Xd m(3, point_count);
  const int n = static_cast<int>(pts.size());
  for (int i = 0; i < point_count; ++i) m.col(i) = pts[i % n];
  return m;
}

Eigen::VectorXd flatten_wrench(const WrenchHistory& h) {
  if (h.rows() != 4)
    throw ModelError("encode: wrench history must have 4 samples");
  Eigen::VectorXd out(24);
  for (int i = 0; i < 4; ++i) out.segment<6>(6 * i) = h.row(i).transpose();
  return out;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, uint64_t seed) {
  ModelParams p;
  p.config = config;
  const LayerTable table = build_layer_table(config);
  p.theta.resize(table.total);
  RngStream rng = RngStream::of(seed, 0x1217);
  for (int l = 0; l < detail::kLayerCount; ++l) {
    const auto& d = table.defs[l];
    if (!d.present) continue;
    const double k = 1.0 / std::sqrt(static_cast<double>(d.in));
    for (long i = 0; i < static_cast<long>(d.in) * d.out; ++i)
      p.theta[d.w_off + i] = rng.uniform(-k, k);
    for (int i = 0; i < d.out; ++i) p.theta[d.b_off + i] = rng.uniform(-k, k);
  }
  return p;
}

LatentState encode(const ModelParams& params, const PointCloud& v0_ee,
                   const WrenchHistory& h0) {
  detail::EncoderCache<double> cache;
  const Net<double> net = view(params);
  const detail::MatX<double> pts = to_matrix(v0_ee, params.config.point_count);
  const detail::VecX<double> h = flatten_wrench(h0);
  return encoder_forward(net, pts, h, cache);
}

std::pair<LatentState, TwistDelta> latent_step(const ModelParams& params,
                                               const LatentState& z,
                                               const TwistDelta& a) {
  if (z.size() != params.config.latent_dim)
    throw ModelError("latent_step: latent size mismatch");
  detail::DynCache<double> cache;
  const Net<double> net = view(params);
  const detail::VecX<double> zv = z;
  const detail::VecX<double> av = a.to_vector();
  dynamics_forward(net, zv, av, cache);
  return {cache.zn, TwistDelta::from_vector(cache.off)};
}

Decoded decode(const ModelParams& params, const LatentState& z) {
  detail::DecCache<double> cache;
  const Net<double> net = view(params);
  const detail::VecX<double> zv = z;
  decoder_forward(net, zv, cache);
  Decoded out;
  out.c_b_prob = 1.0 / (1.0 + std::exp(-cache.logit));
  out.line_ee.a = cache.line.head<3>();
  out.line_ee.b = cache.line.tail<3>();
  out.wrench = cache.wr;
  return out;
}

std::vector<RolloutStep> rollout_from_latent(
    const ModelParams& params, const LatentState& z0, const Pose& t_we0,
    const std::vector<TwistDelta>& actions) {
  std::vector<RolloutStep> out;
  out.reserve(actions.size() + 1);
  LatentState z = z0;
  Pose t_we = t_we0;
  for (std::size_t t = 0; t <= actions.size(); ++t) {
    const Decoded d = decode(params, z);
    RolloutStep step;
    step.c_b_prob = d.c_b_prob;
    step.line_ee = d.line_ee;
    step.wrench = d.wrench;
    step.t_we_hat = t_we;
    step.line_world = {apply(t_we, d.line_ee.a), apply(t_we, d.line_ee.b)};
    out.push_back(step);
    if (t < actions.size()) {
      auto [zn, off] = latent_step(params, z, actions[t]);
      z = zn;
      t_we = propagate_ee_frame(t_we, actions[t], off);
    }
  }
  return out;
}

std::vector<RolloutStep> rollout(const ModelParams& params,
                                 const PointCloud& v0_ee,
                                 const WrenchHistory& h0, const Pose& t_we0,
                                 const std::vector<TwistDelta>& actions) {
  return rollout_from_latent(params, encode(params, v0_ee, h0), t_we0, actions);
}

WindowData pack_window(const TrainingWindow& window, int point_count) {
  WindowData out;
  out.horizon = window.horizon;
  out.tool = window.episode->tool_name;
  for (int k = 0; k <= window.horizon; ++k) {
    const TransitionRecord& r = window.at(k);
    out.clouds.push_back(to_matrix(r.v_ee, point_count));
    out.wrench_flat.push_back(flatten_wrench(r.h));
    out.c_b.push_back(r.c_b);
    if (r.c_l_ee) {
      Vec6 l;
      l << r.c_l_ee->a, r.c_l_ee->b;
      out.line_ee.push_back(l);
    } else {
      out.line_ee.push_back(std::nullopt);
    }
    out.c_w.push_back(r.c_w);
    out.t_we.push_back(r.t_we);
    if (k < window.horizon) {
      if (!r.a) throw ModelError("pack_window: missing action");
      out.actions.push_back(r.a->to_vector());
      const TransitionRecord& nxt = window.at(k + 1);
      if (!nxt.delta_a) throw ModelError("pack_window: missing offset");
      out.offsets.push_back(nxt.delta_a->to_vector());
    }
  }
  return out;
}

double loss(const ModelParams& params, const WindowData& window,
            const LossWeights& weights) {
  const Net<double> net = view(params);
  const auto w = detail::convert_window<double>(window);
  detail::WindowWork<double> work;
  return detail::window_loss<double>(net, w, weights, nullptr, work);
}

Eigen::VectorXd grad(const ModelParams& params, const WindowData& window,
                     const LossWeights& weights, double* loss_out) {
  const Net<double> net = view(params);
  const auto w = detail::convert_window<double>(window);
  detail::WindowWork<double> work;
  Grad<double> g;
  g.reset(net.table);
  const double l = detail::window_loss<double>(net, w, weights, &g, work);
  if (loss_out) *loss_out = l;
  return g.g;
}

TrainResult train(const std::vector<WindowData>& train_windows,
                  const std::vector<WindowData>& val_windows,
                  const ModelConfig& config, const LossWeights& weights,
                  const TrainOptions& options) {
  if (train_windows.empty() || val_windows.empty())
    throw ModelError("train: non-empty train and val splits required");

  // Wrench standardization from the training split.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(24);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(24);
  long count = 0;
  for (const auto& w : train_windows)
    for (const auto& h : w.wrench_flat) {
      mean += h;
      sq += h.cwiseProduct(h);
      ++count;
    }
  mean /= static_cast<double>(count);
  Eigen::VectorXd std_dev =
      (sq / static_cast<double>(count) - mean.cwiseProduct(mean))
          .cwiseMax(0.0)
          .cwiseSqrt()
          .cwiseMax(1e-6);

  using S = float;
  std::vector<detail::WindowDataT<S>> train_s, val_s;
  train_s.reserve(train_windows.size());
  for (const auto& w : train_windows)
    train_s.push_back(detail::convert_window<S>(w));
  val_s.reserve(val_windows.size());
  for (const auto& w : val_windows) val_s.push_back(detail::convert_window<S>(w));

  ModelParams init = init_params(config, options.seed);
  init.h_mean = mean;
  init.h_std = std_dev;

  const LayerTable table = build_layer_table(config);
  detail::VecX<S> theta = init.theta.cast<S>();
  const detail::VecX<S> h_mean_s = mean.cast<S>();
  const detail::VecX<S> h_std_s = std_dev.cast<S>();

  detail::VecX<S> adam_m = detail::VecX<S>::Zero(table.total);
  detail::VecX<S> adam_v = detail::VecX<S>::Zero(table.total);
  long adam_t = 0;

  const int B = std::max(1, options.batch_size);
  std::vector<Grad<S>> grads(B);
  std::vector<detail::WindowWork<S>> works(B);
  std::vector<S> losses(std::max(train_s.size(), val_s.size()));

  TrainResult result;
  detail::VecX<S> best_theta = theta;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<std::size_t> order(train_s.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(stream_key(options.seed, 0x5E0F, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    long seen = 0;
    for (std::size_t base = 0; base < order.size(); base += B) {
      const int nb = static_cast<int>(std::min<std::size_t>(B, order.size() - base));
      const Net<S> net = detail::make_net<S>(config, theta.data(), h_mean_s, h_std_s);
      parallel_for(nb, options.threads, [&](std::size_t k) {
        grads[k].reset(table);
        losses[k] = detail::window_loss<S>(net, train_s[order[base + k]],
                                           weights, &grads[k], works[k],
                                           options.stop_gradient_targets);
      });
      detail::VecX<S> g = detail::VecX<S>::Zero(table.total);
      double batch_loss = 0.0;
      for (int k = 0; k < nb; ++k) {  // fixed-order reduction
        g += grads[k].g;
        batch_loss += losses[k];
      }
      g /= static_cast<S>(nb);
      epoch_loss += batch_loss;
      seen += nb;
      if (!std::isfinite(batch_loss))
        throw ModelError("train: loss diverged at epoch " +
                         std::to_string(epoch) + ", batch " +
                         std::to_string(base / B));

      ++adam_t;
      const S lr = static_cast<S>(options.learning_rate);
      const S b1 = static_cast<S>(options.beta1), b2 = static_cast<S>(options.beta2);
      const S eps = static_cast<S>(options.adam_eps);
      adam_m = b1 * adam_m + (S(1) - b1) * g;
      adam_v = b2 * adam_v + (S(1) - b2) * g.cwiseProduct(g);
      const S c1 = S(1) / (S(1) - std::pow(b1, static_cast<S>(adam_t)));
      const S c2 = S(1) / (S(1) - std::pow(b2, static_cast<S>(adam_t)));
      theta -= lr * (adam_m * c1).cwiseQuotient(
                        ((adam_v * c2).cwiseSqrt().array() + eps).matrix());
    }
    epoch_loss /= static_cast<double>(seen);

    const Net<S> net = detail::make_net<S>(config, theta.data(), h_mean_s, h_std_s);
    parallel_for(val_s.size(), options.threads, [&](std::size_t k) {
      thread_local detail::WindowWork<S> work;
      losses[k] = detail::window_loss<S>(net, val_s[k], weights, nullptr, work);
    });
    double val_loss = 0.0;
    for (std::size_t k = 0; k < val_s.size(); ++k) val_loss += losses[k];
    val_loss /= static_cast<double>(val_s.size());

    result.train_losses.push_back(epoch_loss);
    result.val_losses.push_back(val_loss);
    if (options.on_epoch) options.on_epoch(epoch, epoch_loss, val_loss);

    if (val_loss < best_val) {
      best_val = val_loss;
      best_theta = theta;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }

  result.params.config = config;
  result.params.theta = best_theta.cast<double>();
  result.params.h_mean = mean;
  result.params.h_std = std_dev;
  return result;
}

void save_model(const ModelParams& params, const std::string& path,
                const std::string& config_hash) {
  json j;
  j["schema"] = 1;
  j["config_hash"] = config_hash;
  j["config"] = {{"variant", variant_name(params.config.variant)},
                 {"latent_dim", params.config.latent_dim},
                 {"point_count", params.config.point_count}};
  j["h_mean"] = std::vector<double>(params.h_mean.data(),
                                    params.h_mean.data() + params.h_mean.size());
  j["h_std"] = std::vector<double>(params.h_std.data(),
                                   params.h_std.data() + params.h_std.size());
  j["theta"] = std::vector<double>(params.theta.data(),
                                   params.theta.data() + params.theta.size());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ModelError("save_model: cannot open " + path);
  f << j.dump() << "\n";
}

ModelParams load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ModelError("load_model: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ModelError("load_model: parse error in " + path + ": " + e.what());
  }
  if (j.value("schema", 0) != 1)
    throw ModelError("load_model: unsupported schema in " + path);
  ModelParams p;
  p.config.variant = variant_from_name(j.at("config").at("variant"));
  p.config.latent_dim = j.at("config").at("latent_dim").get<int>();
  p.config.point_count = j.at("config").at("point_count").get<int>();
  const auto theta = j.at("theta").get<std::vector<double>>();
  const long expect = param_count(p.config);
  if (static_cast<long>(theta.size()) != expect)
    throw ModelError("load_model: parameter count mismatch in " + path);
  p.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
  const auto hm = j.at("h_mean").get<std::vector<double>>();
  const auto hs = j.at("h_std").get<std::vector<double>>();
  if (hm.size() != 24 || hs.size() != 24)
    throw ModelError("load_model: bad standardization block in " + path);
  p.h_mean = Eigen::Map<const Eigen::VectorXd>(hm.data(), 24);
  p.h_std = Eigen::Map<const Eigen::VectorXd>(hs.data(), 24);
  return p;
}

}  // namespace contactservo
