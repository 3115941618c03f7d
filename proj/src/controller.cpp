#include "contactservo/controller.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "contactservo/jsonio.hpp"
#include "contactservo/parallel.hpp"
#include "contactservo/perception.hpp"
#include "contactservo/rng.hpp"

namespace contactservo {

namespace {
using nlohmann::json;

json line_json(const ContactLine& l) {
  return json::array({{l.a.x(), l.a.y(), l.a.z()}, {l.b.x(), l.b.y(), l.b.z()}});
}
}  // namespace

GoalTrajectory GoalTrajectory::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ControllerError("GoalTrajectory: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ControllerError("GoalTrajectory: parse error in " + path + ": " +
                          e.what());
  }
  if (j.value("schema", 0) != 1)
    throw ControllerError("GoalTrajectory: unsupported schema in " + path);
  GoalTrajectory out;
  for (const auto& g : j.at("goals")) {
    ContactLine l;
    l.a = Vec3(g.at(0).at(0).get<double>(), g.at(0).at(1).get<double>(),
               g.at(0).at(2).get<double>());
    l.b = Vec3(g.at(1).at(0).get<double>(), g.at(1).at(1).get<double>(),
               g.at(1).at(2).get<double>());
    out.goals.push_back(l);
  }
  if (out.goals.empty())
    throw ControllerError("GoalTrajectory: no goals in " + path);
  out.resample();
  return out;
}

void GoalTrajectory::save(const std::string& path) const {
  json j;
  j["schema"] = 1;
  j["goals"] = json::array();
  for (const auto& g : goals) j["goals"].push_back(line_json(g));
  std::ofstream f(path);
  if (!f) throw ControllerError("GoalTrajectory: cannot write " + path);
  f << j.dump(2) << "\n";
}

void GoalTrajectory::resample(double max_spacing) {
  if (goals.size() < 2) return;
  std::vector<ContactLine> dense;
  dense.push_back(goals.front());
  for (std::size_t i = 1; i < goals.size(); ++i) {
    const ContactLine prev = dense.back();  // by value: dense grows below
    ContactLine next = goals[i];
    // Keep endpoint correspondence consistent with the previous line.
    if ((next.a - prev.a).norm() + (next.b - prev.b).norm() >
        (next.b - prev.a).norm() + (next.a - prev.b).norm())
      std::swap(next.a, next.b);
    const double gap = (next.centroid() - prev.centroid()).norm();
    const int pieces =
        std::max(1, static_cast<int>(std::ceil(gap / max_spacing - 1e-9)));
    for (int k = 1; k <= pieces; ++k) {
      const double t = static_cast<double>(k) / pieces;
      dense.push_back({prev.a + t * (next.a - prev.a),
                       prev.b + t * (next.b - prev.b)});
    }
  }
  goals = std::move(dense);
}

double line_distance(const ContactLine& a, const ContactLine& b) {
  const double direct = 0.5 * ((a.a - b.a).norm() + (a.b - b.b).norm());
  const double crossed = 0.5 * ((a.a - b.b).norm() + (a.b - b.a).norm());
  return std::min(direct, crossed);
}

double trajectory_cost(const std::vector<PredictedContact>& pred,
                       const std::vector<ContactLine>& goals,
                       const ServoConfig& cfg) {
  if (pred.size() != goals.size())
    throw ControllerError("trajectory_cost: prediction/goal length mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    total += line_distance(pred[t].line_world, goals[t]);
    total += cfg.phi * std::max(0.0, cfg.psi - pred[t].c_b_prob);
  }
  return total;
}

std::vector<TwistDelta> mppi_plan(
    const std::function<std::vector<PredictedContact>(
        const std::vector<TwistDelta>&)>& predict,
    const std::vector<TwistDelta>& nominal,
    const std::vector<ContactLine>& goals, const MppiConfig& mcfg,
    const ServoConfig& scfg, uint64_t rng_key, MppiDiagnostics* diagnostics,
    int threads) {
  const int T = static_cast<int>(nominal.size());
  const int K = mcfg.samples;
  if (K < 1 || T < 1) throw ControllerError("mppi_plan: need K >= 1, T >= 1");
  if (static_cast<int>(goals.size()) != T)
    throw ControllerError("mppi_plan: goals must match the horizon");

  std::vector<std::vector<TwistDelta>> eps(K,
                                           std::vector<TwistDelta>(T));
  std::vector<std::vector<TwistDelta>> candidates(K, nominal);
  for (int k = 0; k < K; ++k) {
    RngStream rng = RngStream::of(rng_key, 0x3A11, k);
    for (int t = 0; t < T; ++t) {
      TwistDelta d;
      for (int i = 0; i < 3; ++i) {
        d.translation[i] = rng.gaussian(0.0, mcfg.noise_trans);
        d.rotation[i] = rng.gaussian(0.0, mcfg.noise_rot);
      }
      TwistDelta cand;
      cand.translation = nominal[t].translation + d.translation;
      cand.rotation = nominal[t].rotation + d.rotation;
      cand = mcfg.bounds.clamp(cand);
      candidates[k][t] = cand;
      // Effective perturbation: what was actually evaluated.
      eps[k][t].translation = cand.translation - nominal[t].translation;
      eps[k][t].rotation = cand.rotation - nominal[t].rotation;
    }
  }

  std::vector<double> costs(K), penalties(K);
  std::vector<char> out_of_contact(K, 0);
  parallel_for(K, threads, [&](std::size_t k) {
    const auto pred = predict(candidates[k]);
    std::vector<PredictedContact> tail(pred.begin() + 1, pred.end());
    costs[k] = trajectory_cost(tail, goals, scfg);
    double pen = 0.0;
    bool all_out = true;
    for (const auto& p : tail) {
      pen += scfg.phi * std::max(0.0, scfg.psi - p.c_b_prob);
      all_out &= p.c_b_prob < scfg.psi;
    }
    penalties[k] = pen;
    out_of_contact[k] = all_out;
  });

  double min_cost = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k)
    if (std::isfinite(costs[k])) min_cost = std::min(min_cost, costs[k]);
  if (!std::isfinite(min_cost))
    throw ControllerError("mppi_plan: all sampled costs are non-finite");

  double wsum = 0.0, wcost = 0.0, wpen = 0.0;
  std::vector<double> weights(K, 0.0);
  for (int k = 0; k < K; ++k) {
    if (!std::isfinite(costs[k])) continue;
    weights[k] = std::exp(-(costs[k] - min_cost) / mcfg.temperature);
    wsum += weights[k];
    wcost += weights[k] * costs[k];
    wpen += weights[k] * penalties[k];
  }

  std::vector<TwistDelta> updated = nominal;
  for (int t = 0; t < T; ++t) {
    Vec3 dt = Vec3::Zero(), dr = Vec3::Zero();
    for (int k = 0; k < K; ++k) {
      dt += weights[k] * eps[k][t].translation;
      dr += weights[k] * eps[k][t].rotation;
    }
    updated[t].translation = nominal[t].translation + dt / wsum;
    updated[t].rotation = nominal[t].rotation + dr / wsum;
    updated[t] = mcfg.bounds.clamp(updated[t]);
  }

  if (diagnostics) {
    diagnostics->best_cost = min_cost;
    diagnostics->weighted_cost = wcost / wsum;
    diagnostics->contact_penalty_share =
        wcost > 0.0 ? (wpen / wsum) / (wcost / wsum) : 0.0;
    diagnostics->all_out_of_contact =
        std::all_of(out_of_contact.begin(), out_of_contact.end(),
                    [](char c) { return c != 0; });
  }
  return updated;
}

TwistDelta wrench_offset_action(const Vec6& predicted_wrench,
                                const Vec6& measured_wrench,
                                const ImpedanceSpec& imp,
                                const ActionBounds& bounds) {
  const Vec6 dw = predicted_wrench - measured_wrench;
  TwistDelta a;
  a.translation = dw.head<3>() / imp.kp_trans;
  a.rotation = dw.tail<3>() / imp.kp_rot;
  return bounds.clamp(a);
}

ServoResult servo(SimState env, DynamicsAdapter& adapter,
                  const GoalTrajectory& goals, const MppiConfig& mcfg,
                  const ServoConfig& scfg, uint64_t seed,
                  const RenderParams& render, const ClipBox& clip,
                  int threads) {
  if (goals.goals.empty()) throw ControllerError("servo: empty goal trajectory");
  const int L = static_cast<int>(goals.goals.size());
  const int T = mcfg.horizon;

  ServoResult result;
  std::vector<TwistDelta> nominal(T);
  int goal_index = 0;
  int out_of_contact_streak = 0;

  // Goals already satisfied at the start?
  if (env.contact.c_b &&
      line_distance(env.contact.line, goals.goals[0]) < scfg.goal_advance_eps) {
    ++goal_index;
    while (goal_index < L &&
           line_distance(env.contact.line, goals.goals[goal_index]) <
               scfg.goal_advance_eps)
      ++goal_index;
  }

  for (int step_i = 0; step_i < scfg.max_steps && goal_index < L; ++step_i) {
    const PointCloud cloud = render_pointcloud(env, render);
    const PointCloud v_ee = clip_to_ee_frame(cloud, env.realized_ee, clip);
    const WrenchHistory h = measure_wrench(env, 4);
    adapter.observe_state(env);
    adapter.observe(v_ee, h, env.realized_ee);

    std::vector<ContactLine> window;
    for (int t = 1; t <= T; ++t)
      window.push_back(goals.goals[std::min(goal_index + t, L - 1)]);

    MppiDiagnostics diag;
    const auto predict = [&](const std::vector<TwistDelta>& actions) {
      return adapter.predict(actions);
    };
    nominal = mppi_plan(predict, nominal, window, mcfg, scfg,
                        stream_key(seed, 0x5E12, step_i), &diag, threads);

    TwistDelta exec = nominal.front();
    if (scfg.wrench_offset_enabled) {
      const auto now = adapter.predict(std::vector<TwistDelta>{});
      Vec6 measured = Vec6::Zero();
      for (int r = 0; r < h.rows(); ++r) measured += h.row(r).transpose();
      measured /= static_cast<double>(h.rows());
      const TwistDelta off =
          wrench_offset_action(now[0].wrench, measured, env.impedance,
                               mcfg.bounds);
      const Pose combined = compose(exp_delta(exec), exp_delta(off));
      TwistDelta merged = log_delta(combined);
      exec = mcfg.bounds.clamp(merged);
    }

    const auto pred = adapter.predict({exec});

    ServoStepLog log;
    log.step = step_i;
    log.action = exec;
    log.plan_cost = diag.weighted_cost;
    log.contact_penalty_share = diag.contact_penalty_share;

    env = step(env, exec);

    log.commanded = env.commanded_ee;
    log.realized = env.realized_ee;
    log.predicted = pred.back();
    log.true_contact = env.contact;
    log.obstacle_collision = env.obstacle_collision;

    result.realized_contact.push_back(env.contact.c_b != 0);
    result.realized_lines.push_back(env.contact.line);

    if (env.contact.c_b) {
      while (goal_index < L &&
             line_distance(env.contact.line, goals.goals[goal_index]) <
                 scfg.goal_advance_eps)
        ++goal_index;
    }
    log.goal_index = goal_index;
    result.steps.push_back(log);

    out_of_contact_streak = diag.all_out_of_contact ? out_of_contact_streak + 1 : 0;
    if (out_of_contact_streak >= 5) {
      result.aborted = true;
      result.abort_reason = "predicted contact infeasible for 5 steps";
      break;
    }

    // Warm start: shift one step, append zero.
    for (int t = 0; t + 1 < T; ++t) nominal[t] = nominal[t + 1];
    nominal[T - 1] = TwistDelta::zero();
  }

  result.final_state = env;
  result.goals_reached = goal_index;
  return result;
}

void write_servo_log(const ServoResult& result, const std::string& path,
                     const std::string& config_hash) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ControllerError("write_servo_log: cannot open " + path);
  f << "{\"schema\":1,\"config_hash\":" << json(config_hash).dump()
    << ",\"aborted\":" << (result.aborted ? "true" : "false")
    << ",\"goals_reached\":" << result.goals_reached << "}\n";
  for (const auto& s : result.steps) {
    json j;
    j["step"] = s.step;
    const auto cmd = pose_to_array(s.commanded);
    const auto rea = pose_to_array(s.realized);
    j["commanded"] = std::vector<double>(cmd.begin(), cmd.end());
    j["realized"] = std::vector<double>(rea.begin(), rea.end());
    const Vec6 a = s.action.to_vector();
    j["action"] = std::vector<double>(a.data(), a.data() + 6);
    j["pred_cb"] = s.predicted.c_b_prob;
    j["pred_line"] = line_json(s.predicted.line_world);
    j["true_cb"] = s.true_contact.c_b;
    if (s.true_contact.c_b) j["true_line"] = line_json(s.true_contact.line);
    j["goal_index"] = s.goal_index;
    j["cost"] = s.plan_cost;
    j["contact_penalty_share"] = s.contact_penalty_share;
    j["collision"] = s.obstacle_collision;
    f << j.dump() << "\n";
  }
}

}  // namespace contactservo
