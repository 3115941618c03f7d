#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "contactservo/experiment.hpp"

using namespace contactservo;

namespace {

ExperimentConfig base_cfg() {
  ExperimentConfig cfg = config_from_json_text("{\"schema\":1}");
  cfg.mppi.samples = 64;
  cfg.collect.render.density = 3000.0;
  return cfg;
}

SimState pressed(const ExperimentConfig& cfg, uint64_t seed) {
  SimState s = servo_start_state(cfg, cfg.train_tools.front(), cfg.scene, seed);
  TwistDelta down;
  down.translation = Vec3(0, 0, -0.006);
  s = step(s, down);
  s = step(s, down);
  return s;
}

}  // namespace

TEST_CASE("line_distance basics") {
  ContactLine a{Vec3(0, 0, 0), Vec3(0.08, 0, 0)};
  CHECK(line_distance(a, a) == 0.0);
  ContactLine swapped{a.b, a.a};
  CHECK(line_distance(a, swapped) == 0.0);
  ContactLine offset{Vec3(0, 0.005, 0), Vec3(0.08, 0.005, 0)};
  CHECK(line_distance(a, offset) == doctest::Approx(0.005));

  // Pseudo-metric: symmetry and triangle inequality on random triples.
  RngStream rng = RngStream::of(5);
  for (int i = 0; i < 100; ++i) {
    auto mk = [&]() {
      return ContactLine{Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), 0),
                         Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), 0)};
    };
    const ContactLine x = mk(), y = mk(), z = mk();
    CHECK(line_distance(x, y) == doctest::Approx(line_distance(y, x)));
    CHECK(line_distance(x, z) <=
          line_distance(x, y) + line_distance(y, z) + 1e-12);
  }
}

TEST_CASE("trajectory_cost hand values") {
  ServoConfig cfg;  // psi = 0.45, phi = 0.05
  ContactLine g{Vec3(0, 0, 0), Vec3(0.08, 0, 0)};

  PredictedContact perfect_line;
  perfect_line.line_world = g;
  perfect_line.c_b_prob = 0.2;
  CHECK(trajectory_cost({perfect_line}, {g}, cfg) ==
        doctest::Approx(0.05 * 0.25).epsilon(1e-12));  // 0.0125

  perfect_line.c_b_prob = 0.9;  // above threshold: no penalty
  CHECK(trajectory_cost({perfect_line}, {g}, cfg) == 0.0);

  std::vector<PredictedContact> preds(3, perfect_line);
  std::vector<ContactLine> goals(3, g);
  CHECK(trajectory_cost(preds, goals, cfg) == 0.0);
}

TEST_CASE("goal trajectory load/save/resample") {
  GoalTrajectory g;
  g.goals.push_back({Vec3(0, -0.04, 0), Vec3(0, 0.04, 0)});
  g.goals.push_back({Vec3(0.1, -0.04, 0), Vec3(0.1, 0.04, 0)});
  g.resample();
  CHECK(g.goals.size() >= 6);
  for (std::size_t i = 1; i < g.goals.size(); ++i)
    CHECK((g.goals[i].centroid() - g.goals[i - 1].centroid()).norm() <=
          0.02 + 1e-9);

  const std::string p =
      (std::filesystem::temp_directory_path() / "cs_goals.json").string();
  g.save(p);
  const GoalTrajectory back = GoalTrajectory::load(p);
  REQUIRE(back.goals.size() == g.goals.size());
  CHECK((back.goals[3].a - g.goals[3].a).norm() < 1e-12);
  std::remove(p.c_str());
}

TEST_CASE("mppi degenerate cases") {
  MppiConfig mcfg;
  mcfg.samples = 16;
  mcfg.horizon = 2;
  ServoConfig scfg;
  std::vector<ContactLine> goals(2, ContactLine{Vec3(0, 0, 0), Vec3(0.08, 0, 0)});

  const auto fake_predict = [&](const std::vector<TwistDelta>& actions) {
    std::vector<PredictedContact> out(actions.size() + 1);
    for (auto& p : out) {
      p.c_b_prob = 1.0;
      p.line_world = {Vec3(actions[0].translation.x(), 0, 0),
                      Vec3(0.08 + actions[0].translation.x(), 0, 0)};
    }
    return out;
  };

  std::vector<TwistDelta> nominal(2);
  nominal[0].translation = Vec3(0.002, -0.001, 0.0);

  // Zero noise: the update returns the nominal exactly.
  MppiConfig quiet = mcfg;
  quiet.noise_trans = 0.0;
  quiet.noise_rot = 0.0;
  const auto same = mppi_plan(fake_predict, nominal, goals, quiet, scfg, 11);
  for (int t = 0; t < 2; ++t) {
    CHECK(same[t].translation == nominal[t].translation);
    CHECK(same[t].rotation == nominal[t].rotation);
  }

  // K = 1: returns nominal + its single perturbation.
  MppiConfig one = mcfg;
  one.samples = 1;
  const auto moved = mppi_plan(fake_predict, nominal, goals, one, scfg, 13);
  RngStream rng = RngStream::of(13ull, 0x3A11, 0);
  TwistDelta eps;
  for (int i = 0; i < 3; ++i) {
    eps.translation[i] = rng.gaussian(0.0, one.noise_trans);
    eps.rotation[i] = rng.gaussian(0.0, one.noise_rot);
  }
  TwistDelta expect;
  expect.translation = nominal[0].translation + eps.translation;
  expect.rotation = nominal[0].rotation + eps.rotation;
  expect = one.bounds.clamp(expect);
  CHECK((moved[0].translation - expect.translation).norm() < 1e-12);
  CHECK((moved[0].rotation - expect.rotation).norm() < 1e-12);
}

TEST_CASE("mppi update is invariant to constant cost shifts") {
  MppiConfig mcfg;
  mcfg.samples = 32;
  mcfg.horizon = 1;
  ServoConfig scfg;
  std::vector<ContactLine> goals{ContactLine{Vec3(0, 0, 0), Vec3(0.08, 0, 0)}};

  // A below-threshold contact likelihood adds the constant phi*(psi - p) to
  // every sample's cost; the weighted update must not change.
  auto predict_with_prob = [&](double prob) {
    return [prob](const std::vector<TwistDelta>& actions) {
      std::vector<PredictedContact> out(actions.size() + 1);
      for (auto& p : out) {
        p.c_b_prob = prob;
        p.line_world = {Vec3(actions[0].translation.x(),
                             actions[0].translation.y(), 0),
                        Vec3(0.08 + actions[0].translation.x(),
                             actions[0].translation.y(), 0)};
      }
      return out;
    };
  };
  std::vector<TwistDelta> nominal(1);
  const auto a = mppi_plan(predict_with_prob(0.9), nominal, goals, mcfg, scfg, 17);
  const auto b = mppi_plan(predict_with_prob(0.1), nominal, goals, mcfg, scfg, 17);
  CHECK((a[0].translation - b[0].translation).norm() < 1e-9);
  CHECK((a[0].rotation - b[0].rotation).norm() < 1e-9);
}

TEST_CASE("wrench_offset_action") {
  ImpedanceSpec imp;
  const TwistDelta zero = wrench_offset_action(Vec6::Zero(), Vec6::Zero(), imp);
  CHECK(zero.to_vector().norm() == 0.0);

  Vec6 pred = Vec6::Zero();
  pred[2] = -3.0;  // predicted F_z exceeds measured by -3 N
  const TwistDelta a = wrench_offset_action(pred, Vec6::Zero(), imp);
  CHECK(a.translation.z() == doctest::Approx(-0.005));  // -3/600

  Vec6 huge = Vec6::Constant(1e3);
  const TwistDelta clamped = wrench_offset_action(huge, Vec6::Zero(), imp);
  ActionBounds bounds;
  CHECK(clamped.translation.cwiseAbs().maxCoeff() ==
        doctest::Approx(bounds.max_translation));
  CHECK(clamped.rotation.cwiseAbs().maxCoeff() ==
        doctest::Approx(bounds.max_rotation));
}

TEST_CASE("oracle MPPI improves over the zero action") {
  ExperimentConfig cfg = base_cfg();
  cfg.mppi.samples = 48;
  int improved = 0, trials = 0;
  for (int trial = 0; trial < 20; ++trial) {
    SimState s = pressed(cfg, 100 + trial);
    if (!s.contact.c_b) continue;
    ++trials;
    const Vec3 target_shift(0.012, 0.004 * ((trial % 3) - 1), 0.0);
    ContactLine goal{s.contact.line.a + target_shift,
                     s.contact.line.b + target_shift};
    std::vector<ContactLine> goals(cfg.mppi.horizon, goal);

    OracleSimAdapter oracle;
    oracle.observe_state(s);
    const auto predict = [&](const std::vector<TwistDelta>& actions) {
      return oracle.predict(actions);
    };
    std::vector<TwistDelta> nominal(cfg.mppi.horizon);
    const auto plan = mppi_plan(predict, nominal, goals, cfg.mppi,
                                cfg.servo_cfg, 900 + trial, nullptr, 2);

    auto realized_cost = [&](const TwistDelta& a) {
      const SimState n = step(s, a);
      double c = line_distance(n.contact.line, goal);
      if (!n.contact.c_b) c += cfg.servo_cfg.phi * cfg.servo_cfg.psi;
      return c;
    };
    const double planned = realized_cost(plan[0]);
    const double zero = realized_cost(TwistDelta::zero());
    improved += planned <= zero + 1e-9 ? 1 : 0;
  }
  REQUIRE(trials >= 15);
  CHECK(improved >= static_cast<int>(0.9 * trials));
}

TEST_CASE("servo terminates immediately on satisfied goals") {
  ExperimentConfig cfg = base_cfg();
  SimState s = pressed(cfg, 42);
  REQUIRE(s.contact.c_b == 1);
  GoalTrajectory goals;
  goals.goals.push_back(s.contact.line);

  OracleSimAdapter oracle;
  const ServoResult r = servo(s, oracle, goals, cfg.mppi, cfg.servo_cfg, 1,
                              cfg.collect.render, cfg.collect.clip_box, 2);
  CHECK(r.steps.size() <= 1);
  CHECK(r.goals_reached == 1);
  CHECK(!r.aborted);
}

TEST_CASE("servo with oracle dynamics tracks a short straight goal") {
  ExperimentConfig cfg = base_cfg();
  cfg.mppi.samples = 48;
  cfg.servo_cfg.max_steps = 40;
  SimState s = servo_start_state(cfg, cfg.train_tools.front(), cfg.scene, 7);

  GoalTrajectory goals;
  const ContactLine l0{Vec3(0.0595, -0.04, 0), Vec3(0.0595, 0.04, 0)};
  for (int i = 0; i <= 8; ++i)
    goals.goals.push_back({l0.a + Vec3(0.005 * i, 0, 0),
                           l0.b + Vec3(0.005 * i, 0, 0)});

  OracleSimAdapter oracle;
  const ServoResult r = servo(s, oracle, goals, cfg.mppi, cfg.servo_cfg, 3,
                              cfg.collect.render, cfg.collect.clip_box, 2);
  CHECK(!r.aborted);
  CHECK(r.goals_reached >= static_cast<int>(goals.goals.size()) - 1);

  double err_sum = 0.0;
  int err_n = 0;
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    if (!r.realized_contact[i]) continue;
    double best = 1e9;
    for (const auto& g : goals.goals)
      best = std::min(best, line_distance(r.realized_lines[i], g));
    err_sum += best;
    ++err_n;
  }
  REQUIRE(err_n > 0);
  CHECK(err_sum / err_n < 0.01);  // mean tracking error < 1 cm
}

TEST_CASE("servo runs are deterministic per seed") {
  ExperimentConfig cfg = base_cfg();
  cfg.mppi.samples = 24;
  cfg.servo_cfg.max_steps = 10;
  GoalTrajectory goals;
  goals.goals.push_back({Vec3(0.07, -0.04, 0), Vec3(0.07, 0.04, 0)});
  goals.goals.push_back({Vec3(0.09, -0.04, 0), Vec3(0.09, 0.04, 0)});
  goals.resample();

  auto run = [&]() {
    SimState s = servo_start_state(cfg, cfg.train_tools.front(), cfg.scene, 5);
    OracleSimAdapter oracle;
    return servo(s, oracle, goals, cfg.mppi, cfg.servo_cfg, 77,
                 cfg.collect.render, cfg.collect.clip_box, 2);
  };
  const ServoResult a = run();
  const ServoResult b = run();
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].action.to_vector() == b.steps[i].action.to_vector());
    CHECK(a.steps[i].realized.translation == b.steps[i].realized.translation);
  }
}
