#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "contactservo/se3.hpp"

using namespace contactservo;

namespace {
constexpr double kPi = 3.14159265358979323846;

Pose random_pose(std::mt19937_64& rng, double max_angle = kPi - 1e-3) {
  std::uniform_real_distribution<double> ut(-1.0, 1.0);
  std::uniform_real_distribution<double> ua(0.0, max_angle);
  Vec3 axis(ut(rng), ut(rng), ut(rng));
  while (axis.norm() < 1e-6) axis = Vec3(ut(rng), ut(rng), ut(rng));
  axis.normalize();
  TwistDelta d{Vec3(ut(rng), ut(rng), ut(rng)), ua(rng) * axis};
  return exp_delta(d);
}

double pose_distance(const Pose& a, const Pose& b) {
  const double dt = (a.translation - b.translation).norm();
  const double dq = std::min((a.rotation.q.coeffs() - b.rotation.q.coeffs()).norm(),
                             (a.rotation.q.coeffs() + b.rotation.q.coeffs()).norm());
  return dt + dq;
}
}  // namespace

TEST_CASE("exp_delta of zero twist is identity") {
  const Pose p = exp_delta(TwistDelta::zero());
  CHECK(p.translation.norm() == 0.0);
  CHECK(p.rotation.q.w() == doctest::Approx(1.0));
}

TEST_CASE("exp_delta quarter turn about z plus x shift") {
  TwistDelta d{Vec3(0.1, 0, 0), Vec3(0, 0, kPi / 2)};
  const Vec3 out = apply(exp_delta(d), Vec3(1, 0, 0));
  CHECK(out.x() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(out.y() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(out.z()) < 1e-12);
}

TEST_CASE("exp/log round trip over random poses") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Pose p = random_pose(rng);
    const Pose back = exp_delta(log_delta(p));
    CHECK(pose_distance(p, back) < 1e-9);
  }
}

TEST_CASE("log_delta of identity and pure translation") {
  CHECK(log_delta(Pose::identity()).to_vector().norm() == 0.0);
  Pose p;
  p.translation = Vec3(0.005, 0, 0);
  const Vec6 v = log_delta(p).to_vector();
  CHECK(v[0] == doctest::Approx(0.005));
  CHECK(v.tail<5>().norm() == 0.0);
}

TEST_CASE("log_delta at 180 degrees canonicalizes and re-exponentiates") {
  Pose p;
  p.rotation = Rotation::from_quaternion(0.0, 0.0, 0.0, 1.0);  // pi about z
  const TwistDelta d = log_delta(p);
  CHECK(d.rotation.norm() < kPi);
  CHECK(d.rotation.z() > 0.0);  // largest |component| made positive
  CHECK(pose_distance(exp_delta(d), p) < 1e-9);

  // Axis with equal-magnitude components: tie broken deterministically,
  // result still re-exponentiates to the same rotation.
  const Vec3 ax = Vec3(1, -1, 0).normalized();
  Pose q;
  q.rotation = Rotation::from_axis_angle((kPi - 1e-14) * ax);
  const TwistDelta dq = log_delta(q);
  CHECK(pose_distance(exp_delta(dq), q) < 1e-9);
}

TEST_CASE("compose, inverse, apply group behaviour") {
  std::mt19937_64 rng(11);
  const Pose p = random_pose(rng);
  CHECK(pose_distance(compose(Pose::identity(), p), p) < 1e-12);
  CHECK(pose_distance(compose(p, inverse(p)), Pose::identity()) < 1e-9);

  for (int i = 0; i < 100; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    CHECK(pose_distance(compose(compose(a, b), c), compose(a, compose(b, c))) <
          1e-9);
    const Vec3 x(0.3, -0.2, 0.9);
    CHECK((apply(compose(a, b), x) - apply(a, apply(b, x))).norm() < 1e-9);
  }
}

TEST_CASE("propagate_ee_frame matches the composed form exactly") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  const Pose t0 = random_pose(rng);
  TwistDelta a{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
  TwistDelta da{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};

  const Pose expect = compose(compose(t0, exp_delta(a)), exp_delta(da));
  const Pose got = propagate_ee_frame(t0, a, da);
  CHECK(got.translation == expect.translation);  // bit-identical
  CHECK(got.rotation.q.coeffs() == expect.rotation.q.coeffs());

  CHECK(pose_distance(propagate_ee_frame(t0, a, TwistDelta::zero()),
                      compose(compose(t0, exp_delta(a)),
                              exp_delta(TwistDelta::zero()))) == 0.0);
  CHECK(pose_distance(
            propagate_ee_frame(t0, TwistDelta::zero(), TwistDelta::zero()),
            t0) < 1e-12);

  // Chained propagation of 3 steps equals composing the increments.
  Pose t = t0, ref = t0;
  for (int i = 0; i < 3; ++i) {
    TwistDelta ai{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
    TwistDelta di{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
    t = propagate_ee_frame(t, ai, di);
    ref = compose(ref, compose(exp_delta(ai), exp_delta(di)));
  }
  CHECK(pose_distance(t, ref) < 1e-12);
}

TEST_CASE("quaternion norm stays within 1e-9 across 1e6 compositions") {
  std::mt19937_64 rng(17);
  Pose acc = Pose::identity();
  const Pose step = random_pose(rng, 0.01);
  double worst = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    acc = compose(acc, step);
    if ((i & 0xfff) == 0)
      worst = std::max(worst, std::abs(acc.rotation.q.norm() - 1.0));
  }
  worst = std::max(worst, std::abs(acc.rotation.q.norm() - 1.0));
  CHECK(worst <= 1e-9);
}

TEST_CASE("exp_delta rejects invalid input") {
  TwistDelta bad;
  bad.translation = Vec3(std::nan(""), 0, 0);
  CHECK_THROWS_AS(exp_delta(bad), std::invalid_argument);
  TwistDelta big;
  big.rotation = Vec3(0, 0, 3.5);
  CHECK_THROWS_AS(exp_delta(big), std::invalid_argument);
}

TEST_CASE("pose array round trip") {
  std::mt19937_64 rng(23);
  const Pose p = random_pose(rng);
  CHECK(pose_distance(pose_from_array(pose_to_array(p)), p) < 1e-15);
}
