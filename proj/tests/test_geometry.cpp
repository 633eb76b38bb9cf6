#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fgslam/geometry.hpp"
#include "testutil.hpp"

using namespace fgslam;
namespace tu = fgslam::testutil;

namespace {

Pose random_pose(std::mt19937_64& rng) {
  Twist xi;
  for (int i = 0; i < 3; ++i) xi[i] = tu::uniform(rng, -2.0, 2.0);
  for (int i = 3; i < 6; ++i) xi[i] = tu::uniform(rng, -3.0, 3.0);
  return exp_se3(xi);
}

bool pose_near(const Pose& a, const Pose& b, double tol) {
  const double dq = std::min((a.q.coeffs() - b.q.coeffs()).norm(),
                             (a.q.coeffs() + b.q.coeffs()).norm());
  return dq < tol && (a.t - b.t).norm() < tol;
}

// Rodrigues rotation of v about unit axis k by angle theta; independent of
// the quaternion machinery under test.
Vec3 rodrigues(const Vec3& k, double theta, const Vec3& v) {
  return v * std::cos(theta) + k.cross(v) * std::sin(theta) +
         k * (k.dot(v)) * (1.0 - std::cos(theta));
}

}  // namespace

TEST_CASE("compose identities and inverses") {
  const Pose I;
  CHECK(pose_near(compose(I, I), I, 1e-15));

  auto rng = tu::make_rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose p = random_pose(rng);
    CHECK(pose_near(compose(p, inverse(p)), I, 1e-9));
    CHECK(pose_near(compose(inverse(p), p), I, 1e-9));
    CHECK(p.q.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("compose of translations adds offsets") {
  const Pose a = Pose::translation({1, 0, 0});
  const Pose b = Pose::translation({0, 2, 0});
  CHECK(pose_near(compose(a, b), Pose::translation({1, 2, 0}), 1e-15));
}

TEST_CASE("compose matches the 4x4 matrix product oracle") {
  auto rng = tu::make_rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const Eigen::Matrix4d expect = a.matrix() * b.matrix();
    CHECK((compose(a, b).matrix() - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("retract zero twist is exact identity on the pose") {
  auto rng = tu::make_rng(3);
  const Pose p = random_pose(rng);
  const Pose r = retract(p, Twist::Zero());
  CHECK(r.q.coeffs() == p.q.coeffs());
  CHECK(r.t == p.t);
}

TEST_CASE("retract pure translation twist") {
  Twist xi = Twist::Zero();
  xi[3] = 1.0;
  CHECK(pose_near(retract(Pose(), xi), Pose::translation({1, 0, 0}), 1e-15));
}

TEST_CASE("retract pure rotation matches the Rodrigues oracle") {
  const double theta = 0.7;
  Twist xi = Twist::Zero();
  xi[0] = theta;
  const Pose r = retract(Pose(), xi);
  auto rng = tu::make_rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 v = tu::random_point(rng, Vec3(-1, -1, -1), Vec3(1, 1, 1));
    CHECK((r.apply(v) - rodrigues(Vec3::UnitX(), theta, v)).norm() < 1e-12);
  }
}

TEST_CASE("relative twist recovers small retractions") {
  auto rng = tu::make_rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const Pose p = random_pose(rng);
    Twist delta;
    for (int i = 0; i < 6; ++i) delta[i] = tu::uniform(rng, -1e-3, 1e-3);
    const Twist recovered = relative_twist(p, retract(p, delta));
    CHECK((recovered - delta).norm() < 10.0 * delta.squaredNorm() + 1e-12);
  }
}

TEST_CASE("exp/log round trip") {
  auto rng = tu::make_rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    Twist xi;
    // rotation magnitude kept below pi, where log is the exact inverse
    for (int i = 0; i < 3; ++i) xi[i] = tu::uniform(rng, -1.7, 1.7);
    for (int i = 3; i < 6; ++i) xi[i] = tu::uniform(rng, -3.0, 3.0);
    CHECK((log_se3(exp_se3(xi)) - xi).norm() < 1e-9);
  }
}

TEST_CASE("pixel_ray at the principal point follows the optical axis") {
  CameraIntrinsics intr{100.0, 100.0, 40.0, 30.0, 80, 60, 5000.0};
  intr.validate();
  const Ray r = pixel_ray(intr, Pose(), 30, 40);
  CHECK((r.dir - Vec3(0, 0, 1)).norm() < 1e-12);
  CHECK(r.origin.norm() == 0.0);

  const Pose shifted = Pose::translation({1, 2, 3});
  const Ray r2 = pixel_ray(intr, shifted, 30, 40);
  CHECK((r2.origin - Vec3(1, 2, 3)).norm() == 0.0);
  CHECK((r2.dir - r.dir).norm() < 1e-12);
}

TEST_CASE("pixel_ray off-center matches the back-projection formula") {
  CameraIntrinsics intr{120.0, 110.0, 40.0, 30.0, 80, 60, 5000.0};
  auto rng = tu::make_rng(23);
  const Pose pose = random_pose(rng);
  for (int trial = 0; trial < 20; ++trial) {
    const int row = int(tu::uniform(rng, 0, 59.99));
    const int col = int(tu::uniform(rng, 0, 79.99));
    const Ray r = pixel_ray(intr, pose, row, col);
    const Vec3 expect =
        pose.rotate(Vec3((col - intr.cx) / intr.fx, (row - intr.cy) / intr.fy, 1.0).normalized());
    CHECK((r.dir - expect).norm() < 1e-12);
    CHECK(r.dir.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("identity-pose rays look forward") {
  CameraIntrinsics intr{100.0, 100.0, 40.0, 30.0, 80, 60, 5000.0};
  for (int row = 0; row < 60; row += 7)
    for (int col = 0; col < 80; col += 9) CHECK(pixel_ray(intr, Pose(), row, col).dir.z() > 0.0);
}

TEST_CASE("pixel_ray rejects out-of-bounds pixels") {
  CameraIntrinsics intr{100.0, 100.0, 40.0, 30.0, 80, 60, 5000.0};
  CHECK_THROWS_AS(pixel_ray(intr, Pose(), -1, 0), std::out_of_range);
  CHECK_THROWS_AS(pixel_ray(intr, Pose(), 0, 80), std::out_of_range);
}
