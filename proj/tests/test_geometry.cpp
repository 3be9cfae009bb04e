#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "plod/camera.hpp"
#include "plod/line.hpp"
#include "plod/pose.hpp"

using namespace plod;
using Catch::Approx;

namespace {

const CameraIntrinsics kVga{500.0, 500.0, 320.0, 240.0, 640, 480};

Pose random_pose(std::mt19937_64& rng, double t_mag = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Vector3d axis(g(rng), g(rng), g(rng));
  axis.normalize();
  std::uniform_real_distribution<double> ang(-M_PI + 1e-3, M_PI - 1e-3);
  const Eigen::Quaterniond q(Eigen::AngleAxisd(ang(rng), axis));
  return Pose(t_mag * Eigen::Vector3d(g(rng), g(rng), g(rng)), q);
}

}  // namespace

TEST_CASE("projection on the optical axis", "[geometry]") {
  const CameraIntrinsics unit{1.0, 1.0, 0.0, 0.0, 2, 2};
  const Eigen::Vector2d px = project_pixel({0.0, 0.0, 2.0}, unit);
  CHECK(px.x() == Approx(0.0).margin(1e-15));
  CHECK(px.y() == Approx(0.0).margin(1e-15));
}

TEST_CASE("projection hand example", "[geometry]") {
  const Eigen::Vector2d px = project_pixel({1.0, -1.0, 2.0}, kVga);
  CHECK(px.x() == Approx(570.0));
  CHECK(px.y() == Approx(-10.0));
  const Eigen::Vector2d n = project_normalized({1.0, -1.0, 2.0});
  CHECK(n.x() == Approx(0.5));
  CHECK(n.y() == Approx(-0.5));
}

TEST_CASE("projection rejects non-positive depth", "[geometry]") {
  CHECK_THROWS_AS(project_normalized({0.0, 0.0, -1.0}), NonPositiveDepth);
  CHECK_THROWS_AS(project_normalized({0.0, 0.0, 0.0}), NonPositiveDepth);
}

TEST_CASE("back-projection at the principal point", "[geometry]") {
  const Eigen::Vector3d P = back_project({320.0, 240.0}, 3.0, kVga);
  CHECK(P.isApprox(Eigen::Vector3d(0.0, 0.0, 3.0), 1e-12));
}

TEST_CASE("back-projection inverts the projection example", "[geometry]") {
  const Eigen::Vector3d P = back_project({570.0, -10.0}, 2.0, kVga);
  CHECK(P.isApprox(Eigen::Vector3d(1.0, -1.0, 2.0), 1e-12));
  CHECK_THROWS_AS(back_project({0.0, 0.0}, 0.0, kVga), NonPositiveDepth);
}

TEST_CASE("projection round trip over random pixels and depths", "[geometry]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> du(0.0, 639.0), dv(0.0, 479.0);
  std::uniform_real_distribution<double> dz(0.1, 100.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d px(du(rng), dv(rng));
    const double z = dz(rng);
    const Eigen::Vector2d back = project_pixel(back_project(px, z, kVga), kVga);
    CHECK((back - px).norm() < 1e-9);
  }
}

TEST_CASE("transform identity and pure translation", "[geometry]") {
  CHECK(Pose::identity()
            .transform({1.0, 2.0, 3.0})
            .isApprox(Eigen::Vector3d(1.0, 2.0, 3.0), 1e-15));
  const Pose t({1.0, 0.0, 0.0}, Eigen::Quaterniond::Identity());
  CHECK(t.transform({0.0, 0.0, 2.0})
            .isApprox(Eigen::Vector3d(1.0, 0.0, 2.0), 1e-15));
}

TEST_CASE("transform 90 degree yaw", "[geometry]") {
  const Pose yaw(Eigen::Vector3d::Zero(),
                 Eigen::Quaterniond(
                     Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitY())));
  // Hand-evaluated rotation matrix about Y maps (0,0,1) to (1,0,0).
  CHECK(yaw.transform({0.0, 0.0, 1.0})
            .isApprox(Eigen::Vector3d(1.0, 0.0, 0.0), 1e-12));
}

TEST_CASE("inverse of identity and pure translation", "[geometry]") {
  const Pose id = Pose::identity().inverse();
  CHECK(id.t.norm() == Approx(0.0).margin(1e-15));
  CHECK(rotation_angle(id) == Approx(0.0).margin(1e-12));
  const Pose t({1.0, 0.0, 0.0}, Eigen::Quaterniond::Identity());
  CHECK(t.inverse().t.isApprox(Eigen::Vector3d(-1.0, 0.0, 0.0), 1e-15));
}

TEST_CASE("pose round trip over random seeds", "[geometry]") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng);
    const Pose round = p * p.inverse();
    CHECK(round.t.norm() < 1e-9);
    CHECK(rotation_angle(round) < 1e-9);
  }
}

TEST_CASE("quaternion to matrix is orthonormal", "[geometry]") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d R = random_pose(rng).rotation();
    CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  }
}

TEST_CASE("minimal pose round trip", "[geometry]") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const Pose p = random_pose(rng);
    const Pose back = from_minimal(to_minimal(p));
    CHECK((back.t - p.t).norm() < 1e-9);
    CHECK((back.rotation() - p.rotation()).norm() < 1e-9);
    const Vector6d xi = to_minimal(p);
    CHECK(xi.tail<3>().squaredNorm() <= 1.0 + 1e-12);
  }
}

TEST_CASE("hessian of the x axis", "[geometry]") {
  const Eigen::Vector3d l = hessian_from_endpoints({0.0, 0.0}, {1.0, 0.0});
  CHECK(std::abs(l.y()) == Approx(1.0));
  CHECK(l.x() == Approx(0.0).margin(1e-15));
  CHECK(l.z() == Approx(0.0).margin(1e-15));
}

TEST_CASE("hessian of a horizontal line at y=1", "[geometry]") {
  const Eigen::Vector3d l = hessian_from_endpoints({0.0, 1.0}, {1.0, 1.0});
  // (0, 1, -1) up to global sign; the convention picks d >= 0.
  CHECK(l.x() == Approx(0.0).margin(1e-15));
  CHECK(l.y() == Approx(-1.0));
  CHECK(l.z() == Approx(1.0));
}

TEST_CASE("hessian rejects coincident endpoints", "[geometry]") {
  CHECK_THROWS_AS(hessian_from_endpoints({0.5, 0.5}, {0.5, 0.5}),
                  DegenerateLine);
}

TEST_CASE("hessian satisfies the line equation for random segments",
          "[geometry]") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d a(d(rng), d(rng));
    const Eigen::Vector2d b(d(rng), d(rng));
    if ((a - b).norm() < 1e-6) continue;
    const Eigen::Vector3d l = hessian_from_endpoints(a, b);
    CHECK(Eigen::Vector2d(l.x(), l.y()).norm() == Approx(1.0));
    CHECK(std::abs(point_line_distance(l, a)) < 1e-9);
    CHECK(std::abs(point_line_distance(l, b)) < 1e-9);
    CHECK(l.z() >= 0.0);
  }
}

TEST_CASE("scale motion halves translation and rotation", "[geometry]") {
  const Pose motion({0.1, 0.0, 0.0}, Eigen::Quaterniond::Identity());
  const Pose half = scale_motion(motion, 0.5);
  CHECK(half.t.isApprox(Eigen::Vector3d(0.05, 0.0, 0.0), 1e-12));

  const Pose rot(Eigen::Vector3d::Zero(),
                 Eigen::Quaterniond(Eigen::AngleAxisd(
                     10.0 * M_PI / 180.0, Eigen::Vector3d::UnitZ())));
  const Pose rot_half = scale_motion(rot, 0.5);
  CHECK(rotation_angle(rot_half) == Approx(5.0 * M_PI / 180.0).margin(1e-10));
  CHECK(scale_motion(rot, 1.0).q.isApprox(rot.q, 1e-12));
}
