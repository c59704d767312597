#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "duoadapt/geometry.hpp"
#include "test_helpers.hpp"

using namespace duoadapt;
using testutil::random_joint_set;
using testutil::rot_x;
using testutil::rot_z;
using Catch::Approx;

TEST_CASE("wrist_align removes the root offset") {
    JointSet j;
    j.pts.setConstant(5.0);
    const JointSet out = wrist_align(j);
    REQUIRE(out.pts.norm() == 0.0);

    std::mt19937_64 rng(11);
    JointSet k = random_joint_set(rng);
    k.pts.row(0).setZero();
    REQUIRE((wrist_align(k).pts - k.pts).norm() == 0.0);

    JointSet m;
    m.pts.setZero();
    m.pts.row(0) << 1.0, 2.0, 3.0;
    m.pts.row(5) << 4.0, 2.0, 3.0;  // stand-in for the index tip
    const JointSet am = wrist_align(m);
    REQUIRE(am.joint(0).norm() == 0.0);
    REQUIRE(am.joint(5).isApprox(Vec3(3.0, 0.0, 0.0)));
}

TEST_CASE("wrist_align rejects non-finite input") {
    JointSet j;
    j.pts.setZero();
    j.pts(7, 1) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(wrist_align(j), InvalidInputError);
}

TEST_CASE("kabsch_rotation recovers planted rotations") {
    std::mt19937_64 rng(42);
    SECTION("self-alignment gives the identity") {
        const JointSet a = random_joint_set(rng);
        REQUIRE(geodesic_angle(kabsch_rotation(a, a), Rotation::identity()) < 1e-12);
    }
    SECTION("a known z-rotation is recovered") {
        const JointSet a = random_joint_set(rng);
        const Rotation r = rot_z(90.0);
        const JointSet b = r.apply(wrist_align(a));
        REQUIRE(geodesic_angle(kabsch_rotation(a, b), r) < 1e-9);
    }
    SECTION("random planted rotations, random offsets") {
        for (int k = 0; k < 300; ++k) {
            const JointSet a = random_joint_set(rng);
            const Rotation r = random_rotation(rng);
            JointSet b = r.apply(wrist_align(a));
            std::uniform_real_distribution<double> u(-500.0, 500.0);
            b.pts.rowwise() += Vec3(u(rng), u(rng), u(rng)).transpose();
            REQUIRE(geodesic_angle(kabsch_rotation(a, b), r) < 1e-9);
        }
    }
}

TEST_CASE("kabsch_rotation beats 10000 random rotations under noise") {
    std::mt19937_64 rng(7);
    const JointSet a = random_joint_set(rng);
    const Rotation r_gt = random_rotation(rng);
    JointSet b = r_gt.apply(wrist_align(a));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int j = 0; j < kNumJoints; ++j)
        for (int c = 0; c < 3; ++c) b.pts(j, c) += noise(rng);

    const JointSet aa = wrist_align(a);
    const JointSet bb = wrist_align(b);
    auto residual = [&](const Rotation& r) {
        return (aa.pts * r.matrix().transpose() - bb.pts).norm();
    };
    const double best = residual(kabsch_rotation(a, b));
    for (int k = 0; k < 10000; ++k) REQUIRE(best <= residual(random_rotation(rng)) + 1e-12);
}

TEST_CASE("kabsch_rotation is translation invariant") {
    std::mt19937_64 rng(13);
    for (int k = 0; k < 50; ++k) {
        const JointSet a = random_joint_set(rng);
        const JointSet b = random_joint_set(rng);
        const Mat3 base = kabsch_rotation(a, b).matrix();
        std::uniform_real_distribution<double> u(-1000.0, 1000.0);
        JointSet a2 = a;
        a2.pts.rowwise() += Vec3(u(rng), u(rng), u(rng)).transpose();
        JointSet b2 = b;
        b2.pts.rowwise() += Vec3(u(rng), u(rng), u(rng)).transpose();
        REQUIRE((kabsch_rotation(a2, b2).matrix() - base).norm() < 1e-12);
    }
}

TEST_CASE("kabsch_rotation rejects degenerate configurations") {
    JointSet line;
    for (int j = 0; j < kNumJoints; ++j) line.pts.row(j) << static_cast<double>(j), 0.0, 0.0;
    REQUIRE_THROWS_AS(kabsch_rotation(line, line), DegenerateConfigError);

    JointSet coincident;
    coincident.pts.setConstant(3.0);
    REQUIRE_THROWS_AS(kabsch_rotation(coincident, coincident), DegenerateConfigError);
}

TEST_CASE("so3_mean basics") {
    const std::vector<Rotation> identical = {Rotation::identity(), Rotation::identity(),
                                             Rotation::identity()};
    REQUIRE(geodesic_angle(so3_mean(identical), Rotation::identity()) < 1e-12);

    const std::vector<Rotation> symmetric = {rot_z(20.0), rot_z(-20.0)};
    REQUIRE(geodesic_angle(so3_mean(symmetric), Rotation::identity()) < 1e-12);

    std::mt19937_64 rng(3);
    const Rotation single = random_rotation(rng);
    REQUIRE(frobenius_distance(so3_mean({single}), single) < 1e-12);
}

TEST_CASE("so3_mean of noisy rotations lands near the target") {
    std::mt19937_64 rng(17);
    const Rotation target = rot_z(30.0);
    std::vector<Rotation> noisy;
    for (int k = 0; k < 100; ++k) {
        const Rotation noise = random_small_rotation(rng, deg_to_rad(2.0));
        noisy.push_back(Rotation::from_matrix(target.matrix() * noise.matrix()));
    }
    REQUIRE(geodesic_angle(so3_mean(noisy), target) < deg_to_rad(0.5));
}

TEST_CASE("so3_mean output is always a proper rotation") {
    std::mt19937_64 rng(23);
    for (int k = 0; k < 200; ++k) {
        std::vector<Rotation> rs;
        const int n = 1 + static_cast<int>(rng() % 7);
        for (int i = 0; i < n; ++i) rs.push_back(random_rotation(rng));
        Rotation m = Rotation::identity();
        try {
            m = so3_mean(rs);
        } catch (const DegenerateMeanError&) {
            continue;  // documented failure mode for adversarial sets
        }
        REQUIRE((m.matrix().transpose() * m.matrix() - Mat3::Identity()).norm() < 1e-9);
        REQUIRE(m.matrix().determinant() == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("so3_mean rejects rank-deficient means and bad weights") {
    // Mean of a half-turn pair is rank 1; no unique projection exists.
    REQUIRE_THROWS_AS(so3_mean({Rotation::identity(), rot_z(180.0)}), DegenerateMeanError);

    const std::vector<Rotation> rs = {rot_z(10.0), rot_z(20.0)};
    std::vector<double> short_weights = {1.0};
    REQUIRE_THROWS_AS(so3_mean(rs, &short_weights), InvalidInputError);
    std::vector<double> negative = {1.5, -0.5};
    REQUIRE_THROWS_AS(so3_mean(rs, &negative), InvalidParameterError);
    std::vector<double> not_normalized = {0.7, 0.7};
    REQUIRE_THROWS_AS(so3_mean(rs, &not_normalized), InvalidParameterError);
    REQUIRE_THROWS_AS(so3_mean({}), InvalidInputError);
}

TEST_CASE("geodesic_angle closed forms") {
    REQUIRE(geodesic_angle(Rotation::identity(), Rotation::identity()) == 0.0);
    REQUIRE(geodesic_angle(Rotation::identity(), rot_z(90.0)) == Approx(M_PI / 2).margin(1e-12));
    REQUIRE(geodesic_angle(rot_x(10.0), rot_x(40.0)) == Approx(deg_to_rad(30.0)).margin(1e-12));
}

TEST_CASE("geodesic_angle behaves like a metric") {
    std::mt19937_64 rng(29);
    for (int k = 0; k < 1000; ++k) {
        const Rotation a = random_rotation(rng);
        const Rotation b = random_rotation(rng);
        const Rotation c = random_rotation(rng);
        REQUIRE(geodesic_angle(a, b) == Approx(geodesic_angle(b, a)).margin(1e-9));
        REQUIRE(geodesic_angle(a, b) <= geodesic_angle(a, c) + geodesic_angle(c, b) + 1e-9);
    }
}

TEST_CASE("frobenius_distance closed forms and chordal identity") {
    REQUIRE(frobenius_distance(Rotation::identity(), Rotation::identity()) == 0.0);
    REQUIRE(frobenius_distance(Rotation::identity(), rot_z(180.0)) ==
            Approx(2.0 * std::sqrt(2.0)).margin(1e-12));

    std::mt19937_64 rng(31);
    for (int k = 0; k < 1000; ++k) {
        const Rotation a = random_rotation(rng);
        const Rotation b = random_rotation(rng);
        const double frob = frobenius_distance(a, b);
        const double geo = geodesic_angle(a, b);
        REQUIRE(frob == Approx(2.0 * std::sqrt(2.0) * std::abs(std::sin(geo / 2.0))).margin(1e-9));
    }
}
