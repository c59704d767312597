#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "duoadapt/metrics.hpp"
#include "test_helpers.hpp"

using namespace duoadapt;
using Catch::Approx;

TEST_CASE("mpjpe closed forms") {
    std::mt19937_64 rng(3);
    const JointSet gt = testutil::random_hand_pose(rng);
    REQUIRE(mpjpe(gt, gt) == 0.0);

    JointSet shifted = gt;
    shifted.pts.rowwise() += Eigen::RowVector3d(5.0, 5.0, 5.0);
    REQUIRE(mpjpe(shifted, gt) == Approx(0.0).margin(1e-12));

    JointSet one_off = gt;
    one_off.pts.row(4) += Eigen::RowVector3d(0.0, 21.0, 0.0);
    REQUIRE(mpjpe(one_off, gt) == Approx(1.0).margin(1e-12));
}

TEST_CASE("mpjpe is translation invariant on either side") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-300.0, 300.0);
    for (int k = 0; k < 50; ++k) {
        const JointSet pred = testutil::random_joint_set(rng);
        const JointSet gt = testutil::random_joint_set(rng);
        const double base = mpjpe(pred, gt);
        JointSet p2 = pred;
        p2.pts.rowwise() += Eigen::RowVector3d(u(rng), u(rng), u(rng));
        JointSet g2 = gt;
        g2.pts.rowwise() += Eigen::RowVector3d(u(rng), u(rng), u(rng));
        REQUIRE(mpjpe(p2, g2) == Approx(base).margin(1e-9));
    }
}

TEST_CASE("mono_m pools both views") {
    std::mt19937_64 rng(7);
    std::vector<JointSet> g1, g2, p1, p2;
    for (int i = 0; i < 10; ++i) {
        g1.push_back(testutil::random_hand_pose(rng));
        g2.push_back(testutil::random_hand_pose(rng));
        p1.push_back(g1.back());
        p2.push_back(g2.back());
    }
    REQUIRE(mono_m(p1, p2, g1, g2) == 0.0);

    // uniform 10 mm error in view1, 20 mm in view2 (single non-wrist joint
    // scaled so the per-sample MPJPE is exactly 10 and 20)
    for (int i = 0; i < 10; ++i) {
        p1[i].pts.row(3) += Eigen::RowVector3d(0.0, 0.0, 10.0 * kNumJoints);
        p2[i].pts.row(3) += Eigen::RowVector3d(0.0, 0.0, 20.0 * kNumJoints);
    }
    REQUIRE(mono_m(p1, p2, g1, g2) == Approx(15.0).margin(1e-9));
}

TEST_CASE("mono_m equals a flat-loop oracle and the mean of per-view errors") {
    std::mt19937_64 rng(9);
    std::vector<JointSet> g1, g2, p1, p2;
    for (int i = 0; i < 25; ++i) {
        g1.push_back(testutil::random_joint_set(rng));
        g2.push_back(testutil::random_joint_set(rng));
        p1.push_back(testutil::random_joint_set(rng));
        p2.push_back(testutil::random_joint_set(rng));
    }
    double flat = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        for (int view = 0; view < 2; ++view) {
            const JointSet& p = view == 0 ? p1[i] : p2[i];
            const JointSet& g = view == 0 ? g1[i] : g2[i];
            const JointSet pa = wrist_align(p);
            const JointSet ga = wrist_align(g);
            double per = 0.0;
            for (int j = 0; j < kNumJoints; ++j) per += (pa.joint(j) - ga.joint(j)).norm();
            flat += per / kNumJoints;
            ++count;
        }
    }
    flat /= static_cast<double>(count);
    REQUIRE(mono_m(p1, p2, g1, g2) == Approx(flat).epsilon(1e-9));

    double v1 = 0.0, v2 = 0.0;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        v1 += mpjpe(p1[i], g1[i]);
        v2 += mpjpe(p2[i], g2[i]);
    }
    v1 /= static_cast<double>(p1.size());
    v2 /= static_cast<double>(p2.size());
    REQUIRE(mono_m(p1, p2, g1, g2) == Approx(0.5 * (v1 + v2)).epsilon(1e-12));
}

TEST_CASE("dual_m fuses across views") {
    std::mt19937_64 rng(11);
    SECTION("exact predictions and exact R give zero") {
        const Rotation r = random_rotation(rng);
        std::vector<JointSet> g1, g2;
        for (int i = 0; i < 10; ++i) {
            const JointSet a = testutil::random_hand_pose(rng);
            g1.push_back(a);
            g2.push_back(r.apply(a));
        }
        REQUIRE(dual_m(g1, g2, g1, g2, r) == Approx(0.0).margin(1e-9));
    }
    SECTION("identity R with identical per-view predictions degenerates to mpjpe") {
        std::vector<JointSet> p = {testutil::random_hand_pose(rng)};
        std::vector<JointSet> g = {testutil::random_hand_pose(rng)};
        REQUIRE(dual_m(p, p, g, g, Rotation::identity()) == Approx(mpjpe(p[0], g[0])).margin(1e-12));
    }
    SECTION("independent noise averages out: Dual-M < Mono-M") {
        const Rotation r = random_rotation(rng);
        std::normal_distribution<double> noise(0.0, 8.0);
        std::vector<JointSet> g1, g2, p1, p2;
        for (int i = 0; i < 1000; ++i) {
            const JointSet a = testutil::random_hand_pose(rng);
            g1.push_back(a);
            g2.push_back(r.apply(a));
            JointSet n1 = g1.back(), n2 = g2.back();
            for (int j = 0; j < kNumJoints; ++j)
                for (int c = 0; c < 3; ++c) {
                    n1.pts(j, c) += noise(rng);
                    n2.pts(j, c) += noise(rng);
                }
            p1.push_back(n1);
            p2.push_back(n2);
        }
        REQUIRE(dual_m(p1, p2, g1, g2, r) < mono_m(p1, p2, g1, g2));
    }
    SECTION("a wrong R hurts even exact predictions") {
        const Rotation r = random_rotation(rng);
        const Rotation wrong = Rotation::from_matrix(testutil::rot_z(30.0).matrix() * r.matrix());
        std::vector<JointSet> g1, g2;
        for (int i = 0; i < 10; ++i) {
            const JointSet a = testutil::random_hand_pose(rng);
            g1.push_back(a);
            g2.push_back(r.apply(a));
        }
        REQUIRE(mono_m(g1, g2, g1, g2) == 0.0);
        REQUIRE(dual_m(g1, g2, g1, g2, wrong) > 1.0);
    }
}

TEST_CASE("complementarity_table bucketing") {
    SECTION("identical errors collapse into one bucket") {
        const std::vector<double> pred(40, 12.5);
        const std::vector<double> fused(40, 3.0);
        const std::vector<double> abm(40, 4.0);
        const ComplementarityTable t = complementarity_table(pred, fused, abm);
        REQUIRE(t.degenerate);
        REQUIRE(t.buckets[0].count == 40);
        for (int b = 1; b < kComplementarityBuckets; ++b) REQUIRE(t.buckets[b].count == 0);
        REQUIRE(t.buckets[0].mean_error_fused == Approx(3.0));
        REQUIRE(t.buckets[0].mean_error_abm_only == Approx(4.0));
    }
    SECTION("bucket bounds split [9.4, 181.7] evenly") {
        std::vector<double> pred = {9.4, 181.7};
        for (int i = 0; i < 30; ++i) pred.push_back(9.4 + i * 5.0);
        const std::vector<double> fused(pred.size(), 1.0);
        const std::vector<double> abm(pred.size(), 1.0);
        const ComplementarityTable t = complementarity_table(pred, fused, abm);
        REQUIRE(t.buckets[0].lower == Approx(9.4));
        REQUIRE(t.buckets[0].upper == Approx(34.0).margin(0.05));
        REQUIRE(t.buckets[6].upper == Approx(181.7));
        REQUIRE_FALSE(t.degenerate);
    }
    SECTION("counts are conserved") {
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> u(0.0, 100.0);
        std::vector<double> pred, fused, abm;
        for (int i = 0; i < 500; ++i) {
            pred.push_back(u(rng));
            fused.push_back(u(rng));
            abm.push_back(u(rng));
        }
        const ComplementarityTable t = complementarity_table(pred, fused, abm);
        std::size_t total = 0;
        for (const auto& b : t.buckets) total += b.count;
        REQUIRE(total == pred.size());
    }
    SECTION("input validation") {
        REQUIRE_THROWS_AS(complementarity_table({}, {}, {}), InvalidInputError);
        REQUIRE_THROWS_AS(complementarity_table({1.0}, {1.0, 2.0}, {1.0}), InvalidInputError);
    }
}
